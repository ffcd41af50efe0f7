/*
 * Copyright 2026 The kwslim Authors
 *
 * SPDX-License-Identifier: Apache-2.0
 *
 * Licensed under the Apache License, Version 2.0 (the "License"); you may
 * not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
 * WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <stdexcept>
#include <string>

namespace kws {

// Errors split into two families. Usage errors (bad arguments, violated
// preconditions) map to exit code 1 in the CLI; IoError and its children
// (unreadable, malformed or corrupt files) map to exit code 2.

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ContractError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class RangeError : public Error {
public:
    using Error::Error;
};

/// Benchmark harness failure, e.g. a clock too coarse to time a stage.
class HarnessError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Audio file is readable but not in the accepted encoding.
class FormatError : public IoError {
public:
    using IoError::IoError;
};

class CorruptFileError : public IoError {
public:
    using IoError::IoError;
};

class IngestionError : public IoError {
public:
    using IoError::IoError;
};

/// Model file problems: bad magic, unsupported version, payload mismatch.
class ModelFileError : public IoError {
public:
    using IoError::IoError;
};

}  // namespace kws
