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

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "kws/model.hpp"

// .kwsm layout, all integers little-endian:
//   "KWSM" | u32 version | u32 metadata length | metadata JSON |
//   float32 payload of every tensor in metadata order, row-major.

namespace kws::store {

inline constexpr std::uint32_t kFormatVersion = 1;

std::vector<std::uint8_t> serialize_model(const nn::Model& m);
nn::Model load_model_bytes(std::span<const std::uint8_t> bytes);

/// Writes through a temporary file and renames, so `path` is never partial.
void save_model(const nn::Model& m, const std::filesystem::path& path);
nn::Model load_model(const std::filesystem::path& path);

}  // namespace kws::store
