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

#include <functional>
#include <vector>

#include "kws/dataset.hpp"
#include "kws/features.hpp"
#include "kws/model.hpp"

namespace kws::eval {

/// Maps one clip's features to class scores; the entry is passed for
/// instrumented predictors.
using Predictor = std::function<std::vector<double>(const data::ManifestEntry&, const features::FeatureMatrix&)>;

/// Fraction of `split` whose score argmax (first maximum) equals the label.
/// No augmentation is applied.
double evaluate_accuracy(const Predictor& predict, const data::DatasetManifest& manifest, data::Split split);
double evaluate_accuracy(const nn::Model& m, const data::DatasetManifest& manifest, data::Split split);

}  // namespace kws::eval
