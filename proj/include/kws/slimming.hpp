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

#include <string>
#include <vector>

#include "kws/model.hpp"

namespace kws::slim {

struct GammaEntry {
    std::size_t layer = 0;  // block index
    std::size_t channel = 0;
    double magnitude = 0.0;
};

/// |gamma| of every BN1 channel, ordered by (layer, channel).
std::vector<GammaEntry> collect_gammas(const nn::Model& m);

struct SlimConfig {
    double fraction = 0.4;
    std::size_t min_keep = 1;

    void validate() const;
};

/// Kept BN1 channel indices per block, strictly increasing.
struct PruneMask {
    std::vector<std::vector<std::size_t>> kept;

    friend bool operator==(const PruneMask&, const PruneMask&) = default;
};

/// Prunes the round(fraction * N) globally smallest magnitudes, scanning in
/// (|gamma|, layer, channel) order and skipping channels whose layer is
/// already at min_keep.
PruneMask select_channels(const std::vector<GammaEntry>& gammas, const SlimConfig& cfg);

PruneMask full_mask(const nn::Model& m);

/// Removes the unkept conv1 filters, BN1 channels and conv2 input channels.
nn::Model prune_model(const nn::Model& m, const PruneMask& mask);

/// "<arch>-40" style name for a fraction.
std::string variant_name(const std::string& arch, double fraction);

}  // namespace kws::slim
