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

#include "kws/slimming.hpp"

#include <algorithm>
#include <cmath>

#include "kws/error.hpp"

namespace kws::slim {

std::vector<GammaEntry> collect_gammas(const nn::Model& m)
{
    std::vector<GammaEntry> out;
    for (std::size_t b = 0; b < nn::kNumBlocks; ++b) {
        const auto& gamma = m.blocks[b].bn1.gamma;
        if (!gamma) {
            throw ContractError("model has no batchnorm scale parameters; train it with --slim-ready first");
        }
        for (std::size_t c = 0; c < gamma->size(); ++c) {
            out.push_back({b, c, std::abs(static_cast<double>((*gamma)[c]))});
        }
    }
    return out;
}

void SlimConfig::validate() const
{
    if (!(fraction >= 0.0 && fraction < 1.0)) {
        throw ConfigError("prune fraction must lie in [0, 1), got " + std::to_string(fraction));
    }
    if (min_keep < 1) throw ConfigError("min_keep must be >= 1");
}

PruneMask select_channels(const std::vector<GammaEntry>& gammas, const SlimConfig& cfg)
{
    cfg.validate();
    if (gammas.empty()) throw ContractError("select_channels: no gammas");

    std::size_t layers = 0;
    for (const auto& g : gammas) layers = std::max(layers, g.layer + 1);
    std::vector<std::vector<bool>> keep(layers);
    std::vector<std::size_t> remaining(layers, 0);
    for (const auto& g : gammas) {
        if (keep[g.layer].size() <= g.channel) keep[g.layer].resize(g.channel + 1, false);
        if (keep[g.layer][g.channel]) throw ContractError("select_channels: duplicate channel");
        keep[g.layer][g.channel] = true;
        ++remaining[g.layer];
    }
    for (std::size_t l = 0; l < layers; ++l) {
        if (remaining[l] != keep[l].size()) throw ContractError("select_channels: channel indices not contiguous");
    }

    std::vector<GammaEntry> order = gammas;
    std::sort(order.begin(), order.end(), [](const GammaEntry& a, const GammaEntry& b) {
        if (a.magnitude != b.magnitude) return a.magnitude < b.magnitude;
        if (a.layer != b.layer) return a.layer < b.layer;
        return a.channel < b.channel;
    });

    const auto target = static_cast<std::size_t>(std::lround(cfg.fraction * static_cast<double>(gammas.size())));
    std::size_t pruned = 0;
    for (const auto& g : order) {
        if (pruned == target) break;
        // A layer at its floor keeps this channel; the next global candidate
        // is pruned instead.
        if (remaining[g.layer] <= cfg.min_keep) continue;
        keep[g.layer][g.channel] = false;
        --remaining[g.layer];
        ++pruned;
    }

    PruneMask mask;
    mask.kept.resize(layers);
    for (std::size_t l = 0; l < layers; ++l) {
        for (std::size_t c = 0; c < keep[l].size(); ++c) {
            if (keep[l][c]) mask.kept[l].push_back(c);
        }
    }
    return mask;
}

PruneMask full_mask(const nn::Model& m)
{
    PruneMask mask;
    for (const auto& blk : m.blocks) {
        std::vector<std::size_t> all(blk.conv1.dim(0));
        for (std::size_t c = 0; c < all.size(); ++c) all[c] = c;
        mask.kept.push_back(std::move(all));
    }
    return mask;
}

namespace {

nn::Tensor take_rows(const nn::Tensor& t, const std::vector<std::size_t>& rows)
{
    const std::size_t stride = t.size() / t.dim(0);
    nn::Shape shape = t.shape();
    shape[0] = rows.size();
    nn::Tensor out(shape);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::copy_n(t.data() + rows[i] * stride, stride, out.data() + i * stride);
    }
    return out;
}

// Keeps input channels `cols` of a [out, in, kh, kw] kernel.
nn::Tensor take_in_channels(const nn::Tensor& t, const std::vector<std::size_t>& cols)
{
    const std::size_t outs = t.dim(0), ins = t.dim(1), taps = t.dim(2) * t.dim(3);
    nn::Tensor out({outs, cols.size(), t.dim(2), t.dim(3)});
    for (std::size_t o = 0; o < outs; ++o) {
        for (std::size_t i = 0; i < cols.size(); ++i) {
            std::copy_n(t.data() + (o * ins + cols[i]) * taps, taps, out.data() + (o * cols.size() + i) * taps);
        }
    }
    return out;
}

}  // namespace

nn::Model prune_model(const nn::Model& m, const PruneMask& mask)
{
    nn::validate_model(m);
    if (mask.kept.size() != nn::kNumBlocks) {
        throw ContractError("prune mask must list kept channels for " + std::to_string(nn::kNumBlocks) + " blocks");
    }
    nn::Model out = m;
    for (std::size_t b = 0; b < nn::kNumBlocks; ++b) {
        const auto& kept = mask.kept[b];
        const auto& blk = m.blocks[b];
        const std::size_t width = blk.conv1.dim(0);
        if (kept.empty()) throw ContractError("prune mask keeps no channels in block " + std::to_string(b));
        for (std::size_t i = 0; i < kept.size(); ++i) {
            if (kept[i] >= width || (i > 0 && kept[i] <= kept[i - 1])) {
                throw ContractError("prune mask for block " + std::to_string(b) +
                                    " must be strictly increasing indices below " + std::to_string(width));
            }
        }
        auto& ob = out.blocks[b];
        ob.conv1 = take_rows(blk.conv1, kept);
        ob.bn1.running_mean = take_rows(blk.bn1.running_mean, kept);
        ob.bn1.running_var = take_rows(blk.bn1.running_var, kept);
        if (blk.bn1.gamma) ob.bn1.gamma = take_rows(*blk.bn1.gamma, kept);
        ob.conv2 = take_in_channels(blk.conv2, kept);
        out.spec.inner_widths[b] = static_cast<int>(kept.size());
    }
    nn::validate_model(out);
    return out;
}

std::string variant_name(const std::string& arch, double fraction)
{
    const long pct = std::lround(fraction * 100.0);
    return pct == 0 ? arch : arch + "-" + std::to_string(pct);
}

}  // namespace kws::slim
