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

#include "kws/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "kws/dataset.hpp"

namespace kws::nn {

ModelSpec ModelSpec::res8(bool slim_ready)
{
    return with_width("res8", 45, slim_ready);
}

ModelSpec ModelSpec::res8_narrow(bool slim_ready)
{
    return with_width("res8-narrow", 19, slim_ready);
}

ModelSpec ModelSpec::by_name(const std::string& arch, bool slim_ready)
{
    if (arch == "res8") return res8(slim_ready);
    if (arch == "res8-narrow") return res8_narrow(slim_ready);
    throw ConfigError("unknown architecture '" + arch + "' (expected res8|res8-narrow)");
}

ModelSpec ModelSpec::with_width(std::string arch, int base_channels, bool slim_ready)
{
    ModelSpec s;
    s.arch = std::move(arch);
    s.base_channels = base_channels;
    s.inner_widths.fill(base_channels);
    s.slim_ready = slim_ready;
    return s;
}

void ModelSpec::validate() const
{
    if (base_channels < 1) {
        throw ContractError("model spec: base_channels must be >= 1");
    }
    for (int k : inner_widths) {
        if (k < 1 || k > base_channels) {
            throw ContractError("model spec: inner width " + std::to_string(k) + " outside [1, " +
                                std::to_string(base_channels) + "]");
        }
    }
    if (n_labels != kNumLabels) {
        throw ContractError("model spec: n_labels must be 12");
    }
}

std::vector<std::pair<std::string, Shape>> expected_tensor_shapes(const ModelSpec& spec)
{
    const auto c = static_cast<std::size_t>(spec.base_channels);
    std::vector<std::pair<std::string, Shape>> out;
    out.emplace_back("conv0.weight", Shape{c, 1, 3, 3});
    for (std::size_t b = 0; b < kNumBlocks; ++b) {
        const auto k = static_cast<std::size_t>(spec.inner_widths[b]);
        const std::string p = "block" + std::to_string(b) + ".";
        out.emplace_back(p + "conv1.weight", Shape{k, c, 3, 3});
        out.emplace_back(p + "bn1.running_mean", Shape{k});
        out.emplace_back(p + "bn1.running_var", Shape{k});
        if (spec.slim_ready) out.emplace_back(p + "bn1.gamma", Shape{k});
        out.emplace_back(p + "conv2.weight", Shape{c, k, 3, 3});
        out.emplace_back(p + "bn2.running_mean", Shape{c});
        out.emplace_back(p + "bn2.running_var", Shape{c});
    }
    const auto n = static_cast<std::size_t>(spec.n_labels);
    out.emplace_back("fc.weight", Shape{n, c});
    out.emplace_back("fc.bias", Shape{n});
    return out;
}

namespace {

template <typename ModelT, typename Ref>
std::vector<Ref> collect_tensors(ModelT& m)
{
    std::vector<Ref> out;
    out.push_back({"conv0.weight", &m.conv0, true});
    for (std::size_t b = 0; b < kNumBlocks; ++b) {
        auto& blk = m.blocks[b];
        const std::string p = "block" + std::to_string(b) + ".";
        out.push_back({p + "conv1.weight", &blk.conv1, true});
        out.push_back({p + "bn1.running_mean", &blk.bn1.running_mean, false});
        out.push_back({p + "bn1.running_var", &blk.bn1.running_var, false});
        if (blk.bn1.gamma) out.push_back({p + "bn1.gamma", &*blk.bn1.gamma, true});
        out.push_back({p + "conv2.weight", &blk.conv2, true});
        out.push_back({p + "bn2.running_mean", &blk.bn2.running_mean, false});
        out.push_back({p + "bn2.running_var", &blk.bn2.running_var, false});
        if (blk.bn2.gamma) out.push_back({p + "bn2.gamma", &*blk.bn2.gamma, true});
    }
    out.push_back({"fc.weight", &m.fc_weight, true});
    out.push_back({"fc.bias", &m.fc_bias, true});
    return out;
}

}  // namespace

std::vector<TensorRef> model_tensors(Model& m)
{
    return collect_tensors<Model, TensorRef>(m);
}

std::vector<ConstTensorRef> model_tensors(const Model& m)
{
    return collect_tensors<const Model, ConstTensorRef>(m);
}

std::vector<std::string> normalize_labels(std::vector<std::string> labels, int n_labels)
{
    if (labels.empty()) {
        labels = data::default_keywords();
        labels.emplace_back(data::kUnknownLabel);
        labels.emplace_back(data::kSilenceLabel);
    }
    if (static_cast<int>(labels.size()) > n_labels) {
        throw ContractError("more than " + std::to_string(n_labels) + " labels");
    }
    for (int i = static_cast<int>(labels.size()); i < n_labels; ++i) {
        labels.push_back("_unused" + std::to_string(i));
    }
    return labels;
}

Model make_model(const ModelSpec& spec, std::uint64_t seed, std::vector<std::string> labels)
{
    spec.validate();
    const auto c = static_cast<std::size_t>(spec.base_channels);
    std::mt19937_64 rng(seed);

    auto he = [&rng](Shape shape) {
        Tensor t(std::move(shape));
        const double fan_in = static_cast<double>(t.dim(1) * t.dim(2) * t.dim(3));
        std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
        for (auto& v : t.storage()) v = static_cast<float>(dist(rng));
        return t;
    };

    Model m;
    m.spec = spec;
    m.labels = normalize_labels(std::move(labels), spec.n_labels);
    m.conv0 = he({c, 1, 3, 3});
    for (std::size_t b = 0; b < kNumBlocks; ++b) {
        const auto k = static_cast<std::size_t>(spec.inner_widths[b]);
        m.blocks[b].conv1 = he({k, c, 3, 3});
        m.blocks[b].bn1 = make_batchnorm(k, spec.slim_ready);
        m.blocks[b].conv2 = he({c, k, 3, 3});
        m.blocks[b].bn2 = make_batchnorm(c, false);
    }
    const auto n = static_cast<std::size_t>(spec.n_labels);
    m.fc_weight = Tensor({n, c});
    const double bound = 1.0 / std::sqrt(static_cast<double>(c));
    std::uniform_real_distribution<double> uni(-bound, bound);
    for (auto& v : m.fc_weight.storage()) v = static_cast<float>(uni(rng));
    m.fc_bias = Tensor({n}, 0.0f);
    return m;
}

void validate_model(const Model& m)
{
    m.spec.validate();
    if (static_cast<int>(m.labels.size()) != m.spec.n_labels) {
        throw ContractError("model has " + std::to_string(m.labels.size()) + " labels, expected " +
                            std::to_string(m.spec.n_labels));
    }
    const auto expected = expected_tensor_shapes(m.spec);
    const auto actual = model_tensors(m);
    if (expected.size() != actual.size()) {
        throw ContractError("model tensor set does not match its spec");
    }
    for (std::size_t i = 0; i < expected.size(); ++i) {
        if (expected[i].first != actual[i].name || expected[i].second != actual[i].tensor->shape()) {
            throw ContractError("tensor " + actual[i].name + " has shape " +
                                shape_str(actual[i].tensor->shape()) + ", expected " + expected[i].first +
                                " " + shape_str(expected[i].second));
        }
    }
}

ForwardResult forward_any(const Model& m, const features::FeatureMatrix& f)
{
    if (f.values.size() != f.frames * f.coeffs || f.frames < kPoolH || f.coeffs < kPoolW) {
        throw ContractError("forward: feature matrix " + std::to_string(f.frames) + "x" +
                            std::to_string(f.coeffs) + " too small or inconsistent");
    }
    Activation x({1, f.frames, f.coeffs}, f.values);
    x = relu(conv2d(x, m.conv0));
    x = avg_pool(x, kPoolH, kPoolW);
    for (const auto& blk : m.blocks) {
        Activation h = relu(batchnorm_infer(conv2d(x, blk.conv1), blk.bn1));
        h = batchnorm_infer(conv2d(h, blk.conv2), blk.bn2);
        for (std::size_t i = 0; i < h.size(); ++i) h[i] += x[i];
        x = relu(h);
    }
    const Activation pooled = spatial_mean(x);
    const Activation logits = linear(pooled, m.fc_weight, m.fc_bias);

    ForwardResult r;
    r.logits.assign(logits.values().begin(), logits.values().end());
    r.posteriors = softmax(r.logits);
    r.argmax = static_cast<std::size_t>(std::max_element(r.logits.begin(), r.logits.end()) - r.logits.begin());
    return r;
}

ForwardResult model_forward(const Model& m, const features::FeatureMatrix& f)
{
    if (f.frames != kInputFrames || f.coeffs != kInputCoeffs) {
        throw ContractError("model_forward: expected 101x40 features, got " + std::to_string(f.frames) + "x" +
                            std::to_string(f.coeffs));
    }
    return forward_any(m, f);
}

std::int64_t count_params(const ModelSpec& spec)
{
    const std::int64_t c = spec.base_channels;
    std::int64_t total = 9 * c;
    for (int k : spec.inner_widths) {
        total += 9 * static_cast<std::int64_t>(k) * (c + c);
        if (spec.slim_ready) total += k;
    }
    total += static_cast<std::int64_t>(spec.n_labels) * c + spec.n_labels;
    return total;
}

std::int64_t count_params(const Model& m)
{
    return count_params(m.spec);
}

std::int64_t count_multiplies(const ModelSpec& spec, std::size_t frames, std::size_t coeffs)
{
    const std::int64_t c = spec.base_channels;
    const auto full = static_cast<std::int64_t>(frames * coeffs);
    const auto pooled = static_cast<std::int64_t>((frames / kPoolH) * (coeffs / kPoolW));
    std::int64_t total = full * 9 * c;
    for (int k : spec.inner_widths) {
        total += 2 * pooled * 9 * static_cast<std::int64_t>(k) * c;
    }
    total += static_cast<std::int64_t>(spec.n_labels) * c;
    return total;
}

std::int64_t count_multiplies(const Model& m, std::size_t frames, std::size_t coeffs)
{
    return count_multiplies(m.spec, frames, coeffs);
}

}  // namespace kws::nn
