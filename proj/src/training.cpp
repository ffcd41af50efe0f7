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

#include "kws/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <thread>

#include <json.hpp>

#include "kws/error.hpp"
#include "kws/layers.hpp"

namespace kws::train {

using nn::Activation;
using nn::Model;

void TrainConfig::validate(const nn::ModelSpec& spec) const
{
    if (!(lr > 0.0)) throw ConfigError("train: lr must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("train: momentum must lie in [0, 1)");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (!(lambda_l1 >= 0.0)) throw ConfigError("train: lambda_l1 must be >= 0");
    if (lambda_l1 > 0.0 && !spec.slim_ready) {
        throw ConfigError("train: a sparsity penalty requires a slim-ready model (--slim-ready)");
    }
    if (!(bn_momentum > 0.0 && bn_momentum <= 1.0)) throw ConfigError("train: bn_momentum must lie in (0, 1]");
    if (workers < 1) throw ConfigError("train: workers must be >= 1");
    augment_cfg.validate();
}

nn::Activation& GradientSet::operator[](const std::string& name)
{
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw ContractError("no gradient named " + name);
    return grads[static_cast<std::size_t>(it - names.begin())];
}

const nn::Activation& GradientSet::operator[](const std::string& name) const
{
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw ContractError("no gradient named " + name);
    return grads[static_cast<std::size_t>(it - names.begin())];
}

double cross_entropy(std::span<const double> logits, int label)
{
    if (label < 0 || static_cast<std::size_t>(label) >= logits.size()) {
        throw ContractError("cross_entropy: label " + std::to_string(label) + " out of range");
    }
    return nn::log_sum_exp(logits) - logits[static_cast<std::size_t>(label)];
}

namespace {

struct BlockCache {
    Activation x_in;
    Activation c1;
    nn::BatchNormCache bn1;
    Activation r1;
    Activation c2;
    nn::BatchNormCache bn2;
    Activation out;
};

struct ForwardCache {
    Activation input;
    Activation relu0;
    Activation pooled;
    std::array<BlockCache, nn::kNumBlocks> blocks;
    Activation features;  // [N, C]
    Activation logits;    // [N, labels]
};

Activation stack_batch(std::span<const Sample> batch)
{
    if (batch.empty()) throw ContractError("empty batch");
    const std::size_t frames = batch[0].features.frames;
    const std::size_t coeffs = batch[0].features.coeffs;
    Activation x({batch.size(), 1, frames, coeffs});
    for (std::size_t s = 0; s < batch.size(); ++s) {
        const auto& f = batch[s].features;
        if (f.frames != frames || f.coeffs != coeffs || f.values.size() != frames * coeffs) {
            throw ContractError("batch mixes feature shapes");
        }
        std::copy(f.values.begin(), f.values.end(), x.data() + s * frames * coeffs);
    }
    return x;
}

void forward_train(const Model& m, std::span<const Sample> batch, ForwardCache& c)
{
    c.input = stack_batch(batch);
    if (c.input.dim(2) < nn::kPoolH || c.input.dim(3) < nn::kPoolW) {
        throw ContractError("features smaller than the pooling window");
    }
    c.relu0 = nn::relu(nn::conv2d(c.input, m.conv0));
    c.pooled = nn::avg_pool(c.relu0, nn::kPoolH, nn::kPoolW);
    const Activation* x = &c.pooled;
    for (std::size_t b = 0; b < nn::kNumBlocks; ++b) {
        const auto& blk = m.blocks[b];
        auto& bc = c.blocks[b];
        bc.x_in = *x;
        bc.c1 = nn::conv2d(bc.x_in, blk.conv1);
        bc.r1 = nn::relu(nn::batchnorm_train(bc.c1, blk.bn1.gamma, bc.bn1));
        bc.c2 = nn::conv2d(bc.r1, blk.conv2);
        Activation h = nn::batchnorm_train(bc.c2, blk.bn2.gamma, bc.bn2);
        for (std::size_t i = 0; i < h.size(); ++i) h[i] += bc.x_in[i];
        bc.out = nn::relu(h);
        x = &bc.out;
    }
    c.features = nn::spatial_mean(*x);
    c.logits = nn::linear(c.features, m.fc_weight, m.fc_bias);
}

std::vector<double> row(const Activation& a, std::size_t r)
{
    const std::size_t cols = a.dim(1);
    return {a.data() + r * cols, a.data() + (r + 1) * cols};
}

double mean_loss(const ForwardCache& c, std::span<const Sample> batch)
{
    double loss = 0.0;
    for (std::size_t s = 0; s < batch.size(); ++s) {
        loss += cross_entropy(row(c.logits, s), batch[s].label);
    }
    return loss / static_cast<double>(batch.size());
}

GradientSet empty_grads(const Model& m)
{
    GradientSet g;
    for (const auto& ref : nn::model_tensors(m)) {
        if (!ref.trainable) continue;
        g.names.push_back(ref.name);
        g.grads.emplace_back(ref.tensor->shape(), 0.0);
    }
    return g;
}

void store(GradientSet& g, const std::string& name, Activation value)
{
    Activation& slot = g[name];
    if (slot.size() != value.size()) throw ContractError("gradient shape mismatch for " + name);
    value.reshape(slot.shape());
    slot = std::move(value);
}

}  // namespace

BackwardResult model_backward(Model& m, std::span<const Sample> batch, std::optional<double> bn_momentum)
{
    if (batch.empty()) throw ContractError("model_backward: empty batch");
    ForwardCache c;
    forward_train(m, batch, c);

    BackwardResult r;
    r.loss = mean_loss(c, batch);
    r.grads = empty_grads(m);
    const std::size_t n = batch.size();
    const std::size_t labels = c.logits.dim(1);
    const std::size_t width = c.features.dim(1);

    // d(mean CE)/d logits = (softmax - onehot) / N
    Activation dlogits({n, labels});
    for (std::size_t s = 0; s < n; ++s) {
        const auto lg = row(c.logits, s);
        r.logits.push_back(lg);
        const auto p = nn::softmax(lg);
        for (std::size_t k = 0; k < labels; ++k) {
            const double target = static_cast<int>(k) == batch[s].label ? 1.0 : 0.0;
            dlogits[s * labels + k] = (p[k] - target) / static_cast<double>(n);
        }
    }

    Activation dfc_w({labels, width}, 0.0);
    Activation dfc_b({labels}, 0.0);
    Activation dfeat({n, width}, 0.0);
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t k = 0; k < labels; ++k) {
            const double g = dlogits[s * labels + k];
            dfc_b[k] += g;
            for (std::size_t i = 0; i < width; ++i) {
                dfc_w[k * width + i] += g * c.features[s * width + i];
                dfeat[s * width + i] += g * static_cast<double>(m.fc_weight[k * width + i]);
            }
        }
    }
    store(r.grads, "fc.weight", std::move(dfc_w));
    store(r.grads, "fc.bias", std::move(dfc_b));

    Activation dx = nn::spatial_mean_backward(dfeat, c.blocks.back().out.shape());
    for (std::size_t bi = nn::kNumBlocks; bi-- > 0;) {
        const auto& blk = m.blocks[bi];
        const auto& bc = c.blocks[bi];
        const std::string p = "block" + std::to_string(bi) + ".";
        const Activation dsum = nn::relu_backward(bc.out, dx);

        const auto bn2 = nn::batchnorm_train_backward(dsum, blk.bn2.gamma, bc.bn2);
        if (blk.bn2.gamma) store(r.grads, p + "bn2.gamma", Activation({bn2.dgamma.size()}, bn2.dgamma));
        auto conv2 = nn::conv2d_backward(bc.r1, blk.conv2, bn2.dx);
        store(r.grads, p + "conv2.weight", std::move(conv2.dweight));

        const Activation dbn1 = nn::relu_backward(bc.r1, conv2.dx);
        const auto bn1 = nn::batchnorm_train_backward(dbn1, blk.bn1.gamma, bc.bn1);
        if (blk.bn1.gamma) store(r.grads, p + "bn1.gamma", Activation({bn1.dgamma.size()}, bn1.dgamma));
        auto conv1 = nn::conv2d_backward(bc.x_in, blk.conv1, bn1.dx);
        store(r.grads, p + "conv1.weight", std::move(conv1.dweight));

        dx = dsum;  // identity skip
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += conv1.dx[i];
    }

    const Activation drelu0 = nn::avg_pool_backward(dx, c.relu0.shape(), nn::kPoolH, nn::kPoolW);
    const Activation dconv0 = nn::relu_backward(c.relu0, drelu0);
    auto conv0 = nn::conv2d_backward(c.input, m.conv0, dconv0, 1, false);
    store(r.grads, "conv0.weight", std::move(conv0.dweight));

    if (bn_momentum) {
        for (std::size_t bi = 0; bi < nn::kNumBlocks; ++bi) {
            auto& blk = m.blocks[bi];
            const auto& bc = c.blocks[bi];
            const std::size_t count = n * bc.c1.dim(2) * bc.c1.dim(3);
            nn::update_running_stats(blk.bn1, bc.bn1, count, *bn_momentum);
            nn::update_running_stats(blk.bn2, bc.bn2, count, *bn_momentum);
        }
    }
    return r;
}

double batch_loss(const Model& m, std::span<const Sample> batch)
{
    if (batch.empty()) throw ContractError("batch_loss: empty batch");
    ForwardCache c;
    forward_train(m, batch, c);
    return mean_loss(c, batch);
}

std::vector<bool> relu_pattern(const Model& m, std::span<const Sample> batch)
{
    if (batch.empty()) throw ContractError("relu_pattern: empty batch");
    ForwardCache c;
    forward_train(m, batch, c);
    std::vector<bool> out;
    auto append = [&out](const Activation& a) {
        for (double v : a.values()) out.push_back(v > 0.0);
    };
    append(c.relu0);
    for (const auto& bc : c.blocks) {
        append(bc.r1);
        append(bc.out);
    }
    return out;
}

void l1_subgrad_gammas(const Model& m, double lambda_l1, GradientSet& grads)
{
    if (!m.spec.slim_ready) {
        throw ContractError("l1_subgrad_gammas: model is not slim-ready (no batchnorm gammas)");
    }
    for (const auto& ref : nn::model_tensors(m)) {
        if (!ref.name.ends_with(".gamma")) continue;
        Activation& g = grads[ref.name];
        for (std::size_t i = 0; i < g.size(); ++i) {
            const float v = (*ref.tensor)[i];
            const double sign = v > 0.0f ? 1.0 : (v < 0.0f ? -1.0 : 0.0);
            g[i] += lambda_l1 * sign;
        }
    }
}

void sgd_update(std::span<float> params, std::span<const double> grads, std::span<double> velocity, double lr,
                double momentum)
{
    if (params.size() != grads.size() || params.size() != velocity.size()) {
        throw ContractError("sgd: parameter, gradient and velocity sizes differ");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        velocity[i] = momentum * velocity[i] + grads[i];
        params[i] = static_cast<float>(static_cast<double>(params[i]) - lr * velocity[i]);
    }
}

SgdOptimizer::SgdOptimizer(const Model& m)
{
    for (const auto& ref : nn::model_tensors(m)) {
        if (ref.trainable) velocity_.emplace_back(ref.tensor->size(), 0.0);
    }
}

void SgdOptimizer::step(Model& m, const GradientSet& grads, double lr, double momentum)
{
    std::size_t i = 0;
    for (auto& ref : nn::model_tensors(m)) {
        if (!ref.trainable) continue;
        if (i >= velocity_.size() || grads.names.at(i) != ref.name) {
            throw ContractError("sgd: gradient set does not match the model");
        }
        sgd_update(ref.tensor->values(), grads.grads[i].values(), velocity_[i], lr, momentum);
        ++i;
    }
    if (i != grads.grads.size()) throw ContractError("sgd: gradient set does not match the model");
}

std::optional<double> gamma_fraction_below(const Model& m, double threshold)
{
    std::size_t total = 0, below = 0;
    for (const auto& ref : nn::model_tensors(m)) {
        if (!ref.name.ends_with(".gamma")) continue;
        for (float v : ref.tensor->values()) {
            ++total;
            if (std::abs(v) < threshold) ++below;
        }
    }
    if (total == 0) return std::nullopt;
    return static_cast<double>(below) / static_cast<double>(total);
}

void write_log_line(std::ostream& out, const EpochStats& s)
{
    nlohmann::json j;
    j["epoch"] = s.epoch;
    j["train_loss"] = s.train_loss;
    j["val_accuracy"] = s.val_accuracy ? nlohmann::json(*s.val_accuracy) : nlohmann::json(nullptr);
    j["gamma_below_0p01_fraction"] =
        s.gamma_below_0p01_fraction ? nlohmann::json(*s.gamma_below_0p01_fraction) : nlohmann::json(nullptr);
    out << j.dump() << '\n';
    out.flush();
}

namespace {

// Per-sample generator seeds derived from (seed, epoch, index) so augmentation
// does not depend on batch composition or worker count.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t epoch, std::uint64_t index)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(index)};
    std::uint32_t words[2];
    seq.generate(words, words + 2);
    return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

struct Corpus {
    std::vector<audio::AudioClip> clips;
    std::vector<int> labels;
};

Corpus load_split(const data::DatasetManifest& manifest, data::Split split)
{
    Corpus c;
    for (const auto& e : manifest.entries) {
        if (e.split != split) continue;
        c.clips.push_back(data::load_entry_clip(manifest, e));
        c.labels.push_back(e.label);
    }
    return c;
}

template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn)
{
    if (workers <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
    for (std::size_t t = 0; t < w; ++t) {
        pool.emplace_back([&, t] {
            for (std::size_t i = t; i < n; i += w) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

TrainResult run_training(Model model, const data::DatasetManifest& manifest, const TrainConfig& cfg,
                         std::ostream* log)
{
    cfg.validate(model.spec);
    nn::validate_model(model);
    for (const auto& e : manifest.entries) {
        if (e.label >= model.spec.n_labels) throw ContractError("manifest label exceeds model outputs");
    }

    const Corpus train_set = load_split(manifest, data::Split::train);
    if (train_set.clips.empty()) throw ContractError("train: manifest has an empty train split");
    const Corpus val_set = load_split(manifest, data::Split::validation);
    const auto noises = data::load_noise_clips(manifest);
    const auto& extractor = features::default_extractor();

    std::vector<Sample> val_samples;
    for (std::size_t i = 0; i < val_set.clips.size(); ++i) {
        val_samples.push_back({extractor.compute(val_set.clips[i]), val_set.labels[i]});
    }

    SgdOptimizer opt(model);
    TrainResult result;
    result.model = model;
    std::optional<double> best_val;
    const int decay_epoch = static_cast<int>(std::floor(cfg.decay_at * cfg.epochs));
    std::mt19937_64 shuffler(cfg.seed);
    std::vector<std::size_t> order(train_set.clips.size());

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = epoch >= decay_epoch ? cfg.lr * cfg.lr_decay : cfg.lr;
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), shuffler);

        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            std::vector<Sample> batch(end - start);
            parallel_for(batch.size(), cfg.workers, [&](std::size_t j) {
                const std::size_t idx = order[start + j];
                const auto& clip = train_set.clips[idx];
                if (cfg.augment) {
                    std::mt19937_64 rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch), idx));
                    batch[j].features = extractor.compute(audio::augment(clip, noises, cfg.augment_cfg, rng));
                } else {
                    batch[j].features = extractor.compute(clip);
                }
                batch[j].label = train_set.labels[idx];
            });

            BackwardResult br = model_backward(model, batch, cfg.bn_momentum);
            if (cfg.lambda_l1 > 0.0) l1_subgrad_gammas(model, cfg.lambda_l1, br.grads);
            opt.step(model, br.grads, lr, cfg.momentum);

            loss_sum += br.loss * static_cast<double>(batch.size());
            for (std::size_t j = 0; j < batch.size(); ++j) {
                const auto& lg = br.logits[j];
                const auto arg = std::max_element(lg.begin(), lg.end()) - lg.begin();
                if (arg == batch[j].label) ++correct;
            }
        }

        EpochStats st;
        st.epoch = epoch + 1;
        st.train_loss = loss_sum / static_cast<double>(order.size());
        st.train_accuracy = static_cast<double>(correct) / static_cast<double>(order.size());
        if (!val_samples.empty()) {
            std::size_t ok = 0;
            for (const auto& s : val_samples) {
                if (static_cast<int>(nn::forward_any(model, s.features).argmax) == s.label) ++ok;
            }
            st.val_accuracy = static_cast<double>(ok) / static_cast<double>(val_samples.size());
        }
        st.gamma_below_0p01_fraction = gamma_fraction_below(model, 0.01);
        for (const auto& ref : nn::model_tensors(model)) {
            for (float v : ref.tensor->values()) {
                if (!std::isfinite(v)) throw Error("train: non-finite parameter in " + ref.name);
            }
        }
        result.history.push_back(st);
        if (log) write_log_line(*log, st);

        // Strictly greater keeps the earlier epoch on ties; without a
        // validation split the last epoch wins.
        const bool better = st.val_accuracy ? (!best_val || *st.val_accuracy > *best_val) : true;
        if (better) {
            best_val = st.val_accuracy;
            result.model = model;
            result.best_epoch = st.epoch;
        }
    }
    result.final_model = std::move(model);
    return result;
}

}  // namespace

TrainResult train(const nn::ModelSpec& spec, const data::DatasetManifest& manifest, const TrainConfig& cfg,
                  std::ostream* log)
{
    cfg.validate(spec);
    std::vector<std::string> labels = manifest.labels;
    return run_training(nn::make_model(spec, cfg.seed, nn::normalize_labels(labels, spec.n_labels)), manifest,
                        cfg, log);
}

TrainResult finetune(const Model& model, const data::DatasetManifest& manifest, const TrainConfig& cfg,
                     std::ostream* log)
{
    return run_training(model, manifest, cfg, log);
}

}  // namespace kws::train
