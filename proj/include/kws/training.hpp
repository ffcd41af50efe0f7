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
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "kws/audio.hpp"
#include "kws/dataset.hpp"
#include "kws/features.hpp"
#include "kws/model.hpp"

namespace kws::train {

struct TrainConfig {
    double lr = 0.1;
    double momentum = 0.9;
    int batch_size = 64;
    int epochs = 30;
    double lambda_l1 = 0.0;  // L1 weight on batchnorm gammas
    double bn_momentum = 0.1;
    std::uint64_t seed = 0;
    /// lr is multiplied by lr_decay from epoch floor(decay_at * epochs) on.
    double decay_at = 2.0 / 3.0;
    double lr_decay = 0.1;
    bool augment = true;
    audio::AugmentConfig augment_cfg;
    /// Threads used to featurize each batch; results do not depend on it.
    int workers = 1;

    void validate(const nn::ModelSpec& spec) const;
};

/// One gradient per trainable tensor, in nn::model_tensors() order.
struct GradientSet {
    std::vector<std::string> names;
    std::vector<nn::Activation> grads;

    nn::Activation& operator[](const std::string& name);
    const nn::Activation& operator[](const std::string& name) const;
};

struct Sample {
    features::FeatureMatrix features;
    int label = 0;
};

double cross_entropy(std::span<const double> logits, int label);

struct BackwardResult {
    double loss = 0.0;  // mean over the batch, without the L1 term
    GradientSet grads;
    std::vector<std::vector<double>> logits;
};

/// Training-mode forward and backward over a batch. Batchnorm uses batch
/// statistics; running statistics of `m` are updated with `bn_momentum`
/// unless it is nullopt.
BackwardResult model_backward(nn::Model& m, std::span<const Sample> batch,
                              std::optional<double> bn_momentum = 0.1);

/// Mean training-mode loss without touching running statistics.
double batch_loss(const nn::Model& m, std::span<const Sample> batch);

/// Sign pattern (> 0) of every ReLU output in a training-mode forward pass.
/// The loss is differentiable wherever this pattern is locally constant.
std::vector<bool> relu_pattern(const nn::Model& m, std::span<const Sample> batch);

/// Adds lambda * sign(gamma) to every gamma gradient; sign(0) = 0.
void l1_subgrad_gammas(const nn::Model& m, double lambda_l1, GradientSet& grads);

/// v <- momentum * v + g;  p <- p - lr * v
void sgd_update(std::span<float> params, std::span<const double> grads, std::span<double> velocity, double lr,
                double momentum);

class SgdOptimizer {
public:
    explicit SgdOptimizer(const nn::Model& m);
    void step(nn::Model& m, const GradientSet& grads, double lr, double momentum);

private:
    std::vector<std::vector<double>> velocity_;
};

struct EpochStats {
    int epoch = 0;  // 1-based
    double train_loss = 0.0;
    double train_accuracy = 0.0;  // on the augmented batches seen this epoch
    std::optional<double> val_accuracy;
    std::optional<double> gamma_below_0p01_fraction;
};

struct TrainResult {
    nn::Model model;        // parameters of the best validation epoch
    nn::Model final_model;  // parameters after the last epoch
    std::vector<EpochStats> history;
    int best_epoch = 0;
};

/// Fraction of gammas with |gamma| < threshold, or nullopt without gammas.
std::optional<double> gamma_fraction_below(const nn::Model& m, double threshold);

/// Line-delimited JSON: {epoch, train_loss, val_accuracy, gamma_below_0p01_fraction}.
void write_log_line(std::ostream& out, const EpochStats& s);

TrainResult train(const nn::ModelSpec& spec, const data::DatasetManifest& manifest, const TrainConfig& cfg,
                  std::ostream* log = nullptr);
TrainResult finetune(const nn::Model& model, const data::DatasetManifest& manifest, const TrainConfig& cfg,
                     std::ostream* log = nullptr);

}  // namespace kws::train
