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

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "kws/features.hpp"
#include "kws/layers.hpp"
#include "kws/tensor.hpp"

namespace kws::nn {

inline constexpr int kNumLabels = 12;
inline constexpr std::size_t kNumBlocks = 3;
inline constexpr std::size_t kPoolH = 4;
inline constexpr std::size_t kPoolW = 3;
inline constexpr std::size_t kInputFrames = 101;
inline constexpr std::size_t kInputCoeffs = 40;

/// Architecture descriptor for res8, res8-narrow and their slimmed variants.
struct ModelSpec {
    std::string arch = "res8";
    int base_channels = 45;
    std::array<int, kNumBlocks> inner_widths{45, 45, 45};
    int n_labels = kNumLabels;
    /// Adds a scale gamma to the first batchnorm of every block (the
    /// prunable ones).
    bool slim_ready = false;

    static ModelSpec res8(bool slim_ready = false);
    static ModelSpec res8_narrow(bool slim_ready = false);
    /// res8 / res8-narrow by name; throws ConfigError otherwise.
    static ModelSpec by_name(const std::string& arch, bool slim_ready = false);
    /// Unpruned spec of arbitrary width.
    static ModelSpec with_width(std::string arch, int base_channels, bool slim_ready = false);

    void validate() const;
    friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

struct ResBlock {
    Tensor conv1;  // [k, C, 3, 3]
    BatchNormParams bn1;
    Tensor conv2;  // [C, k, 3, 3]
    BatchNormParams bn2;

    friend bool operator==(const ResBlock&, const ResBlock&) = default;
};

struct Model {
    ModelSpec spec;
    features::MfccConfig mfcc;
    std::vector<std::string> labels;  // always n_labels names

    Tensor conv0;  // [C, 1, 3, 3]
    std::array<ResBlock, kNumBlocks> blocks;
    Tensor fc_weight;  // [n_labels, C]
    Tensor fc_bias;    // [n_labels]

    friend bool operator==(const Model&, const Model&) = default;
};

/// Names a model tensor in canonical order; `trainable` excludes batchnorm
/// running statistics.
struct TensorRef {
    std::string name;
    Tensor* tensor;
    bool trainable;
};
struct ConstTensorRef {
    std::string name;
    const Tensor* tensor;
    bool trainable;
};

std::vector<TensorRef> model_tensors(Model& m);
std::vector<ConstTensorRef> model_tensors(const Model& m);

/// Expected shape of every tensor for `spec`, in model_tensors() order.
std::vector<std::pair<std::string, Shape>> expected_tensor_shapes(const ModelSpec& spec);

/// Default 12 labels when none are supplied; shorter lists are padded.
std::vector<std::string> normalize_labels(std::vector<std::string> labels, int n_labels = kNumLabels);

/// He-normal convolutions, uniform linear layer, unit batchnorm statistics,
/// gamma = 1.
Model make_model(const ModelSpec& spec, std::uint64_t seed, std::vector<std::string> labels = {});

/// Throws ContractError if any tensor shape disagrees with the spec.
void validate_model(const Model& m);

struct ForwardResult {
    std::vector<double> logits;
    std::vector<double> posteriors;
    std::size_t argmax = 0;
};

/// Inference on one 101 x 40 feature matrix.
ForwardResult model_forward(const Model& m, const features::FeatureMatrix& f);
/// Same pipeline on any feature size the pooling stage accepts.
ForwardResult forward_any(const Model& m, const features::FeatureMatrix& f);

std::int64_t count_params(const ModelSpec& spec);
std::int64_t count_params(const Model& m);

/// Multiply-accumulates for one input of `frames` x `coeffs`: every conv
/// output position x tap (padding included) plus the linear layer.
std::int64_t count_multiplies(const ModelSpec& spec, std::size_t frames = kInputFrames,
                              std::size_t coeffs = kInputCoeffs);
std::int64_t count_multiplies(const Model& m, std::size_t frames = kInputFrames,
                              std::size_t coeffs = kInputCoeffs);

}  // namespace kws::nn
