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

#include <optional>
#include <span>
#include <vector>

#include "kws/tensor.hpp"

// Forward and backward kernels. Activations are [N, C, H, W]; the forward
// kernels also accept a single [C, H, W] sample and return the same rank.

namespace kws::nn {

inline constexpr double kBatchNormEps = 1e-5;

/// Scale-only batch normalization: gamma * (x - mean) / sqrt(var + eps).
struct BatchNormParams {
    Tensor running_mean;
    Tensor running_var;
    std::optional<Tensor> gamma;  // absent means gamma == 1

    std::size_t channels() const { return running_mean.size(); }
    friend bool operator==(const BatchNormParams&, const BatchNormParams&) = default;
};

BatchNormParams make_batchnorm(std::size_t channels, bool with_gamma);

/// Stride-1 cross-correlation with zero padding `pad`, no bias.
Activation conv2d(const Activation& x, const Tensor& weight, std::size_t pad = 1);

struct ConvGrads {
    Activation dx;  // empty when not requested
    Activation dweight;
};
ConvGrads conv2d_backward(const Activation& x, const Tensor& weight, const Activation& dy,
                          std::size_t pad = 1, bool need_dx = true);

Activation batchnorm_infer(const Activation& x, const BatchNormParams& p);

/// Training-mode batch normalization over (N, H, W) per channel.
struct BatchNormCache {
    std::vector<double> mean;
    std::vector<double> var;      // biased batch variance
    std::vector<double> inv_std;  // 1 / sqrt(var + eps)
    Activation xhat;
};
Activation batchnorm_train(const Activation& x, const std::optional<Tensor>& gamma, BatchNormCache& cache);

struct BatchNormGrads {
    Activation dx;
    std::vector<double> dgamma;  // empty when gamma is absent
};
BatchNormGrads batchnorm_train_backward(const Activation& dy, const std::optional<Tensor>& gamma,
                                        const BatchNormCache& cache);

/// running <- (1 - momentum) * running + momentum * batch; the variance uses
/// the unbiased batch estimate.
void update_running_stats(BatchNormParams& p, const BatchNormCache& cache, std::size_t count_per_channel,
                          double momentum);

Activation relu(const Activation& x);
/// Gradient through ReLU given its output.
Activation relu_backward(const Activation& y, const Activation& dy);

/// Non-overlapping average pooling (kernel == stride); trailing rows and
/// columns that do not fill a window are dropped.
Activation avg_pool(const Activation& x, std::size_t kh, std::size_t kw);
Activation avg_pool_backward(const Activation& dy, const Shape& x_shape, std::size_t kh, std::size_t kw);

/// Per-channel mean over H x W: [N, C, H, W] -> [N, C].
Activation spatial_mean(const Activation& x);
Activation spatial_mean_backward(const Activation& dy, const Shape& x_shape);

/// [N, in] x weight[out, in]^T + bias -> [N, out].
Activation linear(const Activation& x, const Tensor& weight, const Tensor& bias);

std::vector<double> softmax(std::span<const double> logits);
double log_sum_exp(std::span<const double> logits);

}  // namespace kws::nn
