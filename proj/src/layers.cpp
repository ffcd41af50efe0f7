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

#include "kws/layers.hpp"

#include <algorithm>
#include <cmath>

namespace kws::nn {

namespace {

struct Dims {
    std::size_t n, c, h, w;
    bool batched;
};

Dims dims_of(const Activation& x, const char* op)
{
    if (x.rank() == 4) return {x.dim(0), x.dim(1), x.dim(2), x.dim(3), true};
    if (x.rank() == 3) return {1, x.dim(0), x.dim(1), x.dim(2), false};
    throw ContractError(std::string(op) + ": expected [N,C,H,W] or [C,H,W], got " + shape_str(x.shape()));
}

Shape make_shape(const Dims& d, std::size_t c, std::size_t h, std::size_t w)
{
    return d.batched ? Shape{d.n, c, h, w} : Shape{c, h, w};
}

// col[(ci * kh + ky) * kw + kx][oy * wo + ox] = x[ci][oy + ky - pad][ox + kx - pad]
void im2col(const double* x, std::size_t cin, std::size_t h, std::size_t w, std::size_t kh, std::size_t kw,
            std::size_t pad, std::size_t ho, std::size_t wo, double* col)
{
    const std::size_t positions = ho * wo;
    for (std::size_t ci = 0; ci < cin; ++ci) {
        for (std::size_t ky = 0; ky < kh; ++ky) {
            for (std::size_t kx = 0; kx < kw; ++kx) {
                double* row = col + ((ci * kh + ky) * kw + kx) * positions;
                for (std::size_t oy = 0; oy < ho; ++oy) {
                    const auto iy = static_cast<std::ptrdiff_t>(oy + ky) - static_cast<std::ptrdiff_t>(pad);
                    double* out = row + oy * wo;
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) {
                        std::fill(out, out + wo, 0.0);
                        continue;
                    }
                    const double* in = x + (ci * h + static_cast<std::size_t>(iy)) * w;
                    for (std::size_t ox = 0; ox < wo; ++ox) {
                        const auto ix = static_cast<std::ptrdiff_t>(ox + kx) - static_cast<std::ptrdiff_t>(pad);
                        out[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) ? 0.0 : in[ix];
                    }
                }
            }
        }
    }
}

void col2im_add(const double* col, std::size_t cin, std::size_t h, std::size_t w, std::size_t kh,
                std::size_t kw, std::size_t pad, std::size_t ho, std::size_t wo, double* dx)
{
    const std::size_t positions = ho * wo;
    for (std::size_t ci = 0; ci < cin; ++ci) {
        for (std::size_t ky = 0; ky < kh; ++ky) {
            for (std::size_t kx = 0; kx < kw; ++kx) {
                const double* row = col + ((ci * kh + ky) * kw + kx) * positions;
                for (std::size_t oy = 0; oy < ho; ++oy) {
                    const auto iy = static_cast<std::ptrdiff_t>(oy + ky) - static_cast<std::ptrdiff_t>(pad);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                    double* out = dx + (ci * h + static_cast<std::size_t>(iy)) * w;
                    for (std::size_t ox = 0; ox < wo; ++ox) {
                        const auto ix = static_cast<std::ptrdiff_t>(ox + kx) - static_cast<std::ptrdiff_t>(pad);
                        if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(w)) out[ix] += row[oy * wo + ox];
                    }
                }
            }
        }
    }
}

struct ConvGeom {
    std::size_t cout, cin, kh, kw, ho, wo;
};

ConvGeom conv_geom(const Dims& d, const Tensor& weight, std::size_t pad)
{
    if (weight.rank() != 4) {
        throw ContractError("conv2d: weight must be [Cout,Cin,KH,KW], got " + shape_str(weight.shape()));
    }
    if (weight.dim(1) != d.c) {
        throw ContractError("conv2d: input has " + std::to_string(d.c) + " channels, weight expects " +
                            std::to_string(weight.dim(1)));
    }
    const std::size_t kh = weight.dim(2);
    const std::size_t kw = weight.dim(3);
    if (d.h + 2 * pad < kh || d.w + 2 * pad < kw) {
        throw ContractError("conv2d: input smaller than kernel");
    }
    return {weight.dim(0), d.c, kh, kw, d.h + 2 * pad - kh + 1, d.w + 2 * pad - kw + 1};
}

void check_bn_channels(const Dims& d, std::size_t channels, const char* op)
{
    if (d.c != channels) {
        throw ContractError(std::string(op) + ": input has " + std::to_string(d.c) +
                            " channels, parameters have " + std::to_string(channels));
    }
}

}  // namespace

BatchNormParams make_batchnorm(std::size_t channels, bool with_gamma)
{
    BatchNormParams p{Tensor({channels}, 0.0f), Tensor({channels}, 1.0f), std::nullopt};
    if (with_gamma) {
        p.gamma = Tensor({channels}, 1.0f);
    }
    return p;
}

Activation conv2d(const Activation& x, const Tensor& weight, std::size_t pad)
{
    const Dims d = dims_of(x, "conv2d");
    const ConvGeom g = conv_geom(d, weight, pad);
    const std::size_t k = g.cin * g.kh * g.kw;
    const std::size_t positions = g.ho * g.wo;

    std::vector<double> wd(weight.values().begin(), weight.values().end());
    std::vector<double> col(k * positions);
    Activation y(make_shape(d, g.cout, g.ho, g.wo), 0.0);
    for (std::size_t s = 0; s < d.n; ++s) {
        im2col(x.data() + s * d.c * d.h * d.w, d.c, d.h, d.w, g.kh, g.kw, pad, g.ho, g.wo, col.data());
        double* out = y.data() + s * g.cout * positions;
        for (std::size_t co = 0; co < g.cout; ++co) {
            double* orow = out + co * positions;
            for (std::size_t kk = 0; kk < k; ++kk) {
                const double a = wd[co * k + kk];
                if (a == 0.0) continue;
                const double* crow = col.data() + kk * positions;
                for (std::size_t p = 0; p < positions; ++p) {
                    orow[p] += a * crow[p];
                }
            }
        }
    }
    return y;
}

ConvGrads conv2d_backward(const Activation& x, const Tensor& weight, const Activation& dy, std::size_t pad,
                          bool need_dx)
{
    const Dims d = dims_of(x, "conv2d_backward");
    const ConvGeom g = conv_geom(d, weight, pad);
    if (dy.shape() != make_shape(d, g.cout, g.ho, g.wo)) {
        throw ContractError("conv2d_backward: gradient shape " + shape_str(dy.shape()) + " mismatch");
    }
    const std::size_t k = g.cin * g.kh * g.kw;
    const std::size_t positions = g.ho * g.wo;

    std::vector<double> wd(weight.values().begin(), weight.values().end());
    std::vector<double> col(k * positions);
    std::vector<double> colt(positions * k);
    std::vector<double> dcol(need_dx ? k * positions : 0);

    ConvGrads grads;
    grads.dweight = Activation(weight.shape(), 0.0);
    if (need_dx) grads.dx = Activation(x.shape(), 0.0);

    for (std::size_t s = 0; s < d.n; ++s) {
        im2col(x.data() + s * d.c * d.h * d.w, d.c, d.h, d.w, g.kh, g.kw, pad, g.ho, g.wo, col.data());
        for (std::size_t kk = 0; kk < k; ++kk) {
            for (std::size_t p = 0; p < positions; ++p) {
                colt[p * k + kk] = col[kk * positions + p];
            }
        }
        const double* g_out = dy.data() + s * g.cout * positions;
        // dW[co, :] += sum_p dy[co, p] * col[:, p]
        for (std::size_t co = 0; co < g.cout; ++co) {
            double* dw = grads.dweight.data() + co * k;
            const double* grow = g_out + co * positions;
            for (std::size_t p = 0; p < positions; ++p) {
                const double a = grow[p];
                if (a == 0.0) continue;
                const double* crow = colt.data() + p * k;
                for (std::size_t kk = 0; kk < k; ++kk) {
                    dw[kk] += a * crow[kk];
                }
            }
        }
        if (!need_dx) continue;
        // dcol[kk, :] = sum_co W[co, kk] * dy[co, :]
        std::fill(dcol.begin(), dcol.end(), 0.0);
        for (std::size_t co = 0; co < g.cout; ++co) {
            const double* grow = g_out + co * positions;
            for (std::size_t kk = 0; kk < k; ++kk) {
                const double a = wd[co * k + kk];
                if (a == 0.0) continue;
                double* drow = dcol.data() + kk * positions;
                for (std::size_t p = 0; p < positions; ++p) {
                    drow[p] += a * grow[p];
                }
            }
        }
        col2im_add(dcol.data(), d.c, d.h, d.w, g.kh, g.kw, pad, g.ho, g.wo,
                   grads.dx.data() + s * d.c * d.h * d.w);
    }
    return grads;
}

Activation batchnorm_infer(const Activation& x, const BatchNormParams& p)
{
    const Dims d = dims_of(x, "batchnorm_infer");
    check_bn_channels(d, p.channels(), "batchnorm_infer");
    if (p.running_var.size() != p.channels() || (p.gamma && p.gamma->size() != p.channels())) {
        throw ContractError("batchnorm_infer: inconsistent parameter lengths");
    }
    Activation y(x.shape(), 0.0);
    const std::size_t plane = d.h * d.w;
    for (std::size_t c = 0; c < d.c; ++c) {
        const double mean = p.running_mean[c];
        const double scale = (p.gamma ? static_cast<double>((*p.gamma)[c]) : 1.0) /
                             std::sqrt(static_cast<double>(p.running_var[c]) + kBatchNormEps);
        for (std::size_t s = 0; s < d.n; ++s) {
            const double* in = x.data() + (s * d.c + c) * plane;
            double* out = y.data() + (s * d.c + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                out[i] = scale * (in[i] - mean);
            }
        }
    }
    return y;
}

Activation batchnorm_train(const Activation& x, const std::optional<Tensor>& gamma, BatchNormCache& cache)
{
    const Dims d = dims_of(x, "batchnorm_train");
    if (gamma && gamma->size() != d.c) {
        throw ContractError("batchnorm_train: gamma length does not match channels");
    }
    const std::size_t plane = d.h * d.w;
    const auto count = static_cast<double>(d.n * plane);
    cache.mean.assign(d.c, 0.0);
    cache.var.assign(d.c, 0.0);
    cache.inv_std.assign(d.c, 0.0);
    cache.xhat = Activation(x.shape(), 0.0);
    Activation y(x.shape(), 0.0);
    for (std::size_t c = 0; c < d.c; ++c) {
        double sum = 0.0;
        for (std::size_t s = 0; s < d.n; ++s) {
            const double* in = x.data() + (s * d.c + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) sum += in[i];
        }
        const double mean = sum / count;
        double sq = 0.0;
        for (std::size_t s = 0; s < d.n; ++s) {
            const double* in = x.data() + (s * d.c + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) sq += (in[i] - mean) * (in[i] - mean);
        }
        const double var = sq / count;
        const double inv_std = 1.0 / std::sqrt(var + kBatchNormEps);
        const double g = gamma ? static_cast<double>((*gamma)[c]) : 1.0;
        cache.mean[c] = mean;
        cache.var[c] = var;
        cache.inv_std[c] = inv_std;
        for (std::size_t s = 0; s < d.n; ++s) {
            const std::size_t off = (s * d.c + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                const double xh = (x[off + i] - mean) * inv_std;
                cache.xhat[off + i] = xh;
                y[off + i] = g * xh;
            }
        }
    }
    return y;
}

BatchNormGrads batchnorm_train_backward(const Activation& dy, const std::optional<Tensor>& gamma,
                                        const BatchNormCache& cache)
{
    const Dims d = dims_of(dy, "batchnorm_train_backward");
    if (dy.shape() != cache.xhat.shape()) {
        throw ContractError("batchnorm_train_backward: gradient shape mismatch");
    }
    const std::size_t plane = d.h * d.w;
    const auto count = static_cast<double>(d.n * plane);
    BatchNormGrads grads{Activation(dy.shape(), 0.0), {}};
    if (gamma) grads.dgamma.assign(d.c, 0.0);

    for (std::size_t c = 0; c < d.c; ++c) {
        const double g = gamma ? static_cast<double>((*gamma)[c]) : 1.0;
        double sum_dy = 0.0;
        double sum_dy_xhat = 0.0;
        for (std::size_t s = 0; s < d.n; ++s) {
            const std::size_t off = (s * d.c + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                sum_dy += dy[off + i];
                sum_dy_xhat += dy[off + i] * cache.xhat[off + i];
            }
        }
        if (gamma) grads.dgamma[c] = sum_dy_xhat;
        const double k = g * cache.inv_std[c] / count;
        for (std::size_t s = 0; s < d.n; ++s) {
            const std::size_t off = (s * d.c + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                grads.dx[off + i] = k * (count * dy[off + i] - sum_dy - cache.xhat[off + i] * sum_dy_xhat);
            }
        }
    }
    return grads;
}

void update_running_stats(BatchNormParams& p, const BatchNormCache& cache, std::size_t count_per_channel,
                          double momentum)
{
    if (cache.mean.size() != p.channels()) {
        throw ContractError("update_running_stats: channel mismatch");
    }
    const double n = static_cast<double>(count_per_channel);
    const double unbias = n > 1.0 ? n / (n - 1.0) : 1.0;
    for (std::size_t c = 0; c < p.channels(); ++c) {
        p.running_mean[c] = static_cast<float>((1.0 - momentum) * p.running_mean[c] + momentum * cache.mean[c]);
        p.running_var[c] =
            static_cast<float>((1.0 - momentum) * p.running_var[c] + momentum * cache.var[c] * unbias);
    }
}

Activation relu(const Activation& x)
{
    Activation y = x;
    for (auto& v : y.storage()) v = v > 0.0 ? v : 0.0;
    return y;
}

Activation relu_backward(const Activation& y, const Activation& dy)
{
    if (y.shape() != dy.shape()) {
        throw ContractError("relu_backward: shape mismatch");
    }
    Activation dx(dy.shape(), 0.0);
    for (std::size_t i = 0; i < dx.size(); ++i) {
        dx[i] = y[i] > 0.0 ? dy[i] : 0.0;
    }
    return dx;
}

Activation avg_pool(const Activation& x, std::size_t kh, std::size_t kw)
{
    const Dims d = dims_of(x, "avg_pool");
    if (kh == 0 || kw == 0 || d.h < kh || d.w < kw) {
        throw ContractError("avg_pool: input " + shape_str(x.shape()) + " smaller than kernel (" +
                            std::to_string(kh) + "," + std::to_string(kw) + ")");
    }
    const std::size_t ho = d.h / kh;
    const std::size_t wo = d.w / kw;
    const double inv = 1.0 / static_cast<double>(kh * kw);
    Activation y(make_shape(d, d.c, ho, wo), 0.0);
    for (std::size_t sc = 0; sc < d.n * d.c; ++sc) {
        const double* in = x.data() + sc * d.h * d.w;
        double* out = y.data() + sc * ho * wo;
        for (std::size_t oy = 0; oy < ho; ++oy) {
            for (std::size_t ox = 0; ox < wo; ++ox) {
                double acc = 0.0;
                for (std::size_t ky = 0; ky < kh; ++ky) {
                    const double* r = in + (oy * kh + ky) * d.w + ox * kw;
                    for (std::size_t kx = 0; kx < kw; ++kx) acc += r[kx];
                }
                out[oy * wo + ox] = acc * inv;
            }
        }
    }
    return y;
}

Activation avg_pool_backward(const Activation& dy, const Shape& x_shape, std::size_t kh, std::size_t kw)
{
    Activation dx(x_shape, 0.0);
    const Dims d = dims_of(dx, "avg_pool_backward");
    const std::size_t ho = d.h / kh;
    const std::size_t wo = d.w / kw;
    if (dy.size() != d.n * d.c * ho * wo) {
        throw ContractError("avg_pool_backward: gradient shape mismatch");
    }
    const double inv = 1.0 / static_cast<double>(kh * kw);
    for (std::size_t sc = 0; sc < d.n * d.c; ++sc) {
        const double* g = dy.data() + sc * ho * wo;
        double* out = dx.data() + sc * d.h * d.w;
        for (std::size_t oy = 0; oy < ho; ++oy) {
            for (std::size_t ox = 0; ox < wo; ++ox) {
                const double v = g[oy * wo + ox] * inv;
                for (std::size_t ky = 0; ky < kh; ++ky) {
                    double* r = out + (oy * kh + ky) * d.w + ox * kw;
                    for (std::size_t kx = 0; kx < kw; ++kx) r[kx] += v;
                }
            }
        }
    }
    return dx;
}

Activation spatial_mean(const Activation& x)
{
    const Dims d = dims_of(x, "spatial_mean");
    const std::size_t plane = d.h * d.w;
    Activation y(d.batched ? Shape{d.n, d.c} : Shape{d.c}, 0.0);
    for (std::size_t sc = 0; sc < d.n * d.c; ++sc) {
        const double* in = x.data() + sc * plane;
        double acc = 0.0;
        for (std::size_t i = 0; i < plane; ++i) acc += in[i];
        y[sc] = acc / static_cast<double>(plane);
    }
    return y;
}

Activation spatial_mean_backward(const Activation& dy, const Shape& x_shape)
{
    Activation dx(x_shape, 0.0);
    const Dims d = dims_of(dx, "spatial_mean_backward");
    const std::size_t plane = d.h * d.w;
    if (dy.size() != d.n * d.c) {
        throw ContractError("spatial_mean_backward: gradient shape mismatch");
    }
    for (std::size_t sc = 0; sc < d.n * d.c; ++sc) {
        const double v = dy[sc] / static_cast<double>(plane);
        std::fill(dx.data() + sc * plane, dx.data() + (sc + 1) * plane, v);
    }
    return dx;
}

Activation linear(const Activation& x, const Tensor& weight, const Tensor& bias)
{
    if (weight.rank() != 2 || bias.size() != weight.dim(0)) {
        throw ContractError("linear: weight must be [out,in] with matching bias");
    }
    const std::size_t in = weight.dim(1);
    const std::size_t out = weight.dim(0);
    if (x.size() % in != 0 || x.empty() || x.shape().back() != in) {
        throw ContractError("linear: input " + shape_str(x.shape()) + " does not end in " + std::to_string(in));
    }
    const std::size_t n = x.size() / in;
    Activation y(x.rank() == 1 ? Shape{out} : Shape{n, out}, 0.0);
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t o = 0; o < out; ++o) {
            double acc = bias[o];
            for (std::size_t i = 0; i < in; ++i) {
                acc += static_cast<double>(weight[o * in + i]) * x[s * in + i];
            }
            y[s * out + o] = acc;
        }
    }
    return y;
}

double log_sum_exp(std::span<const double> logits)
{
    if (logits.empty()) {
        throw ContractError("log_sum_exp: empty input");
    }
    const double m = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double v : logits) sum += std::exp(v - m);
    return m + std::log(sum);
}

std::vector<double> softmax(std::span<const double> logits)
{
    if (logits.empty()) throw ContractError("softmax of an empty vector");
    const double mx = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = std::exp(logits[i] - mx);
        sum += p[i];
    }
    for (auto& v : p) v /= sum;
    return p;
}

}  // namespace kws::nn
