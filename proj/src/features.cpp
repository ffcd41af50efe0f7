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

#include "kws/features.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <string>

#include <fftw3.h>

#include "kws/error.hpp"

namespace kws::features {

namespace {

constexpr double kMelLinearSlope = 200.0 / 3.0;  // Hz per mel below the break
constexpr double kMelBreakHz = 1000.0;
constexpr double kMelBreak = kMelBreakHz / kMelLinearSlope;  // 15 mel
const double kMelLogStep = std::log(6.4) / 27.0;

// The FFTW planner is not thread-safe; execution is.
std::mutex& planner_mutex()
{
    static std::mutex m;
    return m;
}

}  // namespace

void MfccConfig::validate() const
{
    if (sample_rate <= 0 || hop <= 0 || win_length <= 0 || fft_size <= 0) {
        throw ConfigError("mfcc: sizes and rates must be positive");
    }
    if (win_length > fft_size) {
        throw ConfigError("mfcc: win_length exceeds fft_size");
    }
    if (n_mels <= 0 || n_mfcc <= 0 || n_mfcc > n_mels) {
        throw ConfigError("mfcc: require 0 < n_mfcc <= n_mels");
    }
    if (!(fmin >= 0.0 && fmin < fmax && fmax <= sample_rate / 2.0)) {
        throw ConfigError("mfcc: require 0 <= fmin < fmax <= sample_rate / 2");
    }
    if (!(log_floor > 0.0)) {
        throw ConfigError("mfcc: log_floor must be positive");
    }
}

double hz_to_mel(double hz)
{
    if (!(hz >= 0.0)) {
        throw RangeError("hz_to_mel: negative frequency " + std::to_string(hz));
    }
    if (hz < kMelBreakHz) {
        return hz / kMelLinearSlope;
    }
    return kMelBreak + std::log(hz / kMelBreakHz) / kMelLogStep;
}

double mel_to_hz(double mel)
{
    if (!(mel >= 0.0)) {
        throw RangeError("mel_to_hz: negative mel " + std::to_string(mel));
    }
    if (mel < kMelBreak) {
        return mel * kMelLinearSlope;
    }
    return kMelBreakHz * std::exp(kMelLogStep * (mel - kMelBreak));
}

std::vector<std::vector<double>> mel_filterbank(const MfccConfig& cfg)
{
    cfg.validate();
    const int bins = cfg.n_bins();
    const double lo = hz_to_mel(cfg.fmin);
    const double hi = hz_to_mel(cfg.fmax);

    std::vector<double> edges(static_cast<std::size_t>(cfg.n_mels) + 2);
    for (std::size_t i = 0; i < edges.size(); ++i) {
        edges[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(edges.size() - 1));
    }

    std::vector<std::vector<double>> fb(static_cast<std::size_t>(cfg.n_mels),
                                        std::vector<double>(static_cast<std::size_t>(bins), 0.0));
    for (std::size_t m = 0; m < fb.size(); ++m) {
        const double left = edges[m];
        const double centre = edges[m + 1];
        const double right = edges[m + 2];
        const double norm = 2.0 / (right - left);
        bool any = false;
        for (int k = 0; k < bins; ++k) {
            const double f = static_cast<double>(k) * cfg.sample_rate / cfg.fft_size;
            const double rise = (f - left) / (centre - left);
            const double fall = (right - f) / (right - centre);
            const double w = std::max(0.0, std::min(rise, fall));
            fb[m][static_cast<std::size_t>(k)] = w * norm;
            any = any || w > 0.0;
        }
        if (!any) {
            throw ConfigError("mfcc: mel filter " + std::to_string(m) +
                              " has no FFT bins; reduce n_mels or raise fft_size");
        }
    }
    return fb;
}

std::vector<std::vector<double>> dct2_matrix(int n_out, int n_in)
{
    std::vector<std::vector<double>> d(static_cast<std::size_t>(n_out),
                                       std::vector<double>(static_cast<std::size_t>(n_in)));
    for (int k = 0; k < n_out; ++k) {
        const double scale = std::sqrt((k == 0 ? 1.0 : 2.0) / n_in);
        for (int n = 0; n < n_in; ++n) {
            d[static_cast<std::size_t>(k)][static_cast<std::size_t>(n)] =
                scale * std::cos(std::numbers::pi * k * (2.0 * n + 1.0) / (2.0 * n_in));
        }
    }
    return d;
}

std::vector<double> inverse_dct2(std::span<const double> coeffs, int n)
{
    // Orthonormal DCT-II is orthogonal, so its inverse is the transpose.
    const auto d = dct2_matrix(static_cast<int>(coeffs.size()), n);
    std::vector<double> out(static_cast<std::size_t>(n), 0.0);
    for (std::size_t k = 0; k < coeffs.size(); ++k) {
        for (int i = 0; i < n; ++i) {
            out[static_cast<std::size_t>(i)] += d[k][static_cast<std::size_t>(i)] * coeffs[k];
        }
    }
    return out;
}

std::vector<double> padded_hann(int win_length, int fft_size)
{
    std::vector<double> w(static_cast<std::size_t>(fft_size), 0.0);
    const int offset = (fft_size - win_length) / 2;
    for (int i = 0; i < win_length; ++i) {
        w[static_cast<std::size_t>(offset + i)] =
            0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / win_length);
    }
    return w;
}

struct MfccExtractor::Plan {
    fftw_plan plan = nullptr;
};

MfccExtractor::MfccExtractor(const MfccConfig& cfg)
    : cfg_(cfg),
      window_(padded_hann(cfg.win_length, cfg.fft_size)),
      filterbank_(mel_filterbank(cfg)),
      dct_(dct2_matrix(cfg.n_mfcc, cfg.n_mels)),
      plan_(std::make_unique<Plan>())
{
    std::vector<double> in(static_cast<std::size_t>(cfg_.fft_size));
    std::vector<fftw_complex> out(static_cast<std::size_t>(cfg_.n_bins()));
    std::lock_guard lock(planner_mutex());
    plan_->plan = fftw_plan_dft_r2c_1d(cfg_.fft_size, in.data(), out.data(),
                                       FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (plan_->plan == nullptr) {
        throw Error("mfcc: FFT planning failed");
    }
}

MfccExtractor::~MfccExtractor()
{
    if (plan_ && plan_->plan != nullptr) {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(plan_->plan);
    }
}

FeatureMatrix MfccExtractor::mel_energies(const audio::AudioClip& clip) const
{
    if (clip.sample_rate != cfg_.sample_rate) {
        throw ContractError("mfcc: clip sample rate " + std::to_string(clip.sample_rate) +
                            " does not match config " + std::to_string(cfg_.sample_rate));
    }
    const std::size_t n = clip.samples.size();
    if (n != static_cast<std::size_t>(cfg_.sample_rate)) {
        throw ContractError("mfcc: clip must hold exactly one second (" +
                            std::to_string(cfg_.sample_rate) + " samples), got " + std::to_string(n));
    }
    const std::size_t fft = static_cast<std::size_t>(cfg_.fft_size);
    const std::size_t pad = fft / 2;
    if (n <= pad) {
        throw ContractError("mfcc: clip too short for reflect padding");
    }

    // Reflect padding without repeating the edge sample.
    std::vector<double> padded(n + 2 * pad);
    for (std::size_t j = 0; j < padded.size(); ++j) {
        std::size_t src;
        if (j < pad) {
            src = pad - j;
        } else if (j < pad + n) {
            src = j - pad;
        } else {
            src = 2 * n - 2 - (j - pad);
        }
        padded[j] = clip.samples[src];
    }

    const std::size_t frames = cfg_.frames_for(n);
    const std::size_t bins = static_cast<std::size_t>(cfg_.n_bins());
    FeatureMatrix mel(frames, static_cast<std::size_t>(cfg_.n_mels));
    std::vector<double> buf(fft);
    std::vector<fftw_complex> spec(bins);
    std::vector<double> power(bins);
    for (std::size_t t = 0; t < frames; ++t) {
        const double* frame = padded.data() + t * static_cast<std::size_t>(cfg_.hop);
        for (std::size_t i = 0; i < fft; ++i) {
            buf[i] = frame[i] * window_[i];
        }
        fftw_execute_dft_r2c(plan_->plan, buf.data(), spec.data());
        for (std::size_t k = 0; k < bins; ++k) {
            power[k] = spec[k][0] * spec[k][0] + spec[k][1] * spec[k][1];
        }
        for (std::size_t m = 0; m < filterbank_.size(); ++m) {
            double e = 0.0;
            const auto& row = filterbank_[m];
            for (std::size_t k = 0; k < bins; ++k) {
                e += row[k] * power[k];
            }
            mel.at(t, m) = e;
        }
    }
    return mel;
}

FeatureMatrix MfccExtractor::log_mel(const audio::AudioClip& clip) const
{
    FeatureMatrix mel = mel_energies(clip);
    for (auto& v : mel.values) {
        v = std::log(std::max(v, cfg_.log_floor));
    }
    return mel;
}

FeatureMatrix MfccExtractor::compute(const audio::AudioClip& clip) const
{
    const FeatureMatrix lm = log_mel(clip);
    FeatureMatrix out(lm.frames, static_cast<std::size_t>(cfg_.n_mfcc));
    for (std::size_t t = 0; t < lm.frames; ++t) {
        const auto x = lm.frame(t);
        for (std::size_t k = 0; k < out.coeffs; ++k) {
            double acc = 0.0;
            const auto& basis = dct_[k];
            for (std::size_t i = 0; i < x.size(); ++i) {
                acc += basis[i] * x[i];
            }
            out.at(t, k) = acc;
        }
    }
    return out;
}

const MfccExtractor& default_extractor()
{
    static const MfccExtractor extractor{MfccConfig{}};
    return extractor;
}

FeatureMatrix compute_mfcc(const audio::AudioClip& clip, const MfccConfig& cfg)
{
    if (cfg == MfccConfig{}) {
        return default_extractor().compute(clip);
    }
    return MfccExtractor(cfg).compute(clip);
}

void write_csv(std::ostream& out, const FeatureMatrix& f)
{
    const auto old = out.precision(17);
    for (std::size_t t = 0; t < f.frames; ++t) {
        for (std::size_t k = 0; k < f.coeffs; ++k) {
            out << (k ? "," : "") << f.at(t, k);
        }
        out << '\n';
    }
    out.precision(old);
}

}  // namespace kws::features
