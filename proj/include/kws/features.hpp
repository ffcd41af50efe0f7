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

#include <cstddef>
#include <memory>
#include <ostream>
#include <span>
#include <vector>

#include "kws/audio.hpp"

namespace kws::features {

struct MfccConfig {
    int sample_rate = 16000;
    int win_length = 480;  // 30 ms
    int hop = 160;         // 10 ms
    int fft_size = 512;
    int n_mels = 40;
    int n_mfcc = 40;
    double fmin = 0.0;
    double fmax = 8000.0;
    double log_floor = 1e-10;

    void validate() const;
    int n_bins() const { return fft_size / 2 + 1; }
    /// Frames produced for a clip of `n` samples with centered framing.
    std::size_t frames_for(std::size_t n) const { return 1 + n / static_cast<std::size_t>(hop); }

    friend bool operator==(const MfccConfig&, const MfccConfig&) = default;
};

/// Row-major frames x coefficients.
struct FeatureMatrix {
    std::size_t frames = 0;
    std::size_t coeffs = 0;
    std::vector<double> values;

    FeatureMatrix() = default;
    FeatureMatrix(std::size_t f, std::size_t c) : frames(f), coeffs(c), values(f * c, 0.0) {}

    double& at(std::size_t t, std::size_t k) { return values[t * coeffs + k]; }
    double at(std::size_t t, std::size_t k) const { return values[t * coeffs + k]; }
    std::span<const double> frame(std::size_t t) const { return {values.data() + t * coeffs, coeffs}; }
};

// Slaney mel scale: linear (3/200 mel per Hz) below 1 kHz, logarithmic above.
double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// n_mels rows of n_bins triangular, Slaney area-normalized weights.
std::vector<std::vector<double>> mel_filterbank(const MfccConfig& cfg);

/// Orthonormal DCT-II basis, n_out x n_in, and its inverse applied to coefficients.
std::vector<std::vector<double>> dct2_matrix(int n_out, int n_in);
std::vector<double> inverse_dct2(std::span<const double> coeffs, int n);

/// Periodic Hann of `win_length`, centered and zero-padded to `fft_size`.
std::vector<double> padded_hann(int win_length, int fft_size);

/// Precomputes the window, filterbank, DCT and FFT plan once; compute() is
/// const and safe to call concurrently.
class MfccExtractor {
public:
    explicit MfccExtractor(const MfccConfig& cfg = {});
    ~MfccExtractor();
    MfccExtractor(const MfccExtractor&) = delete;
    MfccExtractor& operator=(const MfccExtractor&) = delete;

    const MfccConfig& config() const { return cfg_; }
    const std::vector<std::vector<double>>& filterbank() const { return filterbank_; }

    FeatureMatrix compute(const audio::AudioClip& clip) const;
    /// Per-frame log-mel energies (before the DCT).
    FeatureMatrix log_mel(const audio::AudioClip& clip) const;
    /// Per-frame mel energies (before the log).
    FeatureMatrix mel_energies(const audio::AudioClip& clip) const;

private:
    struct Plan;
    MfccConfig cfg_;
    std::vector<double> window_;
    std::vector<std::vector<double>> filterbank_;
    std::vector<std::vector<double>> dct_;
    std::unique_ptr<Plan> plan_;
};

/// Shared extractor for the default configuration.
const MfccExtractor& default_extractor();

FeatureMatrix compute_mfcc(const audio::AudioClip& clip, const MfccConfig& cfg = {});

/// Frames as rows, coefficients as comma-separated columns.
void write_csv(std::ostream& out, const FeatureMatrix& f);

}  // namespace kws::features
