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

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "kws/error.hpp"
#include "kws/features.hpp"
#include "test_support.hpp"

using namespace kws;
using namespace kws::features;

namespace {

audio::AudioClip sine(double hz, double amp = 1.0)
{
    audio::AudioClip clip{std::vector<float>(16000), 16000};
    for (std::size_t i = 0; i < clip.size(); ++i) {
        clip.samples[i] = static_cast<float>(amp * std::sin(2.0 * std::numbers::pi * hz * i / 16000.0));
    }
    return clip;
}

// Straight-line MFCC for one frame: explicit reflect index, naive O(N^2)
// DFT, explicit DCT-II sum. Shares only the filterbank with the library.
std::vector<double> oracle_frame(const audio::AudioClip& clip, std::size_t t,
                                 const std::vector<std::vector<double>>& fb)
{
    const int n = 16000, pad = 256, fft = 512;
    std::vector<double> frame(fft);
    for (int i = 0; i < fft; ++i) {
        int j = static_cast<int>(t) * 160 + i - pad;  // index into the unpadded clip
        if (j < 0) j = -j;
        if (j >= n) j = 2 * (n - 1) - j;
        const int wi = i - 16;  // 480-sample window centred in 512
        const double w = (wi >= 0 && wi < 480) ? 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * wi / 480.0) : 0.0;
        frame[static_cast<std::size_t>(i)] = clip.samples[static_cast<std::size_t>(j)] * w;
    }
    std::vector<double> power(257);
    for (int k = 0; k < 257; ++k) {
        double re = 0, im = 0;
        for (int i = 0; i < fft; ++i) {
            re += frame[static_cast<std::size_t>(i)] * std::cos(2.0 * std::numbers::pi * k * i / fft);
            im -= frame[static_cast<std::size_t>(i)] * std::sin(2.0 * std::numbers::pi * k * i / fft);
        }
        power[static_cast<std::size_t>(k)] = re * re + im * im;
    }
    std::vector<double> logmel(40);
    for (std::size_t m = 0; m < 40; ++m) {
        double e = 0;
        for (std::size_t k = 0; k < 257; ++k) e += fb[m][k] * power[k];
        logmel[m] = std::log(std::max(e, 1e-10));
    }
    std::vector<double> c(40);
    for (int k = 0; k < 40; ++k) {
        double acc = 0;
        for (int i = 0; i < 40; ++i) acc += logmel[static_cast<std::size_t>(i)] * std::cos(std::numbers::pi * k * (i + 0.5) / 40.0);
        c[static_cast<std::size_t>(k)] = acc * (k == 0 ? std::sqrt(1.0 / 40) : std::sqrt(2.0 / 40));
    }
    return c;
}

}  // namespace

TEST(MelScale, AnchorsAndInverse)
{
    EXPECT_EQ(hz_to_mel(0.0), 0.0);
    EXPECT_NEAR(hz_to_mel(1000.0), 15.0, 1e-12);
    EXPECT_NEAR(hz_to_mel(500.0), 7.5, 1e-12);
    EXPECT_NEAR(mel_to_hz(hz_to_mel(3700.0)), 3700.0, 1e-9);
    for (double f = 0; f < 8000; f += 137.5) EXPECT_NEAR(mel_to_hz(hz_to_mel(f)), f, 1e-9);
    // Logarithmic region: 6.4 kHz sits 27 mel above the 1 kHz break.
    EXPECT_NEAR(hz_to_mel(6400.0), 42.0, 1e-9);
    EXPECT_THROW(hz_to_mel(-1.0), RangeError);
}

TEST(Filterbank, ShapeSupportAndPeaks)
{
    const MfccConfig cfg;
    const auto fb = mel_filterbank(cfg);
    ASSERT_EQ(fb.size(), 40u);
    const double lo = hz_to_mel(0.0), hi = hz_to_mel(8000.0);
    std::size_t prev_peak = 0;
    for (std::size_t m = 0; m < fb.size(); ++m) {
        ASSERT_EQ(fb[m].size(), 257u);
        std::size_t first = 257, last = 0, peak = 0;
        for (std::size_t k = 0; k < 257; ++k) {
            ASSERT_GE(fb[m][k], 0.0);
            if (fb[m][k] > 0) {
                first = std::min(first, k);
                last = k;
            }
            if (fb[m][k] > fb[m][peak]) peak = k;
        }
        ASSERT_LE(first, last) << "filter " << m << " empty";
        for (std::size_t k = first; k <= last; ++k) EXPECT_GT(fb[m][k], 0.0) << "gap in filter " << m;
        // Peak lies on one of the two bins bracketing the filter centre.
        const double centre_hz = mel_to_hz(lo + (hi - lo) * (m + 1.0) / 41.0);
        const double centre_bin = centre_hz / 31.25;
        EXPECT_TRUE(peak == static_cast<std::size_t>(std::floor(centre_bin)) ||
                    peak == static_cast<std::size_t>(std::ceil(centre_bin)))
            << "filter " << m << " peak " << peak << " centre bin " << centre_bin;
        if (m > 0) EXPECT_GT(peak, prev_peak);
        prev_peak = peak;
    }
}

TEST(Filterbank, TooManyMelsIsConfigError)
{
    MfccConfig cfg;
    cfg.n_mels = 200;
    cfg.n_mfcc = 40;
    EXPECT_THROW(mel_filterbank(cfg), ConfigError);
}

TEST(MfccConfig, Validation)
{
    MfccConfig cfg;
    EXPECT_NO_THROW(cfg.validate());
    cfg.n_mfcc = 41;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = {};
    cfg.win_length = 600;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = {};
    cfg.fmax = 9000;
    EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Mfcc, ShapeOverRandomClips)
{
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> amp(0.0, 1.0);
    for (int i = 0; i < 20; ++i) {
        const auto f = compute_mfcc(test::random_clip(rng, 16000, amp(rng)));
        ASSERT_EQ(f.frames, 101u);
        ASSERT_EQ(f.coeffs, 40u);
        for (double v : f.values) ASSERT_TRUE(std::isfinite(v));
    }
}

TEST(Mfcc, SilenceIsConstantFloor)
{
    const audio::AudioClip zero{std::vector<float>(16000, 0.0f), 16000};
    const auto f = compute_mfcc(zero);
    const double c0 = std::sqrt(40.0) * std::log(1e-10);
    EXPECT_NEAR(c0, -145.6, 0.05);
    for (std::size_t t = 0; t < f.frames; ++t) {
        EXPECT_NEAR(f.at(t, 0), c0, 1e-9);
        for (std::size_t k = 1; k < 40; ++k) EXPECT_NEAR(f.at(t, k), 0.0, 1e-9);
    }
}

TEST(Mfcc, SinePeaksAtFilterCoveringItsBin)
{
    const MfccExtractor ex;
    const auto mel = ex.mel_energies(sine(1000.0));
    const auto& fb = ex.filterbank();
    // 1 kHz lands exactly on bin 32; the oracle filter is the row with the
    // largest weight at that bin.
    std::size_t expected = 0;
    for (std::size_t m = 0; m < fb.size(); ++m) {
        if (fb[m][32] > fb[expected][32]) expected = m;
    }
    // The filter centred nearest 1 kHz agrees with the bin oracle.
    const double lo = 0.0, hi = hz_to_mel(8000.0);
    std::size_t nearest = 0;
    for (std::size_t m = 0; m < 40; ++m) {
        const auto centre = [&](std::size_t i) { return mel_to_hz(lo + (hi - lo) * (i + 1.0) / 41.0); };
        if (std::abs(centre(m) - 1000.0) < std::abs(centre(nearest) - 1000.0)) nearest = m;
    }
    EXPECT_EQ(expected, nearest);
    for (std::size_t t = 2; t < mel.frames - 2; ++t) {
        const auto row = mel.frame(t);
        const auto argmax = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
        ASSERT_EQ(argmax, expected) << "frame " << t;
    }
}

TEST(Mfcc, MatchesStraightLineOracle)
{
    std::mt19937_64 rng(2);
    const auto clip = test::random_clip(rng);
    const MfccExtractor ex;
    const auto f = ex.compute(clip);
    for (std::size_t t : {0u, 1u, 37u, 99u, 100u}) {
        const auto expect = oracle_frame(clip, t, ex.filterbank());
        for (std::size_t k = 0; k < 40; ++k) {
            ASSERT_NEAR(f.at(t, k), expect[k], 1e-8 * (1.0 + std::abs(expect[k]))) << "t=" << t << " k=" << k;
        }
    }
}

TEST(Mfcc, AmplitudeScalingShiftsOnlyC0)
{
    std::mt19937_64 rng(3);
    auto clip = test::random_clip(rng, 16000, 0.8);
    auto scaled = clip;
    const double c = 0.25;  // exact in binary, so the scaled samples are exact
    for (auto& s : scaled.samples) s = static_cast<float>(s * c);
    const auto a = compute_mfcc(clip);
    const auto b = compute_mfcc(scaled);
    const double shift = 2.0 * std::log(c) * std::sqrt(40.0);
    for (std::size_t t = 0; t < a.frames; ++t) {
        EXPECT_NEAR(b.at(t, 0) - a.at(t, 0), shift, 1e-9);
        for (std::size_t k = 1; k < 40; ++k) EXPECT_NEAR(b.at(t, k), a.at(t, k), 1e-9);
    }
}

TEST(Mfcc, DeterministicBits)
{
    std::mt19937_64 rng(4);
    const auto clip = test::random_clip(rng);
    EXPECT_EQ(compute_mfcc(clip).values, compute_mfcc(clip).values);
    MfccExtractor other;
    EXPECT_EQ(other.compute(clip).values, compute_mfcc(clip).values);
}

TEST(Mfcc, InverseDctReconstructsLogMel)
{
    std::mt19937_64 rng(5);
    const auto clip = test::random_clip(rng);
    const MfccExtractor ex;
    const auto lm = ex.log_mel(clip);
    const auto f = ex.compute(clip);
    for (std::size_t t = 0; t < f.frames; ++t) {
        const auto rec = inverse_dct2(f.frame(t), 40);
        for (std::size_t m = 0; m < 40; ++m) ASSERT_NEAR(rec[m], lm.at(t, m), 1e-9);
    }
}

TEST(Mfcc, RejectsWrongRateOrLength)
{
    audio::AudioClip clip{std::vector<float>(16000, 0.0f), 44100};
    EXPECT_THROW(compute_mfcc(clip), ContractError);
    clip.sample_rate = 16000;
    clip.samples.resize(15999);
    EXPECT_THROW(compute_mfcc(clip), ContractError);
}

TEST(Mfcc, CsvDumpHasFramesAsRows)
{
    FeatureMatrix f(2, 3);
    f.at(0, 0) = 1.5;
    f.at(1, 2) = -2.0;
    std::ostringstream out;
    write_csv(out, f);
    EXPECT_EQ(out.str(), "1.5,0,0\n0,0,-2\n");
}
