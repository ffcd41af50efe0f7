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
#include <filesystem>
#include <random>
#include <span>
#include <vector>

namespace kws::audio {

inline constexpr int kSampleRate = 16000;
inline constexpr std::size_t kClipSamples = 16000;

/// Mono PCM, samples normalized to [-1, 1].
struct AudioClip {
    std::vector<float> samples;
    int sample_rate = kSampleRate;

    std::size_t size() const { return samples.size(); }
    double duration_ms() const { return 1000.0 * static_cast<double>(samples.size()) / sample_rate; }
};

struct AugmentConfig {
    double shift_ms_range = 100.0;  // shift ~ Uniform[-range, +range] ms
    double noise_prob = 0.8;
    double noise_vol_max = 0.1;
    std::uint64_t seed = 0;

    void validate() const;
};

// WAV I/O. Only canonical RIFF/WAVE, PCM 16-bit, mono, 16 kHz is accepted;
// anything else raises FormatError naming the field, and a short data
// chunk raises CorruptFileError.
AudioClip read_wav(const std::filesystem::path& path);
AudioClip parse_wav(std::span<const std::uint8_t> bytes);

/// Samples are clamped to [-1, 1] and quantized with round-to-nearest.
std::vector<std::uint8_t> encode_wav(const AudioClip& clip);
void write_wav(const std::filesystem::path& path, const AudioClip& clip);

/// Positive shifts move content later in time and zero-fill the head.
AudioClip time_shift(const AudioClip& clip, double shift_ms);

/// Mixes noise[offset, offset + clip.size()) into the clip at `volume`.
AudioClip mix_noise(const AudioClip& clip, const AudioClip& noise, double volume,
                    std::size_t noise_offset);
/// As above with the crop offset drawn uniformly from `rng`.
AudioClip mix_noise(const AudioClip& clip, const AudioClip& noise, double volume,
                    std::mt19937_64& rng);

/// Zero-pads the tail or center-crops to exactly `length` samples.
AudioClip pad_or_crop(const AudioClip& clip, std::size_t length = kClipSamples);

/// Training-time augmentation: random shift, then noise mixing with
/// probability cfg.noise_prob from a randomly chosen noise clip. An empty
/// `noises` set disables mixing.
AudioClip augment(const AudioClip& clip, std::span<const AudioClip> noises,
                  const AugmentConfig& cfg, std::mt19937_64& rng);

}  // namespace kws::audio
