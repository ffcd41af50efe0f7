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

#include "kws/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <optional>
#include <string>

#include "kws/error.hpp"
#include "kws/file_util.hpp"

namespace kws::audio {

namespace {

std::uint16_t read_u16(std::span<const std::uint8_t> b, std::size_t at)
{
    return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

std::uint32_t read_u32(std::span<const std::uint8_t> b, std::size_t at)
{
    return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
           (static_cast<std::uint32_t>(b[at + 2]) << 16) | (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v)
{
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
    }
}

bool tag_is(std::span<const std::uint8_t> b, std::size_t at, const char* tag)
{
    return std::memcmp(b.data() + at, tag, 4) == 0;
}

struct FmtChunk {
    std::uint16_t format = 0;
    std::uint16_t channels = 0;
    std::uint32_t rate = 0;
    std::uint16_t bits = 0;
};

}  // namespace

void AugmentConfig::validate() const
{
    if (!(shift_ms_range >= 0.0)) {
        throw ConfigError("augment: shift range must be >= 0");
    }
    if (!(noise_prob >= 0.0 && noise_prob <= 1.0)) {
        throw ConfigError("augment: noise_prob must lie in [0, 1]");
    }
    if (!(noise_vol_max >= 0.0)) {
        throw ConfigError("augment: noise_vol_max must be >= 0");
    }
}

AudioClip parse_wav(std::span<const std::uint8_t> b)
{
    if (b.size() < 12 || !tag_is(b, 0, "RIFF") || !tag_is(b, 8, "WAVE")) {
        throw FormatError("not a RIFF/WAVE file");
    }

    std::optional<FmtChunk> fmt;
    std::size_t pos = 12;
    while (pos + 8 <= b.size()) {
        const std::uint32_t chunk_size = read_u32(b, pos + 4);
        const std::size_t body = pos + 8;

        if (tag_is(b, pos, "fmt ")) {
            if (chunk_size < 16 || body + 16 > b.size()) {
                throw CorruptFileError("fmt chunk truncated");
            }
            fmt = FmtChunk{read_u16(b, body), read_u16(b, body + 2), read_u32(b, body + 4),
                           read_u16(b, body + 14)};
            if (fmt->format != 1) {
                throw FormatError("unsupported audio format " + std::to_string(fmt->format) +
                                  " (expected PCM = 1)");
            }
            if (fmt->channels != 1) {
                throw FormatError("unsupported channel count " + std::to_string(fmt->channels) +
                                  " (expected mono)");
            }
            if (fmt->rate != static_cast<std::uint32_t>(kSampleRate)) {
                throw FormatError("unsupported sample rate " + std::to_string(fmt->rate) +
                                  " Hz (expected 16000)");
            }
            if (fmt->bits != 16) {
                throw FormatError("unsupported bits per sample " + std::to_string(fmt->bits) +
                                  " (expected 16)");
            }
        } else if (tag_is(b, pos, "data")) {
            if (!fmt) {
                throw CorruptFileError("data chunk precedes fmt chunk");
            }
            if (body + chunk_size > b.size()) {
                throw CorruptFileError("data chunk truncated: header declares " +
                                       std::to_string(chunk_size) + " bytes, " +
                                       std::to_string(b.size() - body) + " present");
            }
            if (chunk_size % 2 != 0) {
                throw CorruptFileError("data chunk holds a partial sample");
            }
            AudioClip clip;
            clip.sample_rate = kSampleRate;
            clip.samples.resize(chunk_size / 2);
            for (std::size_t i = 0; i < clip.samples.size(); ++i) {
                const auto raw = static_cast<std::int16_t>(read_u16(b, body + 2 * i));
                clip.samples[i] = static_cast<float>(raw / 32768.0);
            }
            if (clip.samples.empty()) {
                throw CorruptFileError("data chunk is empty");
            }
            return clip;
        }
        // Chunks are word aligned.
        pos = body + chunk_size + (chunk_size & 1u);
    }
    throw CorruptFileError(fmt ? "missing data chunk" : "missing fmt chunk");
}

AudioClip read_wav(const std::filesystem::path& path)
{
    const auto bytes = read_file_bytes(path);
    try {
        return parse_wav(bytes);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    } catch (const CorruptFileError& e) {
        throw CorruptFileError(path.string() + ": " + e.what());
    }
}

std::vector<std::uint8_t> encode_wav(const AudioClip& clip)
{
    const auto data_bytes = static_cast<std::uint32_t>(clip.samples.size() * 2);
    std::vector<std::uint8_t> out;
    out.reserve(44 + data_bytes);
    out.insert(out.end(), {'R', 'I', 'F', 'F'});
    put_u32(out, 36 + data_bytes);
    out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
    put_u32(out, 16);
    put_u16(out, 1);
    put_u16(out, 1);
    put_u32(out, static_cast<std::uint32_t>(clip.sample_rate));
    put_u32(out, static_cast<std::uint32_t>(clip.sample_rate) * 2);
    put_u16(out, 2);
    put_u16(out, 16);
    out.insert(out.end(), {'d', 'a', 't', 'a'});
    put_u32(out, data_bytes);
    for (float s : clip.samples) {
        const double scaled = std::nearbyint(std::clamp(static_cast<double>(s), -1.0, 1.0) * 32768.0);
        const auto q = static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
        put_u16(out, static_cast<std::uint16_t>(q));
    }
    return out;
}

void write_wav(const std::filesystem::path& path, const AudioClip& clip)
{
    auto bytes = encode_wav(clip);
    atomic_write(path, bytes);
}

AudioClip time_shift(const AudioClip& clip, double shift_ms)
{
    const long shift = std::lround(shift_ms * clip.sample_rate / 1000.0);
    const auto n = static_cast<long>(clip.samples.size());
    if (std::labs(shift) > n) {
        throw RangeError("time shift of " + std::to_string(shift_ms) + " ms exceeds clip length " +
                         std::to_string(clip.duration_ms()) + " ms");
    }
    AudioClip out{std::vector<float>(clip.samples.size(), 0.0f), clip.sample_rate};
    if (shift >= 0) {
        std::copy(clip.samples.begin(), clip.samples.end() - shift, out.samples.begin() + shift);
    } else {
        std::copy(clip.samples.begin() - shift, clip.samples.end(), out.samples.begin());
    }
    return out;
}

AudioClip mix_noise(const AudioClip& clip, const AudioClip& noise, double volume,
                    std::size_t noise_offset)
{
    if (!(volume >= 0.0)) {
        throw RangeError("noise volume must be >= 0");
    }
    if (noise.samples.size() < clip.samples.size()) {
        throw RangeError("noise clip (" + std::to_string(noise.samples.size()) +
                         " samples) shorter than target clip (" +
                         std::to_string(clip.samples.size()) + ")");
    }
    if (noise_offset > noise.samples.size() - clip.samples.size()) {
        throw RangeError("noise crop offset out of range");
    }
    AudioClip out{clip.samples, clip.sample_rate};
    for (std::size_t i = 0; i < out.samples.size(); ++i) {
        const double v = static_cast<double>(clip.samples[i]) +
                         volume * static_cast<double>(noise.samples[noise_offset + i]);
        out.samples[i] = static_cast<float>(std::clamp(v, -1.0, 1.0));
    }
    return out;
}

AudioClip mix_noise(const AudioClip& clip, const AudioClip& noise, double volume,
                    std::mt19937_64& rng)
{
    if (noise.samples.size() < clip.samples.size()) {
        return mix_noise(clip, noise, volume, 0);  // raises RangeError
    }
    std::uniform_int_distribution<std::size_t> pick(0, noise.samples.size() - clip.samples.size());
    return mix_noise(clip, noise, volume, pick(rng));
}

AudioClip pad_or_crop(const AudioClip& clip, std::size_t length)
{
    AudioClip out{std::vector<float>(length, 0.0f), clip.sample_rate};
    if (clip.samples.size() <= length) {
        std::copy(clip.samples.begin(), clip.samples.end(), out.samples.begin());
    } else {
        const std::size_t start = (clip.samples.size() - length) / 2;
        std::copy_n(clip.samples.begin() + static_cast<std::ptrdiff_t>(start), length,
                    out.samples.begin());
    }
    return out;
}

AudioClip augment(const AudioClip& clip, std::span<const AudioClip> noises,
                  const AugmentConfig& cfg, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> shift_dist(-cfg.shift_ms_range, cfg.shift_ms_range);
    const double max_shift = clip.duration_ms();
    AudioClip out = time_shift(clip, std::clamp(shift_dist(rng), -max_shift, max_shift));

    std::bernoulli_distribution use_noise(cfg.noise_prob);
    if (noises.empty() || !use_noise(rng)) {
        return out;
    }
    std::uniform_int_distribution<std::size_t> which(0, noises.size() - 1);
    std::uniform_real_distribution<double> vol(0.0, cfg.noise_vol_max);
    const AudioClip& noise = noises[which(rng)];
    const double volume = vol(rng);
    if (noise.samples.size() < out.samples.size()) {
        return out;
    }
    return mix_noise(out, noise, volume, rng);
}

}  // namespace kws::audio
