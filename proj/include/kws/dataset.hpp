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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kws/audio.hpp"

namespace kws::data {

enum class Split { train, validation, test };

std::string_view to_string(Split s);
Split parse_split(std::string_view name);

inline constexpr std::string_view kBackgroundNoiseDir = "_background_noise_";
inline constexpr std::string_view kUnknownLabel = "unknown";
inline constexpr std::string_view kSilenceLabel = "silence";

/// The ten target words of the standard 12-class task; unknown and silence
/// are appended by build_manifest.
const std::vector<std::string>& default_keywords();

struct ManifestEntry {
    std::string path;  // relative to DatasetManifest::root
    int label = 0;
    Split split = Split::train;
    // Silence entries are a crop of the noise clip at `path`.
    std::optional<std::size_t> noise_offset;
    std::optional<double> noise_volume;

    bool is_synthetic() const { return noise_offset.has_value(); }
    friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct DatasetManifest {
    std::filesystem::path root;
    std::vector<std::string> labels;
    std::vector<std::string> noise_files;  // relative to root
    std::vector<ManifestEntry> entries;    // sorted by (path, offset)

    std::size_t count(Split s) const;
    std::vector<ManifestEntry> entries_in(Split s) const;
    int label_index(std::string_view name) const;
};

struct ManifestConfig {
    std::vector<std::string> keywords = default_keywords();
    double noise_vol_max = 0.1;  // silence synthesis volume ~ Uniform[0, max]
    std::uint64_t seed = 0;
    int train_pct = 80;
    int val_pct = 10;
};

/// Portion of a file name identifying its speaker: the text before
/// "_nohash_", else the stem.
std::string speaker_token(std::string_view filename);

/// Deterministic split from the low 32 bits of SHA-1(speaker token) mod 100.
Split assign_split(std::string_view filename, int train_pct = 80, int val_pct = 10);

/// Walks `root`: one directory per word plus `_background_noise_`.
/// Target keywords become labels 0..k-1, other words are pooled and
/// downsampled into "unknown", and "silence" is synthesized from noise crops.
DatasetManifest build_manifest(const std::filesystem::path& root, const ManifestConfig& cfg);

std::string manifest_to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(std::string_view text, const std::filesystem::path& root_hint = {});
void save_manifest(const DatasetManifest& m, const std::filesystem::path& path);
DatasetManifest load_manifest(const std::filesystem::path& path);

/// Reads the entry's audio (rendering silence crops) and pads/crops it to
/// one second.
audio::AudioClip load_entry_clip(const DatasetManifest& m, const ManifestEntry& e);
std::vector<audio::AudioClip> load_noise_clips(const DatasetManifest& m);

/// Synthetic tone-classification corpus: one pure-ish tone per class with
/// random onset, length, amplitude and jitter, plus a white-noise file for
/// augmentation. Writes WAVs and `manifest.json` under `dir`.
struct ToneDatasetConfig {
    int classes = 3;
    int train_per_class = 50;
    int val_per_class = 10;
    int test_per_class = 20;
    std::uint64_t seed = 7;
};

DatasetManifest write_tone_dataset(const std::filesystem::path& dir, const ToneDatasetConfig& cfg);

}  // namespace kws::data
