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

#include "kws/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <set>

#include <json.hpp>
#include <openssl/evp.h>

#include "kws/error.hpp"
#include "kws/file_util.hpp"

namespace kws::data {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string_view to_string(Split s)
{
    switch (s) {
    case Split::train:
        return "train";
    case Split::validation:
        return "validation";
    case Split::test:
        return "test";
    }
    return "train";
}

Split parse_split(std::string_view name)
{
    if (name == "train") return Split::train;
    if (name == "validation") return Split::validation;
    if (name == "test") return Split::test;
    throw ConfigError("unknown split '" + std::string(name) + "' (expected train|validation|test)");
}

const std::vector<std::string>& default_keywords()
{
    static const std::vector<std::string> words = {"yes",   "no",  "up",  "down", "left",
                                                   "right", "on",  "off", "stop", "go"};
    return words;
}

std::size_t DatasetManifest::count(Split s) const
{
    return static_cast<std::size_t>(
        std::count_if(entries.begin(), entries.end(), [s](const auto& e) { return e.split == s; }));
}

std::vector<ManifestEntry> DatasetManifest::entries_in(Split s) const
{
    std::vector<ManifestEntry> out;
    std::copy_if(entries.begin(), entries.end(), std::back_inserter(out),
                 [s](const auto& e) { return e.split == s; });
    return out;
}

int DatasetManifest::label_index(std::string_view name) const
{
    auto it = std::find(labels.begin(), labels.end(), name);
    return it == labels.end() ? -1 : static_cast<int>(it - labels.begin());
}

std::string speaker_token(std::string_view filename)
{
    const std::string base = fs::path(std::string(filename)).filename().string();
    const auto pos = base.find("_nohash_");
    if (pos != std::string::npos) {
        return base.substr(0, pos);
    }
    return fs::path(base).stem().string();
}

Split assign_split(std::string_view filename, int train_pct, int val_pct)
{
    if (train_pct < 0 || val_pct < 0 || train_pct + val_pct > 100) {
        throw ConfigError("split percentages must be non-negative and sum to at most 100");
    }
    const std::string token = speaker_token(filename);
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(token.data(), token.size(), digest, &len, EVP_sha1(), nullptr) != 1 || len != 20) {
        throw Error("SHA-1 digest failed");
    }
    // Last 8 hex digits of the hex digest = last 4 bytes, big-endian.
    const std::uint32_t tail = (static_cast<std::uint32_t>(digest[16]) << 24) |
                               (static_cast<std::uint32_t>(digest[17]) << 16) |
                               (static_cast<std::uint32_t>(digest[18]) << 8) |
                               static_cast<std::uint32_t>(digest[19]);
    const auto bucket = static_cast<int>(tail % 100u);
    if (bucket < train_pct) return Split::train;
    if (bucket < train_pct + val_pct) return Split::validation;
    return Split::test;
}

namespace {

std::vector<fs::path> wav_files_in(const fs::path& dir)
{
    std::vector<fs::path> files;
    for (const auto& ent : fs::directory_iterator(dir)) {
        if (ent.is_regular_file() && ent.path().extension() == ".wav") {
            files.push_back(ent.path());
        }
    }
    std::sort(files.begin(), files.end());
    return files;
}

std::string rel(const fs::path& p, const fs::path& root)
{
    return p.lexically_relative(root).generic_string();
}

bool entry_less(const ManifestEntry& a, const ManifestEntry& b)
{
    if (a.path != b.path) return a.path < b.path;
    return a.noise_offset.value_or(0) < b.noise_offset.value_or(0);
}

}  // namespace

DatasetManifest build_manifest(const fs::path& root, const ManifestConfig& cfg)
{
    if (cfg.keywords.empty()) {
        throw ConfigError("keyword list is empty");
    }
    if (cfg.keywords.size() + 2 > 12) {
        throw ConfigError("at most 10 keywords fit the 12-way output");
    }
    if (std::set<std::string>(cfg.keywords.begin(), cfg.keywords.end()).size() != cfg.keywords.size()) {
        throw ConfigError("keyword list contains duplicates");
    }
    if (!fs::is_directory(root)) {
        throw IngestionError("dataset root " + root.string() + " is not a directory");
    }

    std::vector<std::string> word_dirs;
    for (const auto& ent : fs::directory_iterator(root)) {
        const std::string name = ent.path().filename().string();
        if (ent.is_directory() && !name.empty() && name[0] != '_') {
            word_dirs.push_back(name);
        }
    }
    std::sort(word_dirs.begin(), word_dirs.end());
    if (word_dirs.empty()) {
        throw IngestionError("dataset root " + root.string() + " holds no word directories");
    }

    std::string missing;
    for (const auto& kw : cfg.keywords) {
        if (!std::binary_search(word_dirs.begin(), word_dirs.end(), kw)) {
            missing += (missing.empty() ? "" : ", ") + kw;
        }
    }
    if (!missing.empty()) {
        throw IngestionError("missing keyword directories: " + missing);
    }
    const fs::path noise_dir = root / std::string(kBackgroundNoiseDir);
    if (!fs::is_directory(noise_dir)) {
        throw IngestionError("missing " + std::string(kBackgroundNoiseDir) + " directory under " +
                             root.string());
    }

    DatasetManifest m;
    m.root = fs::absolute(root).lexically_normal();
    m.labels = cfg.keywords;
    m.labels.emplace_back(kUnknownLabel);
    m.labels.emplace_back(kSilenceLabel);
    const int unknown_id = static_cast<int>(cfg.keywords.size());
    const int silence_id = unknown_id + 1;

    std::mt19937_64 rng(cfg.seed);
    std::size_t keyword_files = 0;
    std::vector<fs::path> pool;
    for (const auto& word : word_dirs) {
        const auto files = wav_files_in(root / word);
        auto kw = std::find(cfg.keywords.begin(), cfg.keywords.end(), word);
        if (kw == cfg.keywords.end()) {
            pool.insert(pool.end(), files.begin(), files.end());
            continue;
        }
        keyword_files += files.size();
        const int label = static_cast<int>(kw - cfg.keywords.begin());
        for (const auto& f : files) {
            m.entries.push_back({rel(f, root), label,
                                 assign_split(f.filename().string(), cfg.train_pct, cfg.val_pct),
                                 std::nullopt, std::nullopt});
        }
    }
    const auto mean_count = static_cast<std::size_t>(
        std::llround(static_cast<double>(keyword_files) / static_cast<double>(cfg.keywords.size())));

    std::shuffle(pool.begin(), pool.end(), rng);
    pool.resize(std::min(pool.size(), mean_count));
    for (const auto& f : pool) {
        m.entries.push_back({rel(f, root), unknown_id,
                             assign_split(f.filename().string(), cfg.train_pct, cfg.val_pct),
                             std::nullopt, std::nullopt});
    }

    std::vector<std::pair<std::string, std::size_t>> noises;  // (path, length)
    for (const auto& f : wav_files_in(noise_dir)) {
        const auto clip = audio::read_wav(f);
        m.noise_files.push_back(rel(f, root));
        if (clip.size() >= audio::kClipSamples) {
            noises.emplace_back(rel(f, root), clip.size());
        }
    }
    if (mean_count > 0 && noises.empty()) {
        throw IngestionError("no background noise clip of at least one second in " + noise_dir.string());
    }
    std::uniform_real_distribution<double> vol(0.0, cfg.noise_vol_max);
    for (std::size_t i = 0; i < mean_count; ++i) {
        std::uniform_int_distribution<std::size_t> which(0, noises.size() - 1);
        const auto& [path, len] = noises[which(rng)];
        std::uniform_int_distribution<std::size_t> off(0, len - audio::kClipSamples);
        ManifestEntry e{path, silence_id,
                        assign_split("silence_" + std::to_string(i), cfg.train_pct, cfg.val_pct),
                        off(rng), std::nullopt};
        e.noise_volume = vol(rng);
        m.entries.push_back(std::move(e));
    }

    std::sort(m.entries.begin(), m.entries.end(), entry_less);
    return m;
}

std::string manifest_to_json(const DatasetManifest& m)
{
    json doc;
    doc["root"] = m.root.generic_string();
    doc["labels"] = m.labels;
    doc["noise"] = m.noise_files;
    json entries = json::array();
    for (const auto& e : m.entries) {
        json j{{"path", e.path}, {"label", e.label}, {"split", std::string(to_string(e.split))}};
        if (e.noise_offset) j["offset"] = *e.noise_offset;
        if (e.noise_volume) j["volume"] = *e.noise_volume;
        entries.push_back(std::move(j));
    }
    doc["entries"] = std::move(entries);
    return doc.dump(1) + "\n";
}

DatasetManifest manifest_from_json(std::string_view text, const fs::path& root_hint)
{
    DatasetManifest m;
    try {
        const json doc = json::parse(text);
        m.root = doc.at("root").get<std::string>();
        if (m.root.is_relative() && !root_hint.empty()) {
            m.root = (root_hint / m.root).lexically_normal();
        }
        m.labels = doc.at("labels").get<std::vector<std::string>>();
        m.noise_files = doc.value("noise", std::vector<std::string>{});
        for (const auto& j : doc.at("entries")) {
            ManifestEntry e;
            e.path = j.at("path").get<std::string>();
            e.label = j.at("label").get<int>();
            e.split = parse_split(j.at("split").get<std::string>());
            if (j.contains("offset")) e.noise_offset = j["offset"].get<std::size_t>();
            if (j.contains("volume")) e.noise_volume = j["volume"].get<double>();
            if (e.label < 0 || e.label >= static_cast<int>(m.labels.size())) {
                throw IngestionError("manifest entry " + e.path + " has label out of range");
            }
            m.entries.push_back(std::move(e));
        }
    } catch (const json::exception& e) {
        throw IngestionError(std::string("malformed manifest: ") + e.what());
    }
    return m;
}

void save_manifest(const DatasetManifest& m, const fs::path& path)
{
    atomic_write(path, manifest_to_json(m));
}

DatasetManifest load_manifest(const fs::path& path)
{
    const auto bytes = read_file_bytes(path);
    return manifest_from_json(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()),
                              path.parent_path());
}

audio::AudioClip load_entry_clip(const DatasetManifest& m, const ManifestEntry& e)
{
    const auto clip = audio::read_wav(m.root / e.path);
    if (e.is_synthetic()) {
        const audio::AudioClip silent{std::vector<float>(audio::kClipSamples, 0.0f), audio::kSampleRate};
        return audio::mix_noise(silent, clip, e.noise_volume.value_or(0.0), *e.noise_offset);
    }
    return audio::pad_or_crop(clip);
}

std::vector<audio::AudioClip> load_noise_clips(const DatasetManifest& m)
{
    std::vector<audio::AudioClip> out;
    for (const auto& p : m.noise_files) {
        out.push_back(audio::read_wav(m.root / p));
    }
    return out;
}

DatasetManifest write_tone_dataset(const fs::path& dir, const ToneDatasetConfig& cfg)
{
    if (cfg.classes < 1 || cfg.classes > 12) {
        throw ConfigError("tone dataset supports 1..12 classes");
    }
    fs::create_directories(dir / "tones");
    fs::create_directories(dir / std::string(kBackgroundNoiseDir));

    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    DatasetManifest m;
    m.root = fs::absolute(dir).lexically_normal();
    for (int c = 0; c < cfg.classes; ++c) {
        m.labels.push_back("tone" + std::to_string(c));
    }

    // Log-spaced centre frequencies between 300 Hz and 4 kHz.
    auto centre_hz = [&](int c) {
        if (cfg.classes == 1) return 1000.0;
        return 300.0 * std::pow(4000.0 / 300.0, static_cast<double>(c) / (cfg.classes - 1));
    };

    auto make_clip = [&](int c) {
        audio::AudioClip clip{std::vector<float>(audio::kClipSamples, 0.0f), audio::kSampleRate};
        const double f = centre_hz(c) * (1.0 + 0.06 * (unit(rng) - 0.5));
        const double amp = 0.2 + 0.4 * unit(rng);
        const double phase = 2.0 * std::numbers::pi * unit(rng);
        const auto len = static_cast<std::size_t>((0.3 + 0.4 * unit(rng)) * audio::kSampleRate);
        const auto onset = static_cast<std::size_t>(unit(rng) * static_cast<double>(audio::kClipSamples - len));
        const std::size_t fade = 400;
        for (std::size_t i = 0; i < len; ++i) {
            const double env = std::min({1.0, static_cast<double>(i) / fade,
                                         static_cast<double>(len - i) / fade});
            const double t = static_cast<double>(i) / audio::kSampleRate;
            clip.samples[onset + i] =
                static_cast<float>(amp * env * std::sin(2.0 * std::numbers::pi * f * t + phase));
        }
        for (auto& s : clip.samples) {
            s = static_cast<float>(std::clamp(s + 0.005 * gauss(rng), -1.0, 1.0));
        }
        return clip;
    };

    const std::pair<Split, int> plan[] = {{Split::train, cfg.train_per_class},
                                          {Split::validation, cfg.val_per_class},
                                          {Split::test, cfg.test_per_class}};
    for (const auto& [split, per_class] : plan) {
        for (int c = 0; c < cfg.classes; ++c) {
            for (int i = 0; i < per_class; ++i) {
                const std::string name = "tones/tone" + std::to_string(c) + "_" +
                                         std::string(to_string(split)) + std::to_string(i) +
                                         "_nohash_0.wav";
                audio::write_wav(dir / name, make_clip(c));
                m.entries.push_back({name, c, split, std::nullopt, std::nullopt});
            }
        }
    }

    audio::AudioClip noise{std::vector<float>(3 * audio::kClipSamples), audio::kSampleRate};
    for (auto& s : noise.samples) {
        s = static_cast<float>(std::clamp(0.3 * gauss(rng), -1.0, 1.0));
    }
    const std::string noise_name = std::string(kBackgroundNoiseDir) + "/white_noise.wav";
    audio::write_wav(dir / noise_name, noise);
    m.noise_files.push_back(noise_name);

    std::sort(m.entries.begin(), m.entries.end(), entry_less);
    save_manifest(m, dir / "manifest.json");
    return m;
}

}  // namespace kws::data
