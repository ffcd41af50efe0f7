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

#include "kws/model_store.hpp"

#include <bit>
#include <cstring>

#include <json.hpp>

#include "kws/error.hpp"
#include "kws/file_util.hpp"

namespace kws::store {

namespace {

using nlohmann::json;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at)
{
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[at + static_cast<std::size_t>(i)]) << (8 * i);
    return v;
}

json mfcc_json(const features::MfccConfig& c)
{
    return {{"sample_rate", c.sample_rate}, {"win_length", c.win_length}, {"hop", c.hop},
            {"fft_size", c.fft_size},       {"n_mels", c.n_mels},         {"n_mfcc", c.n_mfcc},
            {"fmin", c.fmin},               {"fmax", c.fmax},             {"log_floor", c.log_floor}};
}

features::MfccConfig mfcc_from_json(const json& j)
{
    features::MfccConfig c;
    c.sample_rate = j.at("sample_rate").get<int>();
    c.win_length = j.at("win_length").get<int>();
    c.hop = j.at("hop").get<int>();
    c.fft_size = j.at("fft_size").get<int>();
    c.n_mels = j.at("n_mels").get<int>();
    c.n_mfcc = j.at("n_mfcc").get<int>();
    c.fmin = j.at("fmin").get<double>();
    c.fmax = j.at("fmax").get<double>();
    c.log_floor = j.at("log_floor").get<double>();
    return c;
}

constexpr std::uint8_t kMagic[4] = {'K', 'W', 'S', 'M'};
constexpr std::size_t kHeaderBytes = 12;

}  // namespace

std::vector<std::uint8_t> serialize_model(const nn::Model& m)
{
    nn::validate_model(m);
    json meta;
    meta["arch"] = m.spec.arch;
    meta["base_channels"] = m.spec.base_channels;
    meta["inner_widths"] = m.spec.inner_widths;
    meta["slim_ready"] = m.spec.slim_ready;
    meta["labels"] = m.labels;
    meta["mfcc"] = mfcc_json(m.mfcc);
    json tensors = json::array();
    std::size_t floats = 0;
    for (const auto& ref : nn::model_tensors(m)) {
        tensors.push_back({{"name", ref.name}, {"shape", ref.tensor->shape()}});
        floats += ref.tensor->size();
    }
    meta["tensors"] = tensors;
    const std::string text = meta.dump();

    std::vector<std::uint8_t> out;
    out.reserve(kHeaderBytes + text.size() + 4 * floats);
    for (std::uint8_t c : kMagic) out.push_back(c);
    put_u32(out, kFormatVersion);
    put_u32(out, static_cast<std::uint32_t>(text.size()));
    out.insert(out.end(), text.begin(), text.end());
    for (const auto& ref : nn::model_tensors(m)) {
        for (float v : ref.tensor->values()) put_u32(out, std::bit_cast<std::uint32_t>(v));
    }
    return out;
}

nn::Model load_model_bytes(std::span<const std::uint8_t> bytes)
{
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw ModelFileError("not a model file (missing KWSM magic)");
    }
    if (bytes.size() < kHeaderBytes) throw ModelFileError("corrupt model file: header truncated");
    const std::uint32_t version = get_u32(bytes, 4);
    if (version != kFormatVersion) {
        throw ModelFileError("unsupported model file version " + std::to_string(version) + " (expected " +
                             std::to_string(kFormatVersion) + ")");
    }
    const std::uint32_t meta_len = get_u32(bytes, 8);
    if (meta_len > bytes.size() - kHeaderBytes) {
        throw ModelFileError("corrupt model file: metadata length " + std::to_string(meta_len) +
                             " exceeds file size");
    }

    nn::Model m;
    std::vector<std::pair<std::string, nn::Shape>> declared;
    try {
        const json meta = json::parse(bytes.begin() + kHeaderBytes, bytes.begin() + kHeaderBytes + meta_len);
        m.spec.arch = meta.at("arch").get<std::string>();
        m.spec.base_channels = meta.at("base_channels").get<int>();
        m.spec.inner_widths = meta.at("inner_widths").get<std::array<int, nn::kNumBlocks>>();
        m.spec.slim_ready = meta.at("slim_ready").get<bool>();
        m.labels = meta.at("labels").get<std::vector<std::string>>();
        m.mfcc = mfcc_from_json(meta.at("mfcc"));
        for (const auto& t : meta.at("tensors")) {
            declared.emplace_back(t.at("name").get<std::string>(), t.at("shape").get<nn::Shape>());
        }
    } catch (const json::exception& e) {
        throw ModelFileError(std::string("corrupt model file: bad metadata: ") + e.what());
    }

    std::size_t expected = 0;
    for (const auto& [name, shape] : declared) expected += 4 * nn::shape_size(shape);
    const std::size_t actual = bytes.size() - kHeaderBytes - meta_len;
    if (actual != expected) {
        throw ModelFileError("corrupt model file: payload is " + std::to_string(actual) + " bytes, expected " +
                             std::to_string(expected));
    }

    try {
        m.spec.validate();
        m.mfcc.validate();
    } catch (const Error& e) {
        throw ModelFileError(std::string("corrupt model file: ") + e.what());
    }
    if (declared != nn::expected_tensor_shapes(m.spec)) {
        throw ModelFileError("corrupt model file: tensor list does not match the declared architecture");
    }

    // gamma presence decides which tensors model_tensors() enumerates.
    for (std::size_t b = 0; b < nn::kNumBlocks; ++b) {
        m.blocks[b].bn1.gamma.reset();
        if (m.spec.slim_ready) m.blocks[b].bn1.gamma = nn::Tensor({1});
    }
    std::size_t at = kHeaderBytes + meta_len;
    auto refs = nn::model_tensors(m);
    if (refs.size() != declared.size()) {
        throw ModelFileError("corrupt model file: tensor count mismatch");
    }
    for (std::size_t i = 0; i < refs.size(); ++i) {
        nn::Tensor t(declared[i].second);
        for (std::size_t j = 0; j < t.size(); ++j, at += 4) t[j] = std::bit_cast<float>(get_u32(bytes, at));
        *refs[i].tensor = std::move(t);
    }
    try {
        nn::validate_model(m);
    } catch (const ContractError& e) {
        throw ModelFileError(std::string("corrupt model file: ") + e.what());
    }
    return m;
}

void save_model(const nn::Model& m, const std::filesystem::path& path)
{
    atomic_write(path, serialize_model(m));
}

nn::Model load_model(const std::filesystem::path& path)
{
    return load_model_bytes(read_file_bytes(path));
}

}  // namespace kws::store
