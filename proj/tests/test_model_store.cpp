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

#include <cstring>

#include "kws/error.hpp"
#include "kws/file_util.hpp"
#include "kws/model_store.hpp"
#include "kws/slimming.hpp"
#include "test_support.hpp"

using namespace kws;
using namespace kws::store;

namespace {

nn::Model seeded(std::uint64_t seed, bool slim = true)
{
    std::mt19937_64 rng(seed);
    auto m = nn::make_model(nn::ModelSpec::res8_narrow(slim), seed);
    test::randomize_model(m, rng);
    return m;
}

bool bitwise_equal(const nn::Model& a, const nn::Model& b)
{
    const auto ta = nn::model_tensors(a), tb = nn::model_tensors(b);
    if (ta.size() != tb.size()) return false;
    for (std::size_t i = 0; i < ta.size(); ++i) {
        if (ta[i].name != tb[i].name || ta[i].tensor->shape() != tb[i].tensor->shape()) return false;
        if (std::memcmp(ta[i].tensor->data(), tb[i].tensor->data(), 4 * ta[i].tensor->size()) != 0) return false;
    }
    return a.spec == b.spec && a.labels == b.labels && a.mfcc == b.mfcc;
}

}  // namespace

TEST(ModelStore, RoundTripIsBitwise)
{
    const auto dir = test::scratch_dir("store_roundtrip");
    auto m = seeded(1);
    // Values that a decimal or lossy encoding would disturb.
    m.conv0[0] = -0.0f;
    m.conv0[1] = 1e-40f;  // subnormal
    m.conv0[2] = std::nextafter(1.0f, 2.0f);
    save_model(m, dir / "m.kwsm");
    const auto back = load_model(dir / "m.kwsm");
    EXPECT_TRUE(bitwise_equal(m, back));
    EXPECT_TRUE(std::signbit(back.conv0[0]));
}

TEST(ModelStore, HeaderLayout)
{
    const auto bytes = serialize_model(seeded(2, false));
    ASSERT_GT(bytes.size(), 12u);
    EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "KWSM");
    EXPECT_EQ(bytes[4], 1);
    EXPECT_EQ(bytes[5] | bytes[6] | bytes[7], 0);
    const std::uint32_t meta = bytes[8] | bytes[9] << 8 | bytes[10] << 16 | static_cast<std::uint32_t>(bytes[11]) << 24;
    EXPECT_EQ(bytes.size(), 12 + meta + 4 * static_cast<std::size_t>(19905 + 3 * 4 * 19));
    const auto meta_json = std::string(bytes.begin() + 12, bytes.begin() + 12 + meta);
    EXPECT_NE(meta_json.find("\"arch\":\"res8-narrow\""), std::string::npos);
    EXPECT_NE(meta_json.find("\"mfcc\""), std::string::npos);
}

TEST(ModelStore, FirstPayloadFloatIsLittleEndian)
{
    auto m = seeded(3, false);
    m.conv0[0] = 1.0f;  // 0x3f800000
    const auto bytes = serialize_model(m);
    const std::uint32_t meta = bytes[8] | bytes[9] << 8 | bytes[10] << 16 | static_cast<std::uint32_t>(bytes[11]) << 24;
    const std::size_t at = 12 + meta;
    EXPECT_EQ(bytes[at], 0x00);
    EXPECT_EQ(bytes[at + 1], 0x00);
    EXPECT_EQ(bytes[at + 2], 0x80);
    EXPECT_EQ(bytes[at + 3], 0x3f);
}

TEST(ModelStore, BadMagic)
{
    auto bytes = serialize_model(seeded(4));
    std::memcpy(bytes.data(), "XXXX", 4);
    try {
        load_model_bytes(bytes);
        FAIL();
    } catch (const ModelFileError& e) {
        EXPECT_NE(std::string(e.what()).find("not a model file"), std::string::npos);
    }
    EXPECT_THROW(load_model_bytes(std::vector<std::uint8_t>{'K', 'W'}), ModelFileError);
}

TEST(ModelStore, UnsupportedVersion)
{
    auto bytes = serialize_model(seeded(5));
    bytes[4] = 2;
    try {
        load_model_bytes(bytes);
        FAIL();
    } catch (const ModelFileError& e) {
        EXPECT_NE(std::string(e.what()).find("version 2"), std::string::npos);
    }
}

TEST(ModelStore, TruncatedPayloadNamesByteCounts)
{
    auto bytes = serialize_model(seeded(6));
    const std::size_t full = bytes.size();
    bytes.resize(full - 4);
    try {
        load_model_bytes(bytes);
        FAIL();
    } catch (const ModelFileError& e) {
        const std::string msg = e.what();
        const std::uint32_t meta = bytes[8] | bytes[9] << 8 | bytes[10] << 16 | static_cast<std::uint32_t>(bytes[11]) << 24;
        const std::size_t expected = full - 12 - meta;
        EXPECT_NE(msg.find(std::to_string(expected)), std::string::npos) << msg;
        EXPECT_NE(msg.find(std::to_string(expected - 4)), std::string::npos) << msg;
    }
    bytes.resize(full + 4);
    EXPECT_THROW(load_model_bytes(bytes), ModelFileError);
}

TEST(ModelStore, MetadataThatDisagreesWithSpecIsRejected)
{
    auto bytes = serialize_model(seeded(7, false));
    std::string text(bytes.begin(), bytes.end());
    const auto pos = text.find("\"base_channels\":19");
    ASSERT_NE(pos, std::string::npos);
    bytes[pos + 17] = '8';  // 18 channels no longer matches the tensor shapes
    EXPECT_THROW(load_model_bytes(bytes), ModelFileError);
}

TEST(ModelStore, MissingFileIsIoError)
{
    EXPECT_THROW(load_model(test::scratch_dir("store_missing") / "nope.kwsm"), IoError);
}

TEST(ModelStore, SaveLeavesNoTemporaries)
{
    const auto dir = test::scratch_dir("store_atomic");
    save_model(seeded(8), dir / "a.kwsm");
    save_model(seeded(9), dir / "a.kwsm");
    std::size_t files = 0;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        (void)e;
        ++files;
    }
    EXPECT_EQ(files, 1u);
    EXPECT_TRUE(bitwise_equal(load_model(dir / "a.kwsm"), seeded(9)));
}

TEST(ModelStore, PrunedVariantsRoundTrip)
{
    const auto m = seeded(10);
    for (double f : {0.4, 0.8}) {
        slim::SlimConfig cfg;
        cfg.fraction = f;
        const auto p = slim::prune_model(m, slim::select_channels(slim::collect_gammas(m), cfg));
        EXPECT_TRUE(bitwise_equal(load_model_bytes(serialize_model(p)), p));
    }
}
