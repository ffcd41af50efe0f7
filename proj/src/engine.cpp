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

#include "kws/engine.hpp"

#include <chrono>

#include <json.hpp>

#include "kws/error.hpp"
#include "kws/file_util.hpp"
#include "kws/model_store.hpp"

namespace kws::engine {

Engine::Engine(nn::Model model) : model_(std::move(model))
{
    nn::validate_model(model_);
    extractor_ = std::make_shared<const features::MfccExtractor>(model_.mfcc);
}

Engine Engine::from_bytes(std::span<const std::uint8_t> kwsm)
{
    return Engine(store::load_model_bytes(kwsm));
}

InferResult Engine::infer_pcm(std::span<const float> pcm) const
{
    const auto n = static_cast<std::size_t>(model_.mfcc.sample_rate);
    if (pcm.size() != n) {
        throw ContractError("infer_pcm expects " + std::to_string(n) + " samples, got " + std::to_string(pcm.size()));
    }
    const audio::AudioClip clip{std::vector<float>(pcm.begin(), pcm.end()), model_.mfcc.sample_rate};
    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();
    const auto f = extractor_->compute(clip);
    const auto t1 = clock::now();
    const auto r = nn::model_forward(model_, f);
    const auto t2 = clock::now();

    InferResult out;
    for (std::size_t i = 0; i < out.posteriors.size(); ++i) out.posteriors[i] = static_cast<float>(r.posteriors[i]);
    out.featurize_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    out.forward_ms = std::chrono::duration<double, std::milli>(t2 - t1).count();
    return out;
}

ExportedAssets export_assets(const nn::Model& m, const std::filesystem::path& dir, const std::string& name)
{
    if (name.empty() || name.find('/') != std::string::npos || name.find('\\') != std::string::npos) {
        throw ConfigError("export: model name must be a plain file stem, got '" + name + "'");
    }
    ExportedAssets out{dir / "models" / (name + ".kwsm"), dir / "labels.json"};
    std::filesystem::create_directories(out.model_file.parent_path());
    store::save_model(m, out.model_file);
    atomic_write(out.labels_file, nlohmann::json(m.labels).dump(2) + "\n");
    return out;
}

}  // namespace kws::engine

struct kws_engine {
    kws::engine::Engine engine;
};

namespace {
thread_local std::string g_last_error;
}

extern "C" {

kws_engine* kws_load_model(const std::uint8_t* bytes, std::size_t len)
{
    g_last_error.clear();
    if (!bytes) {
        g_last_error = "null model buffer";
        return nullptr;
    }
    try {
        return new kws_engine{kws::engine::Engine::from_bytes({bytes, len})};
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return nullptr;
    }
}

int kws_infer_pcm(const kws_engine* e, const float* pcm, std::size_t n, float* posteriors, double* featurize_ms,
                  double* forward_ms)
{
    g_last_error.clear();
    if (!e || !pcm || !posteriors) {
        g_last_error = "null argument";
        return 1;
    }
    try {
        const auto r = e->engine.infer_pcm({pcm, n});
        std::copy(r.posteriors.begin(), r.posteriors.end(), posteriors);
        if (featurize_ms) *featurize_ms = r.featurize_ms;
        if (forward_ms) *forward_ms = r.forward_ms;
        return 0;
    } catch (const std::exception& ex) {
        g_last_error = ex.what();
        return 1;
    }
}

void kws_free_model(kws_engine* e)
{
    delete e;
}

const char* kws_last_error(void)
{
    return g_last_error.c_str();
}
}
