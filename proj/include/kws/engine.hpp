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

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>

#include "kws/features.hpp"
#include "kws/model.hpp"

// Embedding surface for hosts such as the browser demo: a model loaded from
// .kwsm bytes, and one call that featurizes and classifies a one-second
// window of 16 kHz PCM.

namespace kws::engine {

struct InferResult {
    std::array<float, nn::kNumLabels> posteriors{};
    double featurize_ms = 0.0;
    double forward_ms = 0.0;
};

class Engine {
public:
    explicit Engine(nn::Model model);
    static Engine from_bytes(std::span<const std::uint8_t> kwsm);

    /// `pcm` must hold exactly one second of samples in [-1, 1].
    InferResult infer_pcm(std::span<const float> pcm) const;

    const nn::Model& model() const { return model_; }

private:
    nn::Model model_;
    std::shared_ptr<const features::MfccExtractor> extractor_;
};

struct ExportedAssets {
    std::filesystem::path model_file;
    std::filesystem::path labels_file;
};

/// Writes `<dir>/models/<name>.kwsm` and `<dir>/labels.json`.
ExportedAssets export_assets(const nn::Model& m, const std::filesystem::path& dir, const std::string& name);

}  // namespace kws::engine

extern "C" {

typedef struct kws_engine kws_engine;

/// Returns null on failure; see kws_last_error().
kws_engine* kws_load_model(const std::uint8_t* bytes, std::size_t len);
/// `pcm` holds 16000 samples, `posteriors` room for 12. Returns 0 on success.
int kws_infer_pcm(const kws_engine* e, const float* pcm, std::size_t n, float* posteriors, double* featurize_ms,
                  double* forward_ms);
void kws_free_model(kws_engine* e);
/// Message of the last failure on this thread, or "".
const char* kws_last_error(void);
}
