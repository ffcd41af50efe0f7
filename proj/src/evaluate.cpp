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

#include "kws/evaluate.hpp"

#include <algorithm>

#include "kws/error.hpp"

namespace kws::eval {

double evaluate_accuracy(const Predictor& predict, const data::DatasetManifest& manifest, data::Split split)
{
    const auto entries = manifest.entries_in(split);
    if (entries.empty()) {
        throw ContractError("manifest has no " + std::string(data::to_string(split)) + " entries");
    }
    const auto& extractor = features::default_extractor();
    std::size_t correct = 0;
    for (const auto& e : entries) {
        const auto scores = predict(e, extractor.compute(data::load_entry_clip(manifest, e)));
        if (scores.empty()) throw ContractError("predictor returned no scores");
        const auto arg = std::max_element(scores.begin(), scores.end()) - scores.begin();
        if (arg == e.label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(entries.size());
}

double evaluate_accuracy(const nn::Model& m, const data::DatasetManifest& manifest, data::Split split)
{
    if (!(m.mfcc == features::MfccConfig{})) {
        throw ContractError("evaluate: model expects a non-default feature configuration");
    }
    return evaluate_accuracy(
        [&m](const data::ManifestEntry&, const features::FeatureMatrix& f) {
            return nn::model_forward(m, f).posteriors;
        },
        manifest, split);
}

}  // namespace kws::eval
