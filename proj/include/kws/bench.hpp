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

#include <chrono>
#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "kws/audio.hpp"
#include "kws/dataset.hpp"
#include "kws/model.hpp"

namespace kws::bench {

enum class InputSource {
    fixed_clip,    // one seeded random clip reused for every run
    random_clips,  // a fresh seeded random clip per run
    fixtures,      // caller-supplied clips, cycled
};

std::string_view to_string(InputSource s);
InputSource parse_input_source(std::string_view name);

/// Monotonic time source; injectable so tests can script durations.
using Clock = std::function<std::chrono::nanoseconds()>;
Clock steady_clock();

struct BenchConfig {
    int runs = 100;
    int warmup = 10;
    InputSource source = InputSource::fixed_clip;
    std::vector<audio::AudioClip> fixtures;
    std::string device_label = "local";
    std::uint64_t seed = 0;
    Clock clock = steady_clock();

    void validate() const;
};

struct StageStats {
    double mean = 0, std = 0, min = 0, p50 = 0, p95 = 0, p99 = 0, max = 0;  // milliseconds
};

/// Linear interpolation between closest ranks; `sorted` ascending, p in [0, 100].
double percentile(const std::vector<double>& sorted, double p);
/// Population statistics; rejects empty input and non-positive durations.
StageStats summarize(std::vector<double> durations_ms);

struct BenchReport {
    std::string device_label;
    std::string model_name;
    int runs = 0;
    int warmup = 0;
    StageStats featurize;
    StageStats forward;
    StageStats end_to_end;
};

/// Warmup runs are discarded; every timed run records featurize, forward and
/// the whole run as separate clock intervals. Single-threaded.
BenchReport run_bench(const nn::Model& m, const BenchConfig& cfg, const std::string& model_name);

std::string report_json(const BenchReport& r);
/// One row per stage: device,model,stage,runs,warmup,mean,std,min,p50,p95,p99,max.
void write_report_csv(std::ostream& out, const std::vector<BenchReport>& reports);

struct NamedModel {
    std::string name;
    nn::Model model;
};

struct TradeoffRow {
    std::string name;
    std::int64_t params = 0;
    std::int64_t multiplies = 0;
    double accuracy = 0.0;
    double p50_ms = 0.0;
};

/// Test-split accuracy and end-to-end p50 per model, sorted by multiplies
/// ascending.
std::vector<TradeoffRow> emit_tradeoff(const std::vector<NamedModel>& models, const data::DatasetManifest& manifest,
                                       const BenchConfig& cfg);
/// Columns: name,params,multiplies,accuracy,p50_ms.
void write_tradeoff_csv(std::ostream& out, const std::vector<TradeoffRow>& rows);

}  // namespace kws::bench
