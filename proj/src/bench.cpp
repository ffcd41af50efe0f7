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

#include "kws/bench.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <json.hpp>

#include "kws/error.hpp"
#include "kws/evaluate.hpp"
#include "kws/features.hpp"

namespace kws::bench {

std::string_view to_string(InputSource s)
{
    switch (s) {
    case InputSource::fixed_clip: return "fixed";
    case InputSource::random_clips: return "random";
    case InputSource::fixtures: return "fixtures";
    }
    return "?";
}

InputSource parse_input_source(std::string_view name)
{
    if (name == "fixed") return InputSource::fixed_clip;
    if (name == "random") return InputSource::random_clips;
    if (name == "fixtures") return InputSource::fixtures;
    throw ConfigError("unknown bench input source '" + std::string(name) + "' (expected fixed|random|fixtures)");
}

Clock steady_clock()
{
    return [] {
        return std::chrono::duration_cast<std::chrono::nanoseconds>(
            std::chrono::steady_clock::now().time_since_epoch());
    };
}

void BenchConfig::validate() const
{
    if (runs < 1) throw ConfigError("bench: runs must be >= 1");
    if (warmup < 0) throw ConfigError("bench: warmup must be >= 0");
    if (source == InputSource::fixtures && fixtures.empty()) {
        throw ConfigError("bench: fixture input selected but no fixture clips given");
    }
    if (!clock) throw ConfigError("bench: no clock");
}

double percentile(const std::vector<double>& sorted, double p)
{
    if (sorted.empty()) throw ContractError("percentile of an empty sample");
    if (!(p >= 0.0 && p <= 100.0)) throw ContractError("percentile outside [0, 100]");
    const double rank = p / 100.0 * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(rank));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = rank - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

StageStats summarize(std::vector<double> ms)
{
    if (ms.empty()) throw ContractError("summarize: no samples");
    for (double v : ms) {
        if (!(v > 0.0)) throw HarnessError("zero or negative duration recorded; clock resolution insufficient");
    }
    std::sort(ms.begin(), ms.end());
    StageStats s;
    const double n = static_cast<double>(ms.size());
    s.mean = std::accumulate(ms.begin(), ms.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : ms) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / n);
    s.min = ms.front();
    s.max = ms.back();
    s.p50 = percentile(ms, 50);
    s.p95 = percentile(ms, 95);
    s.p99 = percentile(ms, 99);
    return s;
}

BenchReport run_bench(const nn::Model& m, const BenchConfig& cfg, const std::string& model_name)
{
    cfg.validate();
    nn::validate_model(m);
    const features::MfccExtractor extractor(m.mfcc);
    const auto clip_len = static_cast<std::size_t>(m.mfcc.sample_rate);

    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<float> amp(-0.5f, 0.5f);
    auto random_clip = [&] {
        audio::AudioClip c{std::vector<float>(clip_len), m.mfcc.sample_rate};
        for (auto& s : c.samples) s = amp(rng);
        return c;
    };
    const audio::AudioClip fixed = random_clip();

    const int total = cfg.warmup + cfg.runs;
    std::vector<audio::AudioClip> inputs;
    if (cfg.source == InputSource::random_clips) {
        for (int i = 0; i < total; ++i) inputs.push_back(random_clip());
    } else if (cfg.source == InputSource::fixtures) {
        for (const auto& f : cfg.fixtures) inputs.push_back(audio::pad_or_crop(f, clip_len));
    }
    auto input_for = [&](int i) -> const audio::AudioClip& {
        if (cfg.source == InputSource::fixed_clip) return fixed;
        return inputs[static_cast<std::size_t>(i) % inputs.size()];
    };

    auto ms = [](std::chrono::nanoseconds d) { return std::chrono::duration<double, std::milli>(d).count(); };
    std::vector<double> feat, fwd, e2e;
    double sink = 0.0;
    for (int i = 0; i < total; ++i) {
        const auto& clip = input_for(i);
        const auto t0 = cfg.clock();
        const auto f = extractor.compute(clip);
        const auto t1 = cfg.clock();
        const auto r = nn::model_forward(m, f);
        const auto t2 = cfg.clock();
        sink += r.posteriors[0];
        if (i < cfg.warmup) continue;
        feat.push_back(ms(t1 - t0));
        fwd.push_back(ms(t2 - t1));
        e2e.push_back(ms(t2 - t0));
    }
    if (!std::isfinite(sink)) throw HarnessError("bench: non-finite model output");

    BenchReport rep;
    rep.device_label = cfg.device_label;
    rep.model_name = model_name;
    rep.runs = cfg.runs;
    rep.warmup = cfg.warmup;
    rep.featurize = summarize(std::move(feat));
    rep.forward = summarize(std::move(fwd));
    rep.end_to_end = summarize(std::move(e2e));
    return rep;
}

namespace {

nlohmann::json stats_json(const StageStats& s)
{
    return {{"mean", s.mean}, {"std", s.std}, {"min", s.min}, {"p50", s.p50},
            {"p95", s.p95},   {"p99", s.p99}, {"max", s.max}};
}

}  // namespace

std::string report_json(const BenchReport& r)
{
    nlohmann::json j;
    j["device_label"] = r.device_label;
    j["model"] = r.model_name;
    j["runs"] = r.runs;
    j["warmup"] = r.warmup;
    j["unit"] = "ms";
    j["stages"] = {{"featurize", stats_json(r.featurize)},
                   {"forward", stats_json(r.forward)},
                   {"end_to_end", stats_json(r.end_to_end)}};
    return j.dump(2);
}

void write_report_csv(std::ostream& out, const std::vector<BenchReport>& reports)
{
    out << "device,model,stage,runs,warmup,mean,std,min,p50,p95,p99,max\n";
    for (const auto& r : reports) {
        const std::pair<const char*, const StageStats*> stages[] = {
            {"featurize", &r.featurize}, {"forward", &r.forward}, {"end_to_end", &r.end_to_end}};
        for (const auto& [name, s] : stages) {
            out << r.device_label << ',' << r.model_name << ',' << name << ',' << r.runs << ',' << r.warmup << ','
                << s->mean << ',' << s->std << ',' << s->min << ',' << s->p50 << ',' << s->p95 << ',' << s->p99
                << ',' << s->max << '\n';
        }
    }
}

std::vector<TradeoffRow> emit_tradeoff(const std::vector<NamedModel>& models, const data::DatasetManifest& manifest,
                                       const BenchConfig& cfg)
{
    if (models.size() < 2) throw ContractError("tradeoff needs at least two models");
    if (manifest.count(data::Split::test) == 0) throw ContractError("tradeoff: manifest has an empty test split");
    std::vector<TradeoffRow> rows;
    for (const auto& nm : models) {
        TradeoffRow row;
        row.name = nm.name;
        row.params = nn::count_params(nm.model);
        row.multiplies = nn::count_multiplies(nm.model);
        row.accuracy = eval::evaluate_accuracy(nm.model, manifest, data::Split::test);
        row.p50_ms = run_bench(nm.model, cfg, nm.name).end_to_end.p50;
        rows.push_back(row);
    }
    std::stable_sort(rows.begin(), rows.end(),
                     [](const TradeoffRow& a, const TradeoffRow& b) { return a.multiplies < b.multiplies; });
    return rows;
}

void write_tradeoff_csv(std::ostream& out, const std::vector<TradeoffRow>& rows)
{
    out << "name,params,multiplies,accuracy,p50_ms\n";
    for (const auto& r : rows) {
        out << r.name << ',' << r.params << ',' << r.multiplies << ',' << r.accuracy << ',' << r.p50_ms << '\n';
    }
}

}  // namespace kws::bench
