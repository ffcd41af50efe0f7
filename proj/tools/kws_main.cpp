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

// kws: command-line front end.
//   prepare | synth-toy | train | prune | finetune | eval | infer | bench |
//   tradeoff | export
// Exit codes: 0 success, 1 usage/contract/config error, 2 I/O error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "kws/bench.hpp"
#include "kws/dataset.hpp"
#include "kws/engine.hpp"
#include "kws/error.hpp"
#include "kws/evaluate.hpp"
#include "kws/file_util.hpp"
#include "kws/model_store.hpp"
#include "kws/slimming.hpp"
#include "kws/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace kws;

namespace {

struct Options {
    std::uint64_t seed = 0;
    std::string data;
    std::vector<std::string> models;
    std::string out;
    std::string arch = "res8-narrow";
    bool slim_ready = false;
    std::optional<double> sparsity;
    double fraction = 0.4;
    int runs = 100;
    int warmup = 10;
    std::string split = "test";
    bool json_out = false;

    // subcommand specific
    std::vector<std::string> keywords;
    int epochs = 30;
    double lr = 0.1;
    int batch_size = 64;
    int workers = 1;
    bool no_augment = false;
    std::string log_path;
    std::string wav;
    std::vector<std::string> fixtures;
    std::string source = "fixed";
    std::string device = "local";
    std::string csv;
    std::string name;
    int classes = 3;
    int train_per_class = 50;
    int val_per_class = 10;
    int test_per_class = 20;
};

void print_json(const json& j)
{
    std::cout << j.dump(2) << '\n';
}

std::string model_name_for(const std::string& path)
{
    return fs::path(path).stem().string();
}

const std::string& single_model(const Options& o)
{
    if (o.models.size() != 1) throw ConfigError("exactly one --model is required");
    return o.models.front();
}

train::TrainConfig train_config(const Options& o, bool slim_ready)
{
    train::TrainConfig cfg;
    cfg.seed = o.seed;
    cfg.epochs = o.epochs;
    cfg.lr = o.lr;
    cfg.batch_size = o.batch_size;
    cfg.workers = o.workers;
    cfg.augment = !o.no_augment;
    cfg.augment_cfg.seed = o.seed;
    if (o.sparsity) {
        cfg.lambda_l1 = *o.sparsity;
    } else if (slim_ready) {
        cfg.lambda_l1 = 1e-4;
    }
    return cfg;
}

void write_model(const nn::Model& m, const std::string& out)
{
    if (out.empty()) throw ConfigError("--out is required");
    store::save_model(m, out);
}

json train_summary(const train::TrainResult& r, const std::string& out)
{
    json j;
    j["model"] = out;
    j["best_epoch"] = r.best_epoch;
    j["epochs"] = r.history.size();
    const auto& best = r.history.at(static_cast<std::size_t>(r.best_epoch - 1));
    j["train_loss"] = best.train_loss;
    j["val_accuracy"] = best.val_accuracy ? json(*best.val_accuracy) : json(nullptr);
    j["params"] = nn::count_params(r.model);
    return j;
}

std::ostream* open_log(const Options& o, std::ofstream& file)
{
    if (o.log_path.empty()) return &std::cerr;
    file.open(o.log_path);
    if (!file) throw IoError("cannot open log file " + o.log_path);
    return &file;
}

int cmd_prepare(const Options& o)
{
    if (o.data.empty() || o.out.empty()) throw ConfigError("prepare needs --data <dir> and --out <manifest.json>");
    data::ManifestConfig cfg;
    cfg.seed = o.seed;
    if (!o.keywords.empty()) cfg.keywords = o.keywords;
    const auto m = data::build_manifest(o.data, cfg);
    data::save_manifest(m, o.out);
    json j{{"manifest", o.out},
           {"labels", m.labels},
           {"train", m.count(data::Split::train)},
           {"validation", m.count(data::Split::validation)},
           {"test", m.count(data::Split::test)}};
    if (o.json_out) {
        print_json(j);
    } else {
        std::cout << "wrote " << o.out << ": " << m.entries.size() << " entries, " << m.labels.size()
                  << " labels\n";
    }
    return 0;
}

int cmd_synth_toy(const Options& o)
{
    if (o.out.empty()) throw ConfigError("synth-toy needs --out <dir>");
    data::ToneDatasetConfig cfg;
    cfg.seed = o.seed;
    cfg.classes = o.classes;
    cfg.train_per_class = o.train_per_class;
    cfg.val_per_class = o.val_per_class;
    cfg.test_per_class = o.test_per_class;
    const auto m = data::write_tone_dataset(o.out, cfg);
    const auto path = fs::path(o.out) / "manifest.json";
    if (o.json_out) {
        print_json({{"manifest", path.string()}, {"labels", m.labels}, {"entries", m.entries.size()}});
    } else {
        std::cout << "wrote " << path.string() << ": " << m.entries.size() << " clips\n";
    }
    return 0;
}

int cmd_train(const Options& o)
{
    if (o.data.empty()) throw ConfigError("train needs --data <manifest.json>");
    if (o.out.empty()) throw ConfigError("--out is required");
    const auto spec = nn::ModelSpec::by_name(o.arch, o.slim_ready);
    const auto cfg = train_config(o, o.slim_ready);
    cfg.validate(spec);
    const auto manifest = data::load_manifest(o.data);
    std::ofstream logfile;
    const auto r = train::train(spec, manifest, cfg, open_log(o, logfile));
    write_model(r.model, o.out);
    if (o.json_out) {
        print_json(train_summary(r, o.out));
    } else {
        std::cout << "wrote " << o.out << " (best epoch " << r.best_epoch << ")\n";
    }
    return 0;
}

int cmd_finetune(const Options& o)
{
    if (o.data.empty()) throw ConfigError("finetune needs --data <manifest.json>");
    if (o.out.empty()) throw ConfigError("--out is required");
    auto model = store::load_model(single_model(o));
    const auto cfg = train_config(o, false);
    cfg.validate(model.spec);
    const auto manifest = data::load_manifest(o.data);
    std::ofstream logfile;
    const auto r = train::finetune(model, manifest, cfg, open_log(o, logfile));
    write_model(r.model, o.out);
    if (o.json_out) {
        print_json(train_summary(r, o.out));
    } else {
        std::cout << "wrote " << o.out << " (best epoch " << r.best_epoch << ")\n";
    }
    return 0;
}

int cmd_prune(const Options& o)
{
    slim::SlimConfig cfg;
    cfg.fraction = o.fraction;
    cfg.validate();
    if (o.out.empty()) throw ConfigError("--out is required");
    const auto model = store::load_model(single_model(o));
    const auto mask = slim::select_channels(slim::collect_gammas(model), cfg);
    const auto pruned = slim::prune_model(model, mask);
    write_model(pruned, o.out);
    json j{{"model", o.out},
           {"variant", slim::variant_name(model.spec.arch, cfg.fraction)},
           {"inner_widths", pruned.spec.inner_widths},
           {"params_before", nn::count_params(model)},
           {"params", nn::count_params(pruned)},
           {"multiplies_before", nn::count_multiplies(model)},
           {"multiplies", nn::count_multiplies(pruned)}};
    if (o.json_out) {
        print_json(j);
    } else {
        std::cout << "wrote " << o.out << ": inner widths " << j["inner_widths"].dump() << ", "
                  << j["params"].get<std::int64_t>() << " params\n";
    }
    return 0;
}

int cmd_eval(const Options& o)
{
    if (o.data.empty()) throw ConfigError("eval needs --data <manifest.json>");
    const auto model = store::load_model(single_model(o));
    const auto manifest = data::load_manifest(o.data);
    const auto split = data::parse_split(o.split);
    const double acc = eval::evaluate_accuracy(model, manifest, split);
    if (o.json_out) {
        print_json({{"model", single_model(o)},
                    {"split", o.split},
                    {"clips", manifest.count(split)},
                    {"accuracy", acc}});
    } else {
        std::cout << o.split << " accuracy " << acc << " over " << manifest.count(split) << " clips\n";
    }
    return 0;
}

int cmd_infer(const Options& o)
{
    if (o.wav.empty()) throw ConfigError("infer needs --wav <file>");
    const engine::Engine eng(store::load_model(single_model(o)));
    const auto clip = audio::pad_or_crop(audio::read_wav(o.wav));
    const auto r = eng.infer_pcm(clip.samples);
    const auto& labels = eng.model().labels;
    std::size_t arg = 0;
    for (std::size_t i = 1; i < r.posteriors.size(); ++i) {
        if (r.posteriors[i] > r.posteriors[arg]) arg = i;
    }
    print_json({{"wav", o.wav},
                {"labels", labels},
                {"posteriors", r.posteriors},
                {"argmax", arg},
                {"label", labels[arg]},
                {"featurize_ms", r.featurize_ms},
                {"forward_ms", r.forward_ms}});
    return 0;
}

bench::BenchConfig bench_config(const Options& o)
{
    bench::BenchConfig cfg;
    cfg.runs = o.runs;
    cfg.warmup = o.warmup;
    cfg.seed = o.seed;
    cfg.device_label = o.device;
    cfg.source = bench::parse_input_source(o.source);
    for (const auto& f : o.fixtures) cfg.fixtures.push_back(audio::read_wav(f));
    if (!cfg.fixtures.empty() && o.source == "fixed") cfg.source = bench::InputSource::fixtures;
    cfg.validate();
    return cfg;
}

int cmd_bench(const Options& o)
{
    if (o.models.empty()) throw ConfigError("bench needs at least one --model");
    const auto cfg = bench_config(o);
    std::vector<bench::BenchReport> reports;
    for (const auto& path : o.models) {
        reports.push_back(bench::run_bench(store::load_model(path), cfg, model_name_for(path)));
    }
    json all = json::array();
    for (const auto& r : reports) all.push_back(json::parse(bench::report_json(r)));
    const json doc = reports.size() == 1 ? all[0] : all;
    if (!o.out.empty()) atomic_write(o.out, doc.dump(2) + "\n");
    if (!o.csv.empty()) {
        std::ostringstream csv;
        bench::write_report_csv(csv, reports);
        atomic_write(o.csv, csv.str());
    }
    if (o.json_out || o.out.empty()) {
        print_json(doc);
    } else {
        for (const auto& r : reports) {
            std::cout << r.model_name << ": end-to-end p50 " << r.end_to_end.p50 << " ms (featurize "
                      << r.featurize.p50 << ", forward " << r.forward.p50 << ")\n";
        }
    }
    return 0;
}

int cmd_tradeoff(const Options& o)
{
    if (o.data.empty()) throw ConfigError("tradeoff needs --data <manifest.json>");
    const auto cfg = bench_config(o);
    std::vector<bench::NamedModel> models;
    for (const auto& path : o.models) models.push_back({model_name_for(path), store::load_model(path)});
    const auto manifest = data::load_manifest(o.data);
    const auto rows = bench::emit_tradeoff(models, manifest, cfg);
    std::ostringstream csv;
    bench::write_tradeoff_csv(csv, rows);
    if (!o.out.empty()) atomic_write(o.out, csv.str());
    if (o.json_out) {
        json arr = json::array();
        for (const auto& r : rows) {
            arr.push_back({{"name", r.name},
                           {"params", r.params},
                           {"multiplies", r.multiplies},
                           {"accuracy", r.accuracy},
                           {"p50_ms", r.p50_ms}});
        }
        print_json(arr);
    } else {
        std::cout << csv.str();
    }
    return 0;
}

int cmd_export(const Options& o)
{
    if (o.out.empty()) throw ConfigError("export needs --out <dir>");
    const auto& path = single_model(o);
    const auto model = store::load_model(path);
    const auto assets = engine::export_assets(model, o.out, o.name.empty() ? model_name_for(path) : o.name);
    if (o.json_out) {
        print_json({{"model", assets.model_file.string()}, {"labels", assets.labels_file.string()}});
    } else {
        std::cout << "wrote " << assets.model_file.string() << " and " << assets.labels_file.string() << '\n';
    }
    return 0;
}

void add_train_flags(CLI::App* sub, Options& o)
{
    sub->add_option("--epochs", o.epochs, "training epochs");
    sub->add_option("--lr", o.lr, "initial learning rate");
    sub->add_option("--batch-size", o.batch_size, "mini-batch size");
    sub->add_option("--workers", o.workers, "featurization threads");
    sub->add_flag("--no-augment", o.no_augment, "disable time shift and noise mixing");
    sub->add_option("--sparsity", o.sparsity, "L1 weight on batchnorm scales (default 1e-4 when slim-ready)");
    sub->add_option("--log", o.log_path, "training log file (default stderr)");
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Keyword spotting engine: data preparation, training, slimming, evaluation and benchmarking"};
    app.require_subcommand(1);
    Options o;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--seed", o.seed, "random seed");
        sub->add_flag("--json", o.json_out, "print machine-readable JSON");
    };

    auto* prepare = app.add_subcommand("prepare", "build a dataset manifest from a speech commands tree");
    common(prepare);
    prepare->add_option("--data", o.data, "dataset root")->required();
    prepare->add_option("--out", o.out, "manifest path")->required();
    prepare->add_option("--keywords", o.keywords, "target keywords (default: the ten standard words)")
        ->delimiter(',');

    auto* synth = app.add_subcommand("synth-toy", "write the synthetic tone dataset");
    common(synth);
    synth->add_option("--out", o.out, "output directory")->required();
    synth->add_option("--classes", o.classes, "number of tone classes");
    synth->add_option("--per-class", o.train_per_class, "training clips per class");
    synth->add_option("--val-per-class", o.val_per_class, "validation clips per class");
    synth->add_option("--test-per-class", o.test_per_class, "test clips per class");

    auto* train = app.add_subcommand("train", "train a model");
    common(train);
    train->add_option("--data", o.data, "manifest path")->required();
    train->add_option("--out", o.out, "output .kwsm")->required();
    train->add_option("--arch", o.arch, "architecture")->check(CLI::IsMember({"res8", "res8-narrow"}));
    train->add_flag("--slim-ready", o.slim_ready, "add batchnorm scales for slimming");
    add_train_flags(train, o);

    auto* prune = app.add_subcommand("prune", "remove the smallest-scale channels");
    common(prune);
    prune->add_option("--model", o.models, "input .kwsm")->required();
    prune->add_option("--fraction", o.fraction, "fraction of prunable channels to remove, in [0, 1)");
    prune->add_option("--out", o.out, "output .kwsm")->required();

    auto* finetune = app.add_subcommand("finetune", "continue training an existing model");
    common(finetune);
    finetune->add_option("--model", o.models, "input .kwsm")->required();
    finetune->add_option("--data", o.data, "manifest path")->required();
    finetune->add_option("--out", o.out, "output .kwsm")->required();
    add_train_flags(finetune, o);

    auto* evalc = app.add_subcommand("eval", "accuracy on a manifest split");
    common(evalc);
    evalc->add_option("--model", o.models, ".kwsm")->required();
    evalc->add_option("--data", o.data, "manifest path")->required();
    evalc->add_option("--split", o.split, "split")->check(CLI::IsMember({"train", "validation", "test"}));

    auto* infer = app.add_subcommand("infer", "classify one WAV file");
    common(infer);
    infer->add_option("--model", o.models, ".kwsm")->required();
    infer->add_option("--wav", o.wav, "16 kHz mono 16-bit WAV")->required();

    auto* benchc = app.add_subcommand("bench", "latency benchmark");
    common(benchc);
    benchc->add_option("--model", o.models, ".kwsm (repeatable)")->required();
    benchc->add_option("--runs", o.runs, "timed runs");
    benchc->add_option("--warmup", o.warmup, "discarded warmup runs");
    benchc->add_option("--source", o.source, "input source")->check(CLI::IsMember({"fixed", "random", "fixtures"}));
    benchc->add_option("--fixture", o.fixtures, "WAV fixture (repeatable)");
    benchc->add_option("--device", o.device, "device label for the report");
    benchc->add_option("--out", o.out, "JSON report path");
    benchc->add_option("--csv", o.csv, "CSV report path");

    auto* tradeoff = app.add_subcommand("tradeoff", "accuracy vs latency table");
    common(tradeoff);
    tradeoff->add_option("--model", o.models, ".kwsm (repeat for every model)")->required();
    tradeoff->add_option("--data", o.data, "manifest path")->required();
    tradeoff->add_option("--runs", o.runs, "timed runs per model");
    tradeoff->add_option("--warmup", o.warmup, "discarded warmup runs");
    tradeoff->add_option("--device", o.device, "device label");
    tradeoff->add_option("--out", o.out, "CSV path");

    auto* exportc = app.add_subcommand("export", "copy a model and labels into the demo asset layout");
    common(exportc);
    exportc->add_option("--model", o.models, ".kwsm")->required();
    exportc->add_option("--out", o.out, "asset directory")->required();
    exportc->add_option("--name", o.name, "model name (default: file stem)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (*prepare) return cmd_prepare(o);
        if (*synth) return cmd_synth_toy(o);
        if (*train) return cmd_train(o);
        if (*prune) return cmd_prune(o);
        if (*finetune) return cmd_finetune(o);
        if (*evalc) return cmd_eval(o);
        if (*infer) return cmd_infer(o);
        if (*benchc) return cmd_bench(o);
        if (*tradeoff) return cmd_tradeoff(o);
        if (*exportc) return cmd_export(o);
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
