// Copyright 2026 The Biaslab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "biaslab/cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <json.hpp>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

#include "biaslab/cbi.hpp"
#include "biaslab/config.hpp"
#include "biaslab/errors.hpp"
#include "biaslab/gebi.hpp"
#include "biaslab/io.hpp"
#include "biaslab/mitigation.hpp"
#include "biaslab/stylemix.hpp"
#include "biaslab/synthdata.hpp"
#include "biaslab/training.hpp"

namespace biaslab {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string data;
  std::string model;
};

class Run {
 public:
  Run(RunConfig cfg, fs::path out, std::ostream& log) : cfg_(std::move(cfg)), out_(std::move(out)), log_(log) {}

  const RunConfig& cfg() const { return cfg_; }
  const fs::path& out() const { return out_; }
  std::ostream& log() { return log_; }

  void write(const std::string& name, std::string_view contents) {
    io::write_file(out_ / name, contents);
    log_ << "wrote " << (out_ / name).string() << "\n";
  }

  const Dataset& data() {
    if (!data_) {
      if (cfg_.data.empty()) {
        data_ = generate(cfg_.generator);
      } else {
        data_ = io::read_dataset(cfg_.data);
      }
    }
    return *data_;
  }

  int side() {
    if (data().empty()) throw DataError("dataset is empty");
    return static_cast<int>(data().samples.front().image.rows());
  }

  Dataset split(Split s, const char* what) {
    Dataset d = data().subset(s);
    if (d.empty()) throw DataError(std::string(what) + ": the " + std::string(split_name(s)) + " split is empty");
    return d;
  }

  // Loads --model, or trains one on the training split.
  const Network& model() {
    if (!model_) {
      if (!cfg_.model.empty()) {
        model_ = io::load_tiny_cnn(cfg_.model);
      } else {
        log_ << "training model (" << cfg_.train.epochs << " epochs)\n";
        train_ = train(make_tiny_cnn(side(), data().num_classes, cfg_.seed), split(Split::kTrain, "train"),
                       cfg_.train);
        model_ = train_->model;
      }
      if (model_->rows() != side()) throw DataError("model input size does not match the dataset images");
    }
    return *model_;
  }

  const std::optional<TrainResult>& training() const { return train_; }

  BiasTransform transform(const std::string& name, bool train_bank) {
    BiasTransform t;
    t.kind = parse_transform(name);
    t.frame = cfg_.generator.frame;
    t.circle = cfg_.generator.circle;
    if (t.kind == TransformKind::kHair || t.kind == TransformKind::kRuler)
      t.stamps = std::make_shared<const StampBank>(generator_stamps(side(), cfg_.seed, train_bank));
    return t;
  }

 private:
  RunConfig cfg_;
  fs::path out_;
  std::ostream& log_;
  std::optional<Dataset> data_;
  std::optional<Network> model_;
  std::optional<TrainResult> train_;
};

Json eval_json(const EvalReport& r) {
  Json j;
  j["accuracy"] = r.accuracy;
  j["macro_f1"] = r.macro_f1();
  j["per_class"] = Json::array();
  for (const auto& c : r.per_class) j["per_class"].push_back({{"precision", c.precision}, {"recall", c.recall}, {"f1", c.f1}});
  Json conf = Json::array();
  for (Eigen::Index i = 0; i < r.confusion.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index k = 0; k < r.confusion.cols(); ++k) row.push_back(r.confusion(i, k));
    conf.push_back(row);
  }
  j["confusion"] = conf;
  return j;
}

void cmd_gen_data(Run& run) {
  io::write_dataset(run.out() / "data", run.data());
  run.log() << "wrote " << (run.out() / "data" / "manifest.csv").string() << " (" << run.data().size()
            << " images)\n";
}

void cmd_stats(Run& run) { run.write("stats.json", stats_to_json(compute_stats(run.data())) + "\n"); }

void cmd_train(Run& run) {
  const Network& model = run.model();
  Json j;
  if (const auto& t = run.training()) {
    j["initial_loss"] = t->initial_loss;
    j["epoch_loss"] = t->epoch_loss;
    j["updates"] = t->updates;
  }
  j["parameters"] = model.parameter_count();
  j["test"] = eval_json(evaluate(model, run.split(Split::kTest, "train")));
  io::save_checkpoint(run.out() / "model.bin", model);
  run.log() << "wrote " << (run.out() / "model.bin").string() << "\n";
  run.write("train_report.json", j.dump(2) + "\n");
  run.log() << "test macro F1 " << j["test"]["macro_f1"].get<double>() << "\n";
}

void cmd_audit_gebi(Run& run) {
  const auto& g = run.cfg().gebi;
  const Dataset slice = run.split(Split::kTest, "audit-gebi").with_label(g.target_class);
  if (slice.empty()) throw DataError("audit-gebi: no test samples of class " + std::to_string(g.target_class));
  const auto report = run_gebi(slice, run.model(), g);
  run.write("gebi_report.json", cluster_report_json(report) + "\n");
  io::write_pgm(run.out() / "contact_sheet.pgm", contact_sheet(slice, report));
  for (const auto& [a, p] : report.purity)
    run.log() << artifact_name(a) << ": best cluster " << p.best_cluster << " frequency " << p.best
              << ", remaining " << p.remaining << "\n";
}

void cmd_audit_cbi(Run& run) {
  const Dataset test = run.split(Split::kTest, "audit-cbi");
  Json j;
  j["transforms"] = Json::object();
  for (const auto& name : run.cfg().cbi_transforms) {
    const auto r = run_cbi(run.model(), test, run.transform(name, false), run.cfg().seed);
    j["transforms"][name] = Json::parse(cbi_to_json(r));
    run.write("cbi_" + name + ".csv", cbi_to_csv(r));
    run.log() << name << ": switched " << r.switched_total << "/" << r.size() << ", mean change " << r.mean_change
              << "\n";
  }
  run.write("cbi_report.json", j.dump(2) + "\n");
}

void cmd_sweep_tda(Run& run) {
  const auto& c = run.cfg();
  TdaSweepConfig sweep;
  sweep.probabilities = c.tda_probabilities;
  sweep.seeds = c.tda_seeds;
  sweep.train = c.train;
  const int side = run.side(), classes = run.data().num_classes;
  const auto rows = tda_sweep([&](std::uint64_t s) { return make_tiny_cnn(side, classes, s); },
                              run.split(Split::kTrain, "sweep-tda"), run.split(Split::kTest, "sweep-tda"),
                              run.transform(c.tda_transform, true), run.transform(c.tda_transform, false), sweep);
  run.write("tda_sweep.csv", tda_sweep_csv(rows));
  for (const auto& r : rows)
    run.log() << "p=" << r.probability << " seed=" << r.seed << " F1_mean " << r.f1_mean << " switched " << r.switched
              << "\n";
}

Json mitigation_state(const Network& model, const Dataset& test, const BiasTransform& t, std::uint64_t seed) {
  const auto e = tda_evaluate(model, test, t, seed);
  Json j;
  j["f1_org"] = e.f1_org;
  j["f1_aug"] = e.f1_aug;
  j["f1_mean"] = e.f1_mean;
  j["switched"] = e.cbi.switched_total;
  j["mean_change"] = e.cbi.mean_change;
  j["attribution_loss"] = mean_attribution_loss(model, test, t, seed);
  j["attribution_loss_normalized"] = mean_attribution_loss(model, test, t, seed, true);
  return j;
}

void cmd_finetune_attr(Run& run) {
  const auto& c = run.cfg();
  const Dataset test = run.split(Split::kTest, "finetune-attr");
  FeedbackConfig fc;
  fc.alpha = c.feedback.alpha;
  fc.train = c.feedback.train;
  fc.transform = run.transform(c.feedback.transform, true);
  fc.cls_input = c.feedback.cls_input == "original" ? ClsInput::kOriginal : ClsInput::kBiased;
  fc.normalize_maps = c.feedback.normalize_maps;
  const Network& pre = run.model();
  const auto result = feedback_finetune(pre, run.split(Split::kTrain, "finetune-attr"), fc);
  const auto test_t = run.transform(c.feedback.transform, false);
  Json j;
  j["transform"] = c.feedback.transform;
  j["alpha"] = fc.alpha;
  j["before"] = mitigation_state(pre, test, test_t, c.seed);
  j["after"] = mitigation_state(result.model, test, test_t, c.seed);
  j["epoch_loss"] = result.epoch_loss;
  j["epoch_cls"] = result.epoch_cls;
  j["epoch_atr"] = result.epoch_atr;
  j["updates"] = result.updates;
  const double before = j["before"]["switched"].get<double>(), after = j["after"]["switched"].get<double>();
  j["switched_reduction"] = before > 0 ? (before - after) / before : 0.0;
  io::save_checkpoint(run.out() / "model_finetuned.bin", result.model);
  run.write("attr_finetune.json", j.dump(2) + "\n");
  run.log() << "switched " << before << " -> " << after << ", F1_org " << j["before"]["f1_org"].get<double>() << " -> "
            << j["after"]["f1_org"].get<double>() << "\n";
}

void cmd_stda(Run& run) {
  const auto& c = run.cfg();
  StdaConfig sc;
  sc.nst = c.stda.nst;
  sc.content_class = c.stda.content_class;
  sc.style_class = c.stda.style_class;
  sc.seed = c.seed;
  const auto result = stda_generate(run.data(), run.model(), sc, c.stda.pairs);
  io::write_dataset(run.out() / "stda", result.synthetic);
  run.write("stda_provenance.csv", stda_provenance_csv(result));
}

void cmd_repro(Run& run) {
  cmd_gen_data(run);
  cmd_stats(run);
  cmd_train(run);
  cmd_audit_gebi(run);
  cmd_audit_cbi(run);
  cmd_sweep_tda(run);
  cmd_finetune_attr(run);
}

fs::path default_out(const std::string& command) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  localtime_r(&now, &tm);
  std::ostringstream os;
  os << "runs/" << command << "-" << std::put_time(&tm, "%Y%m%d-%H%M%S");
  return os.str();
}

using Command = void (*)(Run&);

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bias auditing and mitigation on a planted-bias image benchmark", "biaslab"};
  app.require_subcommand(1);
  Options opt;
  const std::vector<std::pair<std::string, std::pair<std::string, Command>>> commands = {
      {"gen-data", {"generate the synthetic dataset", cmd_gen_data}},
      {"train", {"train the classifier", cmd_train}},
      {"audit-gebi", {"cluster images and attributions to find biases", cmd_audit_gebi}},
      {"audit-cbi", {"insert artifacts and measure prediction changes", cmd_audit_cbi}},
      {"sweep-tda", {"targeted data augmentation sweep", cmd_sweep_tda}},
      {"finetune-attr", {"attribution-feedback fine-tuning", cmd_finetune_attr}},
      {"stda", {"style-transfer data augmentation", cmd_stda}},
      {"stats", {"artifact statistics of a dataset", cmd_stats}},
      {"repro", {"end-to-end reproduction", cmd_repro}},
  };
  std::string chosen;
  Command command = nullptr;
  for (const auto& [name, info] : commands) {
    auto* sub = app.add_subcommand(name, info.first);
    sub->add_option("--config", opt.config, "TOML run configuration");
    sub->add_option("--out", opt.out, "output directory (default: runs/<command>-<timestamp>)");
    sub->add_option("--seed", opt.seed, "seed, overrides the config");
    sub->add_option("--threads", opt.threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--data", opt.data, "dataset directory or manifest (default: generate)");
    sub->add_option("--model", opt.model, "model checkpoint (default: train)");
    sub->callback([&chosen, &command, name = name, fn = info.second] {
      chosen = name;
      command = fn;
    });
  }

  std::vector<std::string> argv_store{"biaslab"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }

  try {
    RunConfig cfg;
    if (!opt.config.empty()) {
      std::string text;
      try {
        text = io::read_file(opt.config);
      } catch (const std::exception& e) {
        throw ConfigError(std::string("cannot read config: ") + e.what());
      }
      cfg = parse_run_config(text, false);
    }
    if (opt.seed) cfg.seed = *opt.seed;
    if (opt.threads) cfg.threads = *opt.threads;
    if (!opt.data.empty()) cfg.data = opt.data;
    if (!opt.model.empty()) cfg.model = opt.model;
    cfg.resolve();

    const fs::path dir = opt.out.empty() ? default_out(chosen) : fs::path(opt.out);
    fs::create_directories(dir);
    io::write_file(dir / "config.toml", to_toml(cfg));
    Run run(cfg, dir, out);
    out << chosen << ": output in " << dir.string() << "\n";
    command(run);
    return 0;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace biaslab
