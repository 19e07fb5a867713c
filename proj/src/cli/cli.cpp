#include "drssl/cli/cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <ostream>

#include "drssl/binary_io.hpp"
#include "drssl/error.hpp"
#include "drssl/eval/experiments.hpp"
#include "drssl/eval/latents.hpp"
#include "drssl/model/checkpoint.hpp"

#ifndef DRSSL_VERSION
#define DRSSL_VERSION "unknown"
#endif

namespace drssl::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using train::RunConfig;

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::size_t jobs = 1;
};

// Collects what the manifest needs while a command runs.
class Run {
 public:
  Run(std::string command, std::vector<std::string> argv, const Common& common, std::ostream& out)
      : command_(std::move(command)), argv_(std::move(argv)), out_(out), dir_(common.out_dir) {
    fs::create_directories(dir_);
  }

  std::string path(const std::string& name) {
    outputs_.push_back(name);
    return (dir_ / name).string();
  }

  void input(const std::string& p) {
    const auto bytes = binio::read_file(p);
    inputs_.push_back({{"path", p}, {"fnv1a", binio::hex64(binio::fnv1a(bytes.data(), bytes.size()))}});
  }

  void log(const std::string& line) { out_ << line << std::endl; }

  void finish(const RunConfig& config, json extra = json::object()) {
    json m;
    m["tool"] = "drssl";
    m["version"] = DRSSL_VERSION;
    m["command"] = command_;
    m["argv"] = argv_;
    json cfg = json::object();
    for (const auto& [k, v] : config.echo()) cfg[k] = v;
    m["config"] = cfg;
    m["seeds"] = {{"task", config.task.seed}, {"split", config.split_seed}, {"train", config.train.seed}};
    m["inputs"] = inputs_;
    m["outputs"] = outputs_;
    for (auto& [k, v] : extra.items()) m[k] = v;
    m["timings"] = {{"wall_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count()}};
    std::ofstream f(dir_ / "manifest.json");
    if (!f) throw DataError(DataErrorCode::io_error, "cannot write " + (dir_ / "manifest.json").string());
    f << m.dump(2) << '\n';
    log("wrote " + (dir_ / "manifest.json").string());
  }

 private:
  std::string command_;
  std::vector<std::string> argv_;
  std::ostream& out_;
  fs::path dir_;
  json inputs_ = json::array();
  json outputs_ = json::array();
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void add_common(CLI::App* app, Common& c, bool with_jobs = false) {
  app->add_option("--config", c.config_path, "key = value config file");
  app->add_option("--set", c.overrides, "override one config key (KEY=VALUE), repeatable");
  app->add_option("--seed", c.seed, "sets train.seed, task.seed and split.seed");
  app->add_option("--out", c.out_dir, "run directory for every output")->required();
  if (with_jobs) app->add_option("--jobs", c.jobs, "worker threads for independent runs")->check(CLI::PositiveNumber);
}

// File first, then --set, then dedicated flags.
RunConfig resolve(const Common& c, Run* run) {
  RunConfig config;
  if (!c.config_path.empty()) {
    if (!fs::exists(c.config_path)) {
      throw DataError(DataErrorCode::io_error, "config file not found: " + c.config_path);
    }
    if (run) run->input(c.config_path);
    config = train::load_run_config(c.config_path);
  }
  for (const auto& kv : c.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects KEY=VALUE, got '" + kv + "'");
    config.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (c.seed) config = eval::reseeded(config, *c.seed);
  config.validate();
  return config;
}

data::Dataset load_input(Run& run, const std::string& p) {
  if (!fs::exists(p)) throw DataError(DataErrorCode::io_error, "dataset not found: " + p);
  run.input(p);
  return data::load_dataset(p);
}

json metrics_json(const eval::MetricsReport& r) {
  json j;
  j["accuracy"] = r.accuracy;
  j["macro_precision"] = r.macro_precision;
  j["macro_recall"] = r.macro_recall;
  j["n_samples"] = r.n_samples;
  j["class_counts"] = r.class_counts;
  j["confusion"] = r.confusion;
  return j;
}

void write_json(const std::string& path, const json& j) {
  std::ofstream f(path);
  if (!f) throw DataError(DataErrorCode::io_error, "cannot write " + path);
  f << j.dump(2) << '\n';
}

std::map<std::string, nn::Tensor> standardizer_extras(const data::Standardizer& s) {
  return {{"input.mean", nn::Tensor({s.mean.size()}, s.mean)}, {"input.std", nn::Tensor({s.stddev.size()}, s.stddev)}};
}

data::Standardizer standardizer_from(const model::Checkpoint& ck) {
  const auto mean = ck.extras.find("input.mean");
  const auto std = ck.extras.find("input.std");
  if (mean == ck.extras.end() || std == ck.extras.end()) {
    throw DataError(DataErrorCode::invalid_record, "checkpoint carries no input standardization");
  }
  data::Standardizer s;
  s.mean = mean->second.values();
  s.stddev = std->second.values();
  return s;
}

// Pools for a run: from --data DIR when given, synthetic otherwise.
struct Pools {
  data::Dataset labeled;
  data::Dataset unlabeled;
  std::optional<data::Dataset> test;
};

Pools gather(Run& run, const std::string& data_dir, const RunConfig& config) {
  Pools p;
  if (data_dir.empty()) {
    const auto split = data::make_ssl_split(data::generate_task(config.resolved_task()), config.split());
    p.labeled = split.labeled;
    p.unlabeled = split.unlabeled;
    p.test = split.test;
    return p;
  }
  const fs::path dir(data_dir);
  p.labeled = load_input(run, (dir / "labeled.ssld").string());
  p.unlabeled = load_input(run, (dir / "unlabeled.ssld").string());
  if (fs::exists(dir / "test.ssld")) p.test = load_input(run, (dir / "test.ssld").string());
  return p;
}

std::vector<std::uint64_t> seed_list(const std::vector<std::uint64_t>& given) {
  return given.empty() ? std::vector<std::uint64_t>{0, 1, 2, 3, 4} : given;
}

std::string csv_real(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Distributionally robust semi-supervised learning on sensor windows"};
  app.require_subcommand(1);
  app.set_version_flag("--version", DRSSL_VERSION);
  std::vector<std::string> args(argv, argv + argc);

  Common common;
  std::string data_dir, checkpoint_path, test_path, sweep_kind = "thresholds";
  std::vector<std::uint64_t> seeds;
  std::vector<double> thre_a_grid, thre_rec_grid;
  std::size_t n_max = 5, m_max = 5;

  auto* gen = app.add_subcommand("gen-data", "generate the synthetic task and write L/U/T dataset files");
  add_common(gen, common);

  auto* trn = app.add_subcommand("train", "train one model; writes checkpoint, history and metrics");
  add_common(trn, common);
  trn->add_option("--data", data_dir, "directory with labeled.ssld, unlabeled.ssld [, test.ssld]");

  auto* evl = app.add_subcommand("eval", "score a checkpoint on a labeled test set");
  add_common(evl, common);
  evl->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
  evl->add_option("--test", test_path, "labeled dataset file")->required();

  auto* abl = app.add_subcommand("ablate", "train the four loss variants over several seeds");
  add_common(abl, common, true);
  abl->add_option("--seeds", seeds, "seed list (default 0 1 2 3 4)")->delimiter(',');

  auto* swp = app.add_subcommand("sweep", "threshold or multi-subject sweep");
  add_common(swp, common, true);
  swp->add_option("--kind", sweep_kind, "thresholds | multisubject")
      ->check(CLI::IsMember({"thresholds", "multisubject"}));
  swp->add_option("--seeds", seeds, "seed list (default 0 1 2 3 4)")->delimiter(',');
  swp->add_option("--thre-a", thre_a_grid, "thre_a grid")->delimiter(',');
  swp->add_option("--thre-rec", thre_rec_grid, "thre_rec grid")->delimiter(',');
  swp->add_option("--n-max", n_max, "largest number of labeled subjects");
  swp->add_option("--m-max", m_max, "largest number of unlabeled subjects");

  auto* exl = app.add_subcommand("export-latents", "write latent features and their 2-D PCA projection");
  add_common(exl, common);
  exl->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
  exl->add_option("--data", data_dir, "directory with labeled.ssld, unlabeled.ssld [, test.ssld]");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << DRSSL_VERSION << '\n';
    return kOk;
  } catch (const CLI::ParseError& e) {
    std::ostringstream msg;
    app.exit(e, msg, msg);
    err << msg.str();
    if (e.get_exit_code() != 0) {
      if (!e.get_name().empty() && e.get_name() != "CallForAllHelp") err << app.help();
      return kUsage;
    }
    out << msg.str();
    return kOk;
  }

  try {
    auto* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    Run run(name, args, common, out);
    const RunConfig config = resolve(common, &run);

    if (name == "gen-data") {
      const auto split = data::make_ssl_split(data::generate_task(config.resolved_task()), config.split());
      data::save_dataset(run.path("labeled.ssld"), split.labeled);
      data::save_dataset(run.path("unlabeled.ssld"), split.unlabeled);
      data::save_dataset(run.path("test.ssld"), split.test);
      run.log("generated " + std::to_string(split.labeled.size()) + " labeled, " +
              std::to_string(split.unlabeled.size()) + " unlabeled, " +
              std::to_string(split.test.size()) + " test windows");
      run.finish(config);
    } else if (name == "train") {
      Pools pools = gather(run, data_dir, config);
      const auto st = data::Standardizer::fit(pools.labeled);
      for (const auto& w : st.warnings) err << "warning: " << w << '\n';
      const auto labeled = st.apply(pools.labeled);
      const auto unlabeled = st.apply(pools.unlabeled);
      std::optional<data::Dataset> test;
      if (pools.test) test = st.apply(*pools.test);
      run.log("training " + std::string(train::to_string(config.train.variant)) + " on " +
              std::to_string(labeled.size()) + " labeled / " + std::to_string(unlabeled.size()) +
              " unlabeled windows");
      auto result = train::train(labeled, unlabeled, config.model, config.train, test ? &*test : nullptr);
      run.log("finished " + std::to_string(result.history.steps.size()) + " steps (discriminator updates " +
              std::to_string(result.history.gate_s_count) + ", encoder updates " +
              std::to_string(result.history.gate_e_count) + ")");
      model::save_checkpoint(run.path("checkpoint.bin"), result.params, standardizer_extras(st));
      train::write_history_jsonl(run.path("history.jsonl"), result.history);
      json extra;
      if (test) {
        const auto m = eval::evaluate(result.params, *test);
        write_json(run.path("metrics.json"), metrics_json(m));
        run.log("test accuracy " + csv_real(m.accuracy));
      }
      if (!result.history.evals.empty()) {
        json evals = json::array();
        for (const auto& e : result.history.evals) evals.push_back({{"step", e.step}, {"accuracy", e.accuracy}});
        extra["eval_snapshots"] = evals;
      }
      run.finish(config, extra);
    } else if (name == "eval") {
      if (!fs::exists(checkpoint_path)) throw DataError(DataErrorCode::io_error, "checkpoint not found: " + checkpoint_path);
      run.input(checkpoint_path);
      const auto ck = model::load_checkpoint(checkpoint_path);
      const auto test = standardizer_from(ck).apply(load_input(run, test_path));
      const auto m = eval::evaluate(ck.params, test);
      write_json(run.path("metrics.json"), metrics_json(m));
      run.log("accuracy " + csv_real(m.accuracy) + ", macro precision " + csv_real(m.macro_precision) +
              ", macro recall " + csv_real(m.macro_recall));
      run.finish(config);
    } else if (name == "ablate") {
      eval::ExperimentOptions opts{common.jobs, [&](const std::string& s) { run.log(s); }};
      eval::AblationGrid grid;
      grid.seeds = seed_list(seeds);
      const auto rows = eval::run_ablation(config, grid, opts);
      std::ofstream csv(run.path("ablation.csv"));
      csv << "variant,accuracy_mean,accuracy_std,macro_precision_mean,macro_precision_std,"
             "macro_recall_mean,macro_recall_std,n_seeds\n";
      for (const auto& r : rows) {
        csv << train::to_string(r.variant) << ',' << csv_real(r.accuracy.mean) << ',' << csv_real(r.accuracy.std)
            << ',' << csv_real(r.macro_precision.mean) << ',' << csv_real(r.macro_precision.std) << ','
            << csv_real(r.macro_recall.mean) << ',' << csv_real(r.macro_recall.std) << ',' << r.accuracy.n << '\n';
      }
      if (!csv) throw DataError(DataErrorCode::io_error, "cannot write ablation.csv");
      run.finish(config, {{"seeds", grid.seeds}, {"std_kind", "unbiased std over seed repetitions"}});
    } else if (name == "sweep") {
      eval::ExperimentOptions opts{common.jobs, [&](const std::string& s) { run.log(s); }};
      const auto s = seed_list(seeds);
      if (sweep_kind == "thresholds") {
        if (thre_a_grid.empty() && thre_rec_grid.empty()) {
          throw ConfigError("sweep --kind thresholds needs --thre-a and/or --thre-rec");
        }
        const auto curves = eval::sweep_thresholds(config, thre_a_grid, thre_rec_grid, s, opts);
        std::ofstream csv(run.path("thresholds.csv"));
        csv << "parameter,threshold,accuracy_mean,accuracy_std,n_seeds\n";
        for (const auto* curve : {&curves.thre_a, &curves.thre_rec}) {
          for (const auto& p : *curve) {
            csv << (curve == &curves.thre_a ? "thre_a" : "thre_rec") << ',' << csv_real(p.threshold) << ','
                << csv_real(p.accuracy.mean) << ',' << csv_real(p.accuracy.std) << ',' << p.accuracy.n << '\n';
          }
        }
      } else {
        const auto r = eval::sweep_multisubject(config, n_max, m_max, s, opts);
        std::ofstream csv(run.path("multisubject.csv"));
        csv << "n_labeled,n_unlabeled,skipped,accuracy_mean,accuracy_std,n_seeds\n";
        for (const auto& c : r.cells) {
          csv << c.n_labeled << ',' << c.n_unlabeled << ',' << (c.skipped ? 1 : 0) << ',';
          if (c.skipped) {
            csv << ",,0\n";
          } else {
            csv << csv_real(c.accuracy.mean) << ',' << csv_real(c.accuracy.std) << ',' << c.accuracy.n << '\n';
          }
        }
      }
      run.finish(config, {{"kind", sweep_kind}, {"seeds", s}});
    } else if (name == "export-latents") {
      if (!fs::exists(checkpoint_path)) throw DataError(DataErrorCode::io_error, "checkpoint not found: " + checkpoint_path);
      run.input(checkpoint_path);
      const auto ck = model::load_checkpoint(checkpoint_path);
      const auto st = standardizer_from(ck);
      Pools pools = gather(run, data_dir, config);
      const auto l = st.apply(pools.labeled);
      const auto u = st.apply(pools.unlabeled);
      std::vector<const data::Dataset*> list{&l, &u};
      std::optional<data::Dataset> t;
      if (pools.test) {
        t = st.apply(*pools.test);
        list.push_back(&*t);
      }
      const auto ex = eval::export_latents(ck.params, list, run.path("features.csv"), run.path("pca.csv"));
      run.log("exported " + std::to_string(ex.rows) + " latents; top-2 components explain " +
              csv_real(ex.pca.explained) + " of the variance");
      run.finish(config, {{"pca_explained", ex.pca.explained}});
    }
    return kOk;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kNumericError;
  } catch (const std::exception& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  }
}

}  // namespace drssl::cli
