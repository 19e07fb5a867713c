#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "drssl/cli/cli.hpp"
#include "helpers.hpp"

namespace fs = std::filesystem;
using namespace drssl;

namespace {

const std::vector<std::string> kTiny{
    "model.channels=2",   "model.window_len=16", "model.conv_filters=2", "model.kernel_len=3",
    "model.pool_w=2",     "model.latent_dim=4",  "model.n_classes=2",    "model.disc_hidden=6",
    "model.keep_prob=1",  "train.batch_l=4",     "train.batch_u=4",      "train.steps=5",
    "task.n_per_class=6", "train.thre_rec=1e9"};

struct Result {
  int code = 0;
  std::string out, err;
};

Result run(std::vector<std::string> args, const std::vector<std::string>& sets = kTiny) {
  for (const auto& s : sets) {
    args.push_back("--set");
    args.push_back(s);
  }
  args.insert(args.begin(), "drssl");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Result r;
  r.code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::size_t line_count(const fs::path& p) {
  const auto s = slurp(p);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("usage errors exit with 1") {
    CHECK(run({}, {}).code == cli::kUsage);
    CHECK(run({"bogus"}, {}).code == cli::kUsage);
    const auto dir = testutil::temp_dir("cli_usage");
    CHECK(run({"train"}, {}).code == cli::kUsage);  // --out missing
    const auto r = run({"train", "--out", dir.string(), "--set", "model.nope=1"}, {});
    CHECK(r.code == cli::kUsage);
    CHECK(r.err.find("model.nope") != std::string::npos);
    const auto cfg = run({"train", "--out", dir.string(), "--config", (dir / "absent.cfg").string()}, {});
    CHECK(cfg.code == cli::kDataError);
    CHECK(cfg.err.find("absent.cfg") != std::string::npos);
    CHECK(run({"--help"}, {}).code == cli::kOk);
  }

  TEST_CASE("missing dataset names the path and exits with 2") {
    const auto dir = testutil::temp_dir("cli_missing");
    const auto data = dir / "nowhere";
    const auto r = run({"train", "--out", (dir / "run").string(), "--data", data.string()});
    CHECK(r.code == cli::kDataError);
    CHECK(r.err.find((data / "labeled.ssld").string()) != std::string::npos);
    const auto e = run({"eval", "--out", (dir / "ev").string(), "--checkpoint", (dir / "none.bin").string(), "--test",
                        (dir / "t.ssld").string()});
    CHECK(e.code == cli::kDataError);
    CHECK(e.err.find("checkpoint not found") != std::string::npos);
  }

  TEST_CASE("corrupt dataset exits with 2") {
    const auto dir = testutil::temp_dir("cli_corrupt");
    fs::create_directories(dir / "data");
    fs::copy_file(fs::path(DRSSL_FIXTURE_DIR) / "bad_magic.ssld", dir / "data" / "labeled.ssld");
    fs::copy_file(fs::path(DRSSL_FIXTURE_DIR) / "tiny.ssld", dir / "data" / "unlabeled.ssld");
    const auto r = run({"train", "--out", (dir / "run").string(), "--data", (dir / "data").string()});
    CHECK(r.code == cli::kDataError);
  }

  TEST_CASE("numeric blow-up exits with 3") {
    const auto dir = testutil::temp_dir("cli_nan");
    auto sets = kTiny;
    sets.push_back("train.lr=1e300");
    const auto r = run({"train", "--out", dir.string()}, sets);
    CHECK(r.code == cli::kNumericError);
    CHECK_FALSE(r.err.empty());
  }

  TEST_CASE("gen-data, train, eval and export-latents") {
    const auto dir = testutil::temp_dir("cli_flow");
    const auto data = dir / "data";
    REQUIRE(run({"gen-data", "--out", data.string(), "--seed", "5"}).code == cli::kOk);
    for (const char* f : {"labeled.ssld", "unlabeled.ssld", "test.ssld", "manifest.json"}) CHECK(fs::exists(data / f));

    const auto a = dir / "a", b = dir / "b";
    REQUIRE(run({"train", "--out", a.string(), "--data", data.string(), "--seed", "5"}).code == cli::kOk);
    REQUIRE(run({"train", "--out", b.string(), "--data", data.string(), "--seed", "5"}).code == cli::kOk);
    for (const char* f : {"checkpoint.bin", "history.jsonl", "metrics.json", "manifest.json"}) CHECK(fs::exists(a / f));
    CHECK(slurp(a / "history.jsonl") == slurp(b / "history.jsonl"));
    CHECK(slurp(a / "metrics.json") == slurp(b / "metrics.json"));
    CHECK(slurp(a / "checkpoint.bin") == slurp(b / "checkpoint.bin"));
    CHECK(line_count(a / "history.jsonl") == 5);
    CHECK(slurp(a / "manifest.json").find("\"train.seed\"") != std::string::npos);

    const auto ev = dir / "ev";
    REQUIRE(run({"eval", "--out", ev.string(), "--checkpoint", (a / "checkpoint.bin").string(), "--test",
                 (data / "test.ssld").string()})
                .code == cli::kOk);
    // eval re-applies the stored standardizer, so it reproduces the training-time score
    CHECK(slurp(ev / "metrics.json") == slurp(a / "metrics.json"));

    const auto ex = dir / "ex";
    REQUIRE(run({"export-latents", "--out", ex.string(), "--checkpoint", (a / "checkpoint.bin").string(), "--data",
                 data.string()})
                .code == cli::kOk);
    CHECK(line_count(ex / "features.csv") == line_count(ex / "pca.csv"));
    CHECK(line_count(ex / "features.csv") > 1);
  }

  TEST_CASE("ablate and sweeps write their tables") {
    const auto dir = testutil::temp_dir("cli_exp");
    REQUIRE(run({"ablate", "--out", (dir / "abl").string(), "--seeds", "0,1", "--jobs", "2"}).code == cli::kOk);
    const auto abl = slurp(dir / "abl" / "ablation.csv");
    CHECK(line_count(dir / "abl" / "ablation.csv") == 5);
    for (const char* v : {"\nfull,", "\ny,", "\ny+a,", "\ny+rec+con,"}) CHECK(abl.find(v) != std::string::npos);

    auto sets = kTiny;
    sets.push_back("task.n_subjects=3");
    sets.push_back("train.steps=2");
    REQUIRE(run({"sweep", "--kind", "thresholds", "--out", (dir / "thr").string(), "--seeds", "0,1,2", "--thre-rec",
                 "0.5,1e9"},
                sets)
                .code == cli::kOk);
    CHECK(line_count(dir / "thr" / "thresholds.csv") == 3);
    REQUIRE(run({"sweep", "--kind", "multisubject", "--out", (dir / "ms").string(), "--seeds", "0,1", "--n-max", "2",
                 "--m-max", "2"},
                sets)
                .code == cli::kOk);
    CHECK(line_count(dir / "ms" / "multisubject.csv") == 5);
    CHECK(run({"sweep", "--kind", "thresholds", "--out", (dir / "bad").string()}, sets).code == cli::kUsage);
  }
}
