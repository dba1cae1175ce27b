#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>
#include <json.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string cli() {
  const char* p = std::getenv("TVS_CLI");
  REQUIRE_MESSAGE(p != nullptr, "TVS_CLI must point at the tvs binary");
  return p;
}

fs::path scratch() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / ("tvs_cli_test_" + std::to_string(getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Result {
  int code;
  std::string output;
};

Result run(const std::string& args) {
  const auto log = scratch() / "last.log";
  const std::string cmd = "'" + cli() + "' " + args + " > '" + log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(log)};
}

std::string data_flags(const fs::path& dir) {
  return " --dataset " + (dir / "dataset.jsonl").string() + " --text-emb " + (dir / "texts.tvse").string() +
         " --frame-emb " + (dir / "frames.tvse").string();
}

const std::string kTiny =
    " --set model.model_dim=16 --set model.depth=1 --set model.heads=2 --set model.ffn_dim=32"
    " --set model.code_dim=8 --set codebook.size=32 --set codebook.dead_code_steps=0"
    " --set train.total_steps=5 --set train.batch_size=4 --set head.total_steps=5 --set head.shared_dim=8"
    " --set rerank.model_dim=16 --set rerank.depth=1 --set rerank.heads=2 --set rerank.total_steps=5";

// Shared fixture: one small synthetic corpus and one trained checkpoint.
const fs::path& corpus() {
  static const fs::path dir = [] {
    auto d = scratch() / "synth";
    auto r = run("synth --seed 7 --out " + d.string() + " --set synth.n_examples=60 --set synth.dim=8");
    REQUIRE_MESSAGE(r.code == 0, r.output);
    return d;
  }();
  return dir;
}

const fs::path& trained() {
  static const fs::path dir = [] {
    auto d = scratch() / "train";
    auto r = run("train --seed 7 --out " + d.string() + data_flags(corpus()) + kTiny +
                 " --components orderer,head,rerank");
    REQUIRE_MESSAGE(r.code == 0, r.output);
    return d;
  }();
  return dir;
}

std::size_t count_lines(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

}  // namespace

TEST_CASE("synth writes the dataset triple and a manifest") {
  const auto& d = corpus();
  for (const char* f : {"dataset.jsonl", "texts.tvse", "frames.tvse", "manifest"}) CHECK(fs::exists(d / f));
  CHECK(count_lines(slurp(d / "dataset.jsonl")) == 60);
  const auto m = slurp(d / "manifest");
  CHECK(m.find("command = synth") != std::string::npos);
  CHECK(m.find("[seeds]") != std::string::npos);
  CHECK(m.find("[config]") != std::string::npos);
  CHECK(m.find("[outputs]") != std::string::npos);
  CHECK(m.find("frames.tvse") != std::string::npos);
  CHECK(m.find("n_examples = 60") != std::string::npos);
}

TEST_CASE("synth is byte-deterministic for a fixed seed") {
  const auto a = scratch() / "det_a", b = scratch() / "det_b", c = scratch() / "det_c";
  const std::string common = " --set synth.n_examples=40 --set synth.dim=8";
  REQUIRE(run("synth --seed 7 --out " + a.string() + common).code == 0);
  REQUIRE(run("synth --seed 7 --out " + b.string() + common).code == 0);
  REQUIRE(run("synth --seed 8 --out " + c.string() + common).code == 0);
  for (const char* f : {"dataset.jsonl", "texts.tvse", "frames.tvse"}) {
    CHECK(slurp(a / f) == slurp(b / f));
  }
  CHECK(slurp(a / "frames.tvse") != slurp(c / "frames.tvse"));
}

TEST_CASE("train writes a checkpoint, curves and a manifest naming its inputs") {
  const auto& d = trained();
  CHECK(fs::exists(d / "checkpoint.tvsc"));
  const auto curves = json::parse(slurp(d / "curves.json"));
  CHECK(curves.contains("orderer"));
  CHECK(curves.contains("head"));
  CHECK(curves.contains("rerank"));
  CHECK(curves["orderer"]["loss"].size() == 5);
  const auto m = slurp(d / "manifest");
  CHECK(m.find("[inputs]") != std::string::npos);
  CHECK(m.find("dataset.jsonl") != std::string::npos);
  CHECK(m.find("checkpoint.tvsc") != std::string::npos);
}

TEST_CASE("order and eval produce one prediction per example for every strategy") {
  const auto ckpt = (trained() / "checkpoint.tvsc").string();
  for (const char* s : {"vq-trans", "rerank", "naive", "sliding", "cumulative", "dynamic", "contextual"}) {
    CAPTURE(s);
    const auto out = scratch() / (std::string("eval_") + s);
    auto r = run(std::string("eval --protocol ordering --split all --strategy ") + s + " --seg-limit 50 --beam-width 4 --checkpoint " +
                 ckpt + " --out " + out.string() + data_flags(corpus()) + kTiny);
    REQUIRE_MESSAGE(r.code == 0, r.output);
    CHECK(count_lines(slurp(out / "predictions.jsonl")) == 60);
    const auto report = json::parse(slurp(out / "report.json"));
    REQUIRE(report.is_array());
    REQUIRE(report.size() == 1);
    CHECK(fs::exists(out / "report.txt"));
  }
  const auto out = scratch() / "order_naive";
  auto r = run("order --split test --strategy naive --out " + out.string() + data_flags(corpus()));
  REQUIRE_MESSAGE(r.code == 0, r.output);
  std::istringstream lines(slurp(out / "predictions.jsonl"));
  std::string line;
  std::size_t n = 0;
  while (std::getline(lines, line)) {
    const auto j = json::parse(line);
    CHECK(j.contains("example_id"));
    ++n;
  }
  CHECK(n > 0);
}

TEST_CASE("eval predictions and reports are byte-identical across runs") {
  const auto ckpt = (trained() / "checkpoint.tvsc").string();
  const auto a = scratch() / "rep_a", b = scratch() / "rep_b";
  const std::string args = "eval --protocol ordering --split all --strategy vq-trans --checkpoint " + ckpt +
                           data_flags(corpus()) + kTiny + " --workers 2 --out ";
  REQUIRE(run(args + a.string()).code == 0);
  REQUIRE(run(args + b.string()).code == 0);
  CHECK(slurp(a / "predictions.jsonl") == slurp(b / "predictions.jsonl"));
  CHECK(slurp(a / "report.json") == slurp(b / "report.json"));
  CHECK(slurp(a / "report.txt") == slurp(b / "report.txt"));
}

TEST_CASE("retrieve and the retrieval protocol use the head when the checkpoint has one") {
  const auto ckpt = (trained() / "checkpoint.tvsc").string();
  const auto out = scratch() / "retrieve";
  auto r = run("retrieve --split all --pool-size 50 --k 5,10 --checkpoint " + ckpt + " --out " + out.string() +
               data_flags(corpus()));
  REQUIRE_MESSAGE(r.code == 0, r.output);
  CHECK(r.output.find("projected") != std::string::npos);
  CHECK(count_lines(slurp(out / "predictions.jsonl")) == 60);

  const auto ev = scratch() / "retrieval_eval";
  r = run("eval --protocol retrieval --split all --pool-size 50 --k 5,10 --checkpoint " + ckpt + " --out " +
          ev.string() + data_flags(corpus()));
  REQUIRE_MESSAGE(r.code == 0, r.output);
  const auto report = json::parse(slurp(ev / "report.json"));
  REQUIRE(report.size() == 2);
  CHECK(report[0]["method"] == "zero-shot");
  CHECK(report[1]["method"] == "fine-tuned");
}

TEST_CASE("retrieve-order runs with vq-trans and rejects unsupported strategies") {
  const auto ckpt = (trained() / "checkpoint.tvsc").string();
  const auto out = scratch() / "ro";
  auto r = run("retrieve-order --split all --strategy vq-trans --pool-size 50 --k 5,10 --checkpoint " + ckpt +
               " --out " + out.string() + data_flags(corpus()) + kTiny);
  REQUIRE_MESSAGE(r.code == 0, r.output);
  CHECK(count_lines(slurp(out / "predictions.jsonl")) == 60);
  const auto line = json::parse(slurp(out / "predictions.jsonl").substr(0, slurp(out / "predictions.jsonl").find('\n')));
  CHECK(line.contains("ordered@5"));
  CHECK(line["ordered@5"].size() <= 5);

  r = run("retrieve-order --split all --strategy sliding --out " + (scratch() / "ro_bad").string() +
          data_flags(corpus()));
  CHECK(r.code == 1);
  CHECK(r.output.find("error:") != std::string::npos);
}

TEST_CASE("sweep appendix-c2 reports twelve rows") {
  const auto out = scratch() / "sweep";
  auto r = run("sweep --grid appendix-c2 --split test --out " + out.string() + data_flags(corpus()) + kTiny +
               " --set train.total_steps=2");
  REQUIRE_MESSAGE(r.code == 0, r.output);
  const auto report = json::parse(slurp(out / "report.json"));
  REQUIRE(report.size() == 12);
  CHECK(report[0]["code_dim"] == 32);
  CHECK(report[0]["size"] == 1024);
  CHECK(report[11]["code_dim"] == 512);
  CHECK(report[11]["size"] == 8192);
  for (const auto& row : report) {
    CHECK(row["overall"].get<double>() >= -1.0);
    CHECK(row["overall"].get<double>() <= 1.0);
  }
}

TEST_CASE("stats summarizes the corpus") {
  const auto out = scratch() / "stats";
  auto r = run("stats --out " + out.string() + data_flags(corpus()));
  REQUIRE_MESSAGE(r.code == 0, r.output);
  const auto j = json::parse(slurp(out / "report.json"));
  CHECK(j["examples"] == 60);
  CHECK(j["min_words"].get<double>() > 0);
  CHECK(fs::exists(out / "report.txt"));
}

TEST_CASE("configuration errors exit 1 and name every offending key") {
  auto r = run("synth --out " + (scratch() / "bad").string() + " --set synth.nope=1 --set model.bogus=2");
  CHECK(r.code == 1);
  CHECK(r.output.find("error:") != std::string::npos);
  CHECK(r.output.find("synth.nope") != std::string::npos);
  CHECK(r.output.find("model.bogus") != std::string::npos);

  const auto cfg = scratch() / "bad.cfg";
  std::ofstream(cfg) << "[train]\ntotal_steps = ten\n[model]\ndepth = x\n";
  r = run("train -c " + cfg.string() + data_flags(corpus()) + " --out " + (scratch() / "bad2").string());
  CHECK(r.code == 1);
  CHECK(r.output.find("train.total_steps") != std::string::npos);
  CHECK(r.output.find("model.depth") != std::string::npos);

  r = run("order --out " + (scratch() / "bad3").string() + " --dataset /nonexistent.jsonl --text-emb x --frame-emb y");
  CHECK(r.code == 1);
  CHECK(r.output.find("error:") != std::string::npos);

  r = run("frobnicate");
  CHECK(r.code != 0);
}
