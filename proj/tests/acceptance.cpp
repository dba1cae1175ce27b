// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Optional arguments select criteria by name substring.
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "tvs/assignment.h"
#include "tvs/baselines.h"
#include "tvs/checkpoint.h"
#include "tvs/error.h"
#include "tvs/evaluation.h"
#include "tvs/grad_check.h"
#include "tvs/ordering.h"
#include "tvs/retrieval.h"
#include "tvs/segments.h"
#include "tvs/synthetic.h"
#include "tvs/train.h"
#include "tvs/vq.h"

using namespace tvs;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass;
  std::string detail;
};

std::vector<std::string> letters(std::size_t m) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < m; ++i) out.push_back("i" + std::to_string(i));
  return out;
}

double brute_tau(const std::vector<std::string>& pred, const std::vector<std::string>& ref) {
  const auto m = ref.size();
  auto pos = [&](const std::string& id) { return std::find(pred.begin(), pred.end(), id) - pred.begin(); };
  long inv = 0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) inv += pos(ref[i]) > pos(ref[j]);
  return 1.0 - 2.0 * static_cast<double>(inv) / (static_cast<double>(m * (m - 1)) / 2.0);
}

Eigen::VectorXd random_unit(int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Eigen::VectorXd v(dim);
  for (auto& x : v) x = n(rng);
  return v.normalized();
}

std::string fmt(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

// ---------------------------------------------------------------- oracles

Outcome metric_oracle() {
  const auto t0 = Clock::now();
  long cases = 0, mismatches = 0;
  for (std::size_t m = 1; m <= 6; ++m) {
    const auto ref = letters(m);
    auto p = ref;
    do {
      ++cases;
      if (m >= 2 && kendall_tau(p, ref) != brute_tau(p, ref)) ++mismatches;
    } while (std::next_permutation(p.begin(), p.end()));
  }
  std::mt19937_64 rng(17);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t m = 2 + rng() % 10;
    const auto ref = letters(m);
    auto p = ref;
    std::shuffle(p.begin(), p.end(), rng);
    ++cases;
    if (kendall_tau(p, ref) != brute_tau(p, ref)) ++mismatches;
  }
  const double t = seconds_since(t0);
  // Exhaustive part: every permutation of sizes 1..6, 873 in all.
  return {mismatches == 0 && cases == 873 + 1000 && t < 5.0,
          std::to_string(cases) + " cases, " + std::to_string(mismatches) + " mismatches, " + fmt(t) + " s"};
}

Outcome eq1_endpoints() {
  bool ok = true;
  for (std::size_t m = 2; m <= 11; ++m) {
    const auto ref = letters(m);
    auto rev = ref;
    std::reverse(rev.begin(), rev.end());
    ok = ok && kendall_tau(ref, ref) == 1.0 && kendall_tau(rev, ref) == -1.0;
  }
  return {ok, "m = 2..11"};
}

Outcome vq_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(23);
  int mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    CodebookConfig c;
    c.size = 1 + static_cast<int>(rng() % 512);
    c.code_dim = 2 + static_cast<int>(rng() % 63);
    Codebook book(c, rng());
    const auto f = random_unit(c.code_dim, rng);
    const auto& b = book.books()[0];
    int best = 0;
    double best_d = (b.row(0).transpose() - f).squaredNorm();
    for (int r = 1; r < b.rows(); ++r) {
      const double d = (b.row(r).transpose() - f).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = r;
      }
    }
    mismatches += book.quantize(f).index[0] != best;
  }
  const double t = seconds_since(t0);
  return {mismatches == 0 && t < 5.0, "1000 trials, " + std::to_string(mismatches) + " mismatches, " + fmt(t) + " s"};
}

Outcome assignment_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> u(-1, 1);
  int bad = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int m = 1 + trial % 7;
    Eigen::MatrixXd s(m, m);
    for (auto& x : s.reshaped()) x = u(rng);
    std::vector<int> p(static_cast<std::size_t>(m));
    std::iota(p.begin(), p.end(), 0);
    double best = -1e300;
    do {
      double t = 0;
      for (int i = 0; i < m; ++i) t += s(i, p[static_cast<std::size_t>(i)]);
      best = std::max(best, t);
    } while (std::next_permutation(p.begin(), p.end()));
    const auto got = bipartite_match(s);
    double check = 0;
    for (int i = 0; i < m; ++i) check += s(i, got.row_to_col[static_cast<std::size_t>(i)]);
    bad += std::abs(got.total - best) > 1e-9 || std::abs(check - got.total) > 1e-9;
  }
  const double t = seconds_since(t0);
  return {bad == 0 && t < 10.0, "200 matrices, " + std::to_string(bad) + " mismatches, " + fmt(t) + " s"};
}

Outcome gradient_check() {
  const auto t0 = Clock::now();
  double worst = 0;
  std::string where;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    SyntheticConfig sc;
    sc.n_examples = 2;
    sc.dim = 8;
    sc.length_probs = {0.5, 0.5};
    const auto data = generate_synthetic(sc, seed);
    const auto probe = prepare_examples(data.dataset.examples, data.dataset.texts, data.dataset.frames, 64);
    OrdererConfig oc;
    oc.input_dim = 8;
    oc.code_dim = 8;
    oc.model_dim = 16;
    oc.depth = 2;
    oc.heads = 2;
    oc.ffn_dim = 32;
    oc.max_len = 24;
    OrdererModel model(oc, seed);
    CodebookConfig cc;
    cc.size = 16;
    cc.code_dim = 8;
    Codebook book(cc, seed + 50);
    TrainConfig tc;
    tc.batch_size = 2;
    const auto r = grad_check(model, &book, probe, tc, 1e-5);
    if (r.max_relative_error > worst) {
      worst = r.max_relative_error;
      where = r.worst_parameter;
    }
  }
  const double t = seconds_since(t0);
  return {worst < 1e-4 && t < 60.0, "max rel err " + std::to_string(worst) + " (" + where + "), " + fmt(t) + " s"};
}

Outcome straight_through() {
  std::mt19937_64 rng(31);
  bool ok = true;
  StraightThrough st;
  for (int trial = 0; trial < 100; ++trial) {
    const auto f = random_unit(16, rng), c = random_unit(16, rng), up = random_unit(16, rng);
    ok = ok && st.forward(f, c) == c && st.backward_feature(up) == up && st.backward_code(up).isZero();
    ad::ParameterSet ps;
    auto& p = ps.add("f", f.transpose(), false);
    ad::GradBuffer g(ps);
    ad::Tape tape(&g);
    const auto out = tape.straight_through(tape.param(p), c.transpose());
    ok = ok && tape.value(out) == ad::Mat(c.transpose());
    tape.seed(out, up.transpose());
    tape.backward();
    ok = ok && g[0] == ad::Mat(up.transpose());
  }
  return {ok, "100 probe vectors, exact"};
}

Outcome beam_reduction() {
  std::mt19937_64 rng(37);
  int bad_reduce = 0, bad_opt = 0;
  auto instance = [&](std::size_t m, EmbeddingTable& frames, std::vector<std::string>& ids,
                      std::vector<Eigen::VectorXd>& segs) {
    for (std::size_t i = 0; i < m; ++i) {
      ids.push_back("f" + std::to_string(i));
      frames.insert(ids.back(), random_unit(8, rng));
      segs.push_back(random_unit(8, rng));
    }
  };
  for (int trial = 0; trial < 100; ++trial) {
    EmbeddingTable frames(8);
    std::vector<std::string> ids;
    std::vector<Eigen::VectorXd> segs;
    instance(2 + static_cast<std::size_t>(trial) % 10, frames, ids, segs);
    bad_reduce += order_contextual(segs, ids, frames, 1).ordered_ids != order_cumulative(segs, ids, frames).ordered_ids;
  }
  for (int trial = 0; trial < 100; ++trial) {
    EmbeddingTable frames(8);
    std::vector<std::string> ids;
    std::vector<Eigen::VectorXd> segs;
    const std::size_t m = 1 + static_cast<std::size_t>(trial) % 5;
    instance(m, frames, ids, segs);
    auto p = ids;
    std::sort(p.begin(), p.end());
    double best = -1e300;
    do best = std::max(best, contextual_score(segs, p, frames));
    while (std::next_permutation(p.begin(), p.end()));
    const auto full = order_contextual(segs, ids, frames, 120);
    bad_opt += std::abs(contextual_score(segs, full.ordered_ids, frames) - best) > 1e-12;
  }
  return {bad_reduce == 0 && bad_opt == 0,
          "beam 1 mismatches " + std::to_string(bad_reduce) + "/100, exhaustive misses " + std::to_string(bad_opt) + "/100"};
}

Outcome format_round_trips() {
  const auto dir = fs::temp_directory_path() / ("tvs_accept_fmt_" + std::to_string(getpid()));
  fs::create_directories(dir);
  std::mt19937_64 rng(41);
  EmbeddingTable t(24);
  for (int i = 0; i < 50; ++i) t.insert("row" + std::to_string(i), random_unit(24, rng));
  save_embeddings(t, dir / "a.tvse");
  const auto back = load_embeddings(dir / "a.tvse");
  save_embeddings(back, dir / "b.tvse");
  auto bytes = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  bool ok = back == t && bytes(dir / "a.tvse") == bytes(dir / "b.tvse");

  ModelBundle b;
  OrdererConfig oc;
  oc.input_dim = 24;
  oc.code_dim = 8;
  oc.model_dim = 16;
  oc.depth = 2;
  oc.heads = 2;
  b.orderer = OrdererModel(oc, 3);
  CodebookConfig cc;
  cc.size = 32;
  cc.code_dim = 8;
  b.codebook = Codebook(cc, 4);
  RetrievalHeadConfig hc;
  hc.input_dim = 24;
  hc.shared_dim = 8;
  b.head = RetrievalHead(hc, 5);
  save_bundle(b, dir / "a.tvsc");
  const auto bb = load_bundle(dir / "a.tvsc");
  for (std::size_t i = 0; i < b.orderer->params().size(); ++i)
    ok = ok && bb.orderer->params()[i].value == b.orderer->params()[i].value;
  ok = ok && *bb.codebook == *b.codebook;
  save_bundle(bb, dir / "b.tvsc");
  ok = ok && bytes(dir / "a.tvsc") == bytes(dir / "b.tvsc");

  int rejected = 0, tried = 0;
  for (const char* f : {"a.tvse", "a.tvsc"}) {
    const auto good = bytes(dir / f);
    for (std::size_t pos : {0UL, 4UL}) {
      auto bad = good;
      bad[pos] = static_cast<char>(bad[pos] ^ 0x5a);
      std::ofstream(dir / "bad", std::ios::binary) << bad;
      ++tried;
      try {
        if (std::string(f).ends_with("tvse")) {
          load_embeddings(dir / "bad");
        } else {
          load_bundle(dir / "bad");
        }
      } catch (const FormatError&) {
        ++rejected;
      }
    }
  }
  fs::remove_all(dir);
  return {ok && rejected == tried, "bit-exact round-trips " + std::string(ok ? "yes" : "no") + ", corrupted headers rejected " +
                                       std::to_string(rejected) + "/" + std::to_string(tried)};
}

// ---------------------------------------------------------------- synthetic suite

// Planted data for the learnability, ablation and pipeline criteria.
SyntheticConfig suite_data() {
  SyntheticConfig c;
  c.n_examples = 2200;
  c.dim = 32;
  c.noise = 0.35;
  c.text_noise_scale = 4.0;
  c.detail_weight = 0.0;
  c.start_positions = 6;
  c.anchor_vocabulary = 32;
  c.min_tokens_per_segment = 2;
  c.max_tokens_per_segment = 2;
  return c;
}

struct Suite {
  SyntheticData data;
  std::vector<StoryboardExample> train, test;
  std::vector<PreparedExample> prepared;
};

Suite& suite() {
  static Suite s = [] {
    Suite out;
    out.data = generate_synthetic(suite_data(), 1);
    const auto& ex = out.data.dataset.examples;
    out.train.assign(ex.begin(), ex.begin() + 2000);
    out.test.assign(ex.begin() + 2000, ex.end());
    out.prepared = prepare_examples(out.train, out.data.dataset.texts, out.data.dataset.frames, 64);
    return out;
  }();
  return s;
}

struct Trained {
  OrdererModel model;
  std::optional<Codebook> book;
  double seconds;
};

Trained train_suite_model(bool use_vq) {
  auto& s = suite();
  OrdererConfig oc;
  oc.input_dim = 32;
  oc.model_dim = 64;
  oc.depth = 3;
  oc.use_vq = use_vq;
  OrdererModel model(oc, 3);
  std::optional<Codebook> book;
  if (use_vq) {
    CodebookConfig cc;
    cc.size = 1024;
    cc.dead_code_steps = 100;
    book.emplace(cc, 4);
  }
  TrainConfig tc;
  tc.total_steps = 1500;
  tc.learning_rate = 1e-3;
  tc.seed = 5;
  const auto t0 = Clock::now();
  train_orderer(model, book ? &*book : nullptr, s.prepared, tc);
  return {std::move(model), std::move(book), seconds_since(t0)};
}

Trained& vq_model() {
  static Trained t = train_suite_model(true);
  return t;
}

Trained& plain_model() {
  static Trained t = train_suite_model(false);
  return t;
}

std::vector<std::string> sorted_ids(std::vector<std::string> v) {
  std::sort(v.begin(), v.end());
  return v;
}

struct OrderScores {
  double tau = 0;
  double exact = 0;
};

OrderScores score_model(const Trained& t) {
  auto& s = suite();
  std::vector<ExampleResult> res;
  std::size_t exact = 0;
  for (const auto& ex : s.test) {
    VqTransOptions o;
    o.allow_eos = false;
    const auto r = order_vq_trans(t.model, t.book ? &*t.book : nullptr, ex.text_id, sorted_ids(ex.frame_ids),
                                  s.data.dataset.texts, s.data.dataset.frames, o);
    res.push_back({ex.example_id, ex.length(), tau_best(r.ordered_ids, ex.gt_variants), {}});
    exact += r.ordered_ids == ex.frame_ids;
  }
  return {bucket_report(res).overall.mean, static_cast<double>(exact) / static_cast<double>(s.test.size())};
}

struct BaselineScores {
  double naive = 0, sliding = 0, cumulative = 0;
};

BaselineScores score_baselines() {
  auto& s = suite();
  const auto& texts = s.data.dataset.texts;
  const auto& frames = s.data.dataset.frames;
  std::vector<ExampleResult> rn, rs, rc;
  for (const auto& ex : s.test) {
    const auto cands = sorted_ids(ex.frame_ids);
    rn.push_back({ex.example_id, ex.length(), tau_best(order_naive(texts.vector(ex.text_id), cands, frames).ordered_ids, ex.gt_variants), {}});
    SegmentEmbedder emb(texts, ex.text_id);
    std::size_t ntok = 0;
    while (texts.contains(ex.text_id + "#t" + std::to_string(ntok))) ++ntok;
    const auto segs = emb.embed_all(segment_text(ntok, ex.length()));
    rs.push_back({ex.example_id, ex.length(), tau_best(order_sliding(segs, cands, frames).ordered_ids, ex.gt_variants), {}});
    rc.push_back({ex.example_id, ex.length(), tau_best(order_cumulative(segs, cands, frames).ordered_ids, ex.gt_variants), {}});
  }
  return {bucket_report(rn).overall.mean, bucket_report(rs).overall.mean, bucket_report(rc).overall.mean};
}

Outcome learnability() {
  auto& t = vq_model();
  const auto vq = score_model(t);
  const auto b = score_baselines();
  const bool ok = vq.tau >= 0.8 && vq.tau >= b.cumulative + 0.02 && b.cumulative >= b.sliding + 0.02 &&
                  b.sliding >= b.naive + 0.02;
  return {ok, "VQ-Trans " + fmt(vq.tau) + " (exact order " + fmt(vq.exact * 100, 1) + "%), cumulative " +
                  fmt(b.cumulative) + ", sliding " + fmt(b.sliding) + ", naive " + fmt(b.naive) + "; train " +
                  fmt(t.seconds, 1) + " s on " + std::to_string(std::max(1U, std::thread::hardware_concurrency())) +
                  " core(s)"};
}

Outcome vq_ablation() {
  const auto with = score_model(vq_model());
  const auto without = score_model(plain_model());
  return {with.tau >= without.tau + 0.02, "prefix+VQ " + fmt(with.tau) + " vs prefix " + fmt(without.tau) + "; train " +
                                              fmt(plain_model().seconds, 1) + " s"};
}

// Heads trained on the train split of a planted corpus, evaluated on the
// val split with per-example pools of 100.
Outcome retrieval_direction() {
  SyntheticConfig c = suite_data();
  c.n_examples = 1500;
  // Fresh anchors and a strong frame-only nuisance: the gap a projection
  // head can learn to close and raw cosine cannot.
  c.anchor_vocabulary = 0;
  c.nuisance = 1.5;
  const auto data = generate_synthetic(c, 2);
  const auto split = split_dataset(data.dataset.examples, {0.8, 0.1, 0.1}, 3);
  const auto train = select_examples(data.dataset.examples, split.train);
  const auto val = select_examples(data.dataset.examples, split.val);
  RetrievalHeadConfig hc;
  hc.input_dim = 32;
  hc.shared_dim = 32;
  RetrievalHead head(hc, 6);
  TrainConfig tc;
  tc.total_steps = 500;
  tc.learning_rate = 1e-3;
  tc.batch_size = 32;
  tc.seed = 7;
  train_retrieval_head(head, train, data.dataset.texts, data.dataset.frames, tc);
  const auto& all = data.dataset.frames.ids();
  double raw = 0, tuned = 0;
  for (std::size_t i = 0; i < val.size(); ++i) {
    const auto pool = build_candidate_pool(val[i], all, 100, 500 + i);
    raw += recall_at_k(retrieve_topk(val[i].text_id, pool, data.dataset.texts, data.dataset.frames, nullptr, 10).ids,
                       val[i].frame_ids, 10);
    tuned += recall_at_k(retrieve_topk(val[i].text_id, pool, data.dataset.texts, data.dataset.frames, &head, 10).ids,
                         val[i].frame_ids, 10);
  }
  raw /= static_cast<double>(val.size());
  tuned /= static_cast<double>(val.size());
  return {tuned >= raw + 0.05, "R@10 raw " + fmt(raw) + " -> trained heads " + fmt(tuned) + " over " +
                                   std::to_string(val.size()) + " val examples"};
}

Outcome retrieve_order_pipeline() {
  auto& s = suite();
  auto& t = vq_model();
  const auto& texts = s.data.dataset.texts;
  const auto& frames = s.data.dataset.frames;
  const auto& all = frames.ids();
  int violations = 0, oracle_bad = 0;
  double product = 0;
  for (std::size_t i = 0; i < s.test.size(); ++i) {
    const auto& ex = s.test[i];
    const auto pool = build_candidate_pool(ex, all, 500, 900 + i);
    const auto ranking = retrieve_topk(ex.text_id, pool, texts, frames, nullptr, 10);
    for (std::size_t k : {5UL, 10UL}) {
      std::vector<std::string> topk(ranking.ids.begin(), ranking.ids.begin() + static_cast<long>(std::min(k, ranking.ids.size())));
      VqTransOptions o;
      o.allow_eos = false;
      const auto ordered = order_vq_trans(t.model, &*t.book, ex.text_id, sorted_ids(topk), texts, frames, o);
      const auto sc = retrieve_and_order_score(ordered.ordered_ids, ex, k);
      violations += sc.product > sc.r_at_k;
      if (k == 10) product += sc.product;
    }
    const auto oracle = retrieve_and_order_score(ex.frame_ids, ex, ex.length());
    oracle_bad += !(oracle.r_at_k == 1.0 && oracle.tau_at_k == 1.0 && oracle.product == 1.0);
  }
  return {violations == 0 && oracle_bad == 0,
          "product > R@K on " + std::to_string(violations) + " example-K pairs, oracle misses " +
              std::to_string(oracle_bad) + "; mean product@10 " + fmt(product / static_cast<double>(s.test.size()))};
}

// ---------------------------------------------------------------- CLI determinism

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

Outcome cli_determinism() {
  const char* cli = std::getenv("TVS_CLI");
  if (cli == nullptr) return {false, "TVS_CLI is not set"};
  const auto base = fs::temp_directory_path() / ("tvs_accept_cli_" + std::to_string(getpid()));
  fs::remove_all(base);
  const std::string tiny =
      " --set model.model_dim=16 --set model.depth=1 --set model.heads=2 --set model.ffn_dim=32"
      " --set model.code_dim=8 --set codebook.size=64 --set train.total_steps=20 --set head.total_steps=20"
      " --set head.shared_dim=16 --set rerank.model_dim=16 --set rerank.depth=1 --set rerank.heads=2"
      " --set rerank.total_steps=20 --set train.components=orderer,head,rerank --set eval.pool_size=60";
  struct Step {
    std::string name, args;
    std::vector<std::string> files;
  };
  std::vector<std::string> failures;
  int compared = 0;
  for (int rep = 0; rep < 2; ++rep) {
    const auto root = base / std::to_string(rep);
    const auto synth = root / "synth";
    const auto data = " --dataset " + (synth / "dataset.jsonl").string() + " --text-emb " +
                      (synth / "texts.tvse").string() + " --frame-emb " + (synth / "frames.tvse").string();
    const auto ckpt = " --checkpoint " + (root / "train" / "checkpoint.tvsc").string();
    const std::vector<Step> steps = {
        {"synth", "synth --set synth.n_examples=80 --set synth.dim=16", {"dataset.jsonl", "texts.tvse", "frames.tvse"}},
        {"train", "train" + data + tiny, {"checkpoint.tvsc", "curves.json"}},
        {"order", "order --strategy vq-trans" + data + tiny + ckpt, {"predictions.jsonl"}},
        {"eval", "eval --strategy rerank" + data + tiny + ckpt, {"predictions.jsonl", "report.json", "report.txt"}},
        {"eval_dyn", "eval --strategy dynamic --seg-limit 30" + data, {"predictions.jsonl", "report.json", "report.txt"}},
        {"retrieve", "retrieve" + data + tiny + ckpt, {"predictions.jsonl"}},
        {"eval_ret", "eval --protocol retrieval" + data + tiny + ckpt, {"predictions.jsonl", "report.json", "report.txt"}},
        {"retrieve_order", "retrieve-order --strategy vq-trans" + data + tiny + ckpt,
         {"predictions.jsonl", "report.json", "report.txt"}},
        {"sweep", "sweep --grid lambda" + data + tiny, {"report.json", "report.txt"}},
        {"stats", "stats" + data, {"report.json", "report.txt"}},
    };
    for (const auto& st : steps) {
      const auto out = root / st.name;
      const std::string cmd = std::string("'") + cli + "' " + st.args + " --seed 11 --workers 2 --out '" +
                              out.string() + "' > '" + (root / (st.name + ".log")).string() + "' 2>&1";
      fs::create_directories(root);
      const int status = std::system(cmd.c_str());
      if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) failures.push_back(st.name + " exited nonzero");
      if (rep == 1) {
        for (const auto& f : st.files) {
          ++compared;
          const auto a = slurp(base / "0" / st.name / f), b = slurp(out / f);
          if (a.empty() || a != b) failures.push_back(st.name + "/" + f + " differs");
        }
      }
    }
  }
  if (failures.empty()) fs::remove_all(base);
  std::string detail = std::to_string(compared) + " output files compared";
  for (const auto& f : failures) detail += "; " + f;
  return {failures.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"metric-oracle", metric_oracle},
      {"eq1-endpoints", eq1_endpoints},
      {"vq-oracle", vq_oracle},
      {"assignment-oracle", assignment_oracle},
      {"gradient-check", gradient_check},
      {"straight-through", straight_through},
      {"learnability", learnability},
      {"vq-ablation", vq_ablation},
      {"retrieval-direction", retrieval_direction},
      {"retrieve-order-pipeline", retrieve_order_pipeline},
      {"beam-reduction", beam_reduction},
      {"determinism", cli_determinism},
      {"format-round-trips", format_round_trips},
  };
  int failed = 0, ran = 0;
  for (const auto& [name, fn] : criteria) {
    if (argc > 1) {
      bool selected = false;
      for (int i = 1; i < argc; ++i) selected = selected || name.find(argv[i]) != std::string::npos;
      if (!selected) continue;
    }
    ++ran;
    Outcome o{false, ""};
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    failed += !o.pass;
  }
  std::cout << (ran - failed) << "/" << ran << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
