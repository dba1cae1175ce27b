#include "tvs/commands.h"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "tvs/baselines.h"
#include "tvs/checkpoint.h"
#include "tvs/dataset.h"
#include "tvs/error.h"
#include "tvs/evaluation.h"
#include "tvs/ordering.h"
#include "tvs/parallel.h"
#include "tvs/rerank.h"
#include "tvs/retrieval.h"
#include "tvs/segments.h"
#include "tvs/synthetic.h"
#include "tvs/train.h"

namespace tvs {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum SeedStream : std::uint64_t { kSplit = 1, kModel, kCodebook, kTrain, kPool, kHead, kRerank, kSegments, kSynth };

// Collects the files a command writes and emits the manifest last.
class Run {
 public:
  Run(const RunConfig& config, std::string command, std::ostream& log)
      : config_(config), command_(std::move(command)), log_(log), out_(config.get("run.out")) {
    config_.validate();
    fs::create_directories(out_);
    log_ << "[" << command_ << "] resolved config:\n" << config_.dump() << '\n';
  }

  const fs::path& out() const { return out_; }
  std::ostream& log() { return log_; }

  void input(const fs::path& p) { inputs_.push_back(p); }

  fs::path write(const std::string& name, const std::string& content) {
    const auto p = out_ / name;
    std::ofstream f(p, std::ios::binary);
    if (!f) throw Error("cannot write '" + p.string() + "'");
    f << content;
    f.close();
    outputs_.push_back(p);
    log_ << "[" << command_ << "] wrote " << p.string() << '\n';
    return p;
  }

  void produced(const fs::path& p) {
    outputs_.push_back(p);
    log_ << "[" << command_ << "] wrote " << p.string() << '\n';
  }

  void finish() {
    std::ostringstream m;
    m << "command = " << command_ << "\n\n";
    m << "[seeds]\nrun = " << config_.seed() << '\n';
    static const std::vector<std::pair<const char*, std::uint64_t>> streams = {
        {"split", kSplit}, {"model", kModel},   {"codebook", kCodebook}, {"train", kTrain}, {"pool", kPool},
        {"head", kHead},   {"rerank", kRerank}, {"segments", kSegments}, {"synth", kSynth}};
    for (const auto& [name, s] : streams) m << name << " = " << derive_seed(config_.seed(), s) << '\n';
    m << "\n[config]\n" << config_.dump() << '\n';
    m << "[inputs]\n";
    for (const auto& p : inputs_) m << p.string() << " = " << fnv1a_file(p) << '\n';
    m << "\n[outputs]\n";
    for (const auto& p : outputs_) m << p.filename().string() << " = " << fnv1a_file(p) << '\n';
    std::ofstream f(out_ / "manifest", std::ios::binary);
    f << m.str();
    log_ << "[" << command_ << "] wrote " << (out_ / "manifest").string() << '\n';
  }

  const RunConfig& config() const { return config_; }

 private:
  RunConfig config_;
  std::string command_;
  std::ostream& log_;
  fs::path out_;
  std::vector<fs::path> inputs_, outputs_;
};

Dataset load_inputs(Run& run) {
  const auto& c = run.config();
  const fs::path ds = c.get("data.dataset"), te = c.get("data.text_emb"), fe = c.get("data.frame_emb");
  Dataset d = load_dataset(ds, te, fe);
  run.input(ds);
  run.input(te);
  run.input(fe);
  return d;
}

DatasetSplit make_split(const RunConfig& c, const std::vector<StoryboardExample>& examples) {
  return split_dataset(examples, c.get_doubles("data.split"), derive_seed(c.seed(), kSplit));
}

std::vector<StoryboardExample> split_examples(const RunConfig& c, const Dataset& d, const std::string& which) {
  const auto split = make_split(c, d.examples);
  if (which == "train") return select_examples(d.examples, split.train);
  if (which == "val") return select_examples(d.examples, split.val);
  if (which == "test") return select_examples(d.examples, split.test);
  if (which == "all") return d.examples;
  throw InvalidArgument("eval.split: expected train, val, test or all, got '" + which + "'");
}

fs::path checkpoint_path(const RunConfig& c) {
  const auto& p = c.get("eval.checkpoint");
  return p.empty() ? fs::path(c.get("run.out")) / "checkpoint.tvsc" : fs::path(p);
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::size_t token_count(const EmbeddingTable& texts, const StoryboardExample& ex) {
  std::size_t n = 0;
  while (texts.contains(token_key(ex.text_id, n))) ++n;
  return n > 0 ? n : tokenize(ex.synopsis_text).size();
}

std::string json_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

struct Orderer {
  std::string strategy;
  std::optional<ModelBundle> bundle;
};

bool needs_checkpoint(const std::string& strategy) { return strategy == "vq-trans" || strategy == "rerank"; }

Orderer make_orderer(Run& run) {
  Orderer o;
  o.strategy = run.config().get("eval.strategy");
  if (needs_checkpoint(o.strategy)) {
    const auto path = checkpoint_path(run.config());
    o.bundle = load_bundle(path);
    run.input(path);
    if (o.strategy == "vq-trans" && !o.bundle->orderer) throw LoadError("checkpoint has no orderer");
    if (o.strategy == "rerank" && !o.bundle->rerank) throw LoadError("checkpoint has no rerank model");
  }
  return o;
}

// Orders a full candidate set (the ordering protocol).
OrderingResult order_candidates(const Orderer& o, const RunConfig& c, const StoryboardExample& ex,
                                const std::vector<std::string>& candidates, const Dataset& d, std::size_t max_steps,
                                bool allow_eos) {
  const auto max_tokens = static_cast<int>(c.get_int("data.max_tokens"));
  if (o.strategy == "vq-trans") {
    VqTransOptions opt;
    opt.max_steps = max_steps;
    opt.allow_eos = allow_eos;
    opt.max_tokens = max_tokens;
    const Codebook* cb = o.bundle->codebook ? &*o.bundle->codebook : nullptr;
    return order_vq_trans(*o.bundle->orderer, cb, ex.text_id, candidates, d.texts, d.frames, opt);
  }
  if (o.strategy == "rerank") return order_rerank(*o.bundle->rerank, ex.text_id, candidates, d.texts, d.frames, max_tokens);
  if (o.strategy == "naive") return order_naive(d.texts.vector(ex.text_id), candidates, d.frames);

  const std::size_t m = candidates.size();
  const std::size_t n_tokens = token_count(d.texts, ex);
  if (n_tokens < m) {
    throw InvalidArgument("example '" + ex.example_id + "' has fewer tokens than candidates; strategy '" + o.strategy +
                          "' needs one segment per candidate");
  }
  SegmentEmbedder embedder(d.texts, ex.text_id);
  if (o.strategy == "dynamic") {
    const auto seed = derive_seed(c.seed(), kSegments) ^ fnv1a(ex.example_id);
    return order_dynamic(n_tokens, embedder, candidates, d.frames, static_cast<std::size_t>(c.get_int("eval.seg_limit")),
                         seed)
        .ordering;
  }
  const auto segments = embedder.embed_all(segment_text(n_tokens, m));
  if (o.strategy == "sliding") return order_sliding(segments, candidates, d.frames);
  if (o.strategy == "cumulative") return order_cumulative(segments, candidates, d.frames);
  if (o.strategy == "contextual") {
    return order_contextual(segments, candidates, d.frames, static_cast<std::size_t>(c.get_int("eval.beam_width")));
  }
  throw InvalidArgument("unknown strategy '" + o.strategy + "'");
}

std::vector<std::string> sorted(std::vector<std::string> v) {
  std::sort(v.begin(), v.end());
  return v;
}

struct OrderingRun {
  std::vector<std::string> prediction_lines;
  std::vector<ExampleResult> results;
};

OrderingRun run_ordering(Run& run, const Dataset& d, const std::vector<StoryboardExample>& examples) {
  const auto& c = run.config();
  const Orderer o = make_orderer(run);
  const bool allow_eos = c.get_bool("eval.allow_eos");
  std::vector<OrderingResult> preds(examples.size());
  parallel_for(examples.size(), static_cast<std::size_t>(c.get_int("run.workers")), [&](std::size_t i) {
    // Candidates in id order so the input order carries no signal.
    preds[i] = order_candidates(o, c, examples[i], sorted(examples[i].frame_ids), d, 0, allow_eos);
  });
  OrderingRun out;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    out.prediction_lines.push_back(prediction_to_json_line(examples[i].example_id, preds[i]));
    ExampleResult r;
    r.example_id = examples[i].example_id;
    r.length = examples[i].length();
    // With EOS enabled a prediction can be shorter; missing frames are
    // appended in id order so tau stays defined.
    auto full = preds[i].ordered_ids;
    for (const auto& id : sorted(examples[i].frame_ids))
      if (std::find(full.begin(), full.end(), id) == full.end()) full.push_back(id);
    r.tau = tau_best(full, examples[i].gt_variants);
    out.results.push_back(std::move(r));
  }
  return out;
}

struct RetrieveOrderRun {
  std::vector<std::string> prediction_lines;
  std::vector<ExampleResult> results;
};

RetrieveOrderRun run_retrieve_order(Run& run, const Dataset& d, const std::vector<StoryboardExample>& examples) {
  const auto& c = run.config();
  const Orderer o = make_orderer(run);
  if (o.strategy != "vq-trans" && o.strategy != "rerank" && o.strategy != "naive") {
    throw InvalidArgument("retrieve-order supports strategies vq-trans, rerank and naive; got '" + o.strategy + "'");
  }
  std::optional<ModelBundle> head_bundle;
  const RetrievalHead* head = nullptr;
  if (o.bundle && o.bundle->head) {
    head = &*o.bundle->head;
  } else if (fs::exists(checkpoint_path(c))) {
    head_bundle = load_bundle(checkpoint_path(c));
    if (head_bundle->head) {
      head = &*head_bundle->head;
      run.input(checkpoint_path(c));
    }
  }
  const auto ks = c.get_ints("eval.k");
  const auto pool_size = static_cast<std::size_t>(c.get_int("eval.pool_size"));
  const bool allow_eos = c.get_bool("eval.allow_eos");
  const std::size_t k_max = static_cast<std::size_t>(*std::max_element(ks.begin(), ks.end()));

  std::vector<ExampleResult> results(examples.size());
  std::vector<std::string> lines(examples.size());
  parallel_for(examples.size(), static_cast<std::size_t>(c.get_int("run.workers")), [&](std::size_t i) {
    const auto& ex = examples[i];
    const auto pool = build_candidate_pool(ex, d.frames.ids(), pool_size, derive_seed(c.seed(), kPool) + i);
    const auto ranking = retrieve_topk(ex.text_id, pool, d.texts, d.frames, head, k_max);
    ExampleResult r;
    r.example_id = ex.example_id;
    r.length = ex.length();
    json line = {{"example_id", ex.example_id}, {"retrieved", ranking.ids}};
    for (int k : ks) {
      const auto n = std::min<std::size_t>(static_cast<std::size_t>(k), ranking.ids.size());
      std::vector<std::string> topk(ranking.ids.begin(), ranking.ids.begin() + static_cast<std::ptrdiff_t>(n));
      OrderingResult ordered;
      if (o.strategy == "naive") {
        ordered.ordered_ids = topk;
      } else {
        ordered = order_candidates(o, c, ex, sorted(topk), d, n, allow_eos);
      }
      r.at_k[k] = retrieve_and_order_score(ordered.ordered_ids, ex, static_cast<std::size_t>(k));
      line["ordered@" + std::to_string(k)] = ordered.ordered_ids;
    }
    results[i] = std::move(r);
    lines[i] = line.dump();
  });
  return {lines, results};
}

void write_reports(Run& run, const std::vector<EvalReport>& reports, bool retrieval_layout) {
  json arr = json::array();
  for (const auto& r : reports) arr.push_back(json::parse(report_to_json(r)));
  run.write("report.json", arr.dump(2) + "\n");
  std::string text = retrieval_layout ? retrieval_table(reports) : ordering_table(reports);
  for (const auto& r : reports)
    for (const auto& [k, v] : r.notes) text += "# " + r.method + ": " + k + " = " + v + "\n";
  run.write("report.txt", text);
  run.log() << text;
}

void add_reference_notes(EvalReport& r, const std::string& protocol) {
  if (protocol == "ordering") {
    r.notes["eos"] = r.notes.count("eos") ? r.notes["eos"] : "disabled";
    r.notes["reference_vq_trans_movienet"] = "0.367";
  } else if (protocol == "retrieve-order") {
    r.notes["tau_at_k_convention"] = "1.0 when fewer than two ground-truth frames are retrieved";
    r.notes["reference_vq_trans_movienet_k20"] = "0.300";
  } else {
    r.notes["reference_finetuned_r1_movienet"] = "7.62";
  }
}

ModelBundle train_components(const RunConfig& c, const Dataset& d, const std::vector<StoryboardExample>& train,
                             std::ostream& log, json* curves) {
  ModelBundle bundle;
  const auto comps = c.get_list("train.components");
  auto has = [&](const char* name) { return std::find(comps.begin(), comps.end(), name) != comps.end(); };
  const auto max_tokens = static_cast<int>(c.get_int("data.max_tokens"));
  std::vector<PreparedExample> prepared;
  if (has("orderer") || has("rerank")) prepared = prepare_examples(train, d.texts, d.frames, max_tokens);
  const long log_every = std::max<long>(1, c.get_int("train.total_steps") / 10);

  if (has("orderer")) {
    OrdererConfig oc = c.orderer();
    oc.input_dim = static_cast<int>(d.frames.dim());
    OrdererModel model(oc, derive_seed(c.seed(), kModel));
    std::optional<Codebook> codebook;
    if (oc.use_vq) codebook.emplace(c.codebook(), derive_seed(c.seed(), kCodebook));
    TrainConfig tc = c.train();
    tc.seed = derive_seed(c.seed(), kTrain);
    const auto res = train_orderer(model, codebook ? &*codebook : nullptr, prepared, tc, [&](long step, const BatchLoss& l) {
      if (step % log_every == 0 || step + 1 == tc.total_steps) {
        log << "[train] orderer step " << step << " loss " << format_double(l.total) << " trans "
            << format_double(l.trans) << " vq " << format_double(l.vq) << '\n';
      }
    });
    if (curves != nullptr) {
      (*curves)["orderer"] = {{"loss", res.loss_curve}, {"trans", res.trans_curve}, {"vq", res.vq_curve},
                              {"dead_codes_reset", res.dead_codes_reset}};
    }
    bundle.orderer = std::move(model);
    if (codebook) bundle.codebook = std::move(*codebook);
  }
  if (has("head")) {
    RetrievalHeadConfig hc = c.head();
    hc.input_dim = static_cast<int>(d.texts.dim());
    RetrievalHead head(hc, derive_seed(c.seed(), kHead));
    TrainConfig tc = c.head_train();
    tc.seed = derive_seed(c.seed(), kHead) + 1;
    const auto res = train_retrieval_head(head, train, d.texts, d.frames, tc);
    log << "[train] head final loss " << format_double(res.loss_curve.empty() ? 0.0 : res.loss_curve.back()) << '\n';
    if (curves != nullptr) (*curves)["head"] = {{"loss", res.loss_curve}};
    bundle.head = std::move(head);
  }
  if (has("rerank")) {
    RerankConfig rc = c.rerank();
    rc.input_dim = static_cast<int>(d.frames.dim());
    RerankModel rr(rc, derive_seed(c.seed(), kRerank));
    TrainConfig tc = c.rerank_train();
    tc.seed = derive_seed(c.seed(), kRerank) + 1;
    const auto res = train_rerank(rr, prepared, tc);
    log << "[train] rerank final loss " << format_double(res.loss_curve.empty() ? 0.0 : res.loss_curve.back()) << '\n';
    if (curves != nullptr) (*curves)["rerank"] = {{"loss", res.loss_curve}};
    bundle.rerank = std::move(rr);
  }
  bundle.meta["train.lambda_vq"] = c.get("train.lambda_vq");
  bundle.meta["train.total_steps"] = c.get("train.total_steps");
  bundle.meta["run.seed"] = c.get("run.seed");
  return bundle;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t run_seed, std::uint64_t stream) {
  // splitmix64 of (seed, stream).
  std::uint64_t z = run_seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::string fnv1a_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot hash '" + path.string() + "'");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

void cmd_synth(const RunConfig& config, std::ostream& log) {
  Run run(config, "synth", log);
  const auto data = generate_synthetic(run.config().synthetic(), derive_seed(config.seed(), kSynth));
  const auto ds = run.out() / "dataset.jsonl";
  save_examples(data.dataset.examples, ds);
  run.produced(ds);
  save_embeddings(data.dataset.texts, run.out() / "texts.tvse");
  run.produced(run.out() / "texts.tvse");
  save_embeddings(data.dataset.frames, run.out() / "frames.tvse");
  run.produced(run.out() / "frames.tvse");
  log << "[synth] " << data.dataset.examples.size() << " examples, " << data.dataset.frames.size() << " frames\n";
  run.finish();
}

void cmd_train(const RunConfig& config, std::ostream& log) {
  Run run(config, "train", log);
  const Dataset d = load_inputs(run);
  const auto train = split_examples(run.config(), d, "train");
  json curves;
  const ModelBundle bundle = train_components(run.config(), d, train, log, &curves);
  const auto ckpt = run.out() / "checkpoint.tvsc";
  save_bundle(bundle, ckpt);
  run.produced(ckpt);
  run.write("curves.json", curves.dump() + "\n");
  run.finish();
}

void cmd_order(const RunConfig& config, std::ostream& log) {
  Run run(config, "order", log);
  const Dataset d = load_inputs(run);
  const auto examples = split_examples(run.config(), d, run.config().get("eval.split"));
  const auto res = run_ordering(run, d, examples);
  run.write("predictions.jsonl", json_lines(res.prediction_lines));
  run.finish();
}

void cmd_retrieve(const RunConfig& config, std::ostream& log) {
  Run run(config, "retrieve", log);
  const Dataset d = load_inputs(run);
  const auto& c = run.config();
  const auto examples = split_examples(c, d, c.get("eval.split"));
  std::optional<ModelBundle> bundle;
  if (fs::exists(checkpoint_path(c))) {
    bundle = load_bundle(checkpoint_path(c));
    run.input(checkpoint_path(c));
  }
  const RetrievalHead* head = bundle && bundle->head ? &*bundle->head : nullptr;
  const auto ks = c.get_ints("eval.k");
  const auto k_max = static_cast<std::size_t>(*std::max_element(ks.begin(), ks.end()));
  const auto pool_size = static_cast<std::size_t>(c.get_int("eval.pool_size"));
  std::vector<std::string> lines(examples.size());
  parallel_for(examples.size(), static_cast<std::size_t>(c.get_int("run.workers")), [&](std::size_t i) {
    const auto pool = build_candidate_pool(examples[i], d.frames.ids(), pool_size, derive_seed(c.seed(), kPool) + i);
    lines[i] = ranking_to_json_line(retrieve_topk(examples[i].text_id, pool, d.texts, d.frames, head, k_max));
  });
  log << "[retrieve] " << (head != nullptr ? "projected" : "raw") << " embeddings\n";
  run.write("predictions.jsonl", json_lines(lines));
  run.finish();
}

void cmd_eval(const RunConfig& config, std::ostream& log) {
  Run run(config, "eval", log);
  const Dataset d = load_inputs(run);
  const auto& c = run.config();
  const auto examples = split_examples(c, d, c.get("eval.split"));
  const auto protocol = c.get("eval.protocol");
  std::vector<EvalReport> reports;
  if (protocol == "ordering") {
    const auto res = run_ordering(run, d, examples);
    run.write("predictions.jsonl", json_lines(res.prediction_lines));
    reports.push_back(bucket_report(res.results, c.get("eval.strategy"), protocol));
    if (c.get_bool("eval.allow_eos")) reports.back().notes["eos"] = "enabled";
  } else if (protocol == "retrieve-order") {
    const auto res = run_retrieve_order(run, d, examples);
    run.write("predictions.jsonl", json_lines(res.prediction_lines));
    reports.push_back(bucket_report(res.results, c.get("eval.strategy"), protocol));
  } else {
    // Zero-shot and, when the checkpoint has a head, projected retrieval.
    std::optional<ModelBundle> bundle;
    if (fs::exists(checkpoint_path(c))) {
      bundle = load_bundle(checkpoint_path(c));
      run.input(checkpoint_path(c));
    }
    const auto ks = c.get_ints("eval.k");
    const auto k_max = static_cast<std::size_t>(*std::max_element(ks.begin(), ks.end()));
    const auto pool_size = static_cast<std::size_t>(c.get_int("eval.pool_size"));
    std::vector<std::string> lines;
    auto evaluate = [&](const RetrievalHead* head, const std::string& name) {
      std::vector<ExampleResult> results(examples.size());
      std::vector<std::string> local(examples.size());
      parallel_for(examples.size(), static_cast<std::size_t>(c.get_int("run.workers")), [&](std::size_t i) {
        const auto& ex = examples[i];
        const auto pool = build_candidate_pool(ex, d.frames.ids(), pool_size, derive_seed(c.seed(), kPool) + i);
        const auto ranking = retrieve_topk(ex.text_id, pool, d.texts, d.frames, head, k_max);
        results[i].example_id = ex.example_id;
        results[i].length = ex.length();
        for (int k : ks) {
          std::vector<std::string> topk(ranking.ids.begin(),
                                        ranking.ids.begin() + std::min<std::ptrdiff_t>(k, static_cast<std::ptrdiff_t>(ranking.ids.size())));
          results[i].at_k[k] = retrieve_and_order_score(topk, ex, static_cast<std::size_t>(k));
        }
        json line = json::parse(ranking_to_json_line(ranking));
        line["method"] = name;
        local[i] = line.dump();
      });
      lines.insert(lines.end(), local.begin(), local.end());
      reports.push_back(bucket_report(results, name, protocol));
    };
    evaluate(nullptr, "zero-shot");
    if (bundle && bundle->head) evaluate(&*bundle->head, "fine-tuned");
    run.write("predictions.jsonl", json_lines(lines));
  }
  for (auto& r : reports) add_reference_notes(r, protocol);
  write_reports(run, reports, protocol != "ordering");
  run.finish();
}

void cmd_retrieve_order(const RunConfig& config, std::ostream& log) {
  RunConfig c = config;
  c.set("eval.protocol", "retrieve-order");
  cmd_eval(c, log);
}

std::vector<SweepRow> sweep_grid(const std::string& name) {
  std::vector<SweepRow> rows;
  auto add = [&](int dim, int size, const std::string& variant, double lambda) {
    SweepRow r;
    r.code_dim = dim;
    r.size = size;
    r.variant = variant;
    r.lambda = lambda;
    r.label = "dim=" + std::to_string(dim) + " size=" + std::to_string(size) + " " + variant + " lambda=" +
              format_double(lambda);
    rows.push_back(r);
  };
  if (name == "appendix-c2") {
    for (int dim : {32, 64, 128, 512})
      for (int size : {1024, 4096, 8192}) add(dim, size, "vanilla", 1.0);
  } else if (name == "variants") {
    for (auto [dim, size] : std::vector<std::pair<int, int>>{{32, 4096}, {64, 8192}, {128, 1024}, {512, 8192}})
      for (const char* v : {"vanilla", "multi_stage", "soft", "hierarchical"}) add(dim, size, v, 1.0);
  } else if (name == "lambda") {
    for (double l : {0.1, 1.0, 10.0}) add(32, 4096, "vanilla", l);
  } else {
    throw InvalidArgument("unknown sweep grid '" + name + "'");
  }
  return rows;
}

void cmd_sweep(const RunConfig& config, std::ostream& log) {
  Run run(config, "sweep", log);
  const Dataset d = load_inputs(run);
  const auto& base = run.config();
  const auto train = split_examples(base, d, "train");
  const auto test = split_examples(base, d, base.get("eval.split"));
  auto rows = sweep_grid(base.get("sweep.grid"));
  std::vector<EvalReport> reports;
  json out = json::array();
  for (auto& row : rows) {
    RunConfig c = base;
    c.set("model.code_dim", std::to_string(row.code_dim));
    c.set("codebook.size", std::to_string(row.size));
    c.set("codebook.variant", row.variant);
    c.set("train.lambda_vq", format_double(row.lambda));
    c.set("model.use_vq", "true");
    c.set("train.components", "orderer");
    log << "[sweep] " << row.label << '\n';
    const ModelBundle bundle = train_components(c, d, train, log, nullptr);
    Orderer o;
    o.strategy = "vq-trans";
    o.bundle = bundle;
    std::vector<ExampleResult> results(test.size());
    parallel_for(test.size(), static_cast<std::size_t>(c.get_int("run.workers")), [&](std::size_t i) {
      const auto pred = order_candidates(o, c, test[i], sorted(test[i].frame_ids), d, 0, false);
      results[i].example_id = test[i].example_id;
      results[i].length = test[i].length();
      results[i].tau = tau_best(pred.ordered_ids, test[i].gt_variants);
    });
    auto report = bucket_report(results, row.label, "ordering");
    row.overall = report.overall.mean;
    row.short_bucket = report.short_bucket.mean;
    row.long_bucket = report.long_bucket.mean;
    out.push_back({{"label", row.label},
                   {"code_dim", row.code_dim},
                   {"size", row.size},
                   {"variant", row.variant},
                   {"lambda", row.lambda},
                   {"overall", row.overall},
                   {"bucket_3_5", row.short_bucket},
                   {"bucket_6_11", row.long_bucket}});
    report.per_example.clear();
    reports.push_back(std::move(report));
  }
  run.write("report.json", out.dump(2) + "\n");
  const auto table = ordering_table(reports);
  run.write("report.txt", table);
  log << table;
  run.finish();
}

void cmd_stats(const RunConfig& config, std::ostream& log) {
  Run run(config, "stats", log);
  const auto& c = run.config();
  const fs::path ds = c.get("data.dataset");
  const auto examples = load_examples(ds);
  run.input(ds);
  std::optional<ConcretenessLexicon> lexicon;
  if (!c.get("data.lexicon").empty()) {
    lexicon = load_lexicon(c.get("data.lexicon"));
    run.input(c.get("data.lexicon"));
  }
  const auto stats = corpus_stats(examples, {1, 2, 3, 4}, lexicon ? &*lexicon : nullptr);
  std::map<std::size_t, std::size_t> lengths;
  for (const auto& ex : examples) ++lengths[ex.length()];
  json j;
  json ngrams = json::object();
  for (const auto& [n, count] : stats.unique_ngrams) ngrams[std::to_string(n)] = count;
  j["unique_ngrams"] = ngrams;
  j["avg_concreteness"] = stats.avg_concreteness ? json(*stats.avg_concreteness) : json(nullptr);
  j["total_words"] = stats.total_words;
  j["mean_words"] = stats.mean_words;
  j["min_words"] = stats.min_words;
  j["max_words"] = stats.max_words;
  json lj = json::object();
  for (const auto& [len, count] : lengths) lj[std::to_string(len)] = count;
  j["storyboard_lengths"] = lj;
  j["examples"] = examples.size();
  run.write("report.json", j.dump(2) + "\n");
  std::ostringstream t;
  t << "examples " << examples.size() << "\nwords total " << stats.total_words << " mean " << format_double(stats.mean_words)
    << " min " << stats.min_words << " max " << stats.max_words << '\n';
  for (const auto& [n, count] : stats.unique_ngrams) t << "unique " << n << "-grams " << count << '\n';
  t << "avg concreteness " << (stats.avg_concreteness ? format_double(*stats.avg_concreteness) : "n/a") << '\n';
  run.write("report.txt", t.str());
  log << t.str();
  run.finish();
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"synth", "train",          "order", "retrieve",
                                                 "eval",  "retrieve-order", "sweep", "stats"};
  return names;
}

void run_command(const std::string& name, const RunConfig& config, std::ostream& log) {
  static const std::map<std::string, std::function<void(const RunConfig&, std::ostream&)>> table = {
      {"synth", cmd_synth}, {"train", cmd_train},
      {"order", cmd_order}, {"retrieve", cmd_retrieve},
      {"eval", cmd_eval},   {"retrieve-order", cmd_retrieve_order},
      {"sweep", cmd_sweep}, {"stats", cmd_stats}};
  auto it = table.find(name);
  if (it == table.end()) throw InvalidArgument("unknown command '" + name + "'");
  it->second(config, log);
}

}  // namespace tvs
