#include "tvs/config.h"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "tvs/error.h"

namespace tvs {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
bool parse_number(const std::string& s, T& out) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size() && !s.empty();
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(trim(item));
  return out;
}

}  // namespace

const ConfigMap& RunConfig::defaults() {
  static const ConfigMap d = {
      {"run.seed", "0"},
      {"run.out", "runs/default"},
      {"run.workers", "1"},
      {"data.dataset", "data/dataset.jsonl"},
      {"data.text_emb", "data/texts.tvse"},
      {"data.frame_emb", "data/frames.tvse"},
      {"data.split", "0.8,0.1,0.1"},
      {"data.max_tokens", "64"},
      {"data.lexicon", ""},
      {"synth.n_examples", "1000"},
      {"synth.dim", "32"},
      {"synth.signal_strength", "1"},
      {"synth.noise", "0.35"},
      {"synth.text_noise_scale", "4"},
      {"synth.nuisance", "0.6"},
      {"synth.detail_weight", "0"},
      {"synth.angle_lattice", "24"},
      {"synth.examples_per_movie", "5"},
      {"synth.anchor_vocabulary", "32"},
      {"synth.start_positions", "6"},
      {"synth.min_tokens_per_segment", "2"},
      {"synth.max_tokens_per_segment", "2"},
      {"synth.max_extra_tokens", "0"},
      {"model.code_dim", "32"},
      {"model.model_dim", "128"},
      {"model.depth", "3"},
      {"model.heads", "4"},
      {"model.ffn_dim", "0"},
      {"model.max_len", "128"},
      {"model.conditioning", "prefix"},
      {"model.use_vq", "true"},
      {"model.tau_init", "0.07"},
      {"codebook.variant", "vanilla"},
      {"codebook.size", "4096"},
      {"codebook.beta", "0.8"},
      {"codebook.stages", "3"},
      {"codebook.softness_temp", "0.1"},
      {"codebook.parents", "0"},
      {"codebook.dead_code_steps", "2000"},
      {"train.batch_size", "16"},
      {"train.weight_decay", "0.05"},
      {"train.learning_rate", "3e-4"},
      {"train.warmup_fraction", "0.1"},
      {"train.total_steps", "1000"},
      {"train.lambda_vq", "1"},
      {"train.negatives", "all_in_batch"},
      {"train.max_grad_norm", "1"},
      {"train.components", "orderer"},
      {"head.shared_dim", "32"},
      {"head.total_steps", "500"},
      {"head.learning_rate", "1e-3"},
      {"head.batch_size", "32"},
      {"rerank.model_dim", "64"},
      {"rerank.depth", "2"},
      {"rerank.heads", "4"},
      {"rerank.total_steps", "1000"},
      {"rerank.learning_rate", "1e-3"},
      {"eval.protocol", "ordering"},
      {"eval.strategy", "vq-trans"},
      {"eval.split", "test"},
      {"eval.beam_width", "5"},
      {"eval.seg_limit", "10000"},
      {"eval.pool_size", "500"},
      {"eval.k", "1,5,10,20"},
      {"eval.allow_eos", "false"},
      {"eval.checkpoint", ""},
      {"sweep.grid", "appendix-c2"},
  };
  return d;
}

RunConfig::RunConfig() : values_(defaults()) {}

ConfigMap parse_config_text(const std::string& text, const std::string& origin) {
  ConfigMap out;
  std::istringstream in(text);
  std::string line, section;
  std::vector<std::string> errors;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        errors.push_back(origin + ":" + std::to_string(lineno) + ": unterminated section header");
        continue;
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      errors.push_back(origin + ":" + std::to_string(lineno) + ": expected key = value");
      continue;
    }
    auto key = trim(line.substr(0, eq));
    if (!section.empty() && key.find('.') == std::string::npos) key = section + "." + key;
    out[key] = trim(line.substr(eq + 1));
  }
  if (!errors.empty()) {
    std::string msg = "config syntax errors:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw InvalidArgument(msg);
  }
  return out;
}

void RunConfig::merge(const ConfigMap& values) {
  std::string unknown;
  for (const auto& [k, v] : values)
    if (!defaults().contains(k)) unknown += "\n  " + k;
  if (!unknown.empty()) throw InvalidArgument("unknown config keys:" + unknown);
  for (const auto& [k, v] : values) values_[k] = v;
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  merge(parse_config_text(ss.str(), path.string()));
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw InvalidArgument("unknown config key '" + key + "'");
  return it->second;
}

void RunConfig::set(const std::string& key, const std::string& value) { merge({{key, value}}); }

long RunConfig::get_int(const std::string& key) const {
  long v = 0;
  if (!parse_number(get(key), v)) throw InvalidArgument(key + ": expected an integer, got '" + get(key) + "'");
  return v;
}

double RunConfig::get_double(const std::string& key) const {
  double v = 0;
  if (!parse_number(get(key), v)) throw InvalidArgument(key + ": expected a number, got '" + get(key) + "'");
  return v;
}

bool RunConfig::get_bool(const std::string& key) const {
  const auto& v = get(key);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw InvalidArgument(key + ": expected true or false, got '" + v + "'");
}

std::vector<double> RunConfig::get_doubles(const std::string& key) const {
  std::vector<double> out;
  for (const auto& item : split_list(get(key))) {
    double v = 0;
    if (!parse_number(item, v)) throw InvalidArgument(key + ": bad list entry '" + item + "'");
    out.push_back(v);
  }
  return out;
}

std::vector<int> RunConfig::get_ints(const std::string& key) const {
  std::vector<int> out;
  for (const auto& item : split_list(get(key))) {
    int v = 0;
    if (!parse_number(item, v)) throw InvalidArgument(key + ": bad list entry '" + item + "'");
    out.push_back(v);
  }
  return out;
}

std::vector<std::string> RunConfig::get_list(const std::string& key) const { return split_list(get(key)); }

void RunConfig::validate() const {
  std::vector<std::string> problems;
  auto check = [&](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      problems.push_back(e.what());
    }
  };
  static const std::vector<std::string> ints = {
      "run.seed", "run.workers", "data.max_tokens", "synth.n_examples", "synth.dim", "synth.angle_lattice",
      "synth.examples_per_movie", "synth.anchor_vocabulary", "synth.start_positions",
      "synth.min_tokens_per_segment", "synth.max_tokens_per_segment", "synth.max_extra_tokens", "model.code_dim", "model.model_dim", "model.depth", "model.heads", "model.ffn_dim",
      "model.max_len", "codebook.size", "codebook.stages", "codebook.parents", "codebook.dead_code_steps",
      "train.batch_size", "train.total_steps", "head.shared_dim", "head.total_steps", "head.batch_size",
      "rerank.model_dim", "rerank.depth", "rerank.heads", "rerank.total_steps", "eval.beam_width", "eval.seg_limit",
      "eval.pool_size"};
  for (const auto& k : ints) check([&] {
    if (get_int(k) < 0) throw InvalidArgument(k + ": must be >= 0");
  });
  static const std::vector<std::string> doubles = {
      "synth.signal_strength", "synth.noise", "synth.text_noise_scale", "synth.nuisance", "synth.detail_weight",
      "model.tau_init", "codebook.beta", "codebook.softness_temp", "train.weight_decay", "train.learning_rate",
      "train.warmup_fraction", "train.lambda_vq", "train.max_grad_norm", "head.learning_rate",
      "rerank.learning_rate"};
  for (const auto& k : doubles) check([&] { get_double(k); });
  for (const auto* k : {"model.use_vq", "eval.allow_eos"}) check([&] { get_bool(k); });
  check([&] { get_doubles("data.split"); });
  check([&] {
    for (int k : get_ints("eval.k"))
      if (k < 1) throw InvalidArgument("eval.k: every K must be >= 1");
  });
  check([&] {
    for (const auto& c : split_list(get("train.components")))
      if (c != "orderer" && c != "head" && c != "rerank") {
        throw InvalidArgument("train.components: unknown component '" + c + "'");
      }
  });
  check([&] {
    const auto& g = get("sweep.grid");
    if (g != "appendix-c2" && g != "variants" && g != "lambda") {
      throw InvalidArgument("sweep.grid: expected appendix-c2, variants or lambda, got '" + g + "'");
    }
  });
  check([&] { parse_conditioning(get("model.conditioning")); });
  check([&] { parse_vq_variant(get("codebook.variant")); });
  check([&] { parse_negative_policy(get("train.negatives")); });
  check([&] {
    const auto& p = get("eval.protocol");
    if (p != "ordering" && p != "retrieve-order" && p != "retrieval") {
      throw InvalidArgument("eval.protocol: expected ordering, retrieve-order or retrieval, got '" + p + "'");
    }
  });
  check([&] {
    static const std::vector<std::string> known = {"vq-trans", "rerank", "naive", "sliding",
                                                   "cumulative", "dynamic", "contextual"};
    const auto& s = get("eval.strategy");
    if (std::find(known.begin(), known.end(), s) == known.end()) {
      throw InvalidArgument("eval.strategy: unknown strategy '" + s + "'");
    }
  });
  if (problems.empty()) {
    check([&] { synthetic().validate(); });
    check([&] { orderer().validate(); });
    check([&] { codebook().validate(); });
    check([&] { train().validate(); });
    check([&] { rerank().validate(); });
  }
  if (!problems.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw InvalidArgument(msg);
  }
}

SyntheticConfig RunConfig::synthetic() const {
  SyntheticConfig c;
  c.n_examples = static_cast<std::size_t>(get_int("synth.n_examples"));
  c.dim = static_cast<std::size_t>(get_int("synth.dim"));
  c.signal_strength = get_double("synth.signal_strength");
  c.noise = get_double("synth.noise");
  c.text_noise_scale = get_double("synth.text_noise_scale");
  c.nuisance = get_double("synth.nuisance");
  c.detail_weight = get_double("synth.detail_weight");
  c.angle_lattice = static_cast<std::size_t>(get_int("synth.angle_lattice"));
  c.examples_per_movie = static_cast<std::size_t>(get_int("synth.examples_per_movie"));
  c.anchor_vocabulary = static_cast<std::size_t>(get_int("synth.anchor_vocabulary"));
  c.start_positions = static_cast<std::size_t>(get_int("synth.start_positions"));
  c.min_tokens_per_segment = static_cast<std::size_t>(get_int("synth.min_tokens_per_segment"));
  c.max_tokens_per_segment = static_cast<std::size_t>(get_int("synth.max_tokens_per_segment"));
  c.max_extra_tokens = static_cast<std::size_t>(get_int("synth.max_extra_tokens"));
  return c;
}

OrdererConfig RunConfig::orderer() const {
  OrdererConfig c;
  c.code_dim = static_cast<int>(get_int("model.code_dim"));
  c.model_dim = static_cast<int>(get_int("model.model_dim"));
  c.depth = static_cast<int>(get_int("model.depth"));
  c.heads = static_cast<int>(get_int("model.heads"));
  c.ffn_dim = static_cast<int>(get_int("model.ffn_dim"));
  c.max_len = static_cast<int>(get_int("model.max_len"));
  c.conditioning = parse_conditioning(get("model.conditioning"));
  c.use_vq = get_bool("model.use_vq");
  c.tau_init = get_double("model.tau_init");
  return c;
}

CodebookConfig RunConfig::codebook() const {
  CodebookConfig c;
  c.variant = parse_vq_variant(get("codebook.variant"));
  c.code_dim = static_cast<int>(get_int("model.code_dim"));
  c.size = static_cast<int>(get_int("codebook.size"));
  c.beta = get_double("codebook.beta");
  c.stages = static_cast<int>(get_int("codebook.stages"));
  c.softness_temp = get_double("codebook.softness_temp");
  c.parents = static_cast<int>(get_int("codebook.parents"));
  c.dead_code_steps = get_int("codebook.dead_code_steps");
  return c;
}

TrainConfig RunConfig::train() const {
  TrainConfig c;
  c.batch_size = static_cast<int>(get_int("train.batch_size"));
  c.weight_decay = get_double("train.weight_decay");
  c.learning_rate = get_double("train.learning_rate");
  c.warmup_fraction = get_double("train.warmup_fraction");
  c.total_steps = get_int("train.total_steps");
  c.lambda_vq = get_double("train.lambda_vq");
  c.negatives = parse_negative_policy(get("train.negatives"));
  c.max_grad_norm = get_double("train.max_grad_norm");
  c.seed = seed();
  c.workers = static_cast<std::size_t>(get_int("run.workers"));
  return c;
}

TrainConfig RunConfig::head_train() const {
  TrainConfig c = train();
  c.total_steps = get_int("head.total_steps");
  c.learning_rate = get_double("head.learning_rate");
  c.batch_size = static_cast<int>(get_int("head.batch_size"));
  return c;
}

TrainConfig RunConfig::rerank_train() const {
  TrainConfig c = train();
  c.total_steps = get_int("rerank.total_steps");
  c.learning_rate = get_double("rerank.learning_rate");
  return c;
}

RetrievalHeadConfig RunConfig::head() const {
  RetrievalHeadConfig c;
  c.shared_dim = static_cast<int>(get_int("head.shared_dim"));
  return c;
}

RerankConfig RunConfig::rerank() const {
  RerankConfig c;
  c.model_dim = static_cast<int>(get_int("rerank.model_dim"));
  c.depth = static_cast<int>(get_int("rerank.depth"));
  c.heads = static_cast<int>(get_int("rerank.heads"));
  c.max_len = static_cast<int>(get_int("model.max_len"));
  return c;
}

std::string RunConfig::dump() const {
  std::string out, section;
  for (const auto& [k, v] : values_) {
    const auto dot = k.find('.');
    const auto s = k.substr(0, dot);
    if (s != section) {
      if (!section.empty()) out += "\n";
      out += "[" + s + "]\n";
      section = s;
    }
    out += k.substr(dot + 1) + " = " + v + "\n";
  }
  return out;
}

}  // namespace tvs
