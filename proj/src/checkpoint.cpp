#include "tvs/checkpoint.h"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "tvs/bin_io.h"
#include "tvs/error.h"

namespace tvs {

namespace {

constexpr char kMagic[4] = {'T', 'V', 'S', 'C'};

std::string serialize_config(const ConfigMap& config) {
  std::string out;
  for (const auto& [k, v] : config) {
    if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos) {
      throw InvalidArgument("config entry '" + k + "' cannot be stored");
    }
    out += k + "=" + v + "\n";
  }
  return out;
}

ConfigMap parse_config(const std::string& text) {
  ConfigMap out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("checkpoint config line without '=': " + line);
    out[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return out;
}

const std::string& need(const ConfigMap& m, const std::string& key) {
  auto it = m.find(key);
  if (it == m.end()) throw FormatError("checkpoint config is missing '" + key + "'");
  return it->second;
}

int need_int(const ConfigMap& m, const std::string& key) {
  const auto& s = need(m, key);
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw FormatError("bad integer for '" + key + "': " + s);
  return v;
}

double need_double(const ConfigMap& m, const std::string& key) {
  const auto& s = need(m, key);
  double v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw FormatError("bad number for '" + key + "': " + s);
  return v;
}

ConfigMap prefixed(const ConfigMap& m, const std::string& prefix) {
  ConfigMap out;
  for (const auto& [k, v] : m)
    if (k.rfind(prefix, 0) == 0) out[k.substr(prefix.size())] = v;
  return out;
}

void add_prefixed(ConfigMap& dst, const ConfigMap& src, const std::string& prefix) {
  for (const auto& [k, v] : src) dst[prefix + k] = v;
}

void add_params(CheckpointData& data, const ad::ParameterSet& params, const std::string& prefix) {
  for (const auto& p : params) data.tensors.emplace_back(prefix + p.name, p.value);
}

void restore_params(ad::ParameterSet& params, const std::map<std::string, const Eigen::MatrixXd*>& tensors,
                    const std::string& prefix, std::set<std::string>& consumed) {
  for (auto& p : params) {
    const auto name = prefix + p.name;
    auto it = tensors.find(name);
    if (it == tensors.end()) throw FormatError("checkpoint is missing tensor '" + name + "'");
    if (it->second->rows() != p.value.rows() || it->second->cols() != p.value.cols()) {
      throw FormatError("tensor '" + name + "' has the wrong shape");
    }
    p.value = *it->second;
    consumed.insert(name);
  }
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

void write_checkpoint(const CheckpointData& data, std::ostream& out) {
  out.write(kMagic, 4);
  bin::write_le<std::uint16_t>(out, kCheckpointVersion);
  const auto config = serialize_config(data.config);
  bin::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(config.size()));
  bin::write_bytes(out, config);
  bin::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(data.tensors.size()));
  for (const auto& [name, t] : data.tensors) {
    if (name.size() > 0xFFFF) throw InvalidArgument("tensor name too long");
    bin::write_le<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    bin::write_bytes(out, name);
    bin::write_le<std::uint8_t>(out, 2);
    bin::write_le<std::uint64_t>(out, static_cast<std::uint64_t>(t.rows()));
    bin::write_le<std::uint64_t>(out, static_cast<std::uint64_t>(t.cols()));
    for (Eigen::Index r = 0; r < t.rows(); ++r)
      for (Eigen::Index c = 0; c < t.cols(); ++c) bin::write_le<double>(out, t(r, c));
  }
  if (!out) throw Error("failed writing checkpoint");
}

CheckpointData read_checkpoint(std::istream& in) {
  bin::Reader reader(in);
  if (reader.read_string(4, "magic") != std::string(kMagic, 4)) throw FormatError("bad checkpoint magic (expected TVSC)");
  const auto version = reader.read_le<std::uint16_t>("version");
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  CheckpointData data;
  const auto config_len = reader.read_le<std::uint32_t>("config length");
  data.config = parse_config(reader.read_string(config_len, "config"));
  const auto count = reader.read_le<std::uint32_t>("tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = reader.read_le<std::uint16_t>("tensor name length");
    auto name = reader.read_string(name_len, "tensor name");
    const auto rank = reader.read_le<std::uint8_t>("tensor rank");
    if (rank < 1 || rank > 2) throw FormatError("tensor '" + name + "' has unsupported rank " + std::to_string(rank));
    const auto rows = reader.read_le<std::uint64_t>("tensor dims");
    const auto cols = rank == 2 ? reader.read_le<std::uint64_t>("tensor dims") : 1;
    if (rows * cols > (std::uint64_t{1} << 32)) throw FormatError("tensor '" + name + "' is implausibly large");
    Eigen::MatrixXd t(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index r = 0; r < t.rows(); ++r)
      for (Eigen::Index c = 0; c < t.cols(); ++c) t(r, c) = reader.read_le<double>("tensor payload");
    data.tensors.emplace_back(std::move(name), std::move(t));
  }
  if (!reader.at_eof()) throw FormatError("trailing bytes after checkpoint at offset " + std::to_string(reader.offset()));
  return data;
}

ConfigMap to_config_map(const OrdererConfig& c) {
  return {{"input_dim", std::to_string(c.input_dim)},
          {"code_dim", std::to_string(c.code_dim)},
          {"model_dim", std::to_string(c.model_dim)},
          {"depth", std::to_string(c.depth)},
          {"heads", std::to_string(c.heads)},
          {"ffn_dim", std::to_string(c.ffn_dim)},
          {"max_len", std::to_string(c.max_len)},
          {"conditioning", to_string(c.conditioning)},
          {"use_vq", c.use_vq ? "true" : "false"},
          {"tau_init", format_double(c.tau_init)},
          {"tau_min", format_double(c.tau_min)},
          {"tau_max", format_double(c.tau_max)}};
}

OrdererConfig orderer_config_from(const ConfigMap& m) {
  OrdererConfig c;
  c.input_dim = need_int(m, "input_dim");
  c.code_dim = need_int(m, "code_dim");
  c.model_dim = need_int(m, "model_dim");
  c.depth = need_int(m, "depth");
  c.heads = need_int(m, "heads");
  c.ffn_dim = need_int(m, "ffn_dim");
  c.max_len = need_int(m, "max_len");
  c.conditioning = parse_conditioning(need(m, "conditioning"));
  c.use_vq = need(m, "use_vq") == "true";
  c.tau_init = need_double(m, "tau_init");
  c.tau_min = need_double(m, "tau_min");
  c.tau_max = need_double(m, "tau_max");
  return c;
}

ConfigMap to_config_map(const CodebookConfig& c) {
  return {{"variant", to_string(c.variant)},
          {"code_dim", std::to_string(c.code_dim)},
          {"size", std::to_string(c.size)},
          {"beta", format_double(c.beta)},
          {"stages", std::to_string(c.stages)},
          {"softness_temp", format_double(c.softness_temp)},
          {"levels", std::to_string(c.levels)},
          {"parents", std::to_string(c.parents)},
          {"dead_code_steps", std::to_string(c.dead_code_steps)}};
}

CodebookConfig codebook_config_from(const ConfigMap& m) {
  CodebookConfig c;
  c.variant = parse_vq_variant(need(m, "variant"));
  c.code_dim = need_int(m, "code_dim");
  c.size = need_int(m, "size");
  c.beta = need_double(m, "beta");
  c.stages = need_int(m, "stages");
  c.softness_temp = need_double(m, "softness_temp");
  c.levels = need_int(m, "levels");
  c.parents = need_int(m, "parents");
  c.dead_code_steps = need_int(m, "dead_code_steps");
  return c;
}

ConfigMap to_config_map(const RetrievalHeadConfig& c) {
  return {{"input_dim", std::to_string(c.input_dim)},
          {"shared_dim", std::to_string(c.shared_dim)},
          {"tau_init", format_double(c.tau_init)},
          {"tau_min", format_double(c.tau_min)},
          {"tau_max", format_double(c.tau_max)}};
}

RetrievalHeadConfig head_config_from(const ConfigMap& m) {
  RetrievalHeadConfig c;
  c.input_dim = need_int(m, "input_dim");
  c.shared_dim = need_int(m, "shared_dim");
  c.tau_init = need_double(m, "tau_init");
  c.tau_min = need_double(m, "tau_min");
  c.tau_max = need_double(m, "tau_max");
  return c;
}

ConfigMap to_config_map(const RerankConfig& c) {
  return {{"input_dim", std::to_string(c.input_dim)},
          {"model_dim", std::to_string(c.model_dim)},
          {"depth", std::to_string(c.depth)},
          {"heads", std::to_string(c.heads)},
          {"max_len", std::to_string(c.max_len)}};
}

RerankConfig rerank_config_from(const ConfigMap& m) {
  RerankConfig c;
  c.input_dim = need_int(m, "input_dim");
  c.model_dim = need_int(m, "model_dim");
  c.depth = need_int(m, "depth");
  c.heads = need_int(m, "heads");
  c.max_len = need_int(m, "max_len");
  return c;
}

ConfigMap bundle_config(const ModelBundle& bundle) {
  ConfigMap config;
  std::string parts;
  auto mark = [&](const char* name) { parts += parts.empty() ? name : std::string(",") + name; };
  if (bundle.orderer) {
    add_prefixed(config, to_config_map(bundle.orderer->config()), "orderer.");
    mark("orderer");
  }
  if (bundle.codebook) {
    add_prefixed(config, to_config_map(bundle.codebook->config()), "codebook.");
    mark("codebook");
  }
  if (bundle.head) {
    add_prefixed(config, to_config_map(bundle.head->config()), "head.");
    mark("head");
  }
  if (bundle.rerank) {
    add_prefixed(config, to_config_map(bundle.rerank->config()), "rerank.");
    mark("rerank");
  }
  add_prefixed(config, bundle.meta, "meta.");
  config["components"] = parts;
  return config;
}

void save_bundle(const ModelBundle& bundle, const std::filesystem::path& path) {
  CheckpointData data;
  data.config = bundle_config(bundle);
  if (bundle.orderer) add_params(data, bundle.orderer->params(), "orderer/");
  if (bundle.codebook) {
    const auto& books = bundle.codebook->books();
    for (std::size_t b = 0; b < books.size(); ++b) data.tensors.emplace_back("codebook/book" + std::to_string(b), books[b]);
  }
  if (bundle.head) add_params(data, bundle.head->params(), "head/");
  if (bundle.rerank) add_params(data, bundle.rerank->params(), "rerank/");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  write_checkpoint(data, out);
}

ModelBundle load_bundle(const std::filesystem::path& path, const ConfigMap* expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open checkpoint '" + path.string() + "'");
  const CheckpointData data = read_checkpoint(in);

  if (expected != nullptr) {
    std::string problems;
    for (const auto& [k, v] : *expected) {
      auto it = data.config.find(k);
      if (it == data.config.end()) {
        problems += "\n  " + k + ": missing (expected " + v + ")";
      } else if (it->second != v) {
        problems += "\n  " + k + ": stored " + it->second + ", expected " + v;
      }
    }
    if (!problems.empty()) throw LoadError("checkpoint config does not match:" + problems);
  }

  std::map<std::string, const Eigen::MatrixXd*> tensors;
  for (const auto& [name, t] : data.tensors) {
    if (!tensors.emplace(name, &t).second) throw FormatError("duplicate tensor '" + name + "'");
  }
  std::set<std::string> parts;
  {
    std::istringstream list(need(data.config, "components"));
    std::string p;
    while (std::getline(list, p, ',')) parts.insert(p);
  }
  ModelBundle bundle;
  bundle.meta = prefixed(data.config, "meta.");
  std::set<std::string> consumed;
  if (parts.contains("orderer")) {
    bundle.orderer.emplace(orderer_config_from(prefixed(data.config, "orderer.")), 0);
    restore_params(bundle.orderer->params(), tensors, "orderer/", consumed);
  }
  if (parts.contains("codebook")) {
    bundle.codebook.emplace(codebook_config_from(prefixed(data.config, "codebook.")), 0);
    auto& books = bundle.codebook->books();
    for (std::size_t b = 0; b < books.size(); ++b) {
      const auto name = "codebook/book" + std::to_string(b);
      auto it = tensors.find(name);
      if (it == tensors.end()) throw FormatError("checkpoint is missing tensor '" + name + "'");
      if (it->second->rows() != books[b].rows() || it->second->cols() != books[b].cols()) {
        throw FormatError("tensor '" + name + "' has the wrong shape");
      }
      books[b] = *it->second;
      consumed.insert(name);
    }
  }
  if (parts.contains("head")) {
    bundle.head.emplace(head_config_from(prefixed(data.config, "head.")), 0);
    restore_params(bundle.head->params(), tensors, "head/", consumed);
  }
  if (parts.contains("rerank")) {
    bundle.rerank.emplace(rerank_config_from(prefixed(data.config, "rerank.")), 0);
    restore_params(bundle.rerank->params(), tensors, "rerank/", consumed);
  }
  for (const auto& [name, t] : tensors) {
    if (!consumed.contains(name)) throw FormatError("checkpoint has unexpected tensor '" + name + "'");
  }
  return bundle;
}

}  // namespace tvs
