#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "tvs/checkpoint.h"
#include "tvs/model.h"
#include "tvs/rerank.h"
#include "tvs/synthetic.h"
#include "tvs/train.h"
#include "tvs/vq.h"

namespace tvs {

// Flat "section.key" configuration with a default for every known key.
// Files use INI-style sections:
//
//   [train]
//   total_steps = 2000
//
// Unknown keys are rejected; errors list every offending key at once.
class RunConfig {
 public:
  RunConfig();

  static const ConfigMap& defaults();

  // Applies `key=value` pairs on top of the current values.
  void merge(const ConfigMap& values);
  void load_file(const std::filesystem::path& path);
  // Throws InvalidArgument listing every key whose value does not parse or
  // is out of range.
  void validate() const;

  const ConfigMap& values() const { return values_; }
  const std::string& get(const std::string& key) const;
  long get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<double> get_doubles(const std::string& key) const;
  std::vector<int> get_ints(const std::string& key) const;
  std::vector<std::string> get_list(const std::string& key) const;
  void set(const std::string& key, const std::string& value);

  std::uint64_t seed() const { return static_cast<std::uint64_t>(get_int("run.seed")); }

  SyntheticConfig synthetic() const;
  OrdererConfig orderer() const;
  CodebookConfig codebook() const;
  TrainConfig train() const;
  TrainConfig head_train() const;
  TrainConfig rerank_train() const;
  RetrievalHeadConfig head() const;
  RerankConfig rerank() const;

  // Resolved "key = value" listing grouped by section, deterministic.
  std::string dump() const;

 private:
  ConfigMap values_;
};

ConfigMap parse_config_text(const std::string& text, const std::string& origin);

}  // namespace tvs
