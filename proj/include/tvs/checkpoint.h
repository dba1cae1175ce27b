#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tvs/model.h"
#include "tvs/rerank.h"
#include "tvs/vq.h"

namespace tvs {

inline constexpr std::uint16_t kCheckpointVersion = 1;

using ConfigMap = std::map<std::string, std::string>;

// Raw container: "TVSC", u16 version, u32 config length + UTF-8 key=value
// lines, u32 tensor count, then per tensor u16 name length, name, u8 rank,
// u64 dims, little-endian float64 payload (row-major).
struct CheckpointData {
  ConfigMap config;
  std::vector<std::pair<std::string, Eigen::MatrixXd>> tensors;
};

void write_checkpoint(const CheckpointData& data, std::ostream& out);
CheckpointData read_checkpoint(std::istream& in);

// Everything a run can persist. Tensor names carry the component prefix
// "orderer/", "codebook/", "head/" or "rerank/".
struct ModelBundle {
  std::optional<OrdererModel> orderer;
  std::optional<Codebook> codebook;
  std::optional<RetrievalHead> head;
  std::optional<RerankModel> rerank;
  ConfigMap meta;  // e.g. train.lambda_vq; stored under "meta."
};

ConfigMap bundle_config(const ModelBundle& bundle);

void save_bundle(const ModelBundle& bundle, const std::filesystem::path& path);

// When `expected` is given, every listed key must be present in the stored
// config with the same value; otherwise LoadError names each mismatch.
ModelBundle load_bundle(const std::filesystem::path& path, const ConfigMap* expected = nullptr);

ConfigMap to_config_map(const OrdererConfig& c);
OrdererConfig orderer_config_from(const ConfigMap& m);
ConfigMap to_config_map(const CodebookConfig& c);
CodebookConfig codebook_config_from(const ConfigMap& m);
ConfigMap to_config_map(const RetrievalHeadConfig& c);
RetrievalHeadConfig head_config_from(const ConfigMap& m);
ConfigMap to_config_map(const RerankConfig& c);
RerankConfig rerank_config_from(const ConfigMap& m);

// Shortest decimal that parses back to the same double.
std::string format_double(double v);

}  // namespace tvs
