#include "tvs/embedding_table.h"

#include <cmath>
#include <fstream>

#include "tvs/bin_io.h"
#include "tvs/error.h"

namespace tvs {

namespace {

constexpr char kMagic[4] = {'T', 'V', 'S', 'E'};
constexpr std::uint16_t kVersion = 1;

}  // namespace

EmbeddingTable::EmbeddingTable(std::size_t dim) : dim_(dim) {}

void EmbeddingTable::insert(std::string id, std::span<const float> values) {
  if (values.size() != dim_) {
    throw FormatError("embedding '" + id + "' has " + std::to_string(values.size()) +
                      " values but table dim is " + std::to_string(dim_));
  }
  if (index_.contains(id)) throw FormatError("duplicate embedding id '" + id + "'");
  double sq = 0.0;
  for (float v : values) sq += static_cast<double>(v) * v;
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm) || norm == 0.0) {
    throw FormatError("embedding '" + id + "' cannot be normalized (zero or non-finite)");
  }
  const std::size_t offset = values_.size();
  values_.insert(values_.end(), values.begin(), values.end());
  if (std::abs(norm - 1.0) > 1e-6) {
    for (std::size_t k = 0; k < dim_; ++k) {
      values_[offset + k] = static_cast<float>(values_[offset + k] / norm);
    }
  }
  index_.emplace(id, ids_.size());
  ids_.push_back(std::move(id));
}

void EmbeddingTable::insert(std::string id, const Eigen::VectorXd& values) {
  std::vector<float> f(static_cast<std::size_t>(values.size()));
  const double norm = values.norm();
  for (std::size_t k = 0; k < f.size(); ++k) {
    f[k] = static_cast<float>(norm > 0.0 ? values[static_cast<Eigen::Index>(k)] / norm : 0.0);
  }
  insert(std::move(id), std::span<const float>(f));
}

bool EmbeddingTable::contains(std::string_view id) const { return index_.find(id) != index_.end(); }

std::size_t EmbeddingTable::index_of(std::string_view id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw LoadError("unknown embedding id '" + std::string(id) + "'");
  return it->second;
}

std::span<const float> EmbeddingTable::at(std::string_view id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw LoadError("unknown embedding id '" + std::string(id) + "'");
  return row(it->second);
}

Eigen::VectorXd EmbeddingTable::vector(std::string_view id) const {
  auto values = at(id);
  Eigen::VectorXd out(static_cast<Eigen::Index>(dim_));
  for (std::size_t k = 0; k < dim_; ++k) out[static_cast<Eigen::Index>(k)] = values[k];
  return out;
}

void write_embeddings(const EmbeddingTable& table, std::ostream& out) {
  out.write(kMagic, 4);
  bin::write_le<std::uint16_t>(out, kVersion);
  bin::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(table.dim()));
  bin::write_le<std::uint64_t>(out, table.size());
  for (std::size_t r = 0; r < table.size(); ++r) {
    const auto& id = table.id(r);
    if (id.size() > 0xFFFF) throw InvalidArgument("embedding id longer than 65535 bytes");
    bin::write_le<std::uint16_t>(out, static_cast<std::uint16_t>(id.size()));
    bin::write_bytes(out, id);
    for (float v : table.row(r)) bin::write_le<float>(out, v);
  }
}

EmbeddingTable read_embeddings(std::istream& in) {
  bin::Reader reader(in);
  const auto magic = reader.read_string(4, "magic");
  if (magic != std::string(kMagic, 4)) throw FormatError("bad embedding file magic (expected TVSE)");
  const auto version = reader.read_le<std::uint16_t>("version");
  if (version != kVersion) {
    throw FormatError("unsupported embedding file version " + std::to_string(version));
  }
  const auto dim = reader.read_le<std::uint32_t>("dim");
  const auto count = reader.read_le<std::uint64_t>("count");
  if (dim == 0) throw FormatError("embedding file declares dim 0");
  EmbeddingTable table(dim);
  std::vector<float> buf(dim);
  for (std::uint64_t e = 0; e < count; ++e) {
    const auto len = reader.read_le<std::uint16_t>("id length");
    auto id = reader.read_string(len, "id");
    for (auto& v : buf) v = reader.read_le<float>("vector values");
    table.insert(std::move(id), std::span<const float>(buf));
  }
  if (!reader.at_eof()) {
    throw FormatError("trailing bytes after " + std::to_string(count) + " entries at byte offset " +
                      std::to_string(reader.offset()) + " (row longer than declared dim?)");
  }
  return table;
}

void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw LoadError("cannot open '" + path.string() + "' for writing");
  write_embeddings(table, out);
  if (!out) throw LoadError("failed writing '" + path.string() + "'");
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open embedding file '" + path.string() + "'");
  return read_embeddings(in);
}

}  // namespace tvs
