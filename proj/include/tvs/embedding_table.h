#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace tvs {

// Id-keyed unit-norm float vectors of one declared dimension. Entries keep
// insertion order so that iteration and serialization are deterministic.
class EmbeddingTable {
 public:
  explicit EmbeddingTable(std::size_t dim = 0);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }

  // Normalizes `values` to unit L2 norm unless it already is within 1e-6, in
  // which case the stored bits are kept untouched. Throws on duplicate id,
  // length mismatch, or a zero / non-finite vector.
  void insert(std::string id, std::span<const float> values);
  void insert(std::string id, const Eigen::VectorXd& values);

  bool contains(std::string_view id) const;
  // Row of `id`; throws LoadError when absent.
  std::size_t index_of(std::string_view id) const;
  std::span<const float> at(std::string_view id) const;
  Eigen::VectorXd vector(std::string_view id) const;

  const std::string& id(std::size_t row) const { return ids_[row]; }
  std::span<const float> row(std::size_t row) const {
    return {values_.data() + row * dim_, dim_};
  }
  const std::vector<std::string>& ids() const { return ids_; }

  friend bool operator==(const EmbeddingTable&, const EmbeddingTable&) = default;

 private:
  std::size_t dim_;
  std::vector<std::string> ids_;
  std::vector<float> values_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

// Binary "TVSE" v1 container.
void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path);
EmbeddingTable load_embeddings(const std::filesystem::path& path);

void write_embeddings(const EmbeddingTable& table, std::ostream& out);
EmbeddingTable read_embeddings(std::istream& in);

}  // namespace tvs
