#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tvs/embedding_table.h"

namespace tvs {

// Half-open token range [begin, end).
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
  friend auto operator<=>(const Span&, const Span&) = default;
};

using Segmentation = std::vector<Span>;

// m contiguous spans covering n_tokens; lengths differ by at most one and the
// earlier spans take the remainder.
Segmentation segment_text(std::size_t n_tokens, std::size_t m);

// All C(n-1, m-1) segmentations in lexicographic cut order when that count is
// at most `limit`; otherwise `limit` distinct ones sampled uniformly. For a
// fixed seed the sample for a smaller limit is a prefix of the sample for a
// larger one.
std::vector<Segmentation> enumerate_segmentations(std::size_t n_tokens, std::size_t m, std::size_t limit,
                                                  std::uint64_t seed);

// Number of compositions of n into m positive parts, saturating at `cap`.
std::size_t composition_count(std::size_t n_tokens, std::size_t m, std::size_t cap);

std::string span_key(const std::string& text_id, const Span& span);
std::string token_key(const std::string& text_id, std::size_t token);

// Maps a token span of one synopsis to a unit vector. A stored span entry
// "<text_id>#s<b>:<e>" wins; otherwise the normalized mean of the per-token
// entries "<text_id>#t<i>" is used. Results are cached per span.
class SegmentEmbedder {
 public:
  SegmentEmbedder(const EmbeddingTable& texts, std::string text_id);

  const Eigen::VectorXd& embed(const Span& span);
  std::vector<Eigen::VectorXd> embed_all(const Segmentation& segmentation);

 private:
  const EmbeddingTable& texts_;
  std::string text_id_;
  std::map<Span, Eigen::VectorXd> cache_;
};

}  // namespace tvs
