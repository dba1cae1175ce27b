#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tvs/embedding_table.h"
#include "tvs/ordering_result.h"
#include "tvs/segments.h"

namespace tvs {

// Every baseline returns a permutation of `candidates`. Similarity is cosine
// on unit vectors; ties go to the lexicographically lowest id.

// Sort by similarity to the whole-synopsis vector.
OrderingResult order_naive(const Eigen::VectorXd& text_vec, const std::vector<std::string>& candidates,
                           const EmbeddingTable& frames);

// Segment t picks the most similar remaining candidate.
OrderingResult order_sliding(const std::vector<Eigen::VectorXd>& segment_vecs,
                             const std::vector<std::string>& candidates, const EmbeddingTable& frames);

// Step t queries with the re-normalized mean of segments 1..t.
OrderingResult order_cumulative(const std::vector<Eigen::VectorXd>& segment_vecs,
                                const std::vector<std::string>& candidates, const EmbeddingTable& frames);

// Beam search over pick sequences, scoring the sum of cumulative-context
// similarities. beam_width 1 reproduces order_cumulative.
OrderingResult order_contextual(const std::vector<Eigen::VectorXd>& segment_vecs,
                                const std::vector<std::string>& candidates, const EmbeddingTable& frames,
                                std::size_t beam_width);

// Sum of cumulative-context similarities for a given pick sequence.
double contextual_score(const std::vector<Eigen::VectorXd>& segment_vecs, const std::vector<std::string>& sequence,
                        const EmbeddingTable& frames);

struct DynamicResult {
  OrderingResult ordering;
  double total = 0.0;
  Segmentation segmentation;
};

// Tries up to `limit` segmentations of the synopsis into len(candidates)
// spans, matches segments to candidates optimally, keeps the segmentation
// with the highest matched similarity and orders candidates by the position
// of their matched segment.
DynamicResult order_dynamic(std::size_t n_tokens, SegmentEmbedder& embedder, const std::vector<std::string>& candidates,
                            const EmbeddingTable& frames, std::size_t limit, std::uint64_t seed);

}  // namespace tvs
