#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "tvs/dataset.h"

namespace tvs {

// Planted-order storyboard generator.
//
// The embedding space is split (in a random orthonormal basis) into a fixed
// ordering plane, a content subspace and a nuisance subspace. Each example
// draws a content anchor and a start angle on a lattice of the plane. Frame k
// sits at plane angle start + k * step_angle together with the anchor, a
// frame-specific detail vector and noise. The synopsis is made of one text
// segment per frame carrying the same plane angle, anchor and detail, but
// with more noise. The canonical order is therefore recoverable by sorting
// frame angles counter-clockwise from the text's first segment.
struct SyntheticConfig {
  std::size_t n_examples = 1000;
  std::size_t dim = 32;
  // Probability of storyboard length 3, 4, ..., 3 + size - 1.
  std::vector<double> length_probs = {0.33, 0.27, 0.12, 0.09, 0.07, 0.05, 0.03, 0.02, 0.02};
  double signal_strength = 1.0;
  double noise = 0.35;
  // Segment and token vectors get noise * text_noise_scale.
  double text_noise_scale = 2.0;
  // Norm of the frame component in the nuisance subspace.
  double nuisance = 0.6;
  double anchor_weight = 1.0;
  // Anchors are drawn from this many shared prototypes; 0 draws a fresh one
  // per example.
  std::size_t anchor_vocabulary = 0;
  double plane_weight = 1.0;
  double detail_weight = 0.5;
  std::size_t angle_lattice = 24;
  double step_angle = 0.0;  // 0 selects 2*pi / angle_lattice
  // Start angles are drawn from the first `start_positions` lattice points;
  // 0 selects the whole lattice.
  std::size_t start_positions = 0;
  std::size_t examples_per_movie = 5;
  std::size_t min_tokens_per_segment = 2;
  std::size_t max_tokens_per_segment = 3;
  // Up to this many leftover tokens spread over the first segments.
  std::size_t max_extra_tokens = 0;
  std::size_t vocabulary = 400;

  void validate() const;
  double resolved_step_angle() const;
};

struct SyntheticGeometry {
  Eigen::MatrixXd basis;  // dim x dim, orthonormal columns
  std::size_t content_dims = 0;
  double step_angle = 0.0;

  Eigen::VectorXd plane_u() const { return basis.col(0); }
  Eigen::VectorXd plane_v() const { return basis.col(1); }
};

struct SyntheticData {
  Dataset dataset;
  SyntheticGeometry geometry;
};

// Text table keys: "<text_id>" for the whole synopsis, "<text_id>#t<i>" per
// token and "<text_id>#s<begin>:<end>" (end exclusive) per planted segment.
// Planted segments coincide with segment_text(tokens, m).
SyntheticData generate_synthetic(const SyntheticConfig& config, std::uint64_t seed);

}  // namespace tvs
