#pragma once

#include <vector>

#include <Eigen/Dense>

namespace tvs {

struct Assignment {
  std::vector<int> row_to_col;
  double total = 0.0;
};

// Maximum-weight perfect matching on a square matrix (Hungarian method with
// potentials, O(m^3)). Among optimal assignments an arbitrary one is returned.
Assignment max_weight_assignment(const Eigen::MatrixXd& weights);

// Optimal assignment with ties broken towards the lexicographically smallest
// row_to_col vector (tolerance `tol` on the total).
Assignment bipartite_match(const Eigen::MatrixXd& similarity, double tol = 1e-9);

}  // namespace tvs
