#include "tvs/assignment.h"

#include <cmath>
#include <limits>
#include <numeric>

#include "tvs/error.h"

namespace tvs {

namespace {

// Minimum-cost assignment, 1-based potentials formulation.
std::vector<int> min_cost_assignment(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= n; ++j)
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

void check_square(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw InvalidArgument("assignment needs a square matrix");
  if (!m.allFinite()) throw InvalidArgument("assignment matrix has non-finite entries");
}

}  // namespace

Assignment max_weight_assignment(const Eigen::MatrixXd& weights) {
  check_square(weights);
  Assignment out;
  if (weights.rows() == 0) return out;
  out.row_to_col = min_cost_assignment(-weights);
  for (Eigen::Index r = 0; r < weights.rows(); ++r) out.total += weights(r, out.row_to_col[static_cast<std::size_t>(r)]);
  return out;
}

Assignment bipartite_match(const Eigen::MatrixXd& similarity, double tol) {
  check_square(similarity);
  const auto n = similarity.rows();
  Assignment best = max_weight_assignment(similarity);
  if (n <= 1) return best;
  const double target = best.total;
  const double slack = tol * std::max(1.0, std::abs(target));

  // Fix rows in order to the smallest column that still admits an optimum.
  std::vector<Eigen::Index> free_rows(static_cast<std::size_t>(n)), free_cols(static_cast<std::size_t>(n));
  std::iota(free_rows.begin(), free_rows.end(), 0);
  std::iota(free_cols.begin(), free_cols.end(), 0);
  Assignment out;
  out.row_to_col.assign(static_cast<std::size_t>(n), -1);
  double fixed = 0.0;
  for (Eigen::Index r = 0; r < n; ++r) {
    free_rows.erase(free_rows.begin());
    for (std::size_t ci = 0; ci < free_cols.size(); ++ci) {
      const Eigen::Index c = free_cols[ci];
      std::vector<Eigen::Index> rest_cols = free_cols;
      rest_cols.erase(rest_cols.begin() + static_cast<std::ptrdiff_t>(ci));
      double rest = 0.0;
      if (!free_rows.empty()) {
        const Eigen::MatrixXd sub = similarity(free_rows, rest_cols);
        rest = max_weight_assignment(sub).total;
      }
      if (fixed + similarity(r, c) + rest >= target - slack) {
        out.row_to_col[static_cast<std::size_t>(r)] = static_cast<int>(c);
        fixed += similarity(r, c);
        free_cols = std::move(rest_cols);
        break;
      }
    }
  }
  out.total = 0.0;
  for (Eigen::Index r = 0; r < n; ++r) out.total += similarity(r, out.row_to_col[static_cast<std::size_t>(r)]);
  return out;
}

}  // namespace tvs
