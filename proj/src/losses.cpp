#include "tvs/losses.h"

#include <cmath>

#include "tvs/error.h"

namespace tvs {

namespace {

double log_sum_exp(const Eigen::VectorXd& x) {
  const double mx = x.maxCoeff();
  return mx + std::log((x.array() - mx).exp().sum());
}

}  // namespace

double nce_loss(const std::vector<Eigen::VectorXd>& predictions, const std::vector<Eigen::VectorXd>& targets,
                const std::vector<std::vector<Eigen::VectorXd>>& negatives, double tau) {
  if (predictions.size() != targets.size() || predictions.size() != negatives.size()) {
    throw InvalidArgument("nce_loss: predictions, targets and negatives must align");
  }
  if (!(tau > 0.0)) throw InvalidArgument("nce_loss: tau must be > 0");
  if (predictions.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    Eigen::VectorXd logits(static_cast<Eigen::Index>(negatives[i].size() + 1));
    logits[0] = predictions[i].dot(targets[i]) / tau;
    for (std::size_t j = 0; j < negatives[i].size(); ++j) {
      logits[static_cast<Eigen::Index>(j + 1)] = predictions[i].dot(negatives[i][j]) / tau;
    }
    total += log_sum_exp(logits) - logits[0];
  }
  return total / static_cast<double>(predictions.size());
}

NceResult nce_bank_loss(const NceBank& b, double tau) {
  const auto n = b.predictions.rows();
  const auto k = b.bank.rows();
  if (static_cast<std::size_t>(n) != b.positive.size() || static_cast<std::size_t>(n) != b.prediction_group.size() ||
      static_cast<std::size_t>(k) != b.bank_key.size() || static_cast<std::size_t>(k) != b.bank_group.size()) {
    throw InvalidArgument("nce_bank_loss: index vectors do not match matrix sizes");
  }
  if (!(tau > 0.0)) throw InvalidArgument("nce_bank_loss: tau must be > 0");
  NceResult out;
  out.grad_predictions = Eigen::MatrixXd::Zero(n, b.predictions.cols());
  out.grad_bank = Eigen::MatrixXd::Zero(k, b.bank.cols());
  if (n == 0) return out;
  const Eigen::MatrixXd sims = b.predictions * b.bank.transpose();
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<Eigen::Index> cols;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int pos = b.positive[static_cast<std::size_t>(i)];
    const int pos_key = b.bank_key[static_cast<std::size_t>(pos)];
    cols.clear();
    cols.push_back(pos);
    for (Eigen::Index j = 0; j < k; ++j) {
      if (j == pos || b.bank_key[static_cast<std::size_t>(j)] == pos_key) continue;
      const int g = b.bank_group[static_cast<std::size_t>(j)];
      if (b.exclude_same_group && g >= 0 && g == b.prediction_group[static_cast<std::size_t>(i)]) continue;
      cols.push_back(j);
    }
    Eigen::VectorXd logits(static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) logits[static_cast<Eigen::Index>(c)] = sims(i, cols[c]) / tau;
    const double lse = log_sum_exp(logits);
    out.loss += (lse - logits[0]) * inv_n;
    for (std::size_t c = 0; c < cols.size(); ++c) {
      const double p = std::exp(logits[static_cast<Eigen::Index>(c)] - lse);
      const double dlogit = (p - (c == 0 ? 1.0 : 0.0)) * inv_n;
      const Eigen::Index j = cols[c];
      out.grad_predictions.row(i) += dlogit / tau * b.bank.row(j);
      out.grad_bank.row(j) += dlogit / tau * b.predictions.row(i);
      out.grad_tau -= dlogit * sims(i, j) / (tau * tau);
    }
  }
  return out;
}

AlignResult align_loss(const Eigen::MatrixXd& text, const Eigen::MatrixXd& image, double tau) {
  const auto batch = text.rows();
  if (batch < 2) throw InvalidArgument("align_loss needs a batch of at least 2");
  if (image.rows() != batch || image.cols() != text.cols()) throw InvalidArgument("align_loss: shape mismatch");
  if (!(tau > 0.0)) throw InvalidArgument("align_loss: tau must be > 0");
  // sims(i, j) = I_i . T_j
  const Eigen::MatrixXd sims = image * text.transpose();
  const Eigen::MatrixXd logits = sims / tau;
  Eigen::MatrixXd d_logits = Eigen::MatrixXd::Zero(batch, batch);
  AlignResult out;
  const double inv_b = 1.0 / static_cast<double>(batch);
  for (Eigen::Index i = 0; i < batch; ++i) {
    // image i against all texts (row i)
    const Eigen::VectorXd row = logits.row(i).transpose();
    const double lse_r = log_sum_exp(row);
    out.i2t += (lse_r - row[i]) * inv_b;
    // text i against all images (column i)
    const Eigen::VectorXd col = logits.col(i);
    const double lse_c = log_sum_exp(col);
    out.t2i += (lse_c - col[i]) * inv_b;
    for (Eigen::Index j = 0; j < batch; ++j) {
      d_logits(i, j) += 0.5 * inv_b * (std::exp(row[j] - lse_r) - (i == j ? 1.0 : 0.0));
      d_logits(j, i) += 0.5 * inv_b * (std::exp(col[j] - lse_c) - (i == j ? 1.0 : 0.0));
    }
  }
  out.loss = 0.5 * (out.i2t + out.t2i);
  out.grad_image = d_logits * text / tau;
  out.grad_text = d_logits.transpose() * image / tau;
  out.grad_tau = -(d_logits.cwiseProduct(sims)).sum() / (tau * tau);
  return out;
}

}  // namespace tvs
