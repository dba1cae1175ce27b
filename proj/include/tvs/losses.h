#pragma once

#include <vector>

#include <Eigen/Dense>

namespace tvs {

// Mean over predictions of -log softmax(sim(pred, target) / tau) against
// {target} U negatives. All vectors are assumed unit norm.
double nce_loss(const std::vector<Eigen::VectorXd>& predictions, const std::vector<Eigen::VectorXd>& targets,
                const std::vector<std::vector<Eigen::VectorXd>>& negatives, double tau);

// Batched form used in training: every prediction row scores against a bank
// of candidate rows. Row j of the bank is a negative for prediction i unless
// it shares the positive's key, or (when exclude_same_group) it belongs to
// the prediction's own group.
struct NceBank {
  Eigen::MatrixXd predictions;  // N x d
  Eigen::MatrixXd bank;         // K x d
  std::vector<int> positive;    // N, row into bank
  std::vector<int> bank_key;    // K
  std::vector<int> bank_group;  // K; -1 never excluded by group
  std::vector<int> prediction_group;  // N
  bool exclude_same_group = false;
};

struct NceResult {
  double loss = 0.0;
  Eigen::MatrixXd grad_predictions;
  Eigen::MatrixXd grad_bank;
  double grad_tau = 0.0;
};

NceResult nce_bank_loss(const NceBank& batch, double tau);

// Symmetric image-text InfoNCE: average of the image-to-text and
// text-to-image terms over a batch whose row i pairs text i with image i.
struct AlignResult {
  double loss = 0.0;
  double i2t = 0.0;
  double t2i = 0.0;
  Eigen::MatrixXd grad_text;
  Eigen::MatrixXd grad_image;
  double grad_tau = 0.0;
};

AlignResult align_loss(const Eigen::MatrixXd& text, const Eigen::MatrixXd& image, double tau);

inline double total_loss(double trans_loss, double vq_loss, double lambda_vq) {
  return trans_loss + lambda_vq * vq_loss;
}

}  // namespace tvs
