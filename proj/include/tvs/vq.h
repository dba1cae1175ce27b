#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace tvs {

enum class VqVariant { vanilla, multi_stage, soft, hierarchical };

std::string to_string(VqVariant v);
VqVariant parse_vq_variant(const std::string& s);

struct CodebookConfig {
  VqVariant variant = VqVariant::vanilla;
  int code_dim = 32;
  int size = 4096;
  double beta = 0.8;
  int stages = 3;               // multi_stage
  double softness_temp = 0.1;   // soft
  int levels = 2;               // hierarchical (only 2 supported)
  int parents = 0;              // hierarchical; 0 selects round(sqrt(size))
  long dead_code_steps = 2000;  // reset codes unused for this many steps; <= 0 disables

  void validate() const;
};

// One codebook entry that contributed to a quantized code, together with the
// vector the codebook term pulls that entry towards.
struct CodePart {
  int book = 0;
  int row = 0;
  double weight = 1.0;
  Eigen::VectorXd target;
};

struct QuantizeResult {
  // vanilla: {i}; multi_stage: one per stage; hierarchical: {parent, child};
  // soft: argmax entry.
  std::vector<int> index;
  std::vector<double> weights;  // soft only; sums to 1
  Eigen::VectorXd code;         // unit norm
  double similarity = 0.0;      // cosine(feature, code)
  std::vector<CodePart> parts;
};

// Learnable discrete codes. `books` holds one matrix of row-codes per stage
// (multi_stage), per level (hierarchical: parents, then all child books
// stacked parent-major), or a single matrix otherwise.
class Codebook {
 public:
  Codebook() = default;
  Codebook(CodebookConfig config, std::uint64_t seed);

  const CodebookConfig& config() const { return config_; }
  VqVariant variant() const { return config_.variant; }
  int code_dim() const { return config_.code_dim; }
  int size() const { return config_.size; }
  int parents() const;
  int children_per_parent() const;

  std::vector<Eigen::MatrixXd>& books() { return books_; }
  const std::vector<Eigen::MatrixXd>& books() const { return books_; }

  QuantizeResult quantize(const Eigen::VectorXd& feature) const;

  // Unit-norm every row.
  void renormalize();

  // Dead-code bookkeeping used by training.
  void mark_used(const QuantizeResult& r, long step);
  // Resets rows idle for more than dead_code_steps to a random recent feature.
  int reset_dead_codes(long step, const std::vector<Eigen::VectorXd>& recent, std::mt19937_64& rng);

  friend bool operator==(const Codebook& a, const Codebook& b) {
    return a.books_.size() == b.books_.size() &&
           std::equal(a.books_.begin(), a.books_.end(), b.books_.begin(),
                      [](const auto& x, const auto& y) { return x.rows() == y.rows() && x == y; });
  }

 private:
  CodebookConfig config_;
  std::vector<Eigen::MatrixXd> books_;
  std::vector<std::vector<long>> last_used_;
};

// Nearest code by cosine over the rows of one book; ties go to the lowest row.
int nearest_code(const Eigen::MatrixXd& book, const Eigen::VectorXd& feature, double* similarity = nullptr);

QuantizeResult quantize_vanilla(const Eigen::VectorXd& feature, const Codebook& book);
QuantizeResult quantize_multi_stage(const Eigen::VectorXd& feature, const Codebook& book);
QuantizeResult quantize_soft(const Eigen::VectorXd& feature, const Codebook& book);
QuantizeResult quantize_hierarchical(const Eigen::VectorXd& feature, const Codebook& book);

// sum_i ||sg[f_i] - c_i||^2 + beta * ||f_i - sg[c_i]||^2 over matching rows.
struct VqLoss {
  double value = 0.0;
  Eigen::MatrixXd grad_features;  // only the commitment term
  Eigen::MatrixXd grad_codes;     // only the codebook term
};
VqLoss vq_loss(const Eigen::MatrixXd& features, const Eigen::MatrixXd& codes, double beta);

// Forward value of the straight-through estimator: the code itself. The
// backward rule is identity towards the feature and zero towards the code.
struct StraightThrough {
  Eigen::VectorXd forward(const Eigen::VectorXd& feature, const Eigen::VectorXd& code) const;
  Eigen::VectorXd backward_feature(const Eigen::VectorXd& upstream) const { return upstream; }
  Eigen::VectorXd backward_code(const Eigen::VectorXd& upstream) const {
    return Eigen::VectorXd::Zero(upstream.size());
  }
};

struct Utilization {
  double used_fraction = 0.0;
  double perplexity = 1.0;
};
Utilization codebook_utilization(const std::vector<int>& assignments, int size);

// Standalone export in the embedding-file format, ids "code_<i>" (single
// book) or "code_<book>_<i>".
void export_codebook(const Codebook& book, const std::filesystem::path& path);

}  // namespace tvs
