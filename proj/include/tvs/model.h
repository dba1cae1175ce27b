#pragma once

#include <cstdint>
#include <string>

#include "tvs/autodiff.h"
#include "tvs/embedding_table.h"

namespace tvs {

enum class Conditioning { prefix, cross_attention };

std::string to_string(Conditioning c);
Conditioning parse_conditioning(const std::string& s);

struct OrdererConfig {
  int input_dim = 32;
  int code_dim = 32;
  int model_dim = 64;
  int depth = 3;
  int heads = 4;
  int ffn_dim = 0;  // 0 selects 4 * model_dim
  int max_len = 128;
  Conditioning conditioning = Conditioning::prefix;
  bool use_vq = true;
  double tau_init = 0.07;
  double tau_min = 1e-3;
  double tau_max = 1.0;

  int resolved_ffn_dim() const { return ffn_dim > 0 ? ffn_dim : 4 * model_dim; }
  void validate() const;
};

// Text positions attend to every text position; frame position t attends to
// every text position and to frame positions <= t; text never attends to
// frames. Rows are queries, columns keys.
ad::Mask build_prefix_mask(int n_text, int m_frames);
ad::Mask build_causal_mask(int m);

// [global, token_0, ..., token_{k-1}, global] where tokens are the
// "<text_id>#t<i>" entries present in the table.
ad::Mat text_sequence(const EmbeddingTable& texts, const std::string& text_id, int max_tokens);
ad::Mat frame_matrix(const EmbeddingTable& frames, const std::vector<std::string>& ids);

// Prefix-attention decoder that predicts the next frame code from the text
// prefix and the (quantized) frame history.
class OrdererModel {
 public:
  OrdererModel() = default;
  OrdererModel(OrdererConfig config, std::uint64_t seed);

  const OrdererConfig& config() const { return config_; }
  ad::ParameterSet& params() { return params_; }
  const ad::ParameterSet& params() const { return params_; }

  double tau() const;
  void clamp_tau();
  Eigen::VectorXd eos() const;
  void renormalize_eos();

  // Raw frame rows (m x input_dim) -> unit-norm features (m x code_dim).
  ad::Var encode_frames(ad::Tape& tape, const ad::Mat& raw) const;
  // Predictions for the frame after each history prefix: (m + 1) x code_dim,
  // unit-norm rows. Row t predicts frame t + 1; the last row is the EOS slot.
  ad::Var decode(ad::Tape& tape, const ad::Mat& text, ad::Var history) const;

  ad::Mat encode(const ad::Mat& raw) const;
  ad::Mat decode(const ad::Mat& text, const ad::Mat& history) const;
  Eigen::VectorXd predict_next(const ad::Mat& text, const ad::Mat& history) const;

 private:
  ad::Var linear(ad::Tape& tape, ad::Var x, const std::string& prefix) const;
  ad::Var block(ad::Tape& tape, ad::Var x, int layer, const ad::Mask& mask, ad::Var memory) const;

  OrdererConfig config_;
  ad::ParameterSet params_;
};

// Projection heads over frozen embeddings for text-to-frame retrieval.
struct RetrievalHeadConfig {
  int input_dim = 32;
  int shared_dim = 32;
  double tau_init = 0.07;
  double tau_min = 1e-3;
  double tau_max = 1.0;
};

class RetrievalHead {
 public:
  RetrievalHead() = default;
  RetrievalHead(RetrievalHeadConfig config, std::uint64_t seed);

  const RetrievalHeadConfig& config() const { return config_; }
  ad::ParameterSet& params() { return params_; }
  const ad::ParameterSet& params() const { return params_; }
  double tau() const;
  void clamp_tau();

  ad::Var project_text(ad::Tape& tape, const ad::Mat& rows) const;
  ad::Var project_frames(ad::Tape& tape, const ad::Mat& rows) const;
  Eigen::VectorXd project_text(const Eigen::VectorXd& v) const;
  Eigen::VectorXd project_frame(const Eigen::VectorXd& v) const;

 private:
  RetrievalHeadConfig config_;
  ad::ParameterSet params_;
};

}  // namespace tvs
