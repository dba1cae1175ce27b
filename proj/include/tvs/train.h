#pragma once

#include <cstdint>
#include <algorithm>
#include <functional>
#include <numeric>
#include <random>
#include <optional>
#include <string>
#include <vector>

#include "tvs/autodiff.h"
#include "tvs/dataset.h"
#include "tvs/model.h"
#include "tvs/vq.h"

namespace tvs {

enum class NegativePolicy {
  all_in_batch,     // every other target in the mini-batch
  other_sequences,  // only targets from other sequences
};

std::string to_string(NegativePolicy p);
NegativePolicy parse_negative_policy(const std::string& s);

struct TrainConfig {
  int batch_size = 16;
  double weight_decay = 5e-2;
  double learning_rate = 3e-4;
  double warmup_fraction = 0.1;
  long total_steps = 1000;
  double lambda_vq = 1.0;
  NegativePolicy negatives = NegativePolicy::all_in_batch;
  double max_grad_norm = 1.0;  // <= 0 disables clipping
  std::uint64_t seed = 0;
  std::size_t workers = 1;

  void validate() const;
};

// Linear warm-up to the base rate, then linear decay to zero.
double learning_rate_at(const TrainConfig& config, long step);

// Adam with decoupled weight decay over an externally owned list of matrices.
class AdamW {
 public:
  AdamW(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) : b1_(beta1), b2_(beta2), eps_(eps) {}

  void step(const std::vector<ad::Mat*>& values, const std::vector<const ad::Mat*>& grads,
            const std::vector<bool>& decay, double lr, double weight_decay);
  long steps() const { return t_; }

 private:
  double b1_, b2_, eps_;
  long t_ = 0;
  std::vector<ad::Mat> m_, v_;
};

// Global L2 clipping over model and codebook gradients; returns the norm
// before clipping. max_norm <= 0 disables clipping.
double clip_gradients(ad::GradBuffer& grads, std::vector<ad::Mat>* code_grads, double max_norm);

// Cycles through a shuffled permutation of [0, n), reshuffling per epoch.
class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::uint64_t seed) : order_(n), rng_(seed) {
    std::iota(order_.begin(), order_.end(), 0);
    std::shuffle(order_.begin(), order_.end(), rng_);
  }

  std::vector<std::size_t> next(std::size_t size) {
    std::vector<std::size_t> out;
    size = std::min(size, order_.size());
    while (out.size() < size) {
      if (at_ == order_.size()) {
        std::shuffle(order_.begin(), order_.end(), rng_);
        at_ = 0;
        ++epoch_;
      }
      out.push_back(order_[at_++]);
    }
    return out;
  }

  std::size_t epoch() const { return epoch_; }
  std::mt19937_64& rng() { return rng_; }

 private:
  std::vector<std::size_t> order_;
  std::size_t at_ = 0;
  std::size_t epoch_ = 0;
  std::mt19937_64 rng_;
};

// One training example with its embeddings resolved.
struct PreparedExample {
  std::string example_id;
  ad::Mat text;    // [global, tokens..., global] x input_dim
  ad::Mat frames;  // canonical order, m x input_dim
  std::vector<int> frame_keys;
  std::vector<std::string> frame_ids;
};

std::vector<PreparedExample> prepare_examples(const std::vector<StoryboardExample>& examples,
                                              const EmbeddingTable& texts, const EmbeddingTable& frames,
                                              int max_tokens);

// Quantization decisions captured at a base point. Passing them back in makes
// the batch loss a smooth function whose exact gradient is the
// straight-through gradient, which is what finite differences can check.
struct FrozenQuantization {
  std::vector<ad::Mat> features;  // per example, m x code_dim
  std::vector<ad::Mat> codes;     // per example, m x code_dim
  std::vector<std::vector<QuantizeResult>> results;
};

struct BatchLoss {
  double total = 0.0;
  double trans = 0.0;
  double vq = 0.0;
  std::vector<std::vector<QuantizeResult>> quantized;  // per example
  std::vector<ad::Mat> features;                       // per example
};

// Loss of one mini-batch; when grads / code_grads are non-null they receive
// d(total)/d(param) and d(total)/d(codebook rows).
BatchLoss batch_loss(const OrdererModel& model, const Codebook* codebook, const std::vector<const PreparedExample*>& batch,
                     const TrainConfig& config, ad::GradBuffer* grads, std::vector<ad::Mat>* code_grads,
                     const FrozenQuantization* frozen = nullptr);

struct TrainResult {
  std::vector<double> loss_curve;
  std::vector<double> trans_curve;
  std::vector<double> vq_curve;
  int dead_codes_reset = 0;
};

using ProgressFn = std::function<void(long step, const BatchLoss& loss)>;

// Teacher-forced training of the decoder (and codebook when the model uses
// VQ). Throws DivergenceError on a non-finite loss.
TrainResult train_orderer(OrdererModel& model, Codebook* codebook, const std::vector<PreparedExample>& train,
                          const TrainConfig& config, const ProgressFn& progress = {});

struct RetrievalTrainResult {
  std::vector<double> loss_curve;
};

// Contrastive training of the projection heads: one positive frame per
// example, re-sampled every epoch, with in-batch negatives.
RetrievalTrainResult train_retrieval_head(RetrievalHead& head, const std::vector<StoryboardExample>& train,
                                          const EmbeddingTable& texts, const EmbeddingTable& frames,
                                          const TrainConfig& config, const ProgressFn& progress = {});

}  // namespace tvs
