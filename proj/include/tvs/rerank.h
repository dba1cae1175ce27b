#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tvs/autodiff.h"
#include "tvs/embedding_table.h"
#include "tvs/ordering_result.h"
#include "tvs/train.h"

namespace tvs {

struct RerankConfig {
  int input_dim = 32;
  int model_dim = 64;
  int depth = 2;
  int heads = 4;
  int max_len = 128;

  void validate() const;
};

// Re-Ranking baseline: a bidirectional transformer over text tokens and the
// unordered frames (frames carry a type embedding but no position). Output
// slot i scores every input frame as the one that belongs at position i.
class RerankModel {
 public:
  RerankModel() = default;
  RerankModel(RerankConfig config, std::uint64_t seed);

  const RerankConfig& config() const { return config_; }
  ad::ParameterSet& params() { return params_; }
  const ad::ParameterSet& params() const { return params_; }

  // m x m logits; row = output slot, column = input frame.
  ad::Var logits(ad::Tape& tape, const ad::Mat& text, const ad::Mat& frames) const;
  ad::Mat logits(const ad::Mat& text, const ad::Mat& frames) const;

 private:
  ad::Var linear(ad::Tape& tape, ad::Var x, const std::string& prefix) const;

  RerankConfig config_;
  ad::ParameterSet params_;
};

// Mean slot cross-entropy; frames are given in canonical order, so slot i's
// target is input i. The model is permutation-equivariant over frames, so no
// shuffling is needed for the loss to be order-agnostic.
double rerank_loss(const RerankModel& model, const std::vector<const PreparedExample*>& batch,
                   ad::GradBuffer* grads);

struct RerankTrainResult {
  std::vector<double> loss_curve;
};

RerankTrainResult train_rerank(RerankModel& model, const std::vector<PreparedExample>& train,
                               const TrainConfig& config, const ProgressFn& progress = {});

// Greedy assignment by descending slot probability without reusing frames or
// slots. Always a permutation of the candidates.
OrderingResult order_rerank(const RerankModel& model, const std::string& text_id,
                            const std::vector<std::string>& candidates, const EmbeddingTable& texts,
                            const EmbeddingTable& frames, int max_tokens = 64);

}  // namespace tvs
