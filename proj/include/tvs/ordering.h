#pragma once

#include <string>
#include <vector>

#include "tvs/embedding_table.h"
#include "tvs/model.h"
#include "tvs/ordering_result.h"
#include "tvs/vq.h"

namespace tvs {

struct VqTransOptions {
  std::size_t max_steps = 0;  // 0 selects the pool size
  bool allow_eos = true;
  int max_tokens = 64;
};

// Greedy autoregressive decoding with pool deletion. Each step scores the
// predicted vector against the candidates' (quantized) codes and, when
// allowed, the EOS vector. Ties go to the lowest id; a candidate tied with EOS
// wins.
OrderingResult order_vq_trans(const OrdererModel& model, const Codebook* codebook, const std::string& text_id,
                              const std::vector<std::string>& candidates, const EmbeddingTable& texts,
                              const EmbeddingTable& frames, const VqTransOptions& options = {});

}  // namespace tvs
