#pragma once

#include <string>
#include <vector>

#include "tvs/embedding_table.h"
#include "tvs/model.h"

namespace tvs {

struct RetrievalRanking {
  std::string text_id;
  std::vector<std::string> ids;
  std::vector<double> scores;  // non-increasing
};

// Cosine ranking of candidates against the synopsis vector, in raw space or
// through the projection head. Ties go to the lowest id. k larger than the
// pool returns the full ranking.
RetrievalRanking retrieve_topk(const std::string& text_id, const std::vector<std::string>& candidates,
                               const EmbeddingTable& texts, const EmbeddingTable& frames, const RetrievalHead* head,
                               std::size_t k);

std::string ranking_to_json_line(const RetrievalRanking& ranking);

}  // namespace tvs
