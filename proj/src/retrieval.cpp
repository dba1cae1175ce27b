#include "tvs/retrieval.h"

#include <algorithm>
#include <numeric>

#include <json.hpp>

#include "tvs/error.h"

namespace tvs {

RetrievalRanking retrieve_topk(const std::string& text_id, const std::vector<std::string>& candidates,
                               const EmbeddingTable& texts, const EmbeddingTable& frames, const RetrievalHead* head,
                               std::size_t k) {
  if (k == 0) throw InvalidArgument("retrieve_topk needs K >= 1");
  if (!texts.contains(text_id)) throw LoadError("unknown text id '" + text_id + "'");
  Eigen::VectorXd query = texts.vector(text_id);
  if (head != nullptr) query = head->project_text(query);

  std::vector<double> sims(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (!frames.contains(candidates[i])) throw LoadError("unknown frame id '" + candidates[i] + "'");
    Eigen::VectorXd f = frames.vector(candidates[i]);
    if (head != nullptr) f = head->project_frame(f);
    sims[i] = query.dot(f);
  }
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (sims[a] != sims[b]) return sims[a] > sims[b];
    return candidates[a] < candidates[b];
  });
  // Duplicated ids would make the ranking ambiguous.
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (candidates[order[i]] == candidates[order[i - 1]]) throw InvalidArgument("duplicate candidate id '" + candidates[order[i]] + "'");
  }

  RetrievalRanking r;
  r.text_id = text_id;
  const std::size_t n = std::min(k, order.size());
  for (std::size_t i = 0; i < n; ++i) {
    r.ids.push_back(candidates[order[i]]);
    r.scores.push_back(sims[order[i]]);
  }
  return r;
}

std::string ranking_to_json_line(const RetrievalRanking& ranking) {
  nlohmann::json j = {{"text_id", ranking.text_id}, {"ids", ranking.ids}, {"scores", ranking.scores}};
  return j.dump();
}

}  // namespace tvs
