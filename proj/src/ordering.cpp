#include "tvs/ordering.h"

#include <algorithm>
#include <limits>
#include <set>

#include "tvs/error.h"

namespace tvs {

OrderingResult order_vq_trans(const OrdererModel& model, const Codebook* codebook, const std::string& text_id,
                              const std::vector<std::string>& candidates, const EmbeddingTable& texts,
                              const EmbeddingTable& frames, const VqTransOptions& options) {
  OrderingResult result;
  if (candidates.empty()) return result;
  const bool use_vq = model.config().use_vq;
  if (use_vq && codebook == nullptr) throw InvalidArgument("model expects a codebook");
  {
    std::set<std::string_view> seen;
    for (const auto& id : candidates) {
      if (!frames.contains(id)) throw LoadError("unknown candidate frame id '" + id + "'");
      if (!seen.insert(id).second) throw InvalidArgument("duplicate candidate id '" + id + "'");
    }
  }

  const ad::Mat text = text_sequence(texts, text_id, options.max_tokens);
  const ad::Mat features = model.encode(frame_matrix(frames, candidates));
  ad::Mat codes = features;
  if (use_vq) {
    for (Eigen::Index r = 0; r < features.rows(); ++r) codes.row(r) = codebook->quantize(features.row(r).transpose()).code.transpose();
  }
  const Eigen::VectorXd eos = model.eos();

  // Pool kept in id order so a strict '>' scan breaks ties to the lowest id.
  std::vector<std::size_t> pool(candidates.size());
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
  std::sort(pool.begin(), pool.end(), [&](std::size_t a, std::size_t b) { return candidates[a] < candidates[b]; });

  const std::size_t max_steps = options.max_steps == 0 ? candidates.size() : options.max_steps;
  ad::Mat history(0, codes.cols());
  while (!pool.empty() && result.ordered_ids.size() < max_steps) {
    const Eigen::VectorXd pred = model.predict_next(text, history);
    std::size_t best_pos = 0;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < pool.size(); ++p) {
      const double s = codes.row(static_cast<Eigen::Index>(pool[p])).dot(pred);
      if (s > best) {
        best = s;
        best_pos = p;
      }
    }
    if (options.allow_eos && eos.dot(pred) > best) {
      result.stopped_by_eos = true;
      break;
    }
    const std::size_t chosen = pool[best_pos];
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(best_pos));
    result.ordered_ids.push_back(candidates[chosen]);
    result.scores.push_back(best);
    history.conservativeResize(history.rows() + 1, Eigen::NoChange);
    history.row(history.rows() - 1) = codes.row(static_cast<Eigen::Index>(chosen));
  }
  return result;
}

}  // namespace tvs
