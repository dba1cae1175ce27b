#include "tvs/baselines.h"

#include <algorithm>
#include <numeric>

#include <json.hpp>

#include "tvs/assignment.h"
#include "tvs/error.h"

namespace tvs {

std::string prediction_to_json_line(const std::string& example_id, const OrderingResult& r) {
  nlohmann::json j = {{"example_id", example_id}, {"ordered_ids", r.ordered_ids}, {"stopped_by_eos", r.stopped_by_eos}};
  return j.dump();
}

namespace {

struct Pool {
  std::vector<std::string> ids;
  Eigen::MatrixXd vecs;  // one row per id

  Pool(const std::vector<std::string>& candidates, const EmbeddingTable& frames)
      : ids(candidates), vecs(static_cast<Eigen::Index>(candidates.size()), static_cast<Eigen::Index>(frames.dim())) {
    for (std::size_t i = 0; i < ids.size(); ++i) vecs.row(static_cast<Eigen::Index>(i)) = frames.vector(ids[i]).transpose();
  }
};

// Best remaining index by similarity, ties to the lowest id.
std::size_t pick_best(const Eigen::VectorXd& sims, const std::vector<std::string>& ids, const std::vector<char>& taken) {
  std::size_t best = ids.size();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (taken[i]) continue;
    const auto s = sims[static_cast<Eigen::Index>(i)];
    if (best == ids.size() || s > sims[static_cast<Eigen::Index>(best)] ||
        (s == sims[static_cast<Eigen::Index>(best)] && ids[i] < ids[best])) {
      best = i;
    }
  }
  return best;
}

std::vector<Eigen::VectorXd> cumulative_queries(const std::vector<Eigen::VectorXd>& segment_vecs) {
  std::vector<Eigen::VectorXd> out;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(segment_vecs.empty() ? 0 : segment_vecs[0].size());
  for (const auto& s : segment_vecs) {
    sum += s;
    const double n = sum.norm();
    out.push_back(n > 0.0 ? Eigen::VectorXd(sum / n) : sum);
  }
  return out;
}

OrderingResult greedy_per_query(const std::vector<Eigen::VectorXd>& queries, const std::vector<std::string>& candidates,
                                const EmbeddingTable& frames) {
  if (queries.size() != candidates.size()) {
    throw InvalidArgument("expected one segment per candidate (" + std::to_string(queries.size()) + " vs " +
                          std::to_string(candidates.size()) + ")");
  }
  Pool pool(candidates, frames);
  std::vector<char> taken(candidates.size(), 0);
  OrderingResult out;
  for (const auto& q : queries) {
    const Eigen::VectorXd sims = pool.vecs * q;
    const auto best = pick_best(sims, pool.ids, taken);
    taken[best] = 1;
    out.ordered_ids.push_back(pool.ids[best]);
    out.scores.push_back(sims[static_cast<Eigen::Index>(best)]);
  }
  return out;
}

}  // namespace

OrderingResult order_naive(const Eigen::VectorXd& text_vec, const std::vector<std::string>& candidates,
                           const EmbeddingTable& frames) {
  if (candidates.empty()) throw InvalidArgument("order_naive needs candidates");
  Pool pool(candidates, frames);
  const Eigen::VectorXd sims = pool.vecs * text_vec;
  std::vector<std::size_t> idx(candidates.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const double sa = sims[static_cast<Eigen::Index>(a)], sb = sims[static_cast<Eigen::Index>(b)];
    if (sa != sb) return sa > sb;
    return pool.ids[a] < pool.ids[b];
  });
  OrderingResult out;
  for (auto i : idx) {
    out.ordered_ids.push_back(pool.ids[i]);
    out.scores.push_back(sims[static_cast<Eigen::Index>(i)]);
  }
  return out;
}

OrderingResult order_sliding(const std::vector<Eigen::VectorXd>& segment_vecs,
                             const std::vector<std::string>& candidates, const EmbeddingTable& frames) {
  return greedy_per_query(segment_vecs, candidates, frames);
}

OrderingResult order_cumulative(const std::vector<Eigen::VectorXd>& segment_vecs,
                                const std::vector<std::string>& candidates, const EmbeddingTable& frames) {
  if (segment_vecs.size() != candidates.size()) {
    throw InvalidArgument("expected one segment per candidate (" + std::to_string(segment_vecs.size()) + " vs " +
                          std::to_string(candidates.size()) + ")");
  }
  return greedy_per_query(cumulative_queries(segment_vecs), candidates, frames);
}

double contextual_score(const std::vector<Eigen::VectorXd>& segment_vecs, const std::vector<std::string>& sequence,
                        const EmbeddingTable& frames) {
  const auto queries = cumulative_queries(segment_vecs);
  double total = 0.0;
  for (std::size_t t = 0; t < sequence.size() && t < queries.size(); ++t) total += frames.vector(sequence[t]).dot(queries[t]);
  return total;
}

OrderingResult order_contextual(const std::vector<Eigen::VectorXd>& segment_vecs,
                                const std::vector<std::string>& candidates, const EmbeddingTable& frames,
                                std::size_t beam_width) {
  if (beam_width < 1) throw InvalidArgument("beam_width must be >= 1");
  if (segment_vecs.size() != candidates.size()) {
    throw InvalidArgument("expected one segment per candidate (" + std::to_string(segment_vecs.size()) + " vs " +
                          std::to_string(candidates.size()) + ")");
  }
  Pool pool(candidates, frames);
  const auto queries = cumulative_queries(segment_vecs);
  const std::size_t m = candidates.size();

  struct Beam {
    std::vector<std::size_t> picks;
    std::vector<std::string> ids;
    std::vector<double> step_scores;
    double score = 0.0;
  };
  auto better = [](const Beam& a, const Beam& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.ids < b.ids;
  };
  std::vector<Beam> beams{Beam{}};
  for (std::size_t t = 0; t < m; ++t) {
    const Eigen::VectorXd sims = pool.vecs * queries[t];
    std::vector<Beam> next;
    for (const auto& b : beams) {
      std::vector<char> taken(m, 0);
      for (auto p : b.picks) taken[p] = 1;
      for (std::size_t c = 0; c < m; ++c) {
        if (taken[c]) continue;
        Beam nb = b;
        nb.picks.push_back(c);
        nb.ids.push_back(pool.ids[c]);
        nb.step_scores.push_back(sims[static_cast<Eigen::Index>(c)]);
        nb.score += sims[static_cast<Eigen::Index>(c)];
        next.push_back(std::move(nb));
      }
    }
    std::sort(next.begin(), next.end(), better);
    if (next.size() > beam_width) next.resize(beam_width);
    beams = std::move(next);
  }
  OrderingResult out;
  out.ordered_ids = beams.front().ids;
  out.scores = beams.front().step_scores;
  return out;
}

DynamicResult order_dynamic(std::size_t n_tokens, SegmentEmbedder& embedder, const std::vector<std::string>& candidates,
                            const EmbeddingTable& frames, std::size_t limit, std::uint64_t seed) {
  const std::size_t m = candidates.size();
  if (m == 0) throw InvalidArgument("order_dynamic needs candidates");
  if (m > n_tokens) throw InvalidArgument("more candidates than synopsis tokens");
  Pool pool(candidates, frames);
  const auto segmentations = enumerate_segmentations(n_tokens, m, limit, seed);
  DynamicResult best;
  bool have = false;
  Eigen::MatrixXd seg_vecs(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(frames.dim()));
  for (const auto& seg : segmentations) {
    for (std::size_t s = 0; s < m; ++s) seg_vecs.row(static_cast<Eigen::Index>(s)) = embedder.embed(seg[s]).transpose();
    const Eigen::MatrixXd sim = seg_vecs * pool.vecs.transpose();
    const double total = max_weight_assignment(sim).total;
    if (!have || total > best.total) {
      best.total = total;
      best.segmentation = seg;
      have = true;
    }
  }
  for (std::size_t s = 0; s < m; ++s) {
    seg_vecs.row(static_cast<Eigen::Index>(s)) = embedder.embed(best.segmentation[s]).transpose();
  }
  const Eigen::MatrixXd sim = seg_vecs * pool.vecs.transpose();
  const Assignment match = bipartite_match(sim);
  for (std::size_t s = 0; s < m; ++s) {
    const auto c = static_cast<std::size_t>(match.row_to_col[s]);
    best.ordering.ordered_ids.push_back(pool.ids[c]);
    best.ordering.scores.push_back(sim(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(c)));
  }
  return best;
}

}  // namespace tvs
