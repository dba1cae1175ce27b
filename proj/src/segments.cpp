#include "tvs/segments.h"

#include <algorithm>
#include <random>
#include <set>

#include "tvs/error.h"

namespace tvs {

Segmentation segment_text(std::size_t n_tokens, std::size_t m) {
  if (m < 1) throw InvalidArgument("segment count must be >= 1");
  if (n_tokens < 1) throw InvalidArgument("cannot segment an empty token list");
  if (m > n_tokens) {
    throw InvalidArgument("cannot split " + std::to_string(n_tokens) + " tokens into " + std::to_string(m) +
                          " segments");
  }
  const std::size_t base = n_tokens / m;
  const std::size_t rem = n_tokens % m;
  Segmentation out;
  std::size_t at = 0;
  for (std::size_t s = 0; s < m; ++s) {
    const std::size_t len = base + (s < rem ? 1 : 0);
    out.push_back({at, at + len});
    at += len;
  }
  return out;
}

std::size_t composition_count(std::size_t n_tokens, std::size_t m, std::size_t cap) {
  if (m < 1 || m > n_tokens) return 0;
  // C(n-1, k) with k = min(m-1, n-m), computed incrementally.
  const std::size_t n = n_tokens - 1;
  const std::size_t k = std::min(m - 1, n_tokens - m);
  unsigned __int128 c = 1;
  for (std::size_t i = 1; i <= k; ++i) {
    c = c * (n - k + i) / i;
    if (c > cap) return cap;
  }
  return static_cast<std::size_t>(c);
}

namespace {

Segmentation from_cuts(const std::vector<std::size_t>& cuts, std::size_t n_tokens) {
  Segmentation seg;
  std::size_t at = 0;
  for (auto c : cuts) {
    seg.push_back({at, c});
    at = c;
  }
  seg.push_back({at, n_tokens});
  return seg;
}

}  // namespace

std::vector<Segmentation> enumerate_segmentations(std::size_t n_tokens, std::size_t m, std::size_t limit,
                                                  std::uint64_t seed) {
  if (m < 1 || m > n_tokens) {
    throw InvalidArgument("cannot split " + std::to_string(n_tokens) + " tokens into " + std::to_string(m) +
                          " segments");
  }
  std::vector<Segmentation> out;
  if (limit == 0) return out;
  const std::size_t cuts_needed = m - 1;
  const std::size_t total = composition_count(n_tokens, m, limit + 1);

  if (total <= limit) {
    // Cut positions are in 1..n-1; walk combinations in lexicographic order.
    std::vector<std::size_t> cuts(cuts_needed);
    for (std::size_t i = 0; i < cuts_needed; ++i) cuts[i] = i + 1;
    for (;;) {
      out.push_back(from_cuts(cuts, n_tokens));
      std::size_t i = cuts_needed;
      while (i > 0 && cuts[i - 1] == n_tokens - 1 - (cuts_needed - i)) --i;
      if (i == 0) break;
      ++cuts[i - 1];
      for (std::size_t j = i; j < cuts_needed; ++j) cuts[j] = cuts[j - 1] + 1;
    }
    return out;
  }

  // Uniform (m-1)-subsets of {1..n-1} by Floyd's algorithm, deduplicated in
  // draw order.
  std::mt19937_64 rng(seed);
  std::set<std::vector<std::size_t>> seen;
  const std::size_t universe = n_tokens - 1;
  while (out.size() < limit) {
    std::set<std::size_t> chosen;
    for (std::size_t j = universe - cuts_needed + 1; j <= universe; ++j) {
      const std::size_t t = std::uniform_int_distribution<std::size_t>(1, j)(rng);
      if (!chosen.insert(t).second) chosen.insert(j);
    }
    std::vector<std::size_t> cuts(chosen.begin(), chosen.end());
    if (seen.insert(cuts).second) out.push_back(from_cuts(cuts, n_tokens));
  }
  return out;
}

std::string span_key(const std::string& text_id, const Span& span) {
  return text_id + "#s" + std::to_string(span.begin) + ":" + std::to_string(span.end);
}

std::string token_key(const std::string& text_id, std::size_t token) {
  return text_id + "#t" + std::to_string(token);
}

SegmentEmbedder::SegmentEmbedder(const EmbeddingTable& texts, std::string text_id)
    : texts_(texts), text_id_(std::move(text_id)) {}

const Eigen::VectorXd& SegmentEmbedder::embed(const Span& span) {
  if (auto it = cache_.find(span); it != cache_.end()) return it->second;
  if (span.size() == 0) throw InvalidArgument("cannot embed an empty span");
  Eigen::VectorXd v;
  if (const auto key = span_key(text_id_, span); texts_.contains(key)) {
    v = texts_.vector(key);
  } else {
    v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(texts_.dim()));
    for (std::size_t t = span.begin; t < span.end; ++t) {
      const auto tk = token_key(text_id_, t);
      if (!texts_.contains(tk)) {
        throw LoadError("no embedding for segment '" + key + "' and no token entry '" + tk + "'");
      }
      v += texts_.vector(tk);
    }
    if (v.norm() == 0.0) throw InvalidArgument("segment '" + key + "' pools to a zero vector");
    v.normalize();
  }
  return cache_.emplace(span, std::move(v)).first->second;
}

std::vector<Eigen::VectorXd> SegmentEmbedder::embed_all(const Segmentation& segmentation) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(segmentation.size());
  for (const auto& s : segmentation) out.push_back(embed(s));
  return out;
}

}  // namespace tvs
