#include "tvs/evaluation.h"

#include <algorithm>
#include <cstdio>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "tvs/error.h"

namespace tvs {

using nlohmann::json;

double kendall_tau(const std::vector<std::string>& predicted, const std::vector<std::string>& reference) {
  const std::size_t m = reference.size();
  if (predicted.size() != m) throw InvalidArgument("kendall_tau: orderings differ in length");
  if (m < 2) throw InvalidArgument("kendall_tau needs at least two items");
  std::map<std::string_view, std::size_t> rank;
  for (std::size_t i = 0; i < m; ++i) {
    if (!rank.emplace(reference[i], i).second) throw InvalidArgument("kendall_tau: duplicate id in reference");
  }
  std::vector<std::size_t> pos(m);
  std::set<std::string_view> seen;
  for (std::size_t i = 0; i < m; ++i) {
    auto it = rank.find(predicted[i]);
    if (it == rank.end()) throw InvalidArgument("kendall_tau: id '" + predicted[i] + "' not in reference");
    if (!seen.insert(predicted[i]).second) throw InvalidArgument("kendall_tau: duplicate id in prediction");
    pos[i] = it->second;
  }
  std::size_t inversions = 0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) inversions += pos[i] > pos[j];
  const double pairs = static_cast<double>(m) * static_cast<double>(m - 1) / 2.0;
  return 1.0 - 2.0 * static_cast<double>(inversions) / pairs;
}

double tau_best(const std::vector<std::string>& predicted, const std::vector<std::vector<std::string>>& variants) {
  if (variants.empty()) throw InvalidArgument("tau_best needs at least one ground-truth variant");
  double best = -2.0;
  for (const auto& v : variants) best = std::max(best, kendall_tau(predicted, v));
  return best;
}

RetrieveOrderScore retrieve_and_order_score(const std::vector<std::string>& predicted_topk,
                                            const StoryboardExample& gt, std::size_t k) {
  std::set<std::string_view> seen;
  for (const auto& id : predicted_topk) {
    if (!seen.insert(id).second) throw InvalidArgument("duplicate id '" + id + "' in top-K prediction");
  }
  const std::size_t n = std::min(k, predicted_topk.size());
  std::set<std::string_view> gt_set(gt.frame_ids.begin(), gt.frame_ids.end());
  std::vector<std::string> hits;
  for (std::size_t i = 0; i < n; ++i)
    if (gt_set.contains(predicted_topk[i])) hits.push_back(predicted_topk[i]);

  RetrieveOrderScore s;
  s.retrieved = hits.size();
  s.r_at_k = static_cast<double>(hits.size()) / static_cast<double>(gt.frame_ids.size());
  if (hits.size() < 2) {
    s.tau_at_k = 1.0;
  } else {
    std::set<std::string_view> hit_set(hits.begin(), hits.end());
    const auto& variants = gt.gt_variants.empty() ? std::vector<std::vector<std::string>>{gt.frame_ids} : gt.gt_variants;
    std::vector<std::vector<std::string>> restricted;
    for (const auto& v : variants) {
      std::vector<std::string> r;
      for (const auto& id : v)
        if (hit_set.contains(id)) r.push_back(id);
      restricted.push_back(std::move(r));
    }
    s.tau_at_k = tau_best(hits, restricted);
  }
  s.product = s.r_at_k * s.tau_at_k;
  return s;
}

double recall_at_k(const std::vector<std::string>& ranked_ids, const std::vector<std::string>& gt_ids, int k) {
  if (k <= 0) throw InvalidArgument("recall_at_k needs K >= 1");
  if (gt_ids.empty()) throw InvalidArgument("recall_at_k needs ground-truth ids");
  std::set<std::string_view> gt(gt_ids.begin(), gt_ids.end());
  std::size_t hits = 0;
  const auto n = std::min<std::size_t>(static_cast<std::size_t>(k), ranked_ids.size());
  for (std::size_t i = 0; i < n; ++i) hits += gt.contains(ranked_ids[i]);
  return static_cast<double>(hits) / static_cast<double>(gt.size());
}

std::vector<std::string> build_candidate_pool(const StoryboardExample& example,
                                              const std::vector<std::string>& all_frames, std::size_t pool_size,
                                              std::uint64_t seed) {
  if (pool_size < example.frame_ids.size()) throw InvalidArgument("pool_size smaller than the storyboard");
  std::set<std::string_view> own(example.frame_ids.begin(), example.frame_ids.end());
  std::vector<std::string> negatives;
  for (const auto& f : all_frames)
    if (!own.contains(f)) negatives.push_back(f);
  const std::size_t need = pool_size - example.frame_ids.size();
  if (negatives.size() < need) {
    throw InvalidArgument("corpus has " + std::to_string(negatives.size()) + " negative frames; pool needs " +
                          std::to_string(need));
  }
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates over the negatives.
  for (std::size_t i = 0; i < need; ++i) {
    const auto j = std::uniform_int_distribution<std::size_t>(i, negatives.size() - 1)(rng);
    std::swap(negatives[i], negatives[j]);
  }
  std::vector<std::string> pool(example.frame_ids.begin(), example.frame_ids.end());
  pool.insert(pool.end(), negatives.begin(), negatives.begin() + static_cast<std::ptrdiff_t>(need));
  std::shuffle(pool.begin(), pool.end(), rng);
  return pool;
}

namespace {

void accumulate(BucketMean& b, double v) {
  b.mean += v;
  ++b.count;
}

void finish(BucketMean& b) {
  if (b.count > 0) b.mean /= static_cast<double>(b.count);
}

bool in_short(std::size_t len) { return len >= kShortBucketMin && len <= kShortBucketMax; }
bool in_long(std::size_t len) { return len >= kLongBucketMin && len <= kLongBucketMax; }

}  // namespace

EvalReport bucket_report(std::vector<ExampleResult> per_example, std::string method, std::string protocol) {
  EvalReport r;
  r.method = std::move(method);
  r.protocol = std::move(protocol);
  std::map<int, std::size_t> k_counts;
  for (const auto& ex : per_example) {
    if (ex.tau) {
      accumulate(r.overall, *ex.tau);
      if (in_short(ex.length)) accumulate(r.short_bucket, *ex.tau);
      if (in_long(ex.length)) accumulate(r.long_bucket, *ex.tau);
    }
    for (const auto& [k, s] : ex.at_k) {
      auto& agg = r.at_k[k];
      agg.r_at_k += s.r_at_k;
      agg.tau_at_k += s.tau_at_k;
      agg.product += s.product;
      ++k_counts[k];
      if (in_short(ex.length)) accumulate(agg.product_short, s.product);
      if (in_long(ex.length)) accumulate(agg.product_long, s.product);
    }
  }
  finish(r.overall);
  finish(r.short_bucket);
  finish(r.long_bucket);
  for (auto& [k, agg] : r.at_k) {
    const double n = static_cast<double>(k_counts[k]);
    agg.r_at_k /= n;
    agg.tau_at_k /= n;
    agg.product /= n;
    finish(agg.product_short);
    finish(agg.product_long);
  }
  r.per_example = std::move(per_example);
  return r;
}

namespace {

json bucket_json(const BucketMean& b) { return {{"mean", b.mean}, {"count", b.count}}; }

BucketMean bucket_from(const json& j) { return {j.at("mean").get<double>(), j.at("count").get<std::size_t>()}; }

json score_json(const RetrieveOrderScore& s) {
  return {{"r_at_k", s.r_at_k}, {"tau_at_k", s.tau_at_k}, {"product", s.product}, {"retrieved", s.retrieved}};
}

RetrieveOrderScore score_from(const json& j) {
  return {j.at("r_at_k").get<double>(), j.at("tau_at_k").get<double>(), j.at("product").get<double>(),
          j.at("retrieved").get<std::size_t>()};
}

}  // namespace

std::string report_to_json(const EvalReport& r) {
  json j;
  j["method"] = r.method;
  j["protocol"] = r.protocol;
  j["overall"] = bucket_json(r.overall);
  j["bucket_3_5"] = bucket_json(r.short_bucket);
  j["bucket_6_11"] = bucket_json(r.long_bucket);
  j["notes"] = r.notes;
  json ks = json::object();
  for (const auto& [k, a] : r.at_k) {
    ks[std::to_string(k)] = {{"r_at_k", a.r_at_k},
                             {"tau_at_k", a.tau_at_k},
                             {"product", a.product},
                             {"product_3_5", bucket_json(a.product_short)},
                             {"product_6_11", bucket_json(a.product_long)}};
  }
  j["at_k"] = ks;
  json per = json::array();
  for (const auto& ex : r.per_example) {
    json e = {{"example_id", ex.example_id}, {"length", ex.length}};
    if (ex.tau) e["tau"] = *ex.tau;
    json ek = json::object();
    for (const auto& [k, s] : ex.at_k) ek[std::to_string(k)] = score_json(s);
    if (!ex.at_k.empty()) e["at_k"] = ek;
    per.push_back(std::move(e));
  }
  j["per_example"] = per;
  return j.dump(2);
}

EvalReport report_from_json(const std::string& text) {
  EvalReport r;
  try {
    const json j = json::parse(text);
    r.method = j.at("method").get<std::string>();
    r.protocol = j.at("protocol").get<std::string>();
    r.overall = bucket_from(j.at("overall"));
    r.short_bucket = bucket_from(j.at("bucket_3_5"));
    r.long_bucket = bucket_from(j.at("bucket_6_11"));
    r.notes = j.at("notes").get<std::map<std::string, std::string>>();
    for (const auto& [k, a] : j.at("at_k").items()) {
      KAggregate agg;
      agg.r_at_k = a.at("r_at_k").get<double>();
      agg.tau_at_k = a.at("tau_at_k").get<double>();
      agg.product = a.at("product").get<double>();
      agg.product_short = bucket_from(a.at("product_3_5"));
      agg.product_long = bucket_from(a.at("product_6_11"));
      r.at_k[std::stoi(k)] = agg;
    }
    for (const auto& e : j.at("per_example")) {
      ExampleResult ex;
      ex.example_id = e.at("example_id").get<std::string>();
      ex.length = e.at("length").get<std::size_t>();
      if (e.contains("tau")) ex.tau = e.at("tau").get<double>();
      if (e.contains("at_k"))
        for (const auto& [k, s] : e.at("at_k").items()) ex.at_k[std::stoi(k)] = score_from(s);
      r.per_example.push_back(std::move(ex));
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad report JSON: ") + e.what());
  }
  return r;
}

namespace {

std::string fmt3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

std::size_t name_width(const std::vector<EvalReport>& reports) {
  std::size_t w = 8;
  for (const auto& r : reports) w = std::max(w, r.method.size() + 2);
  return w;
}

}  // namespace

std::string ordering_table(const std::vector<EvalReport>& reports) {
  const auto w = name_width(reports);
  std::ostringstream out;
  out << pad("Method", w) << pad("Over-All", 10) << pad("[3-5]", 10) << "[6-11]\n";
  for (const auto& r : reports) {
    out << pad(r.method, w) << pad(fmt3(r.overall.mean), 10) << pad(fmt3(r.short_bucket.mean), 10)
        << fmt3(r.long_bucket.mean) << '\n';
  }
  return out.str();
}

std::string retrieval_table(const std::vector<EvalReport>& reports) {
  const auto w = name_width(reports);
  std::set<int> ks;
  for (const auto& r : reports)
    for (const auto& [k, a] : r.at_k) ks.insert(k);
  std::ostringstream out;
  out << pad("Method", w);
  for (int k : ks) out << pad("R@" + std::to_string(k), 9) << pad("tau@" + std::to_string(k), 9) << pad("RxT@" + std::to_string(k), 10);
  out << '\n';
  for (const auto& r : reports) {
    out << pad(r.method, w);
    for (int k : ks) {
      auto it = r.at_k.find(k);
      if (it == r.at_k.end()) {
        out << pad("-", 9) << pad("-", 9) << pad("-", 10);
      } else {
        out << pad(fmt3(it->second.r_at_k), 9) << pad(fmt3(it->second.tau_at_k), 9) << pad(fmt3(it->second.product), 10);
      }
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace tvs
