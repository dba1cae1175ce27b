#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "tvs/error.h"
#include "tvs/evaluation.h"

using namespace tvs;

namespace {

std::vector<std::string> ids(std::size_t m) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < m; ++i) out.push_back(std::string(1, static_cast<char>('A' + i)));
  return out;
}

// Counts pairs (i, j) ordered one way in `ref` and the other way in `pred`.
double brute_tau(const std::vector<std::string>& pred, const std::vector<std::string>& ref) {
  const auto m = ref.size();
  auto pos = [&](const std::string& id) { return std::find(pred.begin(), pred.end(), id) - pred.begin(); };
  int inv = 0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) inv += pos(ref[i]) > pos(ref[j]);
  return 1.0 - 2.0 * inv / (m * (m - 1) / 2.0);
}

StoryboardExample example(std::vector<std::string> frames) {
  StoryboardExample ex;
  ex.example_id = "e";
  ex.frame_ids = frames;
  ex.gt_variants = {frames};
  return ex;
}

}  // namespace

TEST_CASE("kendall_tau examples") {
  const auto ref = ids(4);
  CHECK(kendall_tau(ref, ref) == 1.0);
  auto rev = ref;
  std::reverse(rev.begin(), rev.end());
  CHECK(kendall_tau(rev, ref) == -1.0);
  CHECK(kendall_tau({"A", "C", "B", "D"}, ref) == doctest::Approx(1.0 - 2.0 / 6.0).epsilon(1e-15));
}

TEST_CASE("kendall_tau matches brute force on every permutation up to 6") {
  for (std::size_t m = 2; m <= 6; ++m) {
    const auto ref = ids(m);
    auto p = ref;
    do {
      CHECK(kendall_tau(p, ref) == brute_tau(p, ref));
    } while (std::next_permutation(p.begin(), p.end()));
  }
}

TEST_CASE("kendall_tau endpoints and errors") {
  for (std::size_t m = 2; m <= 11; ++m) {
    const auto ref = ids(m);
    auto rev = ref;
    std::reverse(rev.begin(), rev.end());
    CHECK(kendall_tau(ref, ref) == 1.0);
    CHECK(kendall_tau(rev, ref) == -1.0);
  }
  CHECK_THROWS_AS(kendall_tau({"A", "B"}, {"A", "C"}), InvalidArgument);
  CHECK_THROWS_AS(kendall_tau({"A", "A"}, {"A", "B"}), InvalidArgument);
  CHECK_THROWS_AS(kendall_tau({"A"}, {"A", "B"}), InvalidArgument);
}

TEST_CASE("tau_best") {
  const auto ref = ids(4);
  const std::vector<std::string> pred = {"B", "A", "C", "D"};
  CHECK(tau_best(pred, {ref}) == kendall_tau(pred, ref));
  CHECK(tau_best(pred, {ref, pred}) == 1.0);
  // Second variant flips (C, D); prediction flips (A, B) and (C, D).
  const std::vector<std::string> p2 = {"B", "A", "D", "C"};
  const std::vector<std::string> v2 = {"A", "B", "D", "C"};
  const double t1 = brute_tau(p2, ref), t2 = brute_tau(p2, v2);
  CHECK(t2 > t1);
  CHECK(tau_best(p2, {ref, v2}) == t2);
  CHECK_THROWS_AS(tau_best(pred, {}), InvalidArgument);
}

TEST_CASE("retrieve_and_order_score") {
  const auto ex = example({"A", "B", "C", "D"});
  auto s = retrieve_and_order_score({"A", "B", "C", "D"}, ex, 4);
  CHECK(s.r_at_k == 1.0);
  CHECK(s.tau_at_k == 1.0);
  CHECK(s.product == 1.0);

  s = retrieve_and_order_score({"x", "C", "y", "z"}, ex, 4);
  CHECK(s.r_at_k == 0.25);
  CHECK(s.tau_at_k == 1.0);
  CHECK(s.product == 0.25);

  s = retrieve_and_order_score({"D", "C", "B", "A"}, ex, 4);
  CHECK(s.r_at_k == 1.0);
  CHECK(s.tau_at_k == -1.0);
  CHECK(s.product == -1.0);

  CHECK_THROWS_AS(retrieve_and_order_score({"A", "A"}, ex, 2), InvalidArgument);
}

TEST_CASE("product bounded by recall") {
  std::mt19937_64 rng(3);
  const auto gt = ids(6);
  std::vector<std::string> pool = gt;
  for (int i = 0; i < 20; ++i) pool.push_back("n" + std::to_string(i));
  for (int trial = 0; trial < 300; ++trial) {
    std::shuffle(pool.begin(), pool.end(), rng);
    const std::size_t k = 1 + rng() % 15;
    std::vector<std::string> topk(pool.begin(), pool.begin() + static_cast<long>(k));
    const auto s = retrieve_and_order_score(topk, example(gt), k);
    CHECK(s.product <= s.r_at_k + 1e-15);
    CHECK(std::abs(s.product) <= 1.0);
  }
}

TEST_CASE("recall_at_k") {
  const std::vector<std::string> gt = {"a", "b", "c", "d"};
  CHECK(recall_at_k({"a", "b", "c", "d", "x"}, gt, 5) == 1.0);
  CHECK(recall_at_k({"x", "y", "a"}, gt, 2) == 0.0);
  CHECK(recall_at_k({"a", "x", "c", "b"}, gt, 3) == 0.5);
  CHECK_THROWS_AS(recall_at_k(gt, gt, 0), InvalidArgument);
}

TEST_CASE("build_candidate_pool") {
  const auto ex = example({"A", "B", "C"});
  std::vector<std::string> corpus = {"A", "B", "C"};
  for (int i = 0; i < 600; ++i) corpus.push_back("n" + std::to_string(i));
  const auto pool = build_candidate_pool(ex, corpus, 500, 9);
  CHECK(pool.size() == 500);
  for (const auto& id : ex.frame_ids) CHECK(std::count(pool.begin(), pool.end(), id) == 1);
  std::set<std::string> uniq(pool.begin(), pool.end());
  CHECK(uniq.size() == 500);
  CHECK(pool == build_candidate_pool(ex, corpus, 500, 9));
  CHECK(pool != build_candidate_pool(ex, corpus, 500, 10));
  CHECK_THROWS_AS(build_candidate_pool(ex, {"A", "B", "C", "x"}, 500, 1), InvalidArgument);
  CHECK_THROWS_AS(build_candidate_pool(ex, corpus, 2, 1), InvalidArgument);
}

TEST_CASE("bucket_report") {
  std::vector<ExampleResult> rs(2);
  rs[0] = {"a", 3, 0.2, {}};
  rs[1] = {"b", 6, 0.4, {}};
  const auto r = bucket_report(rs);
  CHECK(r.overall.mean == doctest::Approx(0.3));
  CHECK(r.short_bucket.mean == doctest::Approx(0.2));
  CHECK(r.long_bucket.mean == doctest::Approx(0.4));

  std::vector<ExampleResult> threes = {{"a", 3, 0.5, {}}, {"b", 3, -0.1, {}}};
  const auto t = bucket_report(threes);
  CHECK(t.overall.mean == t.short_bucket.mean);
  CHECK(t.long_bucket.count == 0);

  // Length 12 counts only towards overall.
  const auto o = bucket_report({{"a", 12, 1.0, {}}, {"b", 4, 0.0, {}}});
  CHECK(o.overall.count == 2);
  CHECK(o.short_bucket.count == 1);
  CHECK(o.long_bucket.count == 0);

  const auto e = bucket_report({});
  CHECK(e.overall.count == 0);
  CHECK(e.per_example.empty());
}

TEST_CASE("overall is the weighted mean of buckets when all lengths are bucketed") {
  std::mt19937_64 rng(5);
  std::vector<ExampleResult> rs;
  for (int i = 0; i < 50; ++i) {
    rs.push_back({"e" + std::to_string(i), 3 + rng() % 9, std::uniform_real_distribution<double>(-1, 1)(rng), {}});
  }
  const auto r = bucket_report(rs);
  const double weighted = (r.short_bucket.mean * r.short_bucket.count + r.long_bucket.mean * r.long_bucket.count) /
                          static_cast<double>(r.short_bucket.count + r.long_bucket.count);
  CHECK(r.overall.mean == doctest::Approx(weighted).epsilon(1e-12));
}

TEST_CASE("report JSON round-trip") {
  ExampleResult a{"a", 4, 0.5, {}};
  a.at_k[10] = {0.5, 1.0, 0.5, 2};
  ExampleResult b{"b", 7, std::nullopt, {}};
  b.at_k[10] = {0.25, -1.0 / 3.0, -1.0 / 12.0, 3};
  auto r = bucket_report({a, b}, "vq-trans", "retrieve-order");
  r.notes["eos"] = "disabled";
  const auto text = report_to_json(r);
  const auto back = report_from_json(text);
  CHECK(report_to_json(back) == text);
  CHECK(back.at_k.at(10).product == r.at_k.at(10).product);
  CHECK(back.per_example[1].at_k.at(10).tau_at_k == -1.0 / 3.0);
  CHECK_THROWS_AS(report_from_json("{"), FormatError);
}

TEST_CASE("tables") {
  auto r = bucket_report({{"a", 3, 0.25, {}}}, "naive", "ordering");
  const auto t = ordering_table({r});
  CHECK(t.find("Over-All") != std::string::npos);
  CHECK(t.find("[6-11]") != std::string::npos);
  CHECK(t.find("0.250") != std::string::npos);
}
