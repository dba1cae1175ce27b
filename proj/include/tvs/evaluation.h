#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tvs/dataset.h"

namespace tvs {

// 1 - 2 * inversions / (m (m - 1) / 2) between two orderings of one id set.
double kendall_tau(const std::vector<std::string>& predicted, const std::vector<std::string>& reference);

// Best tau over the ground-truth variants.
double tau_best(const std::vector<std::string>& predicted, const std::vector<std::vector<std::string>>& variants);

struct RetrieveOrderScore {
  double r_at_k = 0.0;
  double tau_at_k = 0.0;
  double product = 0.0;
  std::size_t retrieved = 0;
};

// Scores a K-long ranked prediction against a storyboard. tau@K is computed on
// the retrieved ground-truth frames only; with fewer than two of them it is
// defined as 1.0.
RetrieveOrderScore retrieve_and_order_score(const std::vector<std::string>& predicted_topk,
                                            const StoryboardExample& gt, std::size_t k);

double recall_at_k(const std::vector<std::string>& ranked_ids, const std::vector<std::string>& gt_ids, int k);

// Ground-truth frames plus seeded random negatives drawn from `all_frames`
// (excluding the example's own frames), shuffled.
std::vector<std::string> build_candidate_pool(const StoryboardExample& example,
                                              const std::vector<std::string>& all_frames, std::size_t pool_size,
                                              std::uint64_t seed);

struct ExampleResult {
  std::string example_id;
  std::size_t length = 0;
  std::optional<double> tau;
  std::map<int, RetrieveOrderScore> at_k;
};

struct BucketMean {
  double mean = 0.0;
  std::size_t count = 0;
};

struct KAggregate {
  double r_at_k = 0.0;
  double tau_at_k = 0.0;
  double product = 0.0;
  BucketMean product_short;
  BucketMean product_long;
};

struct EvalReport {
  std::string method;
  std::string protocol;
  std::vector<ExampleResult> per_example;
  BucketMean overall;
  BucketMean short_bucket;  // lengths 3-5
  BucketMean long_bucket;   // lengths 6-11
  std::map<int, KAggregate> at_k;
  std::map<std::string, std::string> notes;
};

inline constexpr std::size_t kShortBucketMin = 3, kShortBucketMax = 5;
inline constexpr std::size_t kLongBucketMin = 6, kLongBucketMax = 11;

// Aggregates tau into overall and length buckets, and per-K retrieval means.
// Lengths outside both buckets count towards overall only.
EvalReport bucket_report(std::vector<ExampleResult> per_example, std::string method = {},
                         std::string protocol = {});

std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);

// Aligned plain-text table: one row per report.
std::string ordering_table(const std::vector<EvalReport>& reports);
std::string retrieval_table(const std::vector<EvalReport>& reports);

}  // namespace tvs
