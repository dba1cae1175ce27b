#pragma once

#include <string>
#include <vector>

#include "tvs/train.h"

namespace tvs {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t entries_checked = 0;
};

// Compares the analytic gradient of the total loss against central finite
// differences for every model parameter and every codebook entry. The
// quantization decisions are frozen at the base point so the straight-through
// path is checked as the identity it claims to be. Relative error is
// |a - n| / max(|a|, |n|, floor).
GradCheckResult grad_check(OrdererModel& model, Codebook* codebook, const std::vector<PreparedExample>& probe,
                           const TrainConfig& config, double epsilon, double floor = 1e-6);

}  // namespace tvs
