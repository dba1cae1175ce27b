#pragma once

#include <string>
#include <vector>

namespace tvs {

struct OrderingResult {
  std::vector<std::string> ordered_ids;
  bool stopped_by_eos = false;
  std::vector<double> scores;  // similarity of the chosen candidate per step
};

// JSON Lines record: example_id, ordered_ids, stopped_by_eos.
std::string prediction_to_json_line(const std::string& example_id, const OrderingResult& r);

}  // namespace tvs
