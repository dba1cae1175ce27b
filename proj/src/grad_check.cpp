#include "tvs/grad_check.h"

#include <cmath>

#include "tvs/error.h"

namespace tvs {

GradCheckResult grad_check(OrdererModel& model, Codebook* codebook, const std::vector<PreparedExample>& probe,
                           const TrainConfig& config, double epsilon, double floor) {
  if (probe.size() < 2) throw InvalidArgument("grad_check needs at least two probe examples");
  std::vector<const PreparedExample*> batch;
  for (const auto& p : probe) batch.push_back(&p);
  const Codebook* book = model.config().use_vq ? codebook : nullptr;

  // Base point: analytic gradients and the quantization decisions to freeze.
  ad::GradBuffer grads(model.params());
  std::vector<ad::Mat> code_grads;
  if (book != nullptr)
    for (const auto& b : book->books()) code_grads.push_back(ad::Mat::Zero(b.rows(), b.cols()));
  const BatchLoss base = batch_loss(model, book, batch, config, &grads, book != nullptr ? &code_grads : nullptr);
  FrozenQuantization frozen;
  frozen.features = base.features;
  frozen.results = base.quantized;
  if (book != nullptr) {
    for (std::size_t b = 0; b < base.quantized.size(); ++b) {
      ad::Mat codes(base.features[b].rows(), base.features[b].cols());
      for (std::size_t r = 0; r < base.quantized[b].size(); ++r) {
        codes.row(static_cast<Eigen::Index>(r)) = base.quantized[b][r].code.transpose();
      }
      frozen.codes.push_back(std::move(codes));
    }
  }

  auto loss_at = [&] { return batch_loss(model, book, batch, config, nullptr, nullptr, &frozen).total; };

  GradCheckResult result;
  auto check = [&](double& slot, double analytic, const std::string& name) {
    const double saved = slot;
    slot = saved + epsilon;
    const double plus = loss_at();
    slot = saved - epsilon;
    const double minus = loss_at();
    slot = saved;
    const double numeric = (plus - minus) / (2.0 * epsilon);
    const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
    ++result.entries_checked;
    if (rel > result.max_relative_error) {
      result.max_relative_error = rel;
      result.worst_parameter = name;
    }
  };

  for (auto& p : model.params()) {
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      check(p.value.data()[i], grads[p.index].data()[i], p.name + "[" + std::to_string(i) + "]");
    }
  }
  if (book != nullptr) {
    for (std::size_t b = 0; b < codebook->books().size(); ++b) {
      auto& m = codebook->books()[b];
      for (Eigen::Index i = 0; i < m.size(); ++i) {
        check(m.data()[i], code_grads[b].data()[i], "codebook" + std::to_string(b) + "[" + std::to_string(i) + "]");
      }
    }
  }
  return result;
}

}  // namespace tvs
