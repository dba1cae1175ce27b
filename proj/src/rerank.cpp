#include "tvs/rerank.h"

#include <cmath>
#include <memory>

#include "tvs/error.h"
#include "tvs/model.h"
#include "tvs/parallel.h"

namespace tvs {

using ad::Mat;
using ad::Tape;
using ad::Var;

void RerankConfig::validate() const {
  if (input_dim < 1 || model_dim < 1) throw InvalidArgument("rerank dims must be >= 1");
  if (depth < 1) throw InvalidArgument("rerank depth must be >= 1");
  if (heads < 1 || model_dim % heads != 0) throw InvalidArgument("rerank model_dim must be divisible by heads");
  if (max_len < 2) throw InvalidArgument("rerank max_len must be >= 2");
}

RerankModel::RerankModel(RerankConfig config, std::uint64_t seed) : config_(config) {
  config_.validate();
  std::mt19937_64 rng(seed);
  const int d = config_.model_dim;
  auto linear = [&](const std::string& name, int in, int out) {
    params_.add(name + ".w", ad::xavier(in, out, rng), true);
    params_.add(name + ".b", Mat::Zero(1, out), false);
  };
  auto norm = [&](const std::string& name) {
    params_.add(name + ".g", Mat::Ones(1, d), false);
    params_.add(name + ".b", Mat::Zero(1, d), false);
  };
  linear("text_in", config_.input_dim, d);
  linear("frame_in", config_.input_dim, d);
  params_.add("type", ad::gaussian(2, d, 0.02, rng), false);
  params_.add("pos", ad::gaussian(config_.max_len, d, 0.02, rng), false);
  for (int l = 0; l < config_.depth; ++l) {
    const auto p = "layer" + std::to_string(l) + ".";
    norm(p + "ln1");
    params_.add(p + "wq", ad::xavier(d, d, rng), true);
    params_.add(p + "wk", ad::xavier(d, d, rng), true);
    params_.add(p + "wv", ad::xavier(d, d, rng), true);
    linear(p + "wo", d, d);
    norm(p + "ln2");
    linear(p + "ff1", d, 4 * d);
    linear(p + "ff2", 4 * d, d);
  }
  norm("ln_f");
  params_.add("slot", ad::gaussian(config_.max_len, d, 0.02, rng), false);
  linear("slot_q", d, d);
  linear("slot_k", d, d);
}

Var RerankModel::linear(Tape& tape, Var x, const std::string& prefix) const {
  return tape.add_row(tape.matmul(x, tape.param(params_.get(prefix + ".w"))), tape.param(params_.get(prefix + ".b")));
}

Var RerankModel::logits(Tape& tape, const Mat& text, const Mat& frames) const {
  const auto n = text.rows();
  const auto m = frames.rows();
  if (m < 1) throw InvalidArgument("rerank needs at least one frame");
  if (n > config_.max_len || m > config_.max_len) throw InvalidArgument("rerank input exceeds max_len");
  Var type = tape.param(params_.get("type"));
  Var t = tape.add(linear(tape, tape.constant(text), "text_in"), tape.rows(tape.param(params_.get("pos")), 0, n));
  t = tape.add_row(t, tape.rows(type, 0, 1));
  Var f = tape.add_row(linear(tape, tape.constant(frames), "frame_in"), tape.rows(type, 1, 1));
  Var x = tape.vstack({t, f});
  const ad::Mask full = ad::Mask::Constant(n + m, n + m, true);
  for (int l = 0; l < config_.depth; ++l) {
    const auto p = "layer" + std::to_string(l) + ".";
    auto ln = [&](Var v, const std::string& name) {
      return tape.layer_norm(v, tape.param(params_.get(p + name + ".g")), tape.param(params_.get(p + name + ".b")));
    };
    auto w = [&](const std::string& name) { return tape.param(params_.get(p + name)); };
    Var h = ln(x, "ln1");
    Var att = tape.attention(tape.matmul(h, w("wq")), tape.matmul(h, w("wk")), tape.matmul(h, w("wv")), full,
                             config_.heads);
    x = tape.add(x, linear(tape, att, p + "wo"));
    Var h2 = ln(x, "ln2");
    x = tape.add(x, linear(tape, tape.gelu(linear(tape, h2, p + "ff1")), p + "ff2"));
  }
  x = tape.layer_norm(x, tape.param(params_.get("ln_f.g")), tape.param(params_.get("ln_f.b")));
  Var hf = tape.rows(x, n, m);
  Var q = linear(tape, tape.rows(tape.param(params_.get("slot")), 0, m), "slot_q");
  Var k = linear(tape, hf, "slot_k");
  return tape.scale(tape.matmul_t(q, k), 1.0 / std::sqrt(static_cast<double>(config_.model_dim)));
}

Mat RerankModel::logits(const Mat& text, const Mat& frames) const {
  Tape tape;
  return tape.value(logits(tape, text, frames));
}

namespace {

Mat row_softmax(const Mat& z) {
  Mat p = z;
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    p.row(r).array() -= p.row(r).maxCoeff();
    p.row(r) = p.row(r).array().exp();
    p.row(r) /= p.row(r).sum();
  }
  return p;
}

}  // namespace

double rerank_loss(const RerankModel& model, const std::vector<const PreparedExample*>& batch, ad::GradBuffer* grads) {
  const std::size_t n = batch.size();
  double slots = 0.0;
  for (const auto* ex : batch) slots += static_cast<double>(ex->frames.rows());
  std::vector<double> losses(n, 0.0);
  std::vector<std::unique_ptr<ad::GradBuffer>> local(n);
  parallel_for(n, 1, [&](std::size_t b) {
    if (grads != nullptr) local[b] = std::make_unique<ad::GradBuffer>(model.params());
    Tape tape(local[b].get());
    Var z = model.logits(tape, batch[b]->text, batch[b]->frames);
    const Mat p = row_softmax(tape.value(z));
    Mat g = p;
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      losses[b] -= std::log(std::max(p(i, i), 1e-300));
      g(i, i) -= 1.0;
    }
    if (grads != nullptr) {
      tape.seed(z, g / slots);
      tape.backward();
    }
  });
  double total = 0.0;
  for (std::size_t b = 0; b < n; ++b) {
    total += losses[b];
    if (grads != nullptr) grads->add(*local[b]);
  }
  return total / slots;
}

RerankTrainResult train_rerank(RerankModel& model, const std::vector<PreparedExample>& train, const TrainConfig& config,
                               const ProgressFn& progress) {
  config.validate();
  if (train.size() < 2) throw InvalidArgument("training needs at least two examples");
  RerankTrainResult result;
  AdamW opt;
  BatchSampler sampler(train.size(), config.seed);
  ad::GradBuffer grads(model.params());
  std::vector<Mat*> values;
  std::vector<const Mat*> grad_ptrs;
  std::vector<bool> decay;
  for (auto& p : model.params()) {
    values.push_back(&p.value);
    decay.push_back(p.decay);
  }
  for (const auto& g : grads.grads) grad_ptrs.push_back(&g);
  for (long step = 0; step < config.total_steps; ++step) {
    std::vector<const PreparedExample*> batch;
    for (auto i : sampler.next(static_cast<std::size_t>(config.batch_size))) batch.push_back(&train[i]);
    grads.zero();
    BatchLoss loss;
    loss.total = loss.trans = rerank_loss(model, batch, &grads);
    if (!std::isfinite(loss.total)) throw DivergenceError("non-finite rerank loss at step " + std::to_string(step), step);
    clip_gradients(grads, nullptr, config.max_grad_norm);
    opt.step(values, grad_ptrs, decay, learning_rate_at(config, step), config.weight_decay);
    result.loss_curve.push_back(loss.total);
    if (progress) progress(step, loss);
  }
  return result;
}

OrderingResult order_rerank(const RerankModel& model, const std::string& text_id,
                            const std::vector<std::string>& candidates, const EmbeddingTable& texts,
                            const EmbeddingTable& frames, int max_tokens) {
  OrderingResult result;
  if (candidates.empty()) throw InvalidArgument("order_rerank needs at least one candidate");
  const Mat p = row_softmax(model.logits(text_sequence(texts, text_id, max_tokens), frame_matrix(frames, candidates)));
  const auto m = p.rows();
  std::vector<bool> slot_used(static_cast<std::size_t>(m), false), frame_used(static_cast<std::size_t>(m), false);
  std::vector<Eigen::Index> slot_frame(static_cast<std::size_t>(m), -1);
  std::vector<double> slot_score(static_cast<std::size_t>(m), 0.0);
  for (Eigen::Index step = 0; step < m; ++step) {
    Eigen::Index bs = -1, bf = -1;
    double best = -1.0;
    for (Eigen::Index s = 0; s < m; ++s) {
      if (slot_used[static_cast<std::size_t>(s)]) continue;
      for (Eigen::Index f = 0; f < m; ++f) {
        if (frame_used[static_cast<std::size_t>(f)]) continue;
        // Ties: lower slot, then lower candidate id.
        if (p(s, f) > best || (p(s, f) == best && s == bs &&
                               candidates[static_cast<std::size_t>(f)] < candidates[static_cast<std::size_t>(bf)])) {
          best = p(s, f);
          bs = s;
          bf = f;
        }
      }
    }
    slot_used[static_cast<std::size_t>(bs)] = true;
    frame_used[static_cast<std::size_t>(bf)] = true;
    slot_frame[static_cast<std::size_t>(bs)] = bf;
    slot_score[static_cast<std::size_t>(bs)] = best;
  }
  for (Eigen::Index s = 0; s < m; ++s) {
    result.ordered_ids.push_back(candidates[static_cast<std::size_t>(slot_frame[static_cast<std::size_t>(s)])]);
    result.scores.push_back(slot_score[static_cast<std::size_t>(s)]);
  }
  return result;
}

}  // namespace tvs
