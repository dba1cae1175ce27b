#include "tvs/train.h"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <random>

#include "tvs/error.h"
#include "tvs/losses.h"
#include "tvs/parallel.h"

namespace tvs {

using ad::Mat;
using ad::Tape;
using ad::Var;

std::string to_string(NegativePolicy p) {
  return p == NegativePolicy::all_in_batch ? "all_in_batch" : "other_sequences";
}

NegativePolicy parse_negative_policy(const std::string& s) {
  if (s == "all_in_batch") return NegativePolicy::all_in_batch;
  if (s == "other_sequences") return NegativePolicy::other_sequences;
  throw InvalidArgument("unknown negatives policy '" + s + "'");
}

void TrainConfig::validate() const {
  if (batch_size < 2) throw InvalidArgument("batch_size must be >= 2 for in-batch negatives");
  if (lambda_vq < 0.0) throw InvalidArgument("lambda_vq must be >= 0");
  if (learning_rate < 0.0) throw InvalidArgument("learning_rate must be >= 0");
  if (weight_decay < 0.0) throw InvalidArgument("weight_decay must be >= 0");
  if (warmup_fraction < 0.0 || warmup_fraction > 1.0) throw InvalidArgument("warmup_fraction must be in [0,1]");
  if (total_steps < 0) throw InvalidArgument("total_steps must be >= 0");
}

double learning_rate_at(const TrainConfig& c, long step) {
  if (c.total_steps <= 0) return c.learning_rate;
  const double total = static_cast<double>(c.total_steps);
  const double warm = std::floor(c.warmup_fraction * total);
  const double s = static_cast<double>(step);
  if (warm > 0.0 && s < warm) return c.learning_rate * (s + 1.0) / warm;
  const double rest = total - warm;
  if (rest <= 0.0) return c.learning_rate;
  return c.learning_rate * std::max(0.0, (total - s) / rest);
}

void AdamW::step(const std::vector<Mat*>& values, const std::vector<const Mat*>& grads, const std::vector<bool>& decay,
                 double lr, double weight_decay) {
  if (values.size() != grads.size() || values.size() != decay.size()) throw InvalidArgument("AdamW: size mismatch");
  if (m_.empty()) {
    for (const auto* v : values) {
      m_.push_back(Mat::Zero(v->rows(), v->cols()));
      v_.push_back(Mat::Zero(v->rows(), v->cols()));
    }
  }
  if (m_.size() != values.size()) throw InvalidArgument("AdamW: parameter list changed between steps");
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < values.size(); ++i) {
    Mat& p = *values[i];
    const Mat& g = *grads[i];
    m_[i] = b1_ * m_[i] + (1.0 - b1_) * g;
    v_[i] = b2_ * v_[i] + (1.0 - b2_) * g.cwiseProduct(g);
    if (decay[i] && weight_decay > 0.0) p *= (1.0 - lr * weight_decay);
    p.array() -= lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
  }
}

std::vector<PreparedExample> prepare_examples(const std::vector<StoryboardExample>& examples,
                                              const EmbeddingTable& texts, const EmbeddingTable& frames,
                                              int max_tokens) {
  std::vector<PreparedExample> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) {
    PreparedExample p;
    p.example_id = ex.example_id;
    p.text = text_sequence(texts, ex.text_id, max_tokens);
    p.frames = frame_matrix(frames, ex.frame_ids);
    p.frame_ids = ex.frame_ids;
    for (const auto& f : ex.frame_ids) p.frame_keys.push_back(static_cast<int>(frames.index_of(f)));
    out.push_back(std::move(p));
  }
  return out;
}

BatchLoss batch_loss(const OrdererModel& model, const Codebook* codebook, const std::vector<const PreparedExample*>& batch,
                     const TrainConfig& config, ad::GradBuffer* grads, std::vector<Mat>* code_grads,
                     const FrozenQuantization* frozen) {
  const bool use_vq = model.config().use_vq && codebook != nullptr;
  if (model.config().use_vq && codebook == nullptr) throw InvalidArgument("model expects a codebook");
  if (frozen != nullptr && use_vq && codebook->variant() != VqVariant::vanilla) {
    throw InvalidArgument("frozen quantization is only supported for vanilla codebooks");
  }
  const std::size_t n = batch.size();
  const double beta = use_vq ? codebook->config().beta : 0.0;
  const double lambda = config.lambda_vq;

  std::vector<std::unique_ptr<ad::GradBuffer>> local(n);
  std::vector<std::unique_ptr<Tape>> tapes(n);
  std::vector<Var> fvar(n), qvar(n), pvar(n);
  BatchLoss out;
  out.quantized.resize(n);
  out.features.resize(n);
  std::vector<Mat> codes(n);

  parallel_for(n, config.workers, [&](std::size_t b) {
    if (grads != nullptr) local[b] = std::make_unique<ad::GradBuffer>(model.params());
    tapes[b] = std::make_unique<Tape>(local[b].get());
    Tape& tape = *tapes[b];
    const auto& ex = *batch[b];
    fvar[b] = model.encode_frames(tape, ex.frames);
    const Mat& f = tape.value(fvar[b]);
    out.features[b] = f;
    if (use_vq) {
      Mat code(f.rows(), f.cols());
      if (frozen != nullptr) {
        out.quantized[b] = frozen->results[b];
        code = f + (frozen->codes[b] - frozen->features[b]);
        codes[b] = frozen->codes[b];
      } else {
        for (Eigen::Index r = 0; r < f.rows(); ++r) {
          out.quantized[b].push_back(codebook->quantize(f.row(r).transpose()));
          code.row(r) = out.quantized[b].back().code.transpose();
        }
        codes[b] = code;
      }
      qvar[b] = tape.straight_through(fvar[b], code);
    } else {
      qvar[b] = fvar[b];
    }
    pvar[b] = model.decode(tape, ex.text, qvar[b]);
  });

  // Contrastive bank: every sequence's frame targets plus one shared EOS row.
  const auto code_dim = model.config().code_dim;
  Eigen::Index bank_rows = 1, pred_rows = 0;
  for (std::size_t b = 0; b < n; ++b) {
    bank_rows += tapes[b]->value(qvar[b]).rows();
    pred_rows += tapes[b]->value(pvar[b]).rows();
  }
  NceBank bank;
  bank.bank.resize(bank_rows, code_dim);
  bank.predictions.resize(pred_rows, code_dim);
  const Eigen::Index eos_row = bank_rows - 1;
  bank.bank.row(eos_row) = model.eos().transpose();
  bank.bank_key.assign(static_cast<std::size_t>(bank_rows), -1);
  bank.bank_group.assign(static_cast<std::size_t>(bank_rows), -1);
  bank.exclude_same_group = config.negatives == NegativePolicy::other_sequences;
  std::vector<Eigen::Index> bank_offset(n), pred_offset(n);
  {
    Eigen::Index at_bank = 0, at_pred = 0;
    for (std::size_t b = 0; b < n; ++b) {
      const Mat& q = tapes[b]->value(qvar[b]);
      const Mat& p = tapes[b]->value(pvar[b]);
      bank_offset[b] = at_bank;
      pred_offset[b] = at_pred;
      bank.bank.middleRows(at_bank, q.rows()) = q;
      bank.predictions.middleRows(at_pred, p.rows()) = p;
      for (Eigen::Index r = 0; r < q.rows(); ++r) {
        bank.bank_key[static_cast<std::size_t>(at_bank + r)] = batch[b]->frame_keys[static_cast<std::size_t>(r)];
        bank.bank_group[static_cast<std::size_t>(at_bank + r)] = static_cast<int>(b);
      }
      for (Eigen::Index r = 0; r < p.rows(); ++r) {
        bank.positive.push_back(static_cast<int>(r < q.rows() ? at_bank + r : eos_row));
        bank.prediction_group.push_back(static_cast<int>(b));
      }
      at_bank += q.rows();
      at_pred += p.rows();
    }
  }
  const NceResult nce = nce_bank_loss(bank, model.tau());
  out.trans = nce.loss;

  // Vector-quantization loss, averaged over every frame in the batch so that
  // its scale matches the per-prediction mean of the contrastive term.
  std::vector<Mat> commit_grad(n);
  if (use_vq) {
    double frame_count = 0.0;
    for (std::size_t b = 0; b < n; ++b) frame_count += static_cast<double>(out.features[b].rows());
    const double w = 1.0 / frame_count;
    for (std::size_t b = 0; b < n; ++b) {
      const Mat& f = out.features[b];
      commit_grad[b] = Mat::Zero(f.rows(), f.cols());
      for (Eigen::Index r = 0; r < f.rows(); ++r) {
        const auto& q = out.quantized[b][static_cast<std::size_t>(r)];
        const Eigen::VectorXd c0 = codes[b].row(r).transpose();
        const Eigen::VectorXd fr = f.row(r).transpose();
        Eigen::VectorXd f0 = fr;
        Eigen::VectorXd c = c0;
        if (frozen != nullptr) {
          f0 = frozen->features[b].row(r).transpose();
          c = codebook->books()[0].row(q.index[0]).transpose();
        }
        out.vq += w * ((f0 - c).squaredNorm() + beta * (fr - c0).squaredNorm());
        commit_grad[b].row(r) = (w * lambda * 2.0 * beta * (fr - c0)).transpose();
        if (code_grads != nullptr) {
          for (const auto& part : q.parts) {
            const auto& book = codebook->books()[static_cast<std::size_t>(part.book)];
            const Eigen::VectorXd entry = book.row(part.row).transpose();
            const Eigen::VectorXd target = frozen != nullptr ? f0 : part.target;
            (*code_grads)[static_cast<std::size_t>(part.book)].row(part.row) +=
                (w * lambda * 2.0 * part.weight * (entry - target)).transpose();
          }
        }
      }
    }
  }
  out.total = total_loss(out.trans, out.vq, lambda);

  if (grads == nullptr) return out;

  parallel_for(n, config.workers, [&](std::size_t b) {
    Tape& tape = *tapes[b];
    const auto q_rows = tape.value(qvar[b]).rows();
    const auto p_rows = tape.value(pvar[b]).rows();
    tape.seed(pvar[b], nce.grad_predictions.middleRows(pred_offset[b], p_rows));
    tape.seed(qvar[b], nce.grad_bank.middleRows(bank_offset[b], q_rows));
    if (use_vq) tape.seed(fvar[b], commit_grad[b]);
    tape.backward();
  });
  for (std::size_t b = 0; b < n; ++b) grads->add(*local[b]);

  {
    const auto& eos_param = model.params().get("eos");
    const Eigen::VectorXd raw = eos_param.value.row(0).transpose();
    const double norm = raw.norm();
    const Eigen::VectorXd e = raw / norm;
    const Eigen::VectorXd de = nce.grad_bank.row(eos_row).transpose();
    (*grads)[eos_param.index] += ((de - e * e.dot(de)) / norm).transpose();
  }
  (*grads)[model.params().get("tau").index](0, 0) += nce.grad_tau;
  return out;
}

double clip_gradients(ad::GradBuffer& grads, std::vector<Mat>* code_grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads.grads) sq += g.squaredNorm();
  if (code_grads != nullptr)
    for (const auto& g : *code_grads) sq += g.squaredNorm();
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    grads.scale(s);
    if (code_grads != nullptr)
      for (auto& g : *code_grads) g *= s;
  }
  return norm;
}

TrainResult train_orderer(OrdererModel& model, Codebook* codebook, const std::vector<PreparedExample>& train,
                          const TrainConfig& config, const ProgressFn& progress) {
  config.validate();
  if (train.size() < 2) throw InvalidArgument("training needs at least two examples");
  const bool use_vq = model.config().use_vq;
  if (use_vq && codebook == nullptr) throw InvalidArgument("model expects a codebook");
  if (use_vq && codebook->code_dim() != model.config().code_dim) {
    throw InvalidArgument("codebook code_dim does not match the model");
  }
  TrainResult result;
  AdamW opt;
  BatchSampler sampler(train.size(), config.seed);
  std::mt19937_64 reset_rng(config.seed ^ 0x9E3779B97F4A7C15ULL);
  ad::GradBuffer grads(model.params());
  std::vector<Mat> code_grads;
  std::vector<Mat*> values;
  std::vector<bool> decay;
  for (auto& p : model.params()) {
    values.push_back(&p.value);
    decay.push_back(p.decay);
  }
  if (use_vq) {
    for (auto& b : codebook->books()) {
      values.push_back(&b);
      decay.push_back(false);
      code_grads.push_back(Mat::Zero(b.rows(), b.cols()));
    }
  }
  std::vector<const Mat*> grad_ptrs;
  for (const auto& g : grads.grads) grad_ptrs.push_back(&g);
  for (const auto& g : code_grads) grad_ptrs.push_back(&g);

  std::deque<Eigen::VectorXd> recent;
  constexpr std::size_t kRecent = 1024;

  for (long step = 0; step < config.total_steps; ++step) {
    const auto idx = sampler.next(static_cast<std::size_t>(config.batch_size));
    std::vector<const PreparedExample*> batch;
    for (auto i : idx) batch.push_back(&train[i]);
    grads.zero();
    for (auto& g : code_grads) g.setZero();
    const BatchLoss loss = batch_loss(model, use_vq ? codebook : nullptr, batch, config, &grads,
                                      use_vq ? &code_grads : nullptr);
    if (!std::isfinite(loss.total)) {
      throw DivergenceError("non-finite training loss at step " + std::to_string(step), step);
    }
    clip_gradients(grads, use_vq ? &code_grads : nullptr, config.max_grad_norm);
    opt.step(values, grad_ptrs, decay, learning_rate_at(config, step), config.weight_decay);
    model.renormalize_eos();
    model.clamp_tau();
    if (use_vq) {
      codebook->renormalize();
      for (std::size_t b = 0; b < loss.quantized.size(); ++b) {
        for (std::size_t r = 0; r < loss.quantized[b].size(); ++r) {
          codebook->mark_used(loss.quantized[b][r], step);
          recent.push_back(loss.features[b].row(static_cast<Eigen::Index>(r)).transpose());
          if (recent.size() > kRecent) recent.pop_front();
        }
      }
      if (step > 0 && step % 100 == 0) {
        result.dead_codes_reset +=
            codebook->reset_dead_codes(step, std::vector<Eigen::VectorXd>(recent.begin(), recent.end()), reset_rng);
      }
    }
    result.loss_curve.push_back(loss.total);
    result.trans_curve.push_back(loss.trans);
    result.vq_curve.push_back(loss.vq);
    if (progress) progress(step, loss);
  }
  return result;
}

RetrievalTrainResult train_retrieval_head(RetrievalHead& head, const std::vector<StoryboardExample>& train,
                                          const EmbeddingTable& texts, const EmbeddingTable& frames,
                                          const TrainConfig& config, const ProgressFn& progress) {
  config.validate();
  if (train.size() < 2) throw InvalidArgument("training needs at least two examples");
  RetrievalTrainResult result;
  AdamW opt;
  BatchSampler sampler(train.size(), config.seed);
  std::mt19937_64 pick_rng(config.seed + 1);
  ad::GradBuffer grads(head.params());
  std::vector<Mat*> values;
  std::vector<bool> decay;
  std::vector<const Mat*> grad_ptrs;
  for (auto& p : head.params()) {
    values.push_back(&p.value);
    decay.push_back(p.decay);
    grad_ptrs.push_back(&grads[p.index]);
  }
  // Positive frame per example, re-drawn whenever a new epoch starts.
  std::vector<std::size_t> positive(train.size());
  std::size_t epoch = static_cast<std::size_t>(-1);
  const auto in = static_cast<Eigen::Index>(texts.dim());

  for (long step = 0; step < config.total_steps; ++step) {
    const auto idx = sampler.next(static_cast<std::size_t>(config.batch_size));
    if (sampler.epoch() != epoch) {
      epoch = sampler.epoch();
      for (std::size_t i = 0; i < train.size(); ++i) {
        positive[i] = std::uniform_int_distribution<std::size_t>(0, train[i].frame_ids.size() - 1)(pick_rng);
      }
    }
    Mat t(static_cast<Eigen::Index>(idx.size()), in), f(static_cast<Eigen::Index>(idx.size()), in);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      const auto& ex = train[idx[r]];
      t.row(static_cast<Eigen::Index>(r)) = texts.vector(ex.text_id).transpose();
      f.row(static_cast<Eigen::Index>(r)) = frames.vector(ex.frame_ids[positive[idx[r]]]).transpose();
    }
    grads.zero();
    Tape tape(&grads);
    Var tv = head.project_text(tape, t);
    Var fv = head.project_frames(tape, f);
    const AlignResult loss = align_loss(tape.value(tv), tape.value(fv), head.tau());
    if (!std::isfinite(loss.loss)) {
      throw DivergenceError("non-finite retrieval loss at step " + std::to_string(step), step);
    }
    tape.seed(tv, loss.grad_text);
    tape.seed(fv, loss.grad_image);
    tape.backward();
    grads[head.params().get("tau").index](0, 0) += loss.grad_tau;
    clip_gradients(grads, nullptr, config.max_grad_norm);
    opt.step(values, grad_ptrs, decay, learning_rate_at(config, step), config.weight_decay);
    head.clamp_tau();
    result.loss_curve.push_back(loss.loss);
    if (progress) {
      BatchLoss bl;
      bl.total = bl.trans = loss.loss;
      progress(step, bl);
    }
  }
  return result;
}

}  // namespace tvs
