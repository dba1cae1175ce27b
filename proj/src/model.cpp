#include "tvs/model.h"

#include <algorithm>

#include "tvs/error.h"
#include "tvs/segments.h"

namespace tvs {

using ad::Mat;
using ad::Tape;
using ad::Var;

std::string to_string(Conditioning c) { return c == Conditioning::prefix ? "prefix" : "cross_attention"; }

Conditioning parse_conditioning(const std::string& s) {
  if (s == "prefix") return Conditioning::prefix;
  if (s == "cross_attention" || s == "cross") return Conditioning::cross_attention;
  throw InvalidArgument("unknown conditioning mode '" + s + "'");
}

void OrdererConfig::validate() const {
  if (input_dim < 1 || code_dim < 1 || model_dim < 1) throw InvalidArgument("model dims must be >= 1");
  if (depth < 0) throw InvalidArgument("depth must be >= 0");
  if (heads < 1 || model_dim % heads != 0) throw InvalidArgument("model_dim must be divisible by heads");
  if (max_len < 4) throw InvalidArgument("max_len must be >= 4");
  if (!(tau_init > 0.0) || !(tau_min > 0.0) || tau_max < tau_min) throw InvalidArgument("temperature must be > 0");
}

ad::Mask build_prefix_mask(int n_text, int m_frames) {
  if (n_text < 1) throw InvalidArgument("prefix mask needs at least one text position");
  if (m_frames < 0) throw InvalidArgument("frame count must be >= 0");
  const int n = n_text + m_frames;
  ad::Mask mask = ad::Mask::Constant(n, n, false);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n_text; ++j) mask(i, j) = true;
    if (i >= n_text) {
      for (int j = n_text; j <= i; ++j) mask(i, j) = true;
    }
  }
  return mask;
}

ad::Mask build_causal_mask(int m) {
  ad::Mask mask = ad::Mask::Constant(m, m, false);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j <= i; ++j) mask(i, j) = true;
  return mask;
}

Mat text_sequence(const EmbeddingTable& texts, const std::string& text_id, int max_tokens) {
  std::vector<Eigen::VectorXd> rows{texts.vector(text_id)};
  for (int t = 0;; ++t) {
    const auto key = token_key(text_id, static_cast<std::size_t>(t));
    if (!texts.contains(key)) break;
    if (t >= max_tokens) {
      throw InvalidArgument("text '" + text_id + "' has more than " + std::to_string(max_tokens) + " tokens");
    }
    rows.push_back(texts.vector(key));
  }
  rows.push_back(rows.front());
  Mat out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(texts.dim()));
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
  return out;
}

Mat frame_matrix(const EmbeddingTable& frames, const std::vector<std::string>& ids) {
  Mat out(static_cast<Eigen::Index>(ids.size()), static_cast<Eigen::Index>(frames.dim()));
  for (std::size_t r = 0; r < ids.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = frames.vector(ids[r]).transpose();
  return out;
}

OrdererModel::OrdererModel(OrdererConfig config, std::uint64_t seed) : config_(config) {
  config_.validate();
  std::mt19937_64 rng(seed);
  const int d = config_.model_dim;
  const int f = config_.resolved_ffn_dim();
  auto linear = [&](const std::string& name, int in, int out) {
    params_.add(name + ".w", ad::xavier(in, out, rng), true);
    params_.add(name + ".b", Mat::Zero(1, out), false);
  };
  auto norm = [&](const std::string& name) {
    params_.add(name + ".g", Mat::Ones(1, d), false);
    params_.add(name + ".b", Mat::Zero(1, d), false);
  };
  linear("frame_encoder", config_.input_dim, config_.code_dim);
  linear("text_in", config_.input_dim, d);
  linear("frame_in", config_.code_dim, d);
  params_.add("sos", ad::gaussian(1, d, 0.02, rng), false);
  params_.add("pos", ad::gaussian(config_.max_len, d, 0.02, rng), false);
  {
    Mat eos = ad::gaussian(1, config_.code_dim, 1.0, rng);
    eos /= eos.norm();
    params_.add("eos", eos, false);
  }
  params_.add("tau", Mat::Constant(1, 1, config_.tau_init), false);
  for (int l = 0; l < config_.depth; ++l) {
    const auto p = "layer" + std::to_string(l) + ".";
    norm(p + "ln1");
    params_.add(p + "wq", ad::xavier(d, d, rng), true);
    params_.add(p + "wk", ad::xavier(d, d, rng), true);
    params_.add(p + "wv", ad::xavier(d, d, rng), true);
    linear(p + "wo", d, d);
    if (config_.conditioning == Conditioning::cross_attention) {
      norm(p + "lnc");
      params_.add(p + "cq", ad::xavier(d, d, rng), true);
      params_.add(p + "ck", ad::xavier(d, d, rng), true);
      params_.add(p + "cv", ad::xavier(d, d, rng), true);
      linear(p + "co", d, d);
    }
    norm(p + "ln2");
    linear(p + "ff1", d, f);
    linear(p + "ff2", f, d);
  }
  norm("ln_f");
  linear("out", d, config_.code_dim);
}

double OrdererModel::tau() const { return params_.get("tau").value(0, 0); }

void OrdererModel::clamp_tau() {
  auto& t = params_.get("tau").value(0, 0);
  t = std::clamp(t, config_.tau_min, config_.tau_max);
}

Eigen::VectorXd OrdererModel::eos() const {
  Eigen::VectorXd e = params_.get("eos").value.row(0).transpose();
  return e / e.norm();
}

void OrdererModel::renormalize_eos() {
  auto& e = params_.get("eos").value;
  const double n = e.norm();
  if (n > 0.0) e /= n;
}

Var OrdererModel::linear(Tape& tape, Var x, const std::string& prefix) const {
  return tape.add_row(tape.matmul(x, tape.param(params_.get(prefix + ".w"))), tape.param(params_.get(prefix + ".b")));
}

Var OrdererModel::block(Tape& tape, Var x, int layer, const ad::Mask& mask, Var memory) const {
  const auto p = "layer" + std::to_string(layer) + ".";
  auto ln = [&](Var v, const std::string& name) {
    return tape.layer_norm(v, tape.param(params_.get(p + name + ".g")), tape.param(params_.get(p + name + ".b")));
  };
  auto w = [&](const std::string& name) { return tape.param(params_.get(p + name)); };

  Var h = ln(x, "ln1");
  Var att = tape.attention(tape.matmul(h, w("wq")), tape.matmul(h, w("wk")), tape.matmul(h, w("wv")), mask,
                           config_.heads);
  x = tape.add(x, linear(tape, att, p + "wo"));

  if (config_.conditioning == Conditioning::cross_attention) {
    Var hc = ln(x, "lnc");
    const auto rows = tape.value(hc).rows();
    const auto cols = tape.value(memory).rows();
    Var catt = tape.attention(tape.matmul(hc, w("cq")), tape.matmul(memory, w("ck")), tape.matmul(memory, w("cv")),
                              ad::Mask::Constant(rows, cols, true), config_.heads);
    x = tape.add(x, linear(tape, catt, p + "co"));
  }

  Var h2 = ln(x, "ln2");
  Var ff = linear(tape, tape.gelu(linear(tape, h2, p + "ff1")), p + "ff2");
  return tape.add(x, ff);
}

Var OrdererModel::encode_frames(Tape& tape, const Mat& raw) const {
  if (raw.cols() != config_.input_dim) throw InvalidArgument("frame features do not match input_dim");
  return tape.normalize_rows(linear(tape, tape.constant(raw), "frame_encoder"));
}

Var OrdererModel::decode(Tape& tape, const Mat& text, Var history) const {
  if (text.cols() != config_.input_dim) throw InvalidArgument("text features do not match input_dim");
  const auto n_text = text.rows();
  const auto m = tape.value(history).rows();
  if (n_text < 1) throw InvalidArgument("text prefix is empty");
  const bool prefix = config_.conditioning == Conditioning::prefix;
  const auto total = prefix ? n_text + m + 1 : std::max<Eigen::Index>(n_text, m + 1);
  if (total > config_.max_len) {
    throw InvalidArgument("sequence of " + std::to_string(n_text) + " text and " + std::to_string(m + 1) +
                          " frame positions exceeds max_len " + std::to_string(config_.max_len));
  }
  Var text_tokens = linear(tape, tape.constant(text), "text_in");
  Var frame_tokens = tape.param(params_.get("sos"));
  if (m > 0) frame_tokens = tape.vstack({frame_tokens, linear(tape, history, "frame_in")});
  Var pos = tape.param(params_.get("pos"));

  Var x;
  Var memory;
  ad::Mask mask;
  if (prefix) {
    x = tape.add(tape.vstack({text_tokens, frame_tokens}), tape.rows(pos, 0, n_text + m + 1));
    mask = build_prefix_mask(static_cast<int>(n_text), static_cast<int>(m + 1));
  } else {
    memory = tape.add(text_tokens, tape.rows(pos, 0, n_text));
    x = tape.add(frame_tokens, tape.rows(pos, 0, m + 1));
    mask = build_causal_mask(static_cast<int>(m + 1));
  }
  for (int l = 0; l < config_.depth; ++l) x = block(tape, x, l, mask, memory);
  if (config_.depth > 0) {
    x = tape.layer_norm(x, tape.param(params_.get("ln_f.g")), tape.param(params_.get("ln_f.b")));
  }
  if (prefix) x = tape.rows(x, n_text, m + 1);
  return tape.normalize_rows(linear(tape, x, "out"));
}

Mat OrdererModel::encode(const Mat& raw) const {
  Tape tape;
  return tape.value(encode_frames(tape, raw));
}

Mat OrdererModel::decode(const Mat& text, const Mat& history) const {
  Tape tape;
  return tape.value(decode(tape, text, tape.constant(history)));
}

Eigen::VectorXd OrdererModel::predict_next(const Mat& text, const Mat& history) const {
  const Mat out = decode(text, history);
  return out.row(out.rows() - 1).transpose();
}

RetrievalHead::RetrievalHead(RetrievalHeadConfig config, std::uint64_t seed) : config_(config) {
  if (config_.input_dim < 1 || config_.shared_dim < 1) throw InvalidArgument("retrieval head dims must be >= 1");
  std::mt19937_64 rng(seed);
  auto init = [&](const std::string& name) {
    Mat w = config_.input_dim == config_.shared_dim ? Mat(Mat::Identity(config_.input_dim, config_.shared_dim))
                                                    : ad::xavier(config_.input_dim, config_.shared_dim, rng);
    params_.add(name + ".w", w, true);
    params_.add(name + ".b", Mat::Zero(1, config_.shared_dim), false);
  };
  init("text_proj");
  init("frame_proj");
  params_.add("tau", Mat::Constant(1, 1, config_.tau_init), false);
}

double RetrievalHead::tau() const { return params_.get("tau").value(0, 0); }

void RetrievalHead::clamp_tau() {
  auto& t = params_.get("tau").value(0, 0);
  t = std::clamp(t, config_.tau_min, config_.tau_max);
}

Var RetrievalHead::project_text(Tape& tape, const Mat& rows) const {
  Var y = tape.add_row(tape.matmul(tape.constant(rows), tape.param(params_.get("text_proj.w"))),
                       tape.param(params_.get("text_proj.b")));
  return tape.normalize_rows(y);
}

Var RetrievalHead::project_frames(Tape& tape, const Mat& rows) const {
  Var y = tape.add_row(tape.matmul(tape.constant(rows), tape.param(params_.get("frame_proj.w"))),
                       tape.param(params_.get("frame_proj.b")));
  return tape.normalize_rows(y);
}

Eigen::VectorXd RetrievalHead::project_text(const Eigen::VectorXd& v) const {
  Tape tape;
  return tape.value(project_text(tape, Mat(v.transpose()))).row(0).transpose();
}

Eigen::VectorXd RetrievalHead::project_frame(const Eigen::VectorXd& v) const {
  Tape tape;
  return tape.value(project_frames(tape, Mat(v.transpose()))).row(0).transpose();
}

}  // namespace tvs
