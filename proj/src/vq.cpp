#include "tvs/vq.h"

#include <cmath>
#include <map>

#include "tvs/embedding_table.h"
#include "tvs/error.h"

namespace tvs {

std::string to_string(VqVariant v) {
  switch (v) {
    case VqVariant::vanilla: return "vanilla";
    case VqVariant::multi_stage: return "multi_stage";
    case VqVariant::soft: return "soft";
    case VqVariant::hierarchical: return "hierarchical";
  }
  return "vanilla";
}

VqVariant parse_vq_variant(const std::string& s) {
  if (s == "vanilla") return VqVariant::vanilla;
  if (s == "multi_stage" || s == "ms") return VqVariant::multi_stage;
  if (s == "soft") return VqVariant::soft;
  if (s == "hierarchical" || s == "hi") return VqVariant::hierarchical;
  throw InvalidArgument("unknown vq variant '" + s + "'");
}

void CodebookConfig::validate() const {
  if (size < 1) throw InvalidArgument("codebook size must be >= 1");
  if (code_dim < 1) throw InvalidArgument("code_dim must be >= 1");
  if (beta < 0.0) throw InvalidArgument("beta must be >= 0");
  if (variant == VqVariant::multi_stage && stages < 1) throw InvalidArgument("stages must be >= 1");
  if (variant == VqVariant::soft && !(softness_temp > 0.0)) throw InvalidArgument("softness_temp must be > 0");
  if (variant == VqVariant::hierarchical) {
    if (levels != 2) throw InvalidArgument("hierarchical codebooks support exactly 2 levels");
    if (parents < 0 || parents > size) throw InvalidArgument("parents must be in [0, size]");
  }
}

Codebook::Codebook(CodebookConfig config, std::uint64_t seed) : config_(config) {
  config_.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto random_book = [&](int rows) {
    Eigen::MatrixXd m(rows, config_.code_dim);
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = normal(rng);
    return m;
  };
  switch (config_.variant) {
    case VqVariant::vanilla:
    case VqVariant::soft:
      books_.push_back(random_book(config_.size));
      break;
    case VqVariant::multi_stage:
      for (int s = 0; s < config_.stages; ++s) books_.push_back(random_book(config_.size));
      break;
    case VqVariant::hierarchical:
      books_.push_back(random_book(parents()));
      books_.push_back(random_book(parents() * children_per_parent()));
      break;
  }
  renormalize();
  for (const auto& b : books_) last_used_.emplace_back(static_cast<std::size_t>(b.rows()), 0L);
}

int Codebook::parents() const {
  if (config_.variant != VqVariant::hierarchical) return 1;
  if (config_.parents > 0) return config_.parents;
  return std::max(1, static_cast<int>(std::lround(std::sqrt(static_cast<double>(config_.size)))));
}

int Codebook::children_per_parent() const {
  if (config_.variant != VqVariant::hierarchical) return config_.size;
  return std::max(1, config_.size / parents());
}

void Codebook::renormalize() {
  for (auto& b : books_) {
    for (Eigen::Index r = 0; r < b.rows(); ++r) {
      const double n = b.row(r).norm();
      if (n > 0.0) b.row(r) /= n;
    }
  }
}

int nearest_code(const Eigen::MatrixXd& book, const Eigen::VectorXd& feature, double* similarity) {
  const Eigen::VectorXd sims = book * feature;
  int best = 0;
  for (Eigen::Index r = 1; r < sims.size(); ++r) {
    if (sims[r] > sims[best]) best = static_cast<int>(r);
  }
  if (similarity != nullptr) {
    const double denom = book.row(best).norm() * feature.norm();
    *similarity = denom > 0.0 ? sims[best] / denom : 0.0;
  }
  return best;
}

namespace {

void finish(QuantizeResult& r, const Eigen::VectorXd& feature) {
  const double n = r.code.norm();
  if (n > 0.0) r.code /= n;
  const double fn = feature.norm();
  r.similarity = fn > 0.0 ? r.code.dot(feature) / fn : 0.0;
}

void require(const Codebook& book, VqVariant v, const Eigen::VectorXd& feature) {
  if (book.variant() != v) throw InvalidArgument("codebook variant is " + to_string(book.variant()));
  if (feature.size() != book.code_dim()) throw InvalidArgument("feature dim does not match code_dim");
}

}  // namespace

QuantizeResult quantize_vanilla(const Eigen::VectorXd& feature, const Codebook& book) {
  require(book, VqVariant::vanilla, feature);
  QuantizeResult r;
  const int i = nearest_code(book.books()[0], feature);
  r.index = {i};
  r.code = book.books()[0].row(i).transpose();
  r.parts.push_back({0, i, 1.0, feature});
  finish(r, feature);
  return r;
}

QuantizeResult quantize_multi_stage(const Eigen::VectorXd& feature, const Codebook& book) {
  require(book, VqVariant::multi_stage, feature);
  QuantizeResult r;
  Eigen::VectorXd residual = feature;
  r.code = Eigen::VectorXd::Zero(feature.size());
  for (std::size_t s = 0; s < book.books().size(); ++s) {
    const auto& b = book.books()[s];
    const int i = nearest_code(b, residual);
    const Eigen::VectorXd entry = b.row(i).transpose();
    // Gain-shape step on the unit sphere: subtract the projection onto the
    // chosen direction, which never increases the residual norm.
    const double gain = std::max(0.0, residual.dot(entry));
    const double rn = residual.norm();
    r.parts.push_back({static_cast<int>(s), i, 1.0, rn > 0.0 ? Eigen::VectorXd(residual / rn) : entry});
    r.index.push_back(i);
    r.code += gain * entry;
    residual -= gain * entry;
  }
  if (r.code.norm() == 0.0) r.code = book.books()[0].row(r.index[0]).transpose();
  finish(r, feature);
  return r;
}

QuantizeResult quantize_soft(const Eigen::VectorXd& feature, const Codebook& book) {
  require(book, VqVariant::soft, feature);
  const auto& b = book.books()[0];
  const Eigen::VectorXd sims = b * feature;
  const double t = book.config().softness_temp;
  const double mx = sims.maxCoeff();
  Eigen::VectorXd w = ((sims.array() - mx) / t).exp().matrix();
  w /= w.sum();
  QuantizeResult r;
  r.index = {nearest_code(b, feature)};
  r.weights.assign(w.data(), w.data() + w.size());
  r.code = b.transpose() * w;
  for (Eigen::Index k = 0; k < w.size(); ++k) {
    if (w[k] > 1e-9) r.parts.push_back({0, static_cast<int>(k), w[k], feature});
  }
  if (r.code.norm() < 1e-12) r.code = b.row(r.index[0]).transpose();
  finish(r, feature);
  return r;
}

QuantizeResult quantize_hierarchical(const Eigen::VectorXd& feature, const Codebook& book) {
  require(book, VqVariant::hierarchical, feature);
  const int p = nearest_code(book.books()[0], feature);
  const int per = book.children_per_parent();
  const auto children = book.books()[1].middleRows(static_cast<Eigen::Index>(p) * per, per);
  const int c = nearest_code(children, feature);
  QuantizeResult r;
  r.index = {p, c};
  r.code = children.row(c).transpose();
  r.parts.push_back({0, p, 1.0, feature});
  r.parts.push_back({1, p * per + c, 1.0, feature});
  finish(r, feature);
  return r;
}

QuantizeResult Codebook::quantize(const Eigen::VectorXd& feature) const {
  switch (config_.variant) {
    case VqVariant::vanilla: return quantize_vanilla(feature, *this);
    case VqVariant::multi_stage: return quantize_multi_stage(feature, *this);
    case VqVariant::soft: return quantize_soft(feature, *this);
    case VqVariant::hierarchical: return quantize_hierarchical(feature, *this);
  }
  return quantize_vanilla(feature, *this);
}

void Codebook::mark_used(const QuantizeResult& r, long step) {
  if (last_used_.size() != books_.size()) {
    last_used_.clear();
    for (const auto& b : books_) last_used_.emplace_back(static_cast<std::size_t>(b.rows()), step);
  }
  for (const auto& part : r.parts) {
    if (config_.variant == VqVariant::soft && part.row != r.index[0]) continue;
    last_used_[static_cast<std::size_t>(part.book)][static_cast<std::size_t>(part.row)] = step;
  }
}

int Codebook::reset_dead_codes(long step, const std::vector<Eigen::VectorXd>& recent, std::mt19937_64& rng) {
  if (config_.dead_code_steps <= 0 || recent.empty()) return 0;
  if (last_used_.size() != books_.size()) {
    last_used_.clear();
    for (const auto& b : books_) last_used_.emplace_back(static_cast<std::size_t>(b.rows()), step);
  }
  int reset = 0;
  std::uniform_int_distribution<std::size_t> pick(0, recent.size() - 1);
  for (std::size_t b = 0; b < books_.size(); ++b) {
    for (std::size_t r = 0; r < last_used_[b].size(); ++r) {
      if (step - last_used_[b][r] >= config_.dead_code_steps) {
        const Eigen::VectorXd& f = recent[pick(rng)];
        if (f.norm() > 0.0) books_[b].row(static_cast<Eigen::Index>(r)) = f.normalized().transpose();
        last_used_[b][r] = step;
        ++reset;
      }
    }
  }
  return reset;
}

VqLoss vq_loss(const Eigen::MatrixXd& features, const Eigen::MatrixXd& codes, double beta) {
  if (features.rows() != codes.rows() || features.cols() != codes.cols()) {
    throw InvalidArgument("vq_loss: feature and code batches differ in shape");
  }
  const Eigen::MatrixXd diff = features - codes;
  VqLoss out;
  const double sq = diff.squaredNorm();
  out.value = sq + beta * sq;
  out.grad_codes = -2.0 * diff;
  out.grad_features = 2.0 * beta * diff;
  return out;
}

Eigen::VectorXd StraightThrough::forward(const Eigen::VectorXd& feature, const Eigen::VectorXd& code) const {
  if (feature.size() != code.size()) throw InvalidArgument("straight_through: dim mismatch");
  return code;
}

Utilization codebook_utilization(const std::vector<int>& assignments, int size) {
  if (size < 1) throw InvalidArgument("codebook size must be >= 1");
  Utilization u;
  if (assignments.empty()) return u;
  std::map<int, std::size_t> counts;
  for (int a : assignments) {
    if (a < 0 || a >= size) throw InvalidArgument("assignment index out of range");
    ++counts[a];
  }
  u.used_fraction = static_cast<double>(counts.size()) / size;
  double entropy = 0.0;
  const double n = static_cast<double>(assignments.size());
  for (const auto& [idx, c] : counts) {
    const double p = static_cast<double>(c) / n;
    entropy -= p * std::log(p);
  }
  u.perplexity = std::exp(entropy);
  return u;
}

void export_codebook(const Codebook& book, const std::filesystem::path& path) {
  EmbeddingTable table(static_cast<std::size_t>(book.code_dim()));
  const bool single = book.books().size() == 1;
  for (std::size_t b = 0; b < book.books().size(); ++b) {
    const auto& m = book.books()[b];
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      auto id = single ? "code_" + std::to_string(r) : "code_" + std::to_string(b) + "_" + std::to_string(r);
      table.insert(std::move(id), Eigen::VectorXd(m.row(r).transpose()));
    }
  }
  save_embeddings(table, path);
}

}  // namespace tvs
