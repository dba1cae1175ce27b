#include "tvs/synthetic.h"

#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "tvs/error.h"
#include "tvs/segments.h"

namespace tvs {

void SyntheticConfig::validate() const {
  if (dim < 4) throw InvalidArgument("synthetic dim must be >= 4");
  if (signal_strength < 0.0 || signal_strength > 1.0) throw InvalidArgument("signal_strength must be in [0,1]");
  if (noise < 0.0 || nuisance < 0.0 || text_noise_scale < 0.0) throw InvalidArgument("noise levels must be >= 0");
  if (length_probs.empty() || length_probs.size() > kMaxStoryboardLength - 2) {
    throw InvalidArgument("length_probs must cover 1..18 lengths starting at 3");
  }
  double total = 0.0;
  for (double p : length_probs) {
    if (p < 0.0) throw InvalidArgument("length_probs must be nonnegative");
    total += p;
  }
  if (total <= 0.0) throw InvalidArgument("length_probs must not all be zero");
  if (angle_lattice < 1) throw InvalidArgument("angle_lattice must be >= 1");
  if (start_positions > angle_lattice) throw InvalidArgument("start_positions exceeds angle_lattice");
  if (examples_per_movie < 1) throw InvalidArgument("examples_per_movie must be >= 1");
  if (min_tokens_per_segment < 1 || max_tokens_per_segment < min_tokens_per_segment) {
    throw InvalidArgument("token-per-segment range is empty");
  }
  if (vocabulary < 1) throw InvalidArgument("vocabulary must be >= 1");
}

double SyntheticConfig::resolved_step_angle() const {
  return step_angle > 0.0 ? step_angle : 2.0 * std::numbers::pi / static_cast<double>(angle_lattice);
}

namespace {

class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}

  Eigen::VectorXd gaussian(std::size_t n) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = normal_(rng_);
    return v;
  }

  Eigen::VectorXd unit(std::size_t n) {
    Eigen::VectorXd v = gaussian(n);
    while (v.norm() < 1e-12) v = gaussian(n);
    return v.normalized();
  }

  std::size_t uniform(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
  }

  std::size_t categorical(const std::vector<double>& weights) {
    return std::discrete_distribution<std::size_t>(weights.begin(), weights.end())(rng_);
  }

  std::uint64_t bits() { return rng_(); }

 private:
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

std::string hex_id(const char* prefix, std::uint64_t value) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s(prefix);
  for (int i = 0; i < 10; ++i) s.push_back(digits[(value >> (4 * i)) & 0xF]);
  return s;
}

std::string padded(const char* prefix, std::size_t value, int width) {
  auto digits = std::to_string(value);
  return prefix + std::string(digits.size() < static_cast<std::size_t>(width) ? width - digits.size() : 0, '0') +
         digits;
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticConfig& config, std::uint64_t seed) {
  config.validate();
  Sampler rng(seed);
  const std::size_t dim = config.dim;
  const std::size_t content = std::max<std::size_t>(1, (dim - 2) / 2);
  const std::size_t nuisance_dims = dim - 2 - content;

  SyntheticData out;
  {
    Eigen::MatrixXd g(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    for (Eigen::Index c = 0; c < g.cols(); ++c) g.col(c) = rng.gaussian(dim);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    out.geometry.basis = qr.householderQ() * Eigen::MatrixXd::Identity(g.rows(), g.cols());
  }
  out.geometry.content_dims = content;
  out.geometry.step_angle = config.resolved_step_angle();
  const auto& basis = out.geometry.basis;
  const auto b_content = basis.middleCols(2, static_cast<Eigen::Index>(content));
  const auto b_nuisance = basis.rightCols(static_cast<Eigen::Index>(nuisance_dims));

  auto plane = [&](double angle) -> Eigen::VectorXd {
    return std::cos(angle) * basis.col(0) + std::sin(angle) * basis.col(1);
  };
  auto isotropic = [&](double scale) -> Eigen::VectorXd {
    return rng.gaussian(dim) * (scale / std::sqrt(static_cast<double>(dim)));
  };

  const double text_noise = config.noise * config.text_noise_scale;
  const double step = out.geometry.step_angle;
  out.dataset.texts = EmbeddingTable(dim);
  out.dataset.frames = EmbeddingTable(dim);
  std::set<std::string> used_ids;
  auto fresh_id = [&](const char* prefix) {
    for (;;) {
      auto id = hex_id(prefix, rng.bits());
      if (used_ids.insert(id).second) return id;
    }
  };

  std::vector<Eigen::VectorXd> prototypes;
  for (std::size_t i = 0; i < config.anchor_vocabulary; ++i) prototypes.push_back(b_content * rng.unit(content));

  for (std::size_t e = 0; e < config.n_examples; ++e) {
    StoryboardExample ex;
    ex.example_id = padded("ex", e, 6);
    ex.movie_id = padded("mv", e / config.examples_per_movie, 5);
    ex.text_id = fresh_id("tx");
    const std::size_t m = 3 + rng.categorical(config.length_probs);

    const Eigen::VectorXd anchor =
        prototypes.empty() ? Eigen::VectorXd(b_content * rng.unit(content)) : prototypes[rng.uniform(0, prototypes.size() - 1)];
    const double start = static_cast<double>(rng.uniform(0, (config.start_positions == 0 ? config.angle_lattice : config.start_positions) - 1)) * 2.0 *
                         std::numbers::pi / static_cast<double>(config.angle_lattice);

    const std::size_t base = rng.uniform(config.min_tokens_per_segment, config.max_tokens_per_segment);
    const std::size_t extra = rng.uniform(0, std::min(config.max_extra_tokens, m - 1));
    const std::size_t n_tokens = base * m + extra;
    const auto spans = segment_text(n_tokens, m);

    Eigen::VectorXd text_sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
    std::vector<std::string> words;
    for (std::size_t k = 0; k < m; ++k) {
      const Eigen::VectorXd detail = b_content * rng.unit(content);
      const Eigen::VectorXd core = config.anchor_weight * anchor +
                                   config.signal_strength * config.plane_weight * plane(start + step * k) +
                                   config.detail_weight * detail;

      Eigen::VectorXd frame = core + isotropic(config.noise);
      if (nuisance_dims > 0) frame += b_nuisance * rng.unit(nuisance_dims) * config.nuisance;
      auto frame_id = fresh_id("fr");
      out.dataset.frames.insert(frame_id, frame);
      ex.frame_ids.push_back(std::move(frame_id));

      const Eigen::VectorXd segment = (core + isotropic(text_noise)).normalized();
      text_sum += segment;
      out.dataset.texts.insert(ex.text_id + "#s" + std::to_string(spans[k].begin) + ":" +
                                   std::to_string(spans[k].end),
                               segment);
      for (std::size_t t = spans[k].begin; t < spans[k].end; ++t) {
        out.dataset.texts.insert(ex.text_id + "#t" + std::to_string(t), Eigen::VectorXd(segment + isotropic(text_noise)));
        words.push_back(padded("w", rng.uniform(0, config.vocabulary - 1), 3));
      }
    }
    out.dataset.texts.insert(ex.text_id, Eigen::VectorXd(text_sum / static_cast<double>(m) + isotropic(text_noise)));

    for (std::size_t w = 0; w < words.size(); ++w) {
      if (w > 0) ex.synopsis_text.push_back(' ');
      ex.synopsis_text += words[w];
    }
    validate_example(ex);
    out.dataset.examples.push_back(std::move(ex));
  }
  return out;
}

}  // namespace tvs
