#include "tvs/autodiff.h"

#include <cmath>
#include <numbers>

#include "tvs/error.h"

namespace tvs::ad {

Parameter& ParameterSet::add(std::string name, Mat value, bool decay) {
  if (contains(name)) throw InvalidArgument("duplicate parameter '" + name + "'");
  params_.push_back(Parameter{std::move(name), std::move(value), decay, params_.size()});
  return params_.back();
}

Parameter& ParameterSet::get(const std::string& name) {
  for (auto& p : params_)
    if (p.name == name) return p;
  throw InvalidArgument("unknown parameter '" + name + "'");
}

const Parameter& ParameterSet::get(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return p;
  throw InvalidArgument("unknown parameter '" + name + "'");
}

bool ParameterSet::contains(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return true;
  return false;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

GradBuffer::GradBuffer(const ParameterSet& params) {
  grads.reserve(params.size());
  for (const auto& p : params) grads.push_back(Mat::Zero(p.value.rows(), p.value.cols()));
}

void GradBuffer::zero() {
  for (auto& g : grads) g.setZero();
}

void GradBuffer::add(const GradBuffer& other) {
  for (std::size_t i = 0; i < grads.size(); ++i) grads[i] += other.grads[i];
}

void GradBuffer::scale(double s) {
  for (auto& g : grads) g *= s;
}

Var Tape::push(Mat value, std::function<void(Tape&, std::size_t)> backward) {
  nodes_.push_back(Node{std::move(value), Mat(), std::move(backward)});
  return Var{static_cast<int>(nodes_.size() - 1)};
}

Mat& Tape::grad_ref(int id) {
  auto& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::seed(Var v, const Mat& grad) {
  auto& g = grad_ref(v.id);
  if (g.rows() != grad.rows() || g.cols() != grad.cols()) throw InvalidArgument("seed gradient shape mismatch");
  g += grad;
}

const Mat& Tape::grad(Var v) { return grad_ref(v.id); }

Var Tape::param(const Parameter& p) {
  const std::size_t index = p.index;
  return push(p.value, [index](Tape& t, std::size_t self) {
    if (t.grads_ != nullptr) (*t.grads_)[index] += t.nodes_[self].grad;
  });
}

Var Tape::constant(Mat value) { return push(std::move(value), nullptr); }

Var Tape::matmul(Var a, Var b) {
  return push(value(a) * value(b), [a, b](Tape& t, std::size_t self) {
    const Mat& g = t.nodes_[self].grad;
    t.grad_ref(a.id).noalias() += g * t.value(b).transpose();
    t.grad_ref(b.id).noalias() += t.value(a).transpose() * g;
  });
}

Var Tape::matmul_t(Var a, Var b) {
  return push(value(a) * value(b).transpose(), [a, b](Tape& t, std::size_t self) {
    const Mat& g = t.nodes_[self].grad;
    t.grad_ref(a.id).noalias() += g * t.value(b);
    t.grad_ref(b.id).noalias() += g.transpose() * t.value(a);
  });
}

Var Tape::add(Var a, Var b) {
  if (value(a).rows() != value(b).rows() || value(a).cols() != value(b).cols()) {
    throw InvalidArgument("add: shape mismatch");
  }
  return push(value(a) + value(b), [a, b](Tape& t, std::size_t self) {
    const Mat& g = t.nodes_[self].grad;
    t.grad_ref(a.id) += g;
    t.grad_ref(b.id) += g;
  });
}

Var Tape::add_row(Var a, Var row) {
  if (value(row).rows() != 1 || value(row).cols() != value(a).cols()) throw InvalidArgument("add_row: shape mismatch");
  Mat out = value(a);
  out.rowwise() += value(row).row(0);
  return push(std::move(out), [a, row](Tape& t, std::size_t self) {
    const Mat& g = t.nodes_[self].grad;
    t.grad_ref(a.id) += g;
    t.grad_ref(row.id) += g.colwise().sum();
  });
}

Var Tape::scale(Var a, double s) {
  return push(value(a) * s, [a, s](Tape& t, std::size_t self) { t.grad_ref(a.id) += t.nodes_[self].grad * s; });
}

namespace {

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)

double gelu_value(double x) { return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + 0.044715 * x * x * x))); }

double gelu_grad(double x) {
  const double u = kGeluC * (x + 0.044715 * x * x * x);
  const double th = std::tanh(u);
  const double du = kGeluC * (1.0 + 3.0 * 0.044715 * x * x);
  return 0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * du;
}

}  // namespace

Var Tape::gelu(Var a) {
  return push(value(a).unaryExpr(&gelu_value), [a](Tape& t, std::size_t self) {
    t.grad_ref(a.id) += t.nodes_[self].grad.cwiseProduct(t.value(a).unaryExpr(&gelu_grad));
  });
}

Var Tape::layer_norm(Var x, Var gain, Var bias) {
  constexpr double eps = 1e-5;
  const Mat& in = value(x);
  const auto cols = in.cols();
  Mat xhat(in.rows(), cols);
  Eigen::VectorXd inv_std(in.rows());
  for (Eigen::Index r = 0; r < in.rows(); ++r) {
    const double mean = in.row(r).mean();
    const double var = (in.row(r).array() - mean).square().mean();
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (in.row(r).array() - mean) * inv_std[r];
  }
  Mat out = xhat.array().rowwise() * value(gain).row(0).array();
  out.rowwise() += value(bias).row(0);
  return push(std::move(out), [x, gain, bias, xhat, inv_std](Tape& t, std::size_t self) {
    const Mat& g = t.nodes_[self].grad;
    t.grad_ref(gain.id) += g.cwiseProduct(xhat).colwise().sum();
    t.grad_ref(bias.id) += g.colwise().sum();
    const Mat dxhat = g.array().rowwise() * t.value(gain).row(0).array();
    Mat& dx = t.grad_ref(x.id);
    const double n = static_cast<double>(xhat.cols());
    for (Eigen::Index r = 0; r < xhat.rows(); ++r) {
      const double m1 = dxhat.row(r).sum() / n;
      const double m2 = dxhat.row(r).dot(xhat.row(r)) / n;
      dx.row(r) += ((dxhat.row(r).array() - m1 - xhat.row(r).array() * m2) * inv_std[r]).matrix();
    }
  });
}

Var Tape::normalize_rows(Var x) {
  const Mat& in = value(x);
  Eigen::VectorXd norms = in.rowwise().norm();
  for (Eigen::Index r = 0; r < norms.size(); ++r) {
    if (norms[r] < 1e-12) norms[r] = 1e-12;
  }
  Mat out = in.array().colwise() / norms.array();
  return push(std::move(out), [x, norms](Tape& t, std::size_t self) {
    const Mat& g = t.nodes_[self].grad;
    const Mat& y = t.nodes_[self].value;
    const Eigen::VectorXd dots = g.cwiseProduct(y).rowwise().sum();
    Mat dx = g - (y.array().colwise() * dots.array()).matrix();
    dx.array().colwise() /= norms.array();
    t.grad_ref(x.id) += dx;
  });
}

Var Tape::vstack(const std::vector<Var>& parts) {
  if (parts.empty()) throw InvalidArgument("vstack of nothing");
  Eigen::Index rows = 0;
  const Eigen::Index cols = value(parts[0]).cols();
  for (auto p : parts) {
    if (value(p).cols() != cols) throw InvalidArgument("vstack: column mismatch");
    rows += value(p).rows();
  }
  Mat out(rows, cols);
  Eigen::Index at = 0;
  for (auto p : parts) {
    out.middleRows(at, value(p).rows()) = value(p);
    at += value(p).rows();
  }
  return push(std::move(out), [parts](Tape& t, std::size_t self) {
    const Mat& g = t.nodes_[self].grad;
    Eigen::Index at = 0;
    for (auto p : parts) {
      const auto r = t.value(p).rows();
      t.grad_ref(p.id) += g.middleRows(at, r);
      at += r;
    }
  });
}

Var Tape::rows(Var x, Eigen::Index begin, Eigen::Index count) {
  if (begin < 0 || count < 0 || begin + count > value(x).rows()) throw InvalidArgument("rows: out of range");
  return push(value(x).middleRows(begin, count), [x, begin, count](Tape& t, std::size_t self) {
    t.grad_ref(x.id).middleRows(begin, count) += t.nodes_[self].grad;
  });
}

Var Tape::straight_through(Var feature, const Mat& code) {
  if (code.rows() != value(feature).rows() || code.cols() != value(feature).cols()) {
    throw InvalidArgument("straight_through: shape mismatch");
  }
  return push(code, [feature](Tape& t, std::size_t self) { t.grad_ref(feature.id) += t.nodes_[self].grad; });
}

Var Tape::attention(Var q, Var k, Var v, const Mask& mask, int heads) {
  const Mat& Q = value(q);
  const Mat& K = value(k);
  const Mat& V = value(v);
  const Eigen::Index d = Q.cols();
  if (heads < 1 || d % heads != 0) throw InvalidArgument("attention: model dim not divisible by heads");
  if (K.cols() != d || V.cols() != d || K.rows() != V.rows()) throw InvalidArgument("attention: shape mismatch");
  if (mask.rows() != Q.rows() || mask.cols() != K.rows()) throw InvalidArgument("attention: mask shape mismatch");
  const Eigen::Index dh = d / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Mat> probs(static_cast<std::size_t>(heads));
  Mat out(Q.rows(), d);
  for (int h = 0; h < heads; ++h) {
    const auto off = static_cast<Eigen::Index>(h) * dh;
    Mat s = Q.middleCols(off, dh) * K.middleCols(off, dh).transpose() * inv_sqrt;
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < s.cols(); ++j)
        if (mask(i, j)) mx = std::max(mx, s(i, j));
      double z = 0.0;
      for (Eigen::Index j = 0; j < s.cols(); ++j) {
        s(i, j) = mask(i, j) ? std::exp(s(i, j) - mx) : 0.0;
        z += s(i, j);
      }
      if (z > 0.0) s.row(i) /= z;
    }
    out.middleCols(off, dh).noalias() = s * V.middleCols(off, dh);
    probs[static_cast<std::size_t>(h)] = std::move(s);
  }
  return push(std::move(out), [q, k, v, probs = std::move(probs), heads, dh, inv_sqrt](Tape& t, std::size_t self) {
    const Mat& g = t.nodes_[self].grad;
    const Mat& Q = t.value(q);
    const Mat& K = t.value(k);
    const Mat& V = t.value(v);
    Mat& dQ = t.grad_ref(q.id);
    Mat& dK = t.grad_ref(k.id);
    Mat& dV = t.grad_ref(v.id);
    for (int h = 0; h < heads; ++h) {
      const auto off = static_cast<Eigen::Index>(h) * dh;
      const Mat& A = probs[static_cast<std::size_t>(h)];
      const auto gh = g.middleCols(off, dh);
      dV.middleCols(off, dh).noalias() += A.transpose() * gh;
      const Mat dA = gh * V.middleCols(off, dh).transpose();
      const Eigen::VectorXd rowdot = dA.cwiseProduct(A).rowwise().sum();
      const Mat dS = (A.array() * (dA.array().colwise() - rowdot.array())).matrix() * inv_sqrt;
      dQ.middleCols(off, dh).noalias() += dS * K.middleCols(off, dh);
      dK.middleCols(off, dh).noalias() += dS.transpose() * Q.middleCols(off, dh);
    }
  });
}

void Tape::backward() {
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    auto& n = nodes_[i];
    if (n.grad.size() == 0 || !n.backward) continue;
    n.backward(*this, i);
  }
}

Mat xavier(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> u(-limit, limit);
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

Mat gaussian(Eigen::Index rows, Eigen::Index cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, stddev);
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

}  // namespace tvs::ad
