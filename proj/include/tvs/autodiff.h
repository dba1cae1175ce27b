#pragma once

// Minimal reverse-mode automatic differentiation over dense double matrices.
// A Tape records one forward computation; parameters enter as leaves and
// their gradients accumulate into a GradBuffer owned by the caller, so that
// several tapes can run on separate threads and be reduced afterwards.

#include <deque>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace tvs::ad {

using Mat = Eigen::MatrixXd;
using Mask = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

struct Parameter {
  std::string name;
  Mat value;
  bool decay = false;  // subject to weight decay
  std::size_t index = 0;
};

// Owns parameters in registration order; addresses are stable.
class ParameterSet {
 public:
  Parameter& add(std::string name, Mat value, bool decay);
  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;
  bool contains(const std::string& name) const;

  std::size_t size() const { return params_.size(); }
  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  std::size_t scalar_count() const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::deque<Parameter> params_;
};

// Per-parameter gradient accumulators, index-aligned with a ParameterSet.
struct GradBuffer {
  std::vector<Mat> grads;

  explicit GradBuffer(const ParameterSet& params);
  void zero();
  void add(const GradBuffer& other);
  void scale(double s);
  Mat& operator[](std::size_t i) { return grads[i]; }
  const Mat& operator[](std::size_t i) const { return grads[i]; }
};

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

class Tape {
 public:
  explicit Tape(GradBuffer* grads = nullptr) : grads_(grads) {}

  Var param(const Parameter& p);
  Var constant(Mat value);

  const Mat& value(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }
  // Adds to the upstream gradient of `v` (used to seed the backward pass).
  void seed(Var v, const Mat& grad);
  const Mat& grad(Var v);

  Var matmul(Var a, Var b);    // a * b
  Var matmul_t(Var a, Var b);  // a * b^T
  Var add(Var a, Var b);
  Var add_row(Var a, Var row);  // broadcast a 1 x c row over a's rows
  Var scale(Var a, double s);
  Var gelu(Var a);
  Var layer_norm(Var x, Var gain, Var bias);
  Var normalize_rows(Var x);
  Var vstack(const std::vector<Var>& parts);
  Var rows(Var x, Eigen::Index begin, Eigen::Index count);
  // Replaces the forward value with `code` rows while passing gradients to
  // `feature` unchanged.
  Var straight_through(Var feature, const Mat& code);
  // Multi-head scaled dot-product attention. mask(i, j) == true means query
  // row i may attend to key row j.
  Var attention(Var q, Var k, Var v, const Mask& mask, int heads);

  void backward();
  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    std::function<void(Tape&, std::size_t)> backward;
  };

  Var push(Mat value, std::function<void(Tape&, std::size_t)> backward);
  Mat& grad_ref(int id);

  GradBuffer* grads_;
  std::vector<Node> nodes_;
};

// Initializers.
Mat xavier(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng);
Mat gaussian(Eigen::Index rows, Eigen::Index cols, double stddev, std::mt19937_64& rng);

}  // namespace tvs::ad
