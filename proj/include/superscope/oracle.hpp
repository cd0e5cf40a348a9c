#pragma once

// Input -> activation maps with optional gradients, used by the sensitivity
// and noise analyses.

#include "superscope/core.hpp"

#include <optional>
#include <random>

namespace superscope {

class ModelOracle {
 public:
  virtual ~ModelOracle() = default;
  virtual Index input_dim() const = 0;
  virtual Index output_dim() const = 0;
  virtual Vector forward(const Vector& x) const = 0;
  virtual bool has_gradient() const { return false; }
  /// (dy/dx)^T g evaluated at x.
  virtual Vector vjp(const Vector& /*x*/, const Vector& /*g*/) const {
    fail(ErrorCode::OracleUnavailable, "oracle has no analytic gradient");
  }
};

/// One or two affine layers, each followed by ReLU unless `relu` is off.
class ToyModel final : public ModelOracle {
 public:
  Matrix w1;  // hidden x P
  Vector b1;
  std::optional<Matrix> w2;  // N x hidden
  std::optional<Vector> b2;
  bool relu = true;

  ToyModel() = default;
  explicit ToyModel(Matrix first, bool use_relu = true) : w1(std::move(first)), relu(use_relu) {
    b1 = Vector::Zero(w1.rows());
  }

  Index input_dim() const override { return static_cast<Index>(w1.cols()); }
  Index output_dim() const override { return static_cast<Index>(w2 ? w2->rows() : w1.rows()); }
  bool has_gradient() const override { return true; }

  Vector forward(const Vector& x) const override {
    if (x.size() != w1.cols()) fail(ErrorCode::WidthMismatch, "toy model input width");
    Vector h = w1 * x + b1;
    if (relu) h = h.cwiseMax(0.0);
    if (!w2) return h;
    Vector y = *w2 * h + b2.value_or(Vector::Zero(w2->rows()));
    return relu ? Vector(y.cwiseMax(0.0)) : y;
  }

  Vector vjp(const Vector& x, const Vector& g) const override {
    const Vector pre1 = w1 * x + b1;
    const Vector mask1 = relu ? Vector((pre1.array() > 0.0).cast<double>()) : Vector::Ones(pre1.size());
    Vector gh = g;
    if (w2) {
      const Vector pre2 = *w2 * pre1.cwiseProduct(mask1) + b2.value_or(Vector::Zero(w2->rows()));
      const Vector mask2 = relu ? Vector((pre2.array() > 0.0).cast<double>()) : Vector::Ones(pre2.size());
      gh = w2->transpose() * g.cwiseProduct(mask2);
    }
    return w1.transpose() * gh.cwiseProduct(mask1);
  }

  /// Smallest |pre-activation| relative to how far one coordinate step of
  /// size eps can move it; values <= 1 mean a ReLU kink is within reach.
  double kink_margin(const Vector& x, double eps) const {
    if (!relu) return std::numeric_limits<double>::infinity();
    double margin = std::numeric_limits<double>::infinity();
    const Vector pre1 = w1 * x + b1;
    for (Eigen::Index i = 0; i < pre1.size(); ++i) {
      const double reach = eps * w1.row(i).cwiseAbs().maxCoeff();
      if (reach > 0.0) margin = std::min(margin, std::abs(pre1(i)) / reach);
    }
    if (w2) {
      const Vector h = pre1.cwiseMax(0.0);
      const Vector pre2 = *w2 * h + b2.value_or(Vector::Zero(w2->rows()));
      const double step = eps * w1.cwiseAbs().maxCoeff() * static_cast<double>(w1.rows());
      for (Eigen::Index i = 0; i < pre2.size(); ++i) {
        const double reach = step * w2->row(i).cwiseAbs().maxCoeff();
        if (reach > 0.0) margin = std::min(margin, std::abs(pre2(i)) / reach);
      }
    }
    return margin;
  }
};

/// -||y(x) - v||, the "closeness to v" response.
inline double neg_distance_response(const ModelOracle& oracle, const Vector& x, const Vector& v) {
  return -(oracle.forward(x) - v).norm();
}

/// Central differences of an arbitrary oracle, 2 * dim(x) evaluations.
inline Vector finite_difference_gradient(const ModelOracle& oracle, const Vector& x, const Vector& v, double eps = 1e-3) {
  Vector grad(x.size());
  Vector probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe(i) = x(i) + eps;
    const double up = neg_distance_response(oracle, probe, v);
    probe(i) = x(i) - eps;
    const double down = neg_distance_response(oracle, probe, v);
    probe(i) = x(i);
    grad(i) = (up - down) / (2.0 * eps);
  }
  return grad;
}

/// Gradient of -||y(x) - v|| with respect to x; analytic when the oracle
/// offers vector-Jacobian products, finite differences otherwise.
inline Vector distance_gradient(const ModelOracle& oracle, const Vector& x, const Vector& v, double eps = 1e-3) {
  const Vector y = oracle.forward(x);
  if (y.size() != v.size()) fail(ErrorCode::WidthMismatch, "target point width");
  const Vector diff = y - v;
  const double n = diff.norm();
  if (!(n > 1e-12)) fail(ErrorCode::AtSingularity, "y(x) coincides with v");
  if (oracle.has_gradient()) return oracle.vjp(x, -diff / n);
  return finite_difference_gradient(oracle, x, v, eps);
}

/// A probe near x whose ReLU pre-activations all sit more than `margin`
/// finite-difference reaches from zero: x itself when it qualifies, else x
/// plus seeded Gaussian jitter, retried up to `attempts` times.
inline std::optional<Vector> off_kink_probe(const ToyModel& model, const Vector& x, double eps, std::uint64_t seed,
                                            double margin = 2.0, double jitter = 1e-2, int attempts = 20) {
  if (model.kink_margin(x, eps) > margin) return x;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, jitter);
  for (int a = 0; a < attempts; ++a) {
    Vector probe = x;
    for (Eigen::Index i = 0; i < probe.size(); ++i) probe(i) += normal(rng);
    if (model.kink_margin(probe, eps) > margin) return probe;
  }
  return std::nullopt;
}

}  // namespace superscope
