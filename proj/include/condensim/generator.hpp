#ifndef CONDENSIM_GENERATOR_HPP
#define CONDENSIM_GENERATOR_HPP

// Smooth test functions on the simplex and the second-order generators of
// the absorbed diffusion and of its restriction to a face.

#include <cmath>
#include <concepts>
#include <utility>
#include <vector>

#include "condensim/chain.hpp"

namespace condensim {

/// A C^2 function on R^S with analytic first and second derivatives.
template <class F>
concept SmoothFunction = requires(const F& f, const Vector& x) {
  { f.value(x) } -> std::convertible_to<double>;
  { f.gradient(x) } -> std::convertible_to<Vector>;
  { f.hessian(x) } -> std::convertible_to<Matrix>;
};

/// H(x) = prod_j phi((x_j - c_j) / rho) with phi(s) = exp(-1/(1-s^2)) on |s| < 1.
/// Supported in the box |x_j - c_j| < rho; interior of the simplex when
/// min_j c_j > rho.
class BumpFunction {
 public:
  BumpFunction(Vector center, double radius) : center_(std::move(center)), radius_(radius) {}

  const Vector& center() const { return center_; }
  double radius() const { return radius_; }

  /// Largest coordinate distance to the boundary on which H vanishes identically.
  double boundary_collar() const { return center_.minCoeff() - radius_; }

  double value(const Vector& x) const {
    double v = 1.0;
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      v *= phi((x(j) - center_(j)) / radius_).value;
      if (v == 0.0) return 0.0;
    }
    return v;
  }

  Vector gradient(const Vector& x) const {
    const auto n = x.size();
    std::vector<Factor> f = factors(x);
    Vector g = Vector::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      double p = f[i].d1 / radius_;
      for (Eigen::Index j = 0; j < n; ++j)
        if (j != i) p *= f[j].value;
      g(i) = p;
    }
    return g;
  }

  Matrix hessian(const Vector& x) const {
    const auto n = x.size();
    std::vector<Factor> f = factors(x);
    Matrix h = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index k = i; k < n; ++k) {
        double p = 1.0;
        for (Eigen::Index j = 0; j < n; ++j) {
          if (i == k && j == i) p *= f[j].d2 / (radius_ * radius_);
          else if (j == i || j == k) p *= f[j].d1 / radius_;
          else p *= f[j].value;
        }
        h(i, k) = p;
        h(k, i) = p;
      }
    }
    return h;
  }

 private:
  struct Factor {
    double value = 0.0, d1 = 0.0, d2 = 0.0;
  };

  static Factor phi(double s) {
    const double q = 1.0 - s * s;
    if (q <= 0.0) return {};
    const double v = std::exp(-1.0 / q);
    const double q2 = q * q;
    return {v, v * (-2.0 * s / q2), v * (6.0 * s * s * s * s - 2.0) / (q2 * q2)};
  }

  std::vector<Factor> factors(const Vector& x) const {
    std::vector<Factor> f(static_cast<std::size_t>(x.size()));
    for (Eigen::Index j = 0; j < x.size(); ++j) f[static_cast<std::size_t>(j)] = phi((x(j) - center_(j)) / radius_);
    return f;
  }

  Vector center_;
  double radius_;
};

/// The three bump test functions used for martingale diagnostics on a
/// simplex of dimension L-1: one centered at the barycenter, two shifted.
inline std::vector<BumpFunction> standard_bumps(std::size_t L, double collar) {
  const double n = static_cast<double>(L);
  std::vector<BumpFunction> out;
  Vector bary = Vector::Constant(static_cast<Eigen::Index>(L), 1.0 / n);
  const double r0 = 0.6 * (1.0 / n - collar);
  out.emplace_back(bary, r0);
  Vector shifted = bary;
  shifted(0) += 0.25 / n;
  for (Eigen::Index j = 1; j < shifted.size(); ++j) shifted(j) -= 0.25 / (n * (n - 1.0));
  out.emplace_back(shifted, 0.8 * (shifted.minCoeff() - collar));
  Vector other = bary;
  other(other.size() - 1) -= 0.3 / n;
  for (Eigen::Index j = 0; j + 1 < other.size(); ++j) other(j) += 0.3 / (n * (n - 1.0));
  out.emplace_back(other, 0.5 * (other.minCoeff() - collar));
  return out;
}

/// Affine function H(x) = c + w . x.
struct AffineFunction {
  Vector weights;
  double offset = 0.0;

  double value(const Vector& x) const { return offset + weights.dot(x); }
  Vector gradient(const Vector&) const { return weights; }
  Matrix hessian(const Vector& x) const { return Matrix::Zero(x.size(), x.size()); }
};

/// Quadratic H(x) = x^T Q x / 2 + w . x with symmetric Q.
struct QuadraticFunction {
  Matrix quad;
  Vector weights;

  double value(const Vector& x) const { return 0.5 * x.dot(quad * x) + weights.dot(x); }
  Vector gradient(const Vector& x) const { return quad * x + weights; }
  Matrix hessian(const Vector&) const { return quad; }
};

/// f_A(x) = (prod_{k in A} x_k)^(p+1).
class ProductPowerFunction {
 public:
  ProductPowerFunction(SiteSet A, double p) : sites_(A.members()), exponent_(p + 1.0) {}

  double value(const Vector& x) const {
    double prod = 1.0;
    for (int k : sites_) prod *= x(k);
    return std::pow(prod, exponent_);
  }

  Vector gradient(const Vector& x) const {
    Vector g = Vector::Zero(x.size());
    const double v = value(x);
    for (int k : sites_) g(k) = exponent_ * v / x(k);
    return g;
  }

  Matrix hessian(const Vector& x) const {
    Matrix h = Matrix::Zero(x.size(), x.size());
    const double v = value(x);
    for (int j : sites_) {
      for (int k : sites_) {
        if (j == k) h(j, k) = exponent_ * (exponent_ - 1.0) * v / (x(j) * x(j));
        else h(j, k) = exponent_ * exponent_ * v / (x(j) * x(k));
      }
    }
    return h;
  }

 private:
  std::vector<int> sites_;
  double exponent_;
};

/// F = f o Upsilon for f defined on R^B.
template <SmoothFunction F>
class PulledBackFunction {
 public:
  PulledBackFunction(F f, UpsilonMap upsilon) : f_(std::move(f)), ups_(std::move(upsilon)) {}

  double value(const Vector& x) const { return f_.value(ups_(x)); }
  Vector gradient(const Vector& x) const { return ups_.matrix.transpose() * f_.gradient(ups_(x)); }
  Matrix hessian(const Vector& x) const {
    return ups_.matrix.transpose() * f_.hessian(ups_(x)) * ups_.matrix;
  }

 private:
  F f_;
  UpsilonMap ups_;
};

/// Drift field b(x) = b sum_{j: x_j != 0} (m_j / x_j) v_j of the limit diffusion.
inline Vector limit_drift(const ChainSpec& chain, double b, const Vector& x) {
  Vector d = Vector::Zero(x.size());
  const Matrix& g = chain.generator();
  for (Eigen::Index j = 0; j < x.size(); ++j)
    if (x(j) != 0.0) d += (b * chain.measure(static_cast<int>(j)) / x(j)) * g.row(j).transpose();
  return d;
}

/// (L H)(x) = b(x) . grad H(x) + Tr[a_s Hess H(x)].
template <SmoothFunction F>
double limit_generator_apply(const ChainSpec& chain, double b, const F& h, const Vector& x,
                             double noise_scale = 1.0) {
  const Vector grad = h.gradient(x);
  double first = 0.0;
  const Matrix& g = chain.generator();
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    if (x(j) == 0.0) continue;
    const double vj_grad = g.row(j).dot(grad);
    if (vj_grad != 0.0) first += b * chain.measure(static_cast<int>(j)) / x(j) * vj_grad;
  }
  if (noise_scale == 0.0) return first;
  const Matrix as = dirichlet_matrix(chain);
  return first + noise_scale * noise_scale * (as.cwiseProduct(h.hessian(x))).sum();
}

/// Restricted generator L_B acting on f: R^B -> R at a point y of Sigma_B,
/// written with the trace rates exactly as the full generator.
template <SmoothFunction F>
double restricted_generator_apply(const TraceChainSpec& trace, double b, const F& f, const Vector& y) {
  const Vector grad = f.gradient(y);
  const Matrix hess = f.hessian(y);
  const auto n = static_cast<Eigen::Index>(trace.size());
  double out = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (y(j) > 0.0) out += b * trace.measure(j) / y(j) * trace.drift_vectors.row(j).dot(grad);
    for (Eigen::Index k = 0; k < n; ++k) {
      if (j == k) continue;
      const double second = hess(k, k) - 2.0 * hess(j, k) + hess(j, j);
      out += 0.5 * trace.measure(j) * trace.rates(j, k) * second;
    }
  }
  return out;
}

/// (Delta_j H)(x) = sum_k r(j,k) (d_k - d_j)^2 H(x), for every j.
inline Vector edge_laplacians(const ChainSpec& chain, const Matrix& hess) {
  const auto L = static_cast<Eigen::Index>(chain.size());
  Vector out = Vector::Zero(L);
  for (Eigen::Index j = 0; j < L; ++j)
    for (Eigen::Index k = 0; k < L; ++k)
      if (k != j) out(j) += chain.rate(static_cast<int>(j), static_cast<int>(k)) * (hess(k, k) - 2.0 * hess(j, k) + hess(j, j));
  return out;
}

}  // namespace condensim

#endif  // CONDENSIM_GENERATOR_HPP
