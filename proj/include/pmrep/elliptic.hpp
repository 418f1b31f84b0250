#pragma once

#include <cmath>
#include <vector>

#include "pmrep/error.hpp"
#include "pmrep/grid.hpp"

namespace pmrep {

/// Green kernel of (eps - d^2/dx^2) on the line: exp(-sqrt(eps)|x|) / (2 sqrt(eps)).
class GreenKernel {
 public:
  explicit GreenKernel(double eps) : eps_(eps) {
    require(eps > 0.0, ErrorKind::NonPositiveEpsilon, "epsilon must be positive");
    rate_ = std::sqrt(eps);
    prefactor_ = 0.5 / rate_;
  }

  double epsilon() const { return eps_; }
  double rate() const { return rate_; }
  double prefactor() const { return prefactor_; }

  double operator()(double x) const { return prefactor_ * std::exp(-rate_ * std::abs(x)); }

 private:
  double eps_;
  double rate_;
  double prefactor_;
};

inline double green_kernel(double eps, double x) { return GreenKernel(eps)(x); }

namespace detail {

/// Kernel convolution of a measure evaluated at arbitrary points. Cell
/// weights sit at their nodes (midpoint rule); atoms are exact.
inline double convolve_at(const GreenKernel& k, const SignedGridMeasure& m, double x) {
  double s = 0.0;
  const Grid1D& g = m.grid;
  for (int j = 0; j < g.size(); ++j) {
    if (m.weights[j] != 0.0) s += k(x - g.node(j)) * m.weights[j];
  }
  for (const auto& a : m.atoms) s += k(x - a.position) * a.mass;
  return s;
}

}  // namespace detail

/// B_eps m = (eps - Delta)^{-1} m sampled at the grid nodes.
///
/// Cell weights are convolved with a two-sided exponential recursion, which is
/// the direct midpoint sum reorganised into O(n): the kernel factorises as
/// exp(-r|x_i - x_j|) = exp(-r h)^{|i-j|}.
inline GridDensity apply_B_eps(double eps, const SignedGridMeasure& m) {
  const GreenKernel k(eps);
  const Grid1D& g = m.grid;
  const int n = g.size();
  const double decay = std::exp(-k.rate() * g.h());
  GridDensity out(g);
  std::vector<double> left(n, 0.0);
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    acc = acc * decay + m.weights[i];
    left[i] = acc;
  }
  acc = 0.0;
  for (int i = n - 1; i >= 0; --i) {
    // right[i] excludes the diagonal, which is already counted in left[i]
    const double right = acc * decay;
    out.values[i] = k.prefactor() * (left[i] + right);
    acc = acc * decay + m.weights[i];
  }
  for (const auto& a : m.atoms) {
    for (int i = 0; i < n; ++i) out.values[i] += k(g.node(i) - a.position) * a.mass;
  }
  return out;
}

/// l1 norm of eps v - Delta_h v - m/h over interior nodes.
inline double elliptic_residual(double eps, const SignedGridMeasure& m, const GridDensity& v) {
  require(eps > 0.0, ErrorKind::NonPositiveEpsilon, "epsilon must be positive");
  require_same_grid(m.grid, v.grid);
  const GridDensity rho = m.to_density();
  const double h = v.grid.h();
  double s = 0.0;
  for (int i = 1; i + 1 < v.grid.size(); ++i) {
    const double lap = (v.values[i + 1] - 2.0 * v.values[i] + v.values[i - 1]) / (h * h);
    s += std::abs(eps * v.values[i] - lap - rho.values[i]);
  }
  return h * s;
}

/// g_eps(z) = integral of (B_eps z) against z; nonnegative for every signed measure.
inline double g_eps_functional(double eps, const SignedGridMeasure& z) {
  const GreenKernel k(eps);
  const GridDensity bz = apply_B_eps(eps, z);
  double s = 0.0;
  for (std::size_t i = 0; i < z.weights.size(); ++i) s += bz.values[i] * z.weights[i];
  for (const auto& a : z.atoms) s += detail::convolve_at(k, z, a.position) * a.mass;
  return s;
}

/// Positivity tolerance for g_eps: 1e-10 * TV(z)^2 / sqrt(eps).
inline double g_eps_tolerance(double eps, const SignedGridMeasure& z) {
  const double tv = total_variation(z);
  return 1e-10 * tv * tv / std::sqrt(eps);
}

}  // namespace pmrep
