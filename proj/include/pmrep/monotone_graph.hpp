#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "pmrep/error.hpp"
#include "pmrep/phi.hpp"

namespace pmrep {

/// Single-valued continuous monotone piece of a graph on the open interval
/// (lo, hi). Linear pieces carry their slope so resolvents invert in closed form.
struct GraphBranch {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  std::function<double(double)> value;
  std::optional<double> slope;

  double operator()(double x) const { return slope ? *slope * x : value(x); }
  bool contains(double x) const { return x > lo && x < hi; }
};

/// Vertical segment of the graph at a discontinuity of beta.
struct GraphJump {
  double at = 0.0;
  Interval values;
};

/// Solution (x, w) of x + lambda w = y with w in beta(x).
struct ResolventPoint {
  double x = 0.0;
  double w = 0.0;
};

struct GraphScanOptions {
  double half_width = 10.0;
  int points = 10000;
};

/// Maximal monotone graph on R: analytic branches separated by jump points
/// whose value sets are the closed intervals between the one-sided limits.
class MonotoneGraph {
 public:
  static constexpr double kBisectionTol = 1e-12;
  static constexpr int kMaxBracketExpansions = 64;

  MonotoneGraph(std::vector<GraphBranch> branches, std::vector<GraphJump> jumps, double growth_constant)
      : branches_(std::move(branches)), jumps_(std::move(jumps)), growth_(growth_constant) {
    require(!branches_.empty(), ErrorKind::InvalidArgument, "graph needs at least one branch");
    require(growth_ > 0.0, ErrorKind::InvalidArgument, "growth constant must be positive");
    std::sort(jumps_.begin(), jumps_.end(), [](const auto& a, const auto& b) { return a.at < b.at; });
  }

  /// beta(x) = slope * x on all of R.
  static MonotoneGraph linear(double slope = 1.0) {
    require(slope > 0.0, ErrorKind::InvalidArgument, "linear graph slope must be positive");
    GraphBranch b;
    b.slope = slope;
    return MonotoneGraph({b}, {}, slope);
  }

  const std::vector<GraphBranch>& branches() const { return branches_; }
  const std::vector<GraphJump>& jumps() const { return jumps_; }
  double growth_constant() const { return growth_; }

  /// Full value set beta(x).
  Interval section(double x) const {
    for (const auto& j : jumps_) {
      if (x == j.at) return j.values;
    }
    for (const auto& b : branches_) {
      if (b.contains(x)) {
        const double v = b(x);
        return {v, v};
      }
    }
    // Branch endpoint that is not a registered jump: the branches meet continuously.
    for (const auto& b : branches_) {
      if (x == b.lo || x == b.hi) {
        const double v = b(x);
        return {v, v};
      }
    }
    fail(ErrorKind::InvalidArgument, "point not covered by the graph");
  }

  /// Unique (x, w) with x + lambda w = y and w in beta(x).
  ResolventPoint resolvent(double lambda, double y) const {
    require(lambda > 0.0, ErrorKind::InvalidArgument, "resolvent parameter must be positive");
    if (y == 0.0) return {0.0, 0.0};
    for (const auto& j : jumps_) {
      const double lo = j.at + lambda * j.values.lo;
      const double hi = j.at + lambda * j.values.hi;
      if (y >= lo && y <= hi) {
        const double w = std::clamp((y - j.at) / lambda, j.values.lo, j.values.hi);
        return {j.at, w};
      }
    }
    for (const auto& b : branches_) {
      const double g_lo = std::isfinite(b.lo) ? b.lo + lambda * b(b.lo) : -std::numeric_limits<double>::infinity();
      const double g_hi = std::isfinite(b.hi) ? b.hi + lambda * b(b.hi) : std::numeric_limits<double>::infinity();
      if (!(y >= g_lo && y <= g_hi)) continue;
      if (b.slope) {
        const double x = std::clamp(y / (1.0 + lambda * *b.slope), b.lo, b.hi);
        return {x, *b.slope * x};
      }
      return solve_branch(b, lambda, y);
    }
    std::ostringstream msg;
    msg << "no branch or jump encloses y=" << y << " at lambda=" << lambda;
    fail(ErrorKind::ResolventBracketFailure, msg.str());
  }

 private:
  /// Regula falsi (Illinois variant) on the monotone map x -> x + lambda beta(x),
  /// iterated down to a bracket of a few ulps.
  static ResolventPoint solve_branch(const GraphBranch& b, double lambda, double y) {
    const auto g = [&](double x) { return x + lambda * b(x) - y; };
    double lo = std::min(y, 0.0) - std::abs(y) - 1.0;
    double hi = std::max(y, 0.0) + std::abs(y) + 1.0;
    lo = std::max(lo, b.lo);
    hi = std::min(hi, b.hi);
    double g_lo = g(lo);
    double g_hi = g(hi);
    int expansions = 0;
    while (g_lo > 0.0 && lo > b.lo) {
      if (++expansions > kMaxBracketExpansions) break;
      lo = std::max(b.lo, lo - 2.0 * (hi - lo));
      g_lo = g(lo);
    }
    while (g_hi < 0.0 && hi < b.hi) {
      if (++expansions > kMaxBracketExpansions) break;
      hi = std::min(b.hi, hi + 2.0 * (hi - lo));
      g_hi = g(hi);
    }
    if (g_lo > 0.0 || g_hi < 0.0) {
      std::ostringstream msg;
      msg << "bracket expansion failed for y=" << y;
      fail(ErrorKind::ResolventBracketFailure, msg.str());
    }
    if (g_lo == 0.0) return {lo, b(lo)};
    if (g_hi == 0.0) return {hi, b(hi)};
    int side = 0;
    for (int it = 0; it < 200; ++it) {
      const double width = hi - lo;
      if (width <= 4.0 * std::numeric_limits<double>::epsilon() * std::max({1.0, std::abs(lo), std::abs(hi)}) ||
          width <= kBisectionTol * 1e-3) {
        break;
      }
      double mid = (lo * g_hi - hi * g_lo) / (g_hi - g_lo);
      if (!(mid > lo && mid < hi)) mid = 0.5 * (lo + hi);
      const double g_mid = g(mid);
      if (g_mid == 0.0) return {mid, b(mid)};
      if (g_mid < 0.0) {
        lo = mid;
        g_lo = g_mid;
        if (side == -1) g_hi *= 0.5;
        side = -1;
      } else {
        hi = mid;
        g_hi = g_mid;
        if (side == 1) g_lo *= 0.5;
        side = 1;
      }
    }
    const double x = std::abs(g(lo)) <= std::abs(g(hi)) ? lo : hi;
    return {x, b(x)};
  }

  std::vector<GraphBranch> branches_;
  std::vector<GraphJump> jumps_;
  double growth_;
};

/// Jump-completed graph of u -> Phi(u)^2 u. Rejects maps whose composite
/// decreases or exceeds the declared bound on the scan interval.
inline MonotoneGraph from_phi(const PhiSpec& phi, const GraphScanOptions& scan = {}) {
  require(scan.points >= 2 && scan.half_width > 0.0, ErrorKind::InvalidArgument, "invalid scan options");
  const double bound = phi.sup_bound();
  require(std::isfinite(bound), ErrorKind::UnboundedPhi, "Phi has no finite bound");

  std::vector<double> cuts = phi.jump_points();
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<GraphBranch> branches;
  for (std::size_t i = 0; i <= cuts.size(); ++i) {
    GraphBranch b;
    b.lo = i == 0 ? -inf : cuts[i - 1];
    b.hi = i == cuts.size() ? inf : cuts[i];
    if (phi.piecewise_constant()) {
      double probe;
      if (std::isfinite(b.lo) && std::isfinite(b.hi)) probe = 0.5 * (b.lo + b.hi);
      else if (std::isfinite(b.hi)) probe = b.hi - 1.0;
      else if (std::isfinite(b.lo)) probe = b.lo + 1.0;
      else probe = 0.0;
      const double level = phi.lower(probe);
      b.slope = level * level;
    } else {
      b.value = [phi, lo = b.lo, hi = b.hi](double x) {
        // One-sided limits at the branch ends keep the branch continuous on its closure.
        const double p = x <= lo ? phi.right_limit(x) : (x >= hi ? phi.left_limit(x) : phi.lower(x));
        return p * p * x;
      };
    }
    branches.push_back(std::move(b));
  }

  std::vector<GraphJump> jumps;
  for (double d : cuts) {
    const double left = phi.left_limit(d);
    const double right = phi.right_limit(d);
    const double b_left = left * left * d;
    const double b_right = right * right * d;
    if (b_right < b_left) {
      std::ostringstream msg;
      msg << "beta decreases across the jump at u=" << d;
      fail(ErrorKind::NonMonotoneComposite, msg.str());
    }
    if (b_left == b_right) continue;
    jumps.push_back({d, {b_left, b_right}});
  }

  const double growth = std::max(bound * bound, std::numeric_limits<double>::min());
  MonotoneGraph graph(std::move(branches), std::move(jumps), growth);

  const double step = 2.0 * scan.half_width / (scan.points - 1);
  double prev_hi = -inf;
  for (int i = 0; i < scan.points; ++i) {
    const double x = -scan.half_width + step * i;
    const Interval p = phi.values(x);
    if (p.hi > bound * (1.0 + 1e-12) || p.lo < 0.0 || !std::isfinite(p.hi)) {
      std::ostringstream msg;
      msg << "Phi(" << x << ") = [" << p.lo << ", " << p.hi << "] violates the declared bound " << bound;
      fail(ErrorKind::UnboundedPhi, msg.str());
    }
    const Interval s = graph.section(x);
    if (s.lo < prev_hi - 1e-12 * std::max(1.0, std::abs(prev_hi))) {
      std::ostringstream msg;
      msg << "Phi^2(u) u decreases near u=" << x;
      fail(ErrorKind::NonMonotoneComposite, msg.str());
    }
    prev_hi = s.hi;
  }
  return graph;
}

/// Coefficient selection sqrt(eta / u), with the zero-value convention of Phi
/// where u does not exceed `threshold`.
inline double chi_selection(double u, double eta, const PhiSpec& phi, double threshold = 1e-14,
                            double tol = 1e-12) {
  require(u >= -tol, ErrorKind::InvalidArgument, "chi_selection needs u >= 0");
  if (u <= threshold) return phi.zero_value();
  if (eta < -tol * std::max(1.0, u)) {
    std::ostringstream msg;
    msg << "eta=" << eta << " < 0 at u=" << u;
    fail(ErrorKind::NegativeRatio, msg.str());
  }
  return std::sqrt(std::max(eta, 0.0) / u);
}

}  // namespace pmrep
