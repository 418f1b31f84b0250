#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "pmrep/error.hpp"

namespace pmrep {

/// Closed interval [lo, hi]; lo == hi for single-valued sections.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double v, double tol = 0.0) const { return v >= lo - tol && v <= hi + tol; }
  bool degenerate() const { return lo == hi; }
  double width() const { return hi - lo; }
};

/// Diffusivity map Phi with beta(u) = Phi(u)^2 u. Phi may jump; at a jump
/// point its value is the closed interval between the one-sided limits.
class PhiSpec {
 public:
  struct Constant {
    double value;
  };
  /// low for u < threshold, high for u > threshold, [low, high] at threshold.
  struct HeavisideJump {
    double threshold;
    double low;
    double high;
  };
  /// Continuous user map with a declared bound sup |Phi| <= bound.
  struct Continuous {
    std::function<double(double)> fn;
    double bound;
    std::string name;
    /// Set for min(|u|^exponent, cap), which has closed-form clock integrals.
    std::optional<std::pair<double, double>> power_law;
  };
  /// base + epsilon.
  struct RegularizedSum {
    std::shared_ptr<const PhiSpec> base;
    double epsilon;
  };
  using Kind = std::variant<Constant, HeavisideJump, Continuous, RegularizedSum>;

  static PhiSpec constant(double value) {
    require(value >= 0.0 && std::isfinite(value), ErrorKind::InvalidArgument,
            "constant Phi must be finite and nonnegative");
    return PhiSpec(Constant{value});
  }

  static PhiSpec heaviside(double threshold, double low = 0.0, double high = 1.0) {
    require(threshold > 0.0, ErrorKind::InvalidArgument, "Heaviside threshold e_c must be positive");
    require(low >= 0.0 && high >= 0.0, ErrorKind::InvalidArgument,
            "Heaviside levels must be nonnegative");
    return PhiSpec(HeavisideJump{threshold, low, high});
  }

  static PhiSpec continuous(std::function<double(double)> fn, double bound, std::string name) {
    require(static_cast<bool>(fn), ErrorKind::InvalidArgument, "continuous Phi needs a callable");
    require(bound > 0.0 && std::isfinite(bound), ErrorKind::UnboundedPhi,
            "continuous Phi needs a finite positive bound");
    return PhiSpec(Continuous{std::move(fn), bound, std::move(name), std::nullopt});
  }

  /// Phi(u) = min(|u|^exponent, cap).
  static PhiSpec power(double exponent, double cap) {
    require(exponent > 0.0, ErrorKind::InvalidArgument, "power exponent must be positive");
    require(cap > 0.0, ErrorKind::InvalidArgument, "power cap must be positive");
    std::ostringstream name;
    name << "power(" << exponent << ", cap=" << cap << ")";
    PhiSpec p = continuous([exponent, cap](double u) { return std::min(std::pow(std::abs(u), exponent), cap); },
                           cap, name.str());
    std::get<Continuous>(p.kind_).power_law = std::make_pair(exponent, cap);
    return p;
  }

  static PhiSpec regularized(PhiSpec base, double epsilon) {
    require(epsilon > 0.0, ErrorKind::InvalidArgument, "regularization epsilon must be positive");
    return PhiSpec(RegularizedSum{std::make_shared<const PhiSpec>(std::move(base)), epsilon});
  }

  const Kind& kind() const { return kind_; }

  PhiSpec& with_zero_value(double c1) {
    zero_value_ = c1;
    return *this;
  }

  /// Full value set Phi(u).
  Interval values(double u) const {
    return std::visit(
        [u](const auto& k) -> Interval {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, Constant>) {
            return {k.value, k.value};
          } else if constexpr (std::is_same_v<T, HeavisideJump>) {
            if (u < k.threshold) return {k.low, k.low};
            if (u > k.threshold) return {k.high, k.high};
            return {std::min(k.low, k.high), std::max(k.low, k.high)};
          } else if constexpr (std::is_same_v<T, Continuous>) {
            const double v = k.fn(u);
            return {v, v};
          } else {
            const Interval b = k.base->values(u);
            return {b.lo + k.epsilon, b.hi + k.epsilon};
          }
        },
        kind_);
  }

  /// Lower semicontinuous selection inf Phi(u).
  double lower(double u) const { return values(u).lo; }

  double left_limit(double u) const {
    return std::visit(
        [u](const auto& k) -> double {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, HeavisideJump>) {
            return u <= k.threshold ? k.low : k.high;
          } else if constexpr (std::is_same_v<T, RegularizedSum>) {
            return k.base->left_limit(u) + k.epsilon;
          } else {
            return PhiSpec::single(k, u);
          }
        },
        kind_);
  }

  double right_limit(double u) const {
    return std::visit(
        [u](const auto& k) -> double {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, HeavisideJump>) {
            return u < k.threshold ? k.low : k.high;
          } else if constexpr (std::is_same_v<T, RegularizedSum>) {
            return k.base->right_limit(u) + k.epsilon;
          } else {
            return PhiSpec::single(k, u);
          }
        },
        kind_);
  }

  std::vector<double> jump_points() const {
    return std::visit(
        [](const auto& k) -> std::vector<double> {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, HeavisideJump>) {
            if (k.low == k.high) return {};
            return {k.threshold};
          } else if constexpr (std::is_same_v<T, RegularizedSum>) {
            return k.base->jump_points();
          } else {
            return {};
          }
        },
        kind_);
  }

  /// True when Phi is constant between jump points, so every branch of beta is linear.
  bool piecewise_constant() const {
    return std::visit(
        [](const auto& k) -> bool {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, Continuous>) return false;
          else if constexpr (std::is_same_v<T, RegularizedSum>) return k.base->piecewise_constant();
          else return true;
        },
        kind_);
  }

  /// Declared supremum of Phi.
  double sup_bound() const {
    return std::visit(
        [](const auto& k) -> double {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, Constant>) return k.value;
          else if constexpr (std::is_same_v<T, HeavisideJump>) return std::max(k.low, k.high);
          else if constexpr (std::is_same_v<T, Continuous>) return k.bound;
          else return k.base->sup_bound() + k.epsilon;
        },
        kind_);
  }

  /// Non-degeneracy constant c0 (0 for degenerate maps). Continuous maps are
  /// treated as degenerate unless they are regularized.
  double nondegeneracy_constant() const {
    return std::visit(
        [](const auto& k) -> double {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, Constant>) return k.value;
          else if constexpr (std::is_same_v<T, HeavisideJump>) return std::min(k.low, k.high);
          else if constexpr (std::is_same_v<T, Continuous>) return 0.0;
          else return k.base->nondegeneracy_constant() + k.epsilon;
        },
        kind_);
  }

  bool non_degenerate() const { return nondegeneracy_constant() > 0.0; }

  /// Value c1 assigned where u vanishes. Defaults to the liminf of Phi at 0.
  double zero_value() const {
    if (zero_value_) return *zero_value_;
    return std::min(left_limit(0.0), right_limit(0.0));
  }

  bool has_explicit_zero_value() const { return zero_value_.has_value(); }

  std::string describe() const {
    std::ostringstream os;
    std::visit(
        [&os](const auto& k) {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, Constant>) os << "constant(" << k.value << ")";
          else if constexpr (std::is_same_v<T, HeavisideJump>)
            os << "heaviside(e_c=" << k.threshold << ", low=" << k.low << ", high=" << k.high << ")";
          else if constexpr (std::is_same_v<T, Continuous>) os << k.name;
          else os << k.base->describe() << " + " << k.epsilon;
        },
        kind_);
    return os.str();
  }

 private:
  explicit PhiSpec(Kind kind) : kind_(std::move(kind)) {}

  static double single(const Constant& k, double) { return k.value; }
  static double single(const Continuous& k, double u) { return k.fn(u); }

  Kind kind_;
  std::optional<double> zero_value_;
};

}  // namespace pmrep
