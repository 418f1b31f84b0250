#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "pmrep/error.hpp"
#include "pmrep/grid.hpp"
#include "pmrep/phi.hpp"
#include "pmrep/pme_solver.hpp"
#include "pmrep/rng.hpp"

namespace pmrep {

enum class SdeMode { Decoupled, Coupled };

struct BandwidthRule {
  enum class Kind { SilvermanScaled, Fixed } kind = Kind::SilvermanScaled;
  double value = 1.0;  // scale factor or fixed bandwidth

  /// `fallback` is used when the ensemble has collapsed to a point.
  double bandwidth(std::span<const double> positions, double fallback) const {
    if (kind == Kind::Fixed) return value;
    const double bw = silverman_bandwidth(positions, value);
    return bw > 0.0 ? bw : fallback;
  }
};

struct SDEConfig {
  std::size_t n_particles = 10000;
  double dt = 1e-3;
  double t_final = 1.0;
  SdeMode mode = SdeMode::Decoupled;
  double epsilon_reg = 0.0;
  BandwidthRule bandwidth;
  std::uint64_t master_seed = 42;
  int refresh_every = 1;
  int snapshot_every = 100;
  /// Grid for snapshot KDEs and, in coupled mode, the interaction density.
  Grid1D kde_grid{8.0, 512};

  int steps() const { return static_cast<int>(std::llround(t_final / dt)); }

  void validate() const {
    require(n_particles >= 1, ErrorKind::InvalidArgument, "n_particles must be at least 1");
    require(dt > 0.0, ErrorKind::InvalidArgument, "dt must be positive");
    require(t_final > 0.0, ErrorKind::InvalidArgument, "t_final must be positive");
    require(epsilon_reg >= 0.0, ErrorKind::InvalidArgument, "epsilon_reg must be nonnegative");
    require(refresh_every >= 1, ErrorKind::InvalidArgument, "refresh_every must be at least 1");
    require(snapshot_every >= 1, ErrorKind::InvalidArgument, "snapshot_every must be at least 1");
    require(std::abs(steps() * dt - t_final) <= 1e-9 * t_final, ErrorKind::InvalidArgument,
            "t_final must be an integer multiple of dt");
  }
};

/// One saved time of a particle run.
struct TrajectoryStats {
  double time = 0.0;
  std::vector<double> positions;
  double mean = 0.0;
  double variance = 0.0;
  /// Mean fourth power of increments since the previous snapshot.
  double increment_m4 = 0.0;
  std::optional<GridDensity> kde;
};

struct SdeRun {
  std::vector<TrajectoryStats> snapshots;
  /// Per particle: sum of squared increments and sum of coefficient^2 dt.
  std::vector<double> quadratic_variation;
  std::vector<double> integrated_coefficient;
  double max_outside_fraction = 0.0;
  std::vector<std::string> warnings;
  std::uint64_t master_seed = 0;

  const TrajectoryStats& final() const { return snapshots.back(); }
};

/// chi(t, x) on the PDE mesh. Piecewise constant in time following the
/// implicit step structure (row j on (t_{j-1}, t_j]); linear in space,
/// extended by the boundary values outside the grid.
class CoefficientField {
 public:
  CoefficientField(Grid1D grid, std::vector<double> times, Field2D values)
      : grid_(grid), times_(std::move(times)), values_(std::move(values)) {
    require(values_.rows() == static_cast<int>(times_.size()) && values_.cols() == grid_.size(),
            ErrorKind::GridMismatch, "coefficient table does not match its mesh");
  }

  static CoefficientField from_solution(const PMESolution& sol) {
    require(!sol.chi.empty(), ErrorKind::InvalidArgument, "solution has no chi field");
    return {sol.config.grid, sol.times, sol.chi};
  }

  static CoefficientField constant(Grid1D grid, double t_final, double value) {
    return {grid, {0.0, t_final}, Field2D(2, grid.size(), value)};
  }

  int row_at(double t) const {
    const auto it = std::lower_bound(times_.begin(), times_.end(), t - 1e-12 * std::max(1.0, t));
    const int j = static_cast<int>(std::distance(times_.begin(), it));
    return std::clamp(j, 0, values_.rows() - 1);
  }

  double at_row(int j, double x) const {
    const double s = (x - grid_.node(0)) / grid_.h();
    if (s <= 0.0) return values_(j, 0);
    const int last = grid_.size() - 1;
    if (s >= last) return values_(j, last);
    const int i = static_cast<int>(s);
    const double c0 = values_(j, i);
    const double c1 = values_(j, i + 1);
    return c0 + (s - i) * (c1 - c0);
  }

  double operator()(double t, double x) const { return at_row(row_at(t), x); }

  const Grid1D& grid() const { return grid_; }

 private:
  Grid1D grid_;
  std::vector<double> times_;
  Field2D values_;
};

namespace detail {

inline TrajectoryStats make_snapshot(double t, const std::vector<double>& pos, const std::vector<double>* prev,
                                     const SDEConfig& cfg) {
  TrajectoryStats s;
  s.time = t;
  s.positions = pos;
  const double n = static_cast<double>(pos.size());
  double mean = 0.0;
  for (double x : pos) mean += x;
  mean /= n;
  double var = 0.0;
  for (double x : pos) var += (x - mean) * (x - mean);
  s.mean = mean;
  s.variance = var / n;
  if (prev) {
    double m4 = 0.0;
    for (std::size_t p = 0; p < pos.size(); ++p) {
      const double d = pos[p] - (*prev)[p];
      m4 += d * d * d * d;
    }
    s.increment_m4 = m4 / n;
  }
  s.kde = kde_density(pos, cfg.bandwidth.bandwidth(pos, cfg.kde_grid.h()), cfg.kde_grid);
  return s;
}

/// Linear interpolation of a grid density at x, zero outside the grid.
inline double density_at(const GridDensity& d, double x) {
  const double s = (x - d.grid.node(0)) / d.grid.h();
  const int last = d.grid.size() - 1;
  if (s < -0.5 || s > last + 0.5) return 0.0;
  if (s <= 0.0) return d.values[0];
  if (s >= last) return d.values[last];
  const int i = static_cast<int>(s);
  return d.values[i] + (s - i) * (d.values[i + 1] - d.values[i]);
}

/// Shared Euler-Maruyama driver; `coefficient(step, t, positions)` fills the
/// per-particle diffusion coefficients.
template <class CoefficientUpdate>
SdeRun run_euler_maruyama(const GridDensity& u0, const SDEConfig& cfg, const Grid1D& domain,
                          CoefficientUpdate&& coefficient) {
  cfg.validate();
  auto streams = make_streams(cfg.master_seed, stream_tag::kParticles, cfg.n_particles);
  std::vector<double> pos = sample_initial(u0, streams);
  const std::size_t n = pos.size();
  SdeRun run;
  run.master_seed = cfg.master_seed;
  run.quadratic_variation.assign(n, 0.0);
  run.integrated_coefficient.assign(n, 0.0);
  run.snapshots.push_back(make_snapshot(0.0, pos, nullptr, cfg));

  std::vector<double> coef(n, 0.0);
  std::vector<double> last_snapshot = pos;
  const double sqrt_dt = std::sqrt(cfg.dt);
  const int steps = cfg.steps();
  for (int k = 0; k < steps; ++k) {
    const double t = k * cfg.dt;
    coefficient(k, t, pos, coef);
    for (std::size_t p = 0; p < n; ++p) {
      const double dy = coef[p] * sqrt_dt * streams[p].normal();
      pos[p] += dy;
      run.quadratic_variation[p] += dy * dy;
      run.integrated_coefficient[p] += coef[p] * coef[p] * cfg.dt;
    }
    const double outside = static_cast<double>(count_outside(pos, domain)) / static_cast<double>(n);
    run.max_outside_fraction = std::max(run.max_outside_fraction, outside);
    if ((k + 1) % cfg.snapshot_every == 0 || k + 1 == steps) {
      run.snapshots.push_back(make_snapshot((k + 1) * cfg.dt, pos, &last_snapshot, cfg));
      last_snapshot = pos;
    }
  }
  if (run.max_outside_fraction > 0.01) {
    std::ostringstream msg;
    msg << "OutOfDomainFraction: up to " << run.max_outside_fraction << " of particles left [-L, L]";
    run.warnings.push_back(msg.str());
  }
  return run;
}

}  // namespace detail

/// Euler-Maruyama for dY = chi(t, Y) dW with chi frozen from a PDE solution.
inline SdeRun simulate_decoupled(const CoefficientField& chi, const GridDensity& u0, const SDEConfig& cfg) {
  return detail::run_euler_maruyama(u0, cfg, chi.grid(),
                                    [&chi](int, double t, const std::vector<double>& pos, std::vector<double>& coef) {
                                      const int row = chi.row_at(t);
                                      for (std::size_t p = 0; p < pos.size(); ++p) coef[p] = chi.at_row(row, pos[p]);
                                    });
}

/// Self-interacting particles: the coefficient is inf Phi(u_hat(t, Y)) + eps,
/// with u_hat the KDE of the current ensemble refreshed every k steps.
inline SdeRun simulate_coupled(const PhiSpec& phi, const GridDensity& u0, const SDEConfig& cfg) {
  std::vector<std::string> warnings;
  if (!phi.non_degenerate() && cfg.epsilon_reg == 0.0) {
    warnings.emplace_back("DegenerateWithoutRegularization: degenerate Phi with epsilon_reg = 0");
  }
  std::optional<GridDensity> density;
  SdeRun run = detail::run_euler_maruyama(
      u0, cfg, cfg.kde_grid,
      [&](int step, double, const std::vector<double>& pos, std::vector<double>& coef) {
        if (!density || step % cfg.refresh_every == 0) {
          density = kde_density(pos, cfg.bandwidth.bandwidth(pos, cfg.kde_grid.h()), cfg.kde_grid);
        }
        for (std::size_t p = 0; p < pos.size(); ++p) {
          coef[p] = phi.lower(detail::density_at(*density, pos[p])) + cfg.epsilon_reg;
        }
      });
  run.warnings.insert(run.warnings.begin(), warnings.begin(), warnings.end());
  return run;
}

/// Phi(x) = min(|x|^p, cap) with 2p < 1, the shape for which the clock
/// integral of 1/Phi^2 along a linear segment has a closed form.
class PowerLawClock {
 public:
  PowerLawClock(double exponent, double cap) : p_(exponent), cap_(cap) {
    require(exponent > 0.0 && 2.0 * exponent < 1.0, ErrorKind::InvalidArgument,
            "clock needs 0 < exponent < 1/2 so that 1/Phi^2 is integrable at 0");
    require(cap > 0.0, ErrorKind::InvalidArgument, "cap must be positive");
    knee_ = std::pow(cap_, 1.0 / p_);
  }

  static PowerLawClock from_phi(const PhiSpec& phi) {
    const auto* c = std::get_if<PhiSpec::Continuous>(&phi.kind());
    require(c && c->power_law.has_value(), ErrorKind::InvalidArgument,
            "counterexample needs a power-law Phi = min(|x|^p, cap)");
    return {c->power_law->first, c->power_law->second};
  }

  double phi(double x) const { return std::min(std::pow(std::abs(x), p_), cap_); }

  /// 1 / Phi(x)^2.
  double inverse_square(double x) const {
    const double f = phi(x);
    return 1.0 / (f * f);
  }

  /// Odd antiderivative of 1/Phi^2 vanishing at 0.
  double antiderivative(double x) const {
    const double a = std::abs(x);
    const double q = 1.0 - 2.0 * p_;
    const double inner = std::pow(std::min(a, knee_), q) / q;
    const double outer = a > knee_ ? (a - knee_) / (cap_ * cap_) : 0.0;
    return std::copysign(inner + outer, x);
  }

  /// Exact time integral of 1/Phi^2(B) over a step where B moves linearly from b0 to b1.
  double segment_integral(double b0, double b1, double duration) const {
    if (b1 == b0) return duration * inverse_square(b0);
    return duration * (antiderivative(b1) - antiderivative(b0)) / (b1 - b0);
  }

 private:
  double p_;
  double cap_;
  double knee_;
};

/// One time-changed path M_t = B_{A_t} with A the inverse of T_s = int_0^s du / Phi^2(B_u).
struct ClockPath {
  std::vector<double> times;
  std::vector<double> values;  // M at the output times
  std::vector<double> clock;   // A at the output times
  int resamples = 0;
};

struct CounterexampleOptions {
  double dt_internal = 1e-4;
  int max_resamples = 16;
};

inline ClockPath engelbert_schmidt_path(const PowerLawClock& clock, double dt_out, double t_final, StreamId id,
                                        const CounterexampleOptions& opt = {}) {
  require(dt_out > 0.0 && t_final > 0.0 && opt.dt_internal > 0.0, ErrorKind::InvalidArgument,
          "counterexample step sizes must be positive");
  const int n_out = static_cast<int>(std::llround(t_final / dt_out));
  for (int attempt = 0; attempt <= opt.max_resamples; ++attempt) {
    StreamId sid = id;
    sid.index += static_cast<std::uint64_t>(attempt) << 40;
    RandomStream rng(sid);
    ClockPath path;
    path.resamples = attempt;
    path.times.reserve(n_out + 1);
    path.values.reserve(n_out + 1);
    path.clock.reserve(n_out + 1);
    path.times.push_back(0.0);
    path.values.push_back(0.0);
    path.clock.push_back(0.0);
    const double sqrt_dt = std::sqrt(opt.dt_internal);
    double s = 0.0;
    double b = 0.0;
    double T = 0.0;
    int next = 1;
    bool broken = false;
    while (next <= n_out) {
      const double b1 = b + sqrt_dt * rng.normal();
      const double dT = clock.segment_integral(b, b1, opt.dt_internal);
      if (!(dT > 0.0) || !std::isfinite(dT)) {
        broken = true;
        break;
      }
      const double T1 = T + dT;
      while (next <= n_out && next * dt_out <= T1) {
        const double target = next * dt_out;
        const double theta = std::clamp((target - T) / dT, 0.0, 1.0);
        path.times.push_back(target);
        path.values.push_back(b + theta * (b1 - b));
        path.clock.push_back(s + theta * opt.dt_internal);
        ++next;
      }
      s += opt.dt_internal;
      b = b1;
      T = T1;
    }
    if (!broken) return path;
  }
  fail(ErrorKind::ClockInversionFailure, "clock not strictly increasing after all resamples");
}

struct CounterexamplePair {
  SdeRun trivial;
  SdeRun nontrivial;
  int resampled_paths = 0;
};

/// Two weak solutions of dY = Phi(Y) dW, Y_0 = 0: the constant path and the
/// time-changed Brownian motion. Snapshots every cfg.snapshot_every output steps.
inline CounterexamplePair engelbert_schmidt_pair(const PhiSpec& phi, const SDEConfig& cfg,
                                                 const CounterexampleOptions& opt = {}) {
  cfg.validate();
  require(phi.lower(0.0) == 0.0, ErrorKind::InvalidArgument, "counterexample needs Phi(0) = 0");
  const PowerLawClock clock = PowerLawClock::from_phi(phi);
  const std::size_t n = cfg.n_particles;
  const int n_out = cfg.steps();

  std::vector<ClockPath> paths;
  paths.reserve(n);
  CounterexamplePair out;
  for (std::size_t p = 0; p < n; ++p) {
    paths.push_back(engelbert_schmidt_path(clock, cfg.dt, cfg.t_final,
                                           StreamId{cfg.master_seed, stream_tag::kCounterexample, p}, opt));
    out.resampled_paths += paths.back().resamples > 0 ? 1 : 0;
  }

  const auto build = [&](bool trivial) {
    SdeRun run;
    run.master_seed = cfg.master_seed;
    run.quadratic_variation.assign(n, 0.0);
    run.integrated_coefficient.assign(n, 0.0);
    std::vector<double> pos(n, 0.0);
    std::vector<double> last(n, 0.0);
    run.snapshots.push_back(detail::make_snapshot(0.0, pos, nullptr, cfg));
    for (int k = 1; k <= n_out; ++k) {
      for (std::size_t p = 0; p < n; ++p) {
        const double prev = pos[p];
        pos[p] = trivial ? 0.0 : paths[p].values[k];
        const double d = pos[p] - prev;
        run.quadratic_variation[p] += d * d;
        const double c = clock.phi(prev);
        run.integrated_coefficient[p] += trivial ? 0.0 : c * c * cfg.dt;
      }
      if (k % cfg.snapshot_every == 0 || k == n_out) {
        run.snapshots.push_back(detail::make_snapshot(k * cfg.dt, pos, &last, cfg));
        last = pos;
      }
    }
    return run;
  };
  out.trivial = build(true);
  out.nontrivial = build(false);
  return out;
}

struct QuadraticVariationCheck {
  double realized = 0.0;      // sum of squared increments of M
  double clock = 0.0;         // A_t
  double integrated = 0.0;    // int_0^t Phi^2(M_s) ds, trapezoid on the output mesh
  double realized_rel_error() const { return std::abs(realized - integrated) / integrated; }
  double clock_rel_error() const { return std::abs(clock - integrated) / integrated; }
};

inline QuadraticVariationCheck quadratic_variation_check(const PowerLawClock& clock, const ClockPath& path) {
  QuadraticVariationCheck q;
  for (std::size_t k = 1; k < path.values.size(); ++k) {
    const double d = path.values[k] - path.values[k - 1];
    q.realized += d * d;
    const double f0 = clock.phi(path.values[k - 1]);
    const double f1 = clock.phi(path.values[k]);
    q.integrated += 0.5 * (f0 * f0 + f1 * f1) * (path.times[k] - path.times[k - 1]);
  }
  q.clock = path.clock.back();
  return q;
}

struct VarianceInterval {
  double variance = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

/// Normal-approximation confidence interval for the variance of a sample.
inline VarianceInterval variance_confidence(std::span<const double> xs, double z = 2.5758293035489004) {
  const double n = static_cast<double>(xs.size());
  require(n >= 2, ErrorKind::InvalidArgument, "variance interval needs two samples");
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= n;
  double spread = 0.0;
  for (double x : xs) {
    const double d = (x - mean) * (x - mean) - var;
    spread += d * d;
  }
  const double se = std::sqrt(spread / (n - 1.0) / n);
  return {var, var - z * se, var + z * se};
}

struct MomentRow {
  double s = 0.0;
  double t = 0.0;
  double mean = 0.0;
  double variance = 0.0;
  double m4 = 0.0;
  double bound = 0.0;
  bool within_bound = true;
};

struct MomentReport {
  std::vector<MomentRow> rows;
  /// Largest m4 / (t - s)^2 over the rows with s < t.
  double fitted_constant = 0.0;
  bool all_within_bound() const {
    return std::all_of(rows.begin(), rows.end(), [](const MomentRow& r) { return r.within_bound; });
  }
};

/// Fourth moments of increments between snapshot pairs (index_s, index_t),
/// checked against factor * coef_sup^4 (t-s)^2 (1 + 5/sqrt(N)).
inline MomentReport increment_moment_report(const std::vector<TrajectoryStats>& timeline,
                                            const std::vector<std::pair<int, int>>& lags, double coef_sup,
                                            double factor = 3.0) {
  require(timeline.size() >= 2, ErrorKind::InvalidArgument, "moment report needs two snapshots");
  MomentReport rep;
  for (const auto& [a, b] : lags) {
    require(a >= 0 && b >= a && b < static_cast<int>(timeline.size()), ErrorKind::InvalidArgument,
            "lag indices out of range");
    const auto& ys = timeline[a].positions;
    const auto& yt = timeline[b].positions;
    const double n = static_cast<double>(ys.size());
    MomentRow r;
    r.s = timeline[a].time;
    r.t = timeline[b].time;
    double mean = 0.0;
    double sq = 0.0;
    double m4 = 0.0;
    for (std::size_t p = 0; p < ys.size(); ++p) {
      const double d = yt[p] - ys[p];
      mean += d;
      sq += d * d;
      m4 += d * d * d * d;
    }
    r.mean = mean / n;
    r.variance = sq / n - r.mean * r.mean;
    r.m4 = m4 / n;
    const double lag = r.t - r.s;
    r.bound = factor * std::pow(coef_sup, 4) * lag * lag * (1.0 + 5.0 / std::sqrt(n));
    r.within_bound = r.m4 <= r.bound;
    if (lag > 0.0) rep.fitted_constant = std::max(rep.fitted_constant, r.m4 / (lag * lag));
    rep.rows.push_back(r);
  }
  return rep;
}

/// Snapshot pairs (0, k) and (k, k + 1) covering every recorded lag.
inline std::vector<std::pair<int, int>> default_lag_ladder(std::size_t snapshots) {
  std::vector<std::pair<int, int>> lags;
  for (int k = 1; k < static_cast<int>(snapshots); ++k) {
    lags.emplace_back(0, k);
    lags.emplace_back(k - 1, k);
  }
  return lags;
}

}  // namespace pmrep
