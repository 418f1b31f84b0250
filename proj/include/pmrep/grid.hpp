#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <numeric>
#include <span>
#include <sstream>
#include <vector>

#include "pmrep/error.hpp"
#include "pmrep/rng.hpp"

namespace pmrep {

/// Uniform cell-centred grid on [-L, L] truncating the real line.
class Grid1D {
 public:
  Grid1D(double half_width, int cells) : half_width_(half_width), cells_(cells) {
    require(half_width > 0.0 && std::isfinite(half_width), ErrorKind::InvalidArgument,
            "grid half-width must be positive");
    require(cells >= 8, ErrorKind::InvalidArgument, "grid needs at least 8 cells");
    h_ = 2.0 * half_width / cells;
  }

  double half_width() const { return half_width_; }
  int size() const { return cells_; }
  double h() const { return h_; }
  double node(int i) const { return -half_width_ + (i + 0.5) * h_; }
  double left_edge(int i) const { return -half_width_ + i * h_; }

  std::vector<double> nodes() const {
    std::vector<double> xs(cells_);
    for (int i = 0; i < cells_; ++i) xs[i] = node(i);
    return xs;
  }

  /// Index of the cell containing x, clamped to the grid.
  int cell_of(double x) const {
    const int i = static_cast<int>(std::floor((x + half_width_) / h_));
    return std::clamp(i, 0, cells_ - 1);
  }

  bool same_as(const Grid1D& other) const {
    return cells_ == other.cells_ && half_width_ == other.half_width_;
  }

 private:
  double half_width_;
  int cells_;
  double h_;
};

inline void require_same_grid(const Grid1D& a, const Grid1D& b) {
  if (!a.same_as(b)) {
    std::ostringstream msg;
    msg << "grids differ: (L=" << a.half_width() << ", n=" << a.size() << ") vs (L=" << b.half_width()
        << ", n=" << b.size() << ")";
    fail(ErrorKind::GridMismatch, msg.str());
  }
}

/// Pointwise values of a function at the grid nodes.
struct GridDensity {
  Grid1D grid;
  std::vector<double> values;

  explicit GridDensity(Grid1D g) : grid(g), values(static_cast<std::size_t>(g.size()), 0.0) {}
  GridDensity(Grid1D g, std::vector<double> v) : grid(g), values(std::move(v)) {
    require(static_cast<int>(values.size()) == grid.size(), ErrorKind::GridMismatch,
            "value count does not match grid");
  }

  static GridDensity sample(Grid1D g, const std::function<double(double)>& f) {
    GridDensity d(g);
    for (int i = 0; i < g.size(); ++i) d.values[i] = f(g.node(i));
    return d;
  }

  GridDensity& operator*=(double s) {
    for (double& v : values) v *= s;
    return *this;
  }
};

inline GridDensity operator-(const GridDensity& a, const GridDensity& b) {
  require_same_grid(a.grid, b.grid);
  GridDensity out(a.grid);
  for (std::size_t i = 0; i < a.values.size(); ++i) out.values[i] = a.values[i] - b.values[i];
  return out;
}

struct Atom {
  double position = 0.0;
  double mass = 0.0;
};

/// Finite signed measure: per-cell masses plus Dirac atoms.
struct SignedGridMeasure {
  Grid1D grid;
  std::vector<double> weights;
  std::vector<Atom> atoms;

  explicit SignedGridMeasure(Grid1D g) : grid(g), weights(static_cast<std::size_t>(g.size()), 0.0) {}

  static SignedGridMeasure from_density(const GridDensity& d) {
    SignedGridMeasure m(d.grid);
    for (std::size_t i = 0; i < d.values.size(); ++i) m.weights[i] = d.grid.h() * d.values[i];
    return m;
  }

  static SignedGridMeasure dirac(Grid1D g, double position, double mass = 1.0) {
    SignedGridMeasure m(g);
    m.atoms.push_back({position, mass});
    return m;
  }

  /// Density view: cell weights divided by h, each atom split linearly
  /// between its two nearest nodes.
  GridDensity to_density() const {
    GridDensity d(grid);
    const double h = grid.h();
    for (std::size_t i = 0; i < weights.size(); ++i) d.values[i] = weights[i] / h;
    for (const auto& a : atoms) {
      const double s = (a.position - grid.node(0)) / h;
      const int i0 = std::clamp(static_cast<int>(std::floor(s)), 0, grid.size() - 1);
      const int i1 = std::min(i0 + 1, grid.size() - 1);
      const double theta = std::clamp(s - i0, 0.0, 1.0);
      d.values[i0] += (1.0 - theta) * a.mass / h;
      if (i1 != i0) d.values[i1] += theta * a.mass / h;
      else d.values[i0] += theta * a.mass / h;
    }
    return d;
  }
};

inline SignedGridMeasure operator-(const SignedGridMeasure& a, const SignedGridMeasure& b) {
  require_same_grid(a.grid, b.grid);
  SignedGridMeasure out(a.grid);
  for (std::size_t i = 0; i < a.weights.size(); ++i) out.weights[i] = a.weights[i] - b.weights[i];
  out.atoms = a.atoms;
  for (const auto& at : b.atoms) out.atoms.push_back({at.position, -at.mass});
  return out;
}

/// Particle positions at one time, with the streams they were drawn from.
struct ParticleEnsemble {
  std::vector<double> positions;
  double time = 0.0;
  std::uint64_t master_seed = 0;
  std::uint64_t stream_tag = 0;

  std::size_t size() const { return positions.size(); }
};

inline double mass(const GridDensity& d) {
  return d.grid.h() * std::accumulate(d.values.begin(), d.values.end(), 0.0);
}

inline double norm_linf(const GridDensity& d) {
  double m = 0.0;
  for (double v : d.values) m = std::max(m, std::abs(v));
  return m;
}

inline double norm_l1(const GridDensity& d) {
  double s = 0.0;
  for (double v : d.values) s += std::abs(v);
  return d.grid.h() * s;
}

inline double norm_l2(const GridDensity& d) {
  double s = 0.0;
  for (double v : d.values) s += v * v;
  return std::sqrt(d.grid.h() * s);
}

inline double min_value(const GridDensity& d) {
  return d.values.empty() ? 0.0 : *std::min_element(d.values.begin(), d.values.end());
}

inline double total_variation(const SignedGridMeasure& m) {
  double s = 0.0;
  for (double w : m.weights) s += std::abs(w);
  for (const auto& a : m.atoms) s += std::abs(a.mass);
  return s;
}

inline double l1_distance(const GridDensity& a, const GridDensity& b) {
  require_same_grid(a.grid, b.grid);
  double s = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) s += std::abs(a.values[i] - b.values[i]);
  return a.grid.h() * s;
}

/// W1 on the line as the L1 distance between cumulative distribution functions.
inline double wasserstein1(const GridDensity& a, const GridDensity& b) {
  require_same_grid(a.grid, b.grid);
  const double h = a.grid.h();
  double cdf_gap = 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    cdf_gap += h * (a.values[i] - b.values[i]);
    s += std::abs(cdf_gap);
  }
  return h * s;
}

/// Block average of a density onto a coarser grid with the same half-width.
inline GridDensity restrict_to(const GridDensity& fine, const Grid1D& coarse) {
  require(fine.grid.half_width() == coarse.half_width() && fine.grid.size() % coarse.size() == 0,
          ErrorKind::GridMismatch, "restriction needs nested grids");
  const int ratio = fine.grid.size() / coarse.size();
  GridDensity out(coarse);
  for (int i = 0; i < coarse.size(); ++i) {
    double s = 0.0;
    for (int k = 0; k < ratio; ++k) s += fine.values[i * ratio + k];
    out.values[i] = s / ratio;
  }
  return out;
}

/// Bandwidth factor * 1.06 * sigma_hat * N^(-1/5).
inline double silverman_bandwidth(std::span<const double> positions, double factor = 1.0) {
  require(!positions.empty(), ErrorKind::InvalidArgument, "bandwidth needs at least one particle");
  const double n = static_cast<double>(positions.size());
  double mean = 0.0;
  for (double x : positions) mean += x;
  mean /= n;
  double var = 0.0;
  for (double x : positions) var += (x - mean) * (x - mean);
  var /= std::max(1.0, n - 1.0);
  const double sigma = std::sqrt(var);
  return factor * 1.06 * sigma * std::pow(n, -0.2);
}

/// Kernel support radius in bandwidths; the Gaussian tail beyond it is below 1e-17.
inline constexpr double kKdeCutoff = 9.0;

/// Gaussian kernel density estimate of the ensemble at the grid nodes.
inline GridDensity kde_density(std::span<const double> positions, double bandwidth, const Grid1D& grid) {
  require(bandwidth > 0.0, ErrorKind::InvalidArgument, "KDE bandwidth must be positive");
  require(!positions.empty(), ErrorKind::InvalidArgument, "KDE needs at least one particle");
  GridDensity d(grid);
  const double h = grid.h();
  const double inv_bw = 1.0 / bandwidth;
  const double norm = inv_bw / (std::sqrt(2.0 * std::numbers::pi) * static_cast<double>(positions.size()));
  const double reach = kKdeCutoff * bandwidth;
  for (double p : positions) {
    const int first = std::max(0, static_cast<int>(std::ceil((p - reach - grid.node(0)) / h)));
    const int last = std::min(grid.size() - 1, static_cast<int>(std::floor((p + reach - grid.node(0)) / h)));
    for (int i = first; i <= last; ++i) {
      const double z = (grid.node(i) - p) * inv_bw;
      d.values[i] += std::exp(-0.5 * z * z);
    }
  }
  for (double& v : d.values) v *= norm;
  return d;
}

inline GridDensity kde_density(const ParticleEnsemble& p, double bandwidth, const Grid1D& grid) {
  return kde_density(std::span<const double>(p.positions), bandwidth, grid);
}

/// Empirical measure of an ensemble (mass 1/N per particle) deposited on the
/// nodes by linear splitting; particles outside the grid go to the end nodes.
inline SignedGridMeasure empirical_measure(std::span<const double> positions, const Grid1D& grid) {
  require(!positions.empty(), ErrorKind::InvalidArgument, "empirical measure needs at least one particle");
  SignedGridMeasure m(grid);
  const double w = 1.0 / static_cast<double>(positions.size());
  const int last = grid.size() - 1;
  for (double x : positions) {
    const double s = std::clamp((x - grid.node(0)) / grid.h(), 0.0, static_cast<double>(last));
    const int i = std::min(static_cast<int>(s), last - 1);
    const double theta = s - i;
    m.weights[i] += (1.0 - theta) * w;
    m.weights[i + 1] += theta * w;
  }
  return m;
}

/// Number of particles farther than `margin` outside [-L, L].
inline std::size_t count_outside(std::span<const double> positions, const Grid1D& grid, double margin = 0.0) {
  const double edge = grid.half_width() + margin;
  return static_cast<std::size_t>(
      std::count_if(positions.begin(), positions.end(), [edge](double x) { return std::abs(x) > edge; }));
}

/// Inverse-CDF draws from the piecewise-constant density, one uniform per
/// stream. Zero-mass cells are never selected.
inline std::vector<double> sample_initial(const GridDensity& u0, std::span<RandomStream> streams) {
  require(!streams.empty(), ErrorKind::InvalidArgument, "need at least one particle");
  const Grid1D& g = u0.grid;
  std::vector<double> cdf(static_cast<std::size_t>(g.size()) + 1, 0.0);
  for (int i = 0; i < g.size(); ++i) {
    require(u0.values[i] >= 0.0, ErrorKind::InvalidArgument, "initial density must be nonnegative");
    cdf[i + 1] = cdf[i] + g.h() * u0.values[i];
  }
  const double total = cdf.back();
  require(total > 0.0, ErrorKind::ZeroMass, "initial density has zero mass");
  std::vector<double> positions(streams.size());
  for (std::size_t p = 0; p < streams.size(); ++p) {
    const double target = streams[p].uniform() * total;
    auto it = std::upper_bound(cdf.begin() + 1, cdf.end(), target);
    int cell = static_cast<int>(std::distance(cdf.begin(), it)) - 1;
    cell = std::clamp(cell, 0, g.size() - 1);
    while (cell > 0 && u0.values[cell] <= 0.0) --cell;
    while (cell < g.size() - 1 && u0.values[cell] <= 0.0) ++cell;
    const double cell_mass = cdf[cell + 1] - cdf[cell];
    const double frac = cell_mass > 0.0 ? std::clamp((target - cdf[cell]) / cell_mass, 0.0, 1.0) : 0.5;
    positions[p] = g.left_edge(cell) + frac * g.h();
  }
  return positions;
}

inline std::vector<RandomStream> make_streams(std::uint64_t master_seed, std::uint64_t tag, std::size_t count) {
  std::vector<RandomStream> streams;
  streams.reserve(count);
  for (std::size_t i = 0; i < count; ++i) streams.emplace_back(StreamId{master_seed, tag, i});
  return streams;
}

inline ParticleEnsemble sample_initial(const GridDensity& u0, std::size_t count, std::uint64_t master_seed,
                                       std::uint64_t tag = stream_tag::kParticles) {
  require(count >= 1, ErrorKind::InvalidArgument, "ensemble needs at least one particle");
  auto streams = make_streams(master_seed, tag, count);
  ParticleEnsemble e;
  e.positions = sample_initial(u0, streams);
  e.master_seed = master_seed;
  e.stream_tag = tag;
  return e;
}

}  // namespace pmrep
