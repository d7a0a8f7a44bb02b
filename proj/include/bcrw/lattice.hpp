#pragma once

// Step distributions on Z^d, the covariance-adapted norm and the Green
// constant a_d.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bcrw/errors.hpp"
#include "bcrw/rng.hpp"

namespace bcrw {

inline constexpr int kMaxDim = 8;

/// A site of Z^d. Coordinates past the ambient dimension are kept at zero,
/// so points compare and hash consistently within one model.
using Point = std::array<std::int32_t, kMaxDim>;
using LatticePoint = Point;

inline Point make_point(std::initializer_list<int> coords) {
  Point p{};
  if (coords.size() > static_cast<std::size_t>(kMaxDim))
    throw Error(ErrorCode::InvalidArgument, "point dimension exceeds kMaxDim");
  std::copy(coords.begin(), coords.end(), p.begin());
  return p;
}

inline Point make_point(std::span<const int> coords) {
  Point p{};
  if (coords.size() > static_cast<std::size_t>(kMaxDim))
    throw Error(ErrorCode::InvalidArgument, "point dimension exceeds kMaxDim");
  std::copy(coords.begin(), coords.end(), p.begin());
  return p;
}

inline Point unit_point(int axis, int scale = 1) {
  Point p{};
  p[static_cast<std::size_t>(axis)] = scale;
  return p;
}

inline Point operator+(const Point& a, const Point& b) noexcept {
  Point r;
  for (int i = 0; i < kMaxDim; ++i) r[i] = a[i] + b[i];
  return r;
}

inline Point operator-(const Point& a, const Point& b) noexcept {
  Point r;
  for (int i = 0; i < kMaxDim; ++i) r[i] = a[i] - b[i];
  return r;
}

inline Point operator-(const Point& a) noexcept {
  Point r;
  for (int i = 0; i < kMaxDim; ++i) r[i] = -a[i];
  return r;
}

inline bool is_origin(const Point& p) noexcept {
  return std::all_of(p.begin(), p.end(), [](std::int32_t c) { return c == 0; });
}

inline double euclidean_norm(const Point& p) noexcept {
  double s = 0.0;
  for (auto c : p) s += static_cast<double>(c) * c;
  return std::sqrt(s);
}

inline std::int32_t sup_norm(const Point& p) noexcept {
  std::int32_t m = 0;
  for (auto c : p) m = std::max(m, std::abs(c));
  return m;
}

struct PointHash {
  std::size_t operator()(const Point& p) const noexcept {
    std::uint64_t h = 0x9E3779B97F4A7C15ULL;
    for (auto c : p) {
      std::uint64_t k = static_cast<std::uint32_t>(c) + h;
      h = splitmix64(k);
    }
    return static_cast<std::size_t>(h);
  }
};

struct Atom {
  Point v{};
  double p = 0.0;
};

namespace detail {

// Index of the subgroup generated by `vectors` in Z^dim via integer row
// reduction to Hermite form. Returns 0 when the vectors do not span R^dim.
inline long long lattice_index(std::vector<std::vector<long long>> rows, int dim) {
  long long index = 1;
  std::size_t pivot_row = 0;
  for (int col = 0; col < dim; ++col) {
    // Euclid on column `col` among rows >= pivot_row.
    while (true) {
      std::size_t best = rows.size();
      for (std::size_t r = pivot_row; r < rows.size(); ++r) {
        if (rows[r][col] != 0 &&
            (best == rows.size() || std::llabs(rows[r][col]) < std::llabs(rows[best][col])))
          best = r;
      }
      if (best == rows.size()) return 0;
      std::swap(rows[pivot_row], rows[best]);
      bool reduced = false;
      for (std::size_t r = pivot_row + 1; r < rows.size(); ++r) {
        if (rows[r][col] == 0) continue;
        const long long q = rows[r][col] / rows[pivot_row][col];
        for (int c = col; c < dim; ++c) rows[r][c] -= q * rows[pivot_row][c];
        if (rows[r][col] != 0) reduced = true;
      }
      if (!reduced) break;
    }
    index *= std::llabs(rows[pivot_row][col]);
    ++pivot_row;
  }
  return index;
}

}  // namespace detail

/// Finite-range, centered step law theta on Z^d whose support generates Z^d.
/// Immutable after construction.
class JumpDistribution {
 public:
  JumpDistribution() = default;

  int dim() const noexcept { return dim_; }
  const std::vector<Atom>& atoms() const noexcept { return atoms_; }
  std::size_t size() const noexcept { return atoms_.size(); }
  const Eigen::MatrixXd& covariance() const noexcept { return cov_; }
  double covariance_det() const noexcept { return det_; }
  int range() const noexcept { return range_; }
  bool symmetric() const noexcept { return symmetric_; }

  /// theta(v); zero off the support.
  double prob(const Point& v) const noexcept {
    for (const auto& a : atoms_)
      if (a.v == v) return a.p;
    return 0.0;
  }

  /// Index of v in atoms(), or -1.
  int atom_index(const Point& v) const noexcept {
    for (std::size_t i = 0; i < atoms_.size(); ++i)
      if (atoms_[i].v == v) return static_cast<int>(i);
    return -1;
  }

  /// Squared form x^T Q^{-1} x / d without the |0| convention.
  double norm_sq(const Point& x) const noexcept {
    double s = 0.0;
    for (int i = 0; i < dim_; ++i)
      for (int j = 0; j < dim_; ++j) s += x[i] * cov_inv_(i, j) * x[j];
    return s / dim_;
  }

  /// ||x|| = sqrt(x^T Q^{-1} x / d), with ||0|| = 0.5.
  double norm(const Point& x) const noexcept {
    if (is_origin(x)) return 0.5;
    return std::sqrt(norm_sq(x));
  }

  /// Largest ||v|| over the support.
  double step_norm() const noexcept { return step_norm_; }

  const Point& draw(Rng& rng) const noexcept { return atoms_[alias_(rng)].v; }
  std::size_t draw_index(Rng& rng) const noexcept { return alias_(rng); }

  friend JumpDistribution build_jump_distribution(int dim, std::vector<Atom> atoms);

 private:
  int dim_ = 0;
  std::vector<Atom> atoms_;
  Eigen::MatrixXd cov_;
  Eigen::MatrixXd cov_inv_;
  double det_ = 0.0;
  double step_norm_ = 0.0;
  int range_ = 0;
  bool symmetric_ = false;
  AliasTable alias_;
};

/// Validates and builds a step law. Duplicate vectors are merged.
inline JumpDistribution build_jump_distribution(int dim, std::vector<Atom> atoms) {
  if (dim < 1 || dim > kMaxDim)
    throw Error(ErrorCode::InvalidArgument, "dimension must be in [1, " + std::to_string(kMaxDim) + "]");
  if (atoms.empty()) throw Error(ErrorCode::BadProbabilities, "empty atom list");

  std::map<Point, double> merged;
  for (const auto& a : atoms) {
    for (int i = dim; i < kMaxDim; ++i)
      if (a.v[i] != 0) throw Error(ErrorCode::InvalidArgument, "atom has coordinates beyond dim");
    if (!(a.p > 0.0) || !std::isfinite(a.p))
      throw Error(ErrorCode::BadProbabilities, "atom probabilities must be strictly positive");
    merged[a.v] += a.p;
  }
  double total = 0.0;
  for (const auto& [v, p] : merged) total += p;
  if (std::abs(total - 1.0) > 1e-12)
    throw Error(ErrorCode::BadProbabilities, "probabilities sum to " + std::to_string(total));

  JumpDistribution theta;
  theta.dim_ = dim;
  for (const auto& [v, p] : merged) theta.atoms_.push_back({v, p});

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
  for (const auto& a : theta.atoms_)
    for (int i = 0; i < dim; ++i) mean(i) += a.p * a.v[i];
  if (mean.lpNorm<Eigen::Infinity>() > 1e-12)
    throw Error(ErrorCode::NonCentered, "step law has nonzero mean");

  theta.cov_ = Eigen::MatrixXd::Zero(dim, dim);
  for (const auto& a : theta.atoms_)
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) theta.cov_(i, j) += a.p * a.v[i] * a.v[j];
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(theta.cov_);
  if (eig.eigenvalues().minCoeff() <= 1e-12)
    throw Error(ErrorCode::DegenerateCovariance, "covariance is not positive definite");

  std::vector<std::vector<long long>> rows;
  for (const auto& a : theta.atoms_) {
    if (is_origin(a.v)) continue;
    rows.emplace_back(a.v.begin(), a.v.begin() + dim);
  }
  if (detail::lattice_index(rows, dim) != 1)
    throw Error(ErrorCode::StrictSubgroup, "support generates a strict subgroup of Z^d");

  theta.cov_inv_ = theta.cov_.inverse();
  theta.det_ = theta.cov_.determinant();
  theta.range_ = 0;
  for (const auto& a : theta.atoms_) {
    theta.range_ = std::max(theta.range_, sup_norm(a.v));
    theta.step_norm_ = std::max(theta.step_norm_, std::sqrt(theta.norm_sq(a.v)));
  }
  theta.symmetric_ = std::all_of(theta.atoms_.begin(), theta.atoms_.end(), [&](const Atom& a) {
    return std::abs(theta.prob(-a.v) - a.p) <= 1e-15;
  });
  std::vector<double> w;
  for (const auto& a : theta.atoms_) w.push_back(a.p);
  theta.alias_ = AliasTable(w);
  return theta;
}

/// Simple random walk: +-e_i with probability 1/(2d) each.
inline JumpDistribution simple_random_walk(int dim) {
  std::vector<Atom> atoms;
  for (int i = 0; i < dim; ++i) {
    atoms.push_back({unit_point(i, 1), 1.0 / (2 * dim)});
    atoms.push_back({unit_point(i, -1), 1.0 / (2 * dim)});
  }
  return build_jump_distribution(dim, std::move(atoms));
}

inline double theta_norm(const JumpDistribution& theta, const Point& x) { return theta.norm(x); }

/// a_d from the dimension and det Q.
inline double green_constant(int dim, double det_q) {
  const double d = dim;
  return std::tgamma((d - 2.0) / 2.0) /
         (2.0 * std::pow(d, (d - 2.0) / 2.0) * std::pow(std::numbers::pi, d / 2.0) * std::sqrt(det_q));
}

/// Constant in g(x) ~ a_d ||x||^{2-d}.
inline double green_constant(const JumpDistribution& theta) {
  return green_constant(theta.dim(), theta.covariance_det());
}

/// Empirical constant c with Ball(n/c) inside the Euclidean ball of
/// radius n inside Ball(c n): sqrt of the extreme eigenvalues of d*Q.
inline double norm_equivalence_constant(const JumpDistribution& theta) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(theta.covariance() * theta.dim());
  const double lo = std::sqrt(eig.eigenvalues().minCoeff());
  const double hi = std::sqrt(eig.eigenvalues().maxCoeff());
  return std::max(hi, 1.0 / lo);
}

}  // namespace bcrw
