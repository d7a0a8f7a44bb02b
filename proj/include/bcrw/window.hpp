#pragma once

// Finite ||.||-balls of Z^d used as the computational surrogate for the
// whole lattice. Sites outside are absorbing.

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "bcrw/errors.hpp"
#include "bcrw/lattice.hpp"

namespace bcrw {

struct WindowSpec {
  Point center{};
  double radius = 1.0;
};

class Window {
 public:
  Window(const JumpDistribution& theta, WindowSpec spec) : dim_(theta.dim()), spec_(spec) {
    if (!(spec.radius >= 1.0))
      throw Error(ErrorCode::InvalidArgument, "window radius must be >= 1");
    // |x_i| <= r sqrt(d Q_ii) whenever ||x|| <= r.
    std::vector<int> half(dim_);
    std::size_t box = 1;
    for (int i = 0; i < dim_; ++i) {
      half[i] = static_cast<int>(std::floor(spec.radius * std::sqrt(dim_ * theta.covariance()(i, i)) + 1e-9));
      extent_[i] = 2 * half[i] + 1;
      lo_[i] = spec.center[i] - half[i];
      box *= static_cast<std::size_t>(extent_[i]);
    }
    if (box > (std::size_t{1} << 31))
      throw Error(ErrorCode::BudgetExceeded, "window bounding box too large");
    stride_[0] = 1;
    for (int i = 1; i < dim_; ++i) stride_[i] = stride_[i - 1] * extent_[i - 1];
    box_index_.assign(box, -1);

    const double r2 = spec.radius * spec.radius + 1e-9;
    Point p{};
    std::vector<int> cursor(dim_, 0);
    for (std::size_t flat = 0; flat < box; ++flat) {
      for (int i = 0; i < dim_; ++i) p[i] = lo_[i] + cursor[i];
      if (theta.norm_sq(p - spec.center) <= r2) {
        box_index_[flat] = static_cast<std::int32_t>(sites_.size());
        sites_.push_back(p);
      }
      for (int i = 0; i < dim_; ++i) {
        if (++cursor[i] < extent_[i]) break;
        cursor[i] = 0;
      }
    }

    n_atoms_ = theta.size();
    step_prob_.reserve(n_atoms_);
    for (const auto& a : theta.atoms()) step_prob_.push_back(a.p);
    fwd_.assign(sites_.size() * n_atoms_, -1);
    bwd_.assign(sites_.size() * n_atoms_, -1);
    interior_.assign(sites_.size(), 1);
    for (std::size_t s = 0; s < sites_.size(); ++s) {
      for (std::size_t a = 0; a < n_atoms_; ++a) {
        const auto& v = theta.atoms()[a].v;
        const auto f = index_of(sites_[s] + v);
        const auto b = index_of(sites_[s] - v);
        fwd_[s * n_atoms_ + a] = f.value_or(-1);
        bwd_[s * n_atoms_ + a] = b.value_or(-1);
        if (!f) interior_[s] = 0;
      }
    }
  }

  int dim() const noexcept { return dim_; }
  const WindowSpec& spec() const noexcept { return spec_; }
  std::size_t size() const noexcept { return sites_.size(); }
  std::size_t atoms() const noexcept { return n_atoms_; }
  const std::vector<Point>& sites() const noexcept { return sites_; }
  const Point& site(std::size_t i) const noexcept { return sites_[i]; }
  double step_prob(std::size_t a) const noexcept { return step_prob_[a]; }

  /// Site index of x + v_a, or -1 when it leaves the window.
  std::int32_t forward(std::size_t site, std::size_t atom) const noexcept {
    return fwd_[site * n_atoms_ + atom];
  }
  /// Site index of x - v_a, or -1.
  std::int32_t backward(std::size_t site, std::size_t atom) const noexcept {
    return bwd_[site * n_atoms_ + atom];
  }
  /// True when every one-step neighbour of the site lies in the window.
  bool interior(std::size_t site) const noexcept { return interior_[site] != 0; }

  std::optional<std::int32_t> index_of(const Point& x) const noexcept {
    std::size_t flat = 0;
    for (int i = 0; i < dim_; ++i) {
      const int off = x[i] - lo_[i];
      if (off < 0 || off >= extent_[i]) return std::nullopt;
      flat += static_cast<std::size_t>(off) * static_cast<std::size_t>(stride_[i]);
    }
    for (int i = dim_; i < kMaxDim; ++i)
      if (x[i] != 0) return std::nullopt;
    const auto idx = box_index_[flat];
    if (idx < 0) return std::nullopt;
    return idx;
  }

  bool contains(const Point& x) const noexcept { return index_of(x).has_value(); }

  std::int32_t require(const Point& x) const {
    const auto idx = index_of(x);
    if (!idx) throw Error(ErrorCode::WindowTooSmall, "point outside window");
    return *idx;
  }

 private:
  int dim_;
  WindowSpec spec_;
  std::array<int, kMaxDim> lo_{};
  std::array<int, kMaxDim> extent_{};
  std::array<std::size_t, kMaxDim> stride_{};
  std::vector<std::int32_t> box_index_;
  std::vector<Point> sites_;
  std::size_t n_atoms_ = 0;
  std::vector<double> step_prob_;
  std::vector<std::int32_t> fwd_;
  std::vector<std::int32_t> bwd_;
  std::vector<std::uint8_t> interior_;
};

}  // namespace bcrw
