#pragma once

#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace bcrw::ref {

/// Goodness-of-fit p-value of observed counts against cell probabilities.
/// Cells with expected count below 5 are pooled into their right neighbour.
inline double chi_square_pvalue(std::span<const std::uint64_t> observed, std::span<const double> probs) {
  double n = 0.0;
  for (auto c : observed) n += static_cast<double>(c);
  std::vector<double> obs, expct;
  double o = 0.0, e = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    o += i < observed.size() ? static_cast<double>(observed[i]) : 0.0;
    e += n * probs[i];
    if (e >= 5.0) {
      obs.push_back(o);
      expct.push_back(e);
      o = e = 0.0;
    }
  }
  for (std::size_t i = probs.size(); i < observed.size(); ++i) o += static_cast<double>(observed[i]);
  if (!obs.empty()) {
    obs.back() += o;
    expct.back() += e;
  }
  if (obs.size() < 2) return 1.0;
  double stat = 0.0;
  for (std::size_t i = 0; i < obs.size(); ++i) stat += (obs[i] - expct[i]) * (obs[i] - expct[i]) / expct[i];
  boost::math::chi_squared_distribution<double> dist(static_cast<double>(obs.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

/// Two-sample homogeneity p-value for two count histograms over the same cells.
inline double chi_square_two_sample_pvalue(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b) {
  double na = 0.0, nb = 0.0;
  for (auto c : a) na += static_cast<double>(c);
  for (auto c : b) nb += static_cast<double>(c);
  const std::size_t cells = std::max(a.size(), b.size());
  std::vector<double> ca, cb;
  double sa = 0.0, sb = 0.0;
  for (std::size_t i = 0; i < cells; ++i) {
    sa += i < a.size() ? static_cast<double>(a[i]) : 0.0;
    sb += i < b.size() ? static_cast<double>(b[i]) : 0.0;
    if (sa + sb >= 20.0) {
      ca.push_back(sa);
      cb.push_back(sb);
      sa = sb = 0.0;
    }
  }
  if (!ca.empty()) {
    ca.back() += sa;
    cb.back() += sb;
  }
  if (ca.size() < 2) return 1.0;
  double stat = 0.0;
  const double n = na + nb;
  for (std::size_t i = 0; i < ca.size(); ++i) {
    const double tot = ca[i] + cb[i];
    const double ea = tot * na / n, eb = tot * nb / n;
    stat += (ca[i] - ea) * (ca[i] - ea) / ea + (cb[i] - eb) * (cb[i] - eb) / eb;
  }
  boost::math::chi_squared_distribution<double> dist(static_cast<double>(ca.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

struct MeanVar {
  double mean = 0.0, var = 0.0;
  std::size_t n = 0;
  double stderr_() const { return std::sqrt(var / static_cast<double>(n)); }
};

inline MeanVar mean_var(std::span<const double> xs) {
  MeanVar m;
  m.n = xs.size();
  for (double x : xs) m.mean += x;
  m.mean /= static_cast<double>(m.n);
  for (double x : xs) m.var += (x - m.mean) * (x - m.mean);
  m.var /= static_cast<double>(m.n - 1);
  return m;
}

}  // namespace bcrw::ref
