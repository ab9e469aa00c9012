#pragma once

// Deterministic 1-D quadrature for codebook training and density checks:
// composite Gauss-Legendre with 128 panels of 32 nodes (4096 evaluations per
// integral), a prefix-summed panel-moment table so iterative training reuses
// interior panels, and a composite-Simpson CDF table for quantile lookups.

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace octoquant {

namespace detail {

// 32-point Gauss-Legendre rule on [-1,1]; positive half, mirrored in use.
inline constexpr std::array<double, 16> kGl32Nodes = {
    4.83076656877383104e-02, 1.44471961582796488e-01,
    2.39287362252137065e-01, 3.31868602282127667e-01,
    4.21351276130635333e-01, 5.06899908932229359e-01,
    5.87715757240762304e-01, 6.63044266930215231e-01,
    7.32182118740289711e-01, 7.94483795967942386e-01,
    8.49367613732569970e-01, 8.96321155766052202e-01,
    9.34906075937739667e-01, 9.64762255587506390e-01,
    9.85611511545268382e-01, 9.97263861849481570e-01,
};
inline constexpr std::array<double, 16> kGl32Weights = {
    9.65400885147278121e-02, 9.56387200792748332e-02,
    9.38443990808045664e-02, 9.11738786957638631e-02,
    8.76520930044039082e-02, 8.33119242269468457e-02,
    7.81938957870703111e-02, 7.23457941088484491e-02,
    6.58222227763617523e-02, 5.86840934785357038e-02,
    5.09980592623762441e-02, 4.28358980222264263e-02,
    3.42738629130216257e-02, 2.53920653092624266e-02,
    1.62743947309059653e-02, 7.01861000946929839e-03,
};

}  // namespace detail

inline constexpr int kQuadPanels = 128;

// integral of f over [a,b]
template <typename F>
double integrate(F&& f, double a, double b, int panels = kQuadPanels) {
  if (!(b > a)) return 0.0;
  const double h = (b - a) / panels;
  double total = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double mid = a + (p + 0.5) * h;
    const double half = 0.5 * h;
    double acc = 0.0;
    for (std::size_t i = 0; i < detail::kGl32Nodes.size(); ++i) {
      const double off = half * detail::kGl32Nodes[i];
      acc += detail::kGl32Weights[i] * (f(mid + off) + f(mid - off));
    }
    total += acc * half;
  }
  return total;
}

struct CellMoments {
  double mass = 0.0;    // integral f
  double mean1 = 0.0;   // integral x f
  double mean2 = 0.0;   // integral x^2 f
};

// All three moments of f over [a,b] in one pass.
template <typename F>
CellMoments integrate_moments(F&& f, double a, double b, int panels = kQuadPanels) {
  CellMoments m;
  if (!(b > a)) return m;
  const double h = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    const double mid = a + (p + 0.5) * h;
    const double half = 0.5 * h;
    double m0 = 0.0, m1 = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < detail::kGl32Nodes.size(); ++i) {
      const double off = half * detail::kGl32Nodes[i];
      const double xl = mid - off, xr = mid + off;
      const double fl = f(xl), fr = f(xr);
      const double w = detail::kGl32Weights[i];
      m0 += w * (fl + fr);
      m1 += w * (fl * xl + fr * xr);
      m2 += w * (fl * xl * xl + fr * xr * xr);
    }
    m.mass += m0 * half;
    m.mean1 += m1 * half;
    m.mean2 += m2 * half;
  }
  return m;
}

// Moments of f over a fixed uniform grid of Gauss-Legendre panels, prefix
// summed so an interval query only integrates its two partial end panels.
// Cell queries see the same per-cell node budget as integrate_moments when
// built with panels = kQuadPanels * cells.
class MomentTable {
 public:
  template <typename F>
  MomentTable(F&& f, double lo, double hi, int panels)
      : f_(std::forward<F>(f)), lo_(lo), hi_(hi), n_(panels) {
    if (!(hi > lo) || panels < 1) throw std::invalid_argument("moment table domain empty");
    h_ = (hi - lo) / panels;
    c0_.resize(n_ + 1);
    c1_.resize(n_ + 1);
    c2_.resize(n_ + 1);
    c0_[0] = c1_[0] = c2_[0] = 0.0;
    long double a0 = 0.0L, a1 = 0.0L, a2 = 0.0L;
    for (int p = 0; p < n_; ++p) {
      const CellMoments m = panel(lo_ + p * h_, lo_ + (p + 1) * h_);
      a0 += m.mass;
      a1 += m.mean1;
      a2 += m.mean2;
      c0_[p + 1] = static_cast<double>(a0);
      c1_[p + 1] = static_cast<double>(a1);
      c2_[p + 1] = static_cast<double>(a2);
    }
  }

  CellMoments cell(double a, double b) const {
    CellMoments m;
    if (!(b > a)) return m;
    a = std::max(a, lo_);
    b = std::min(b, hi_);
    const int ia = index(a);
    const int ib = index(b);
    if (ia == ib) return panel(a, b);
    m = panel(a, lo_ + (ia + 1) * h_);
    const CellMoments r = panel(lo_ + ib * h_, b);
    m.mass += c0_[ib] - c0_[ia + 1] + r.mass;
    m.mean1 += c1_[ib] - c1_[ia + 1] + r.mean1;
    m.mean2 += c2_[ib] - c2_[ia + 1] + r.mean2;
    return m;
  }

  double total_mass() const { return c0_.back(); }

 private:
  int index(double x) const {
    const int i = static_cast<int>((x - lo_) / h_);
    return std::min(std::max(i, 0), n_ - 1);
  }

  // Single 32-node panel; partial panels are at most one grid cell wide.
  CellMoments panel(double a, double b) const {
    CellMoments m;
    if (!(b > a)) return m;
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    double m0 = 0.0, m1 = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < detail::kGl32Nodes.size(); ++i) {
      const double off = half * detail::kGl32Nodes[i];
      const double xl = mid - off, xr = mid + off;
      const double fl = f_(xl), fr = f_(xr);
      const double w = detail::kGl32Weights[i];
      m0 += w * (fl + fr);
      m1 += w * (fl * xl + fr * xr);
      m2 += w * (fl * xl * xl + fr * xr * xr);
    }
    m.mass = m0 * half;
    m.mean1 = m1 * half;
    m.mean2 = m2 * half;
    return m;
  }

  std::function<double(double)> f_;
  double lo_, hi_, h_ = 0.0;
  int n_;
  std::vector<double> c0_, c1_, c2_;
};

// Cumulative distribution table for quantile-based initialization. Composite
// Simpson over a uniform grid; monotone by construction for f >= 0.
class CdfTable {
 public:
  template <typename F>
  CdfTable(F&& f, double lo, double hi, int panels = 1 << 15) : lo_(lo), hi_(hi) {
    if (!(hi > lo)) throw std::invalid_argument("cdf domain empty");
    const double h = (hi - lo) / panels;
    cum_.resize(panels + 1);
    cum_[0] = 0.0;
    double prev = f(lo);
    for (int p = 0; p < panels; ++p) {
      const double a = lo + p * h;
      const double fm = f(a + 0.5 * h);
      const double fb = f(a + h);
      cum_[p + 1] = cum_[p] + (h / 6.0) * (prev + 4.0 * fm + fb);
      prev = fb;
    }
    total_ = cum_.back();
    if (!(total_ > 0.0)) throw std::invalid_argument("density has no mass on domain");
  }

  double total() const { return total_; }

  // x with F(x) = q * total, q in [0,1]; linear interpolation inside a panel.
  double quantile(double q) const {
    const double target = q * total_;
    std::size_t a = 0, b = cum_.size() - 1;
    while (b - a > 1) {
      const std::size_t m = (a + b) / 2;
      if (cum_[m] < target)
        a = m;
      else
        b = m;
    }
    const double span = cum_[b] - cum_[a];
    const double frac = span > 0.0 ? (target - cum_[a]) / span : 0.5;
    const double h = (hi_ - lo_) / static_cast<double>(cum_.size() - 1);
    return lo_ + (static_cast<double>(a) + frac) * h;
  }

 private:
  double lo_, hi_, total_ = 0.0;
  std::vector<double> cum_;
};

}  // namespace octoquant
