#pragma once

#include <vector>

namespace streamrobust {

/// Gauss-Legendre nodes and weights on [-1, 1].
struct GaussLegendreRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t order() const noexcept { return nodes.size(); }

  /// Integral over [lo, hi] split into `panels` equal sub-intervals.
  template <class F>
  double integrate(F&& f, double lo, double hi, std::size_t panels = 1) const {
    const double width = (hi - lo) / static_cast<double>(panels);
    double total = 0.0;
    for (std::size_t p = 0; p < panels; ++p) {
      const double a = lo + width * static_cast<double>(p);
      const double half = 0.5 * width;
      const double mid = a + half;
      double panel = 0.0;
      for (std::size_t i = 0; i < nodes.size(); ++i) {
        panel += weights[i] * f(mid + half * nodes[i]);
      }
      total += half * panel;
    }
    return total;
  }
};

/// Nodes by Newton iteration on P_n with the asymptotic initial guess.
/// Accurate to a few ulps for orders up to several hundred.
GaussLegendreRule gauss_legendre(std::size_t order);

}  // namespace streamrobust
