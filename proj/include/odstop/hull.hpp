#pragma once

#include <cstddef>
#include <vector>

#include "errors.hpp"

namespace odstop {

struct HullPoint {
  double s;
  double g;
  std::ptrdiff_t tag;  // caller's index, -1 for synthetic points
};

/// Upper hull (least concave majorant vertices) of points sorted by strictly
/// increasing s, by the monotone chain. Collinear middle points are dropped.
inline std::vector<HullPoint> upper_hull(const std::vector<HullPoint>& pts) {
  std::vector<HullPoint> h;
  h.reserve(pts.size());
  for (const auto& p : pts) {
    if (!h.empty() && !(p.s > h.back().s))
      throw NumericalError(NumericalError::Kind::HullDegeneracy, "hull abscissae are not strictly increasing");
    while (h.size() >= 2) {
      const HullPoint& o = h[h.size() - 2];
      const HullPoint& a = h.back();
      double cross = (a.s - o.s) * (p.g - o.g) - (a.g - o.g) * (p.s - o.s);
      if (cross >= 0.0) h.pop_back();
      else break;
    }
    h.push_back(p);
  }
  return h;
}

/// Index of the hull edge [h[k], h[k+1]] containing s; h.size()-1 means
/// beyond the last vertex.
inline std::size_t hull_segment(const std::vector<HullPoint>& h, double s) {
  std::size_t lo = 0, hi = h.size() - 1;
  if (s >= h.back().s) return h.size() - 1;
  while (hi - lo > 1) {
    std::size_t mid = (lo + hi) / 2;
    if (h[mid].s <= s) lo = mid;
    else hi = mid;
  }
  return lo;
}

}  // namespace odstop
