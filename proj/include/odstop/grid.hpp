#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <vector>

#include "errors.hpp"

namespace odstop {

enum class BoundaryKind { Inaccessible, Absorbing };

/// Working grid. Nodes are strictly increasing. An absorbing endpoint is
/// included as the first/last node; inaccessible endpoints are never nodes.
struct Grid {
  std::vector<double> nodes;
  double alpha = 0.0;
  double beta = 0.0;
  BoundaryKind left = BoundaryKind::Inaccessible;
  BoundaryKind right = BoundaryKind::Inaccessible;
  std::size_t ref_index = 0;

  std::size_t size() const { return nodes.size(); }
  double operator[](std::size_t i) const { return nodes[i]; }
  double left_trunc() const { return nodes.front(); }
  double right_trunc() const { return nodes.back(); }
  double ref_point() const { return nodes[ref_index]; }

  /// True when node 0 is the absorbing endpoint alpha.
  bool left_closed() const { return left == BoundaryKind::Absorbing && nodes.front() == alpha; }
  bool right_closed() const { return right == BoundaryKind::Absorbing && nodes.back() == beta; }

  /// Index range of nodes strictly inside the state interval.
  std::size_t first_interior() const { return left_closed() ? 1 : 0; }
  std::size_t last_interior() const { return right_closed() ? size() - 2 : size() - 1; }

  bool in_span(double x) const { return x >= nodes.front() && x <= nodes.back(); }

  /// Cell index i with nodes[i] <= x <= nodes[i+1]; clamps to the span.
  std::size_t cell(double x) const {
    if (x <= nodes.front()) return 0;
    if (x >= nodes.back()) return size() - 2;
    auto it = std::upper_bound(nodes.begin(), nodes.end(), x);
    return static_cast<std::size_t>(it - nodes.begin()) - 1;
  }

  /// Index of the node equal to x, or size() when x is not a node.
  std::size_t find(double x) const {
    auto it = std::lower_bound(nodes.begin(), nodes.end(), x);
    if (it != nodes.end() && *it == x) return static_cast<std::size_t>(it - nodes.begin());
    return size();
  }

  /// Index of the node nearest to x.
  std::size_t nearest(double x) const {
    std::size_t i = cell(x);
    return (x - nodes[i] <= nodes[i + 1] - x) ? i : i + 1;
  }
};

using GridPtr = std::shared_ptr<const Grid>;

namespace detail {

/// Cubic Hermite value and derivative on [x0, x1].
inline void hermite(double x0, double x1, double y0, double y1, double s0, double s1, double x, double& y,
                    double& dy) {
  double h = x1 - x0;
  double t = (x - x0) / h;
  double t2 = t * t;
  double t3 = t2 * t;
  double h00 = 2 * t3 - 3 * t2 + 1;
  double h10 = t3 - 2 * t2 + t;
  double h01 = -2 * t3 + 3 * t2;
  double h11 = t3 - t2;
  y = h00 * y0 + h10 * h * s0 + h01 * y1 + h11 * h * s1;
  double d00 = (6 * t2 - 6 * t) / h;
  double d10 = 3 * t2 - 4 * t + 1;
  double d01 = (-6 * t2 + 6 * t) / h;
  double d11 = 3 * t2 - 2 * t;
  dy = d00 * y0 + d10 * s0 + d01 * y1 + d11 * s1;
}

}  // namespace detail

/// Node values with one-sided slopes; evaluated between nodes by cubic
/// Hermite interpolation using the right slope of the left node and the left
/// slope of the right node.
struct GridFunction {
  GridPtr grid;
  std::vector<double> values;
  std::vector<double> left_slope;
  std::vector<double> right_slope;

  GridFunction() = default;
  explicit GridFunction(GridPtr g)
      : grid(std::move(g)), values(grid->size(), 0.0), left_slope(grid->size(), 0.0),
        right_slope(grid->size(), 0.0) {}

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }

  /// Interpolated value; outside the span the end value is returned.
  double operator()(double x) const {
    double y, dy;
    eval(x, y, dy);
    return y;
  }

  double derivative(double x) const {
    double y, dy;
    eval(x, y, dy);
    return dy;
  }

  void eval(double x, double& y, double& dy) const {
    const auto& n = grid->nodes;
    if (x <= n.front()) {
      y = values.front();
      dy = right_slope.front();
      return;
    }
    if (x >= n.back()) {
      y = values.back();
      dy = left_slope.back();
      return;
    }
    std::size_t i = grid->cell(x);
    detail::hermite(n[i], n[i + 1], values[i], values[i + 1], right_slope[i], left_slope[i + 1], x, y, dy);
  }

  /// Pointwise linear combination a*this + b*other on the same grid.
  GridFunction combine(double a, const GridFunction& other, double b) const {
    GridFunction out(grid);
    for (std::size_t i = 0; i < size(); ++i) {
      out.values[i] = a * values[i] + b * other.values[i];
      out.left_slope[i] = a * left_slope[i] + b * other.left_slope[i];
      out.right_slope[i] = a * right_slope[i] + b * other.right_slope[i];
    }
    return out;
  }

  GridFunction scaled(double a) const {
    GridFunction out(grid);
    for (std::size_t i = 0; i < size(); ++i) {
      out.values[i] = a * values[i];
      out.left_slope[i] = a * left_slope[i];
      out.right_slope[i] = a * right_slope[i];
    }
    return out;
  }
};

/// Samples a smooth callable (value and derivative) at every node.
template <class F>
GridFunction sample(GridPtr g, F&& value_and_slope) {
  GridFunction out(g);
  for (std::size_t i = 0; i < g->size(); ++i) {
    double v = 0.0, d = 0.0;
    value_and_slope((*g)[i], v, d);
    out.values[i] = v;
    out.left_slope[i] = d;
    out.right_slope[i] = d;
  }
  return out;
}

}  // namespace odstop
