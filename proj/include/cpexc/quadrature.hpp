#pragma once

// Numerical integration helpers shared by the scale-function and limit
// modules: globally adaptive Gauss-Kronrod (7/15) and fixed Gauss-Legendre.

#include <algorithm>
#include <array>
#include <cmath>
#include <queue>
#include <stdexcept>
#include <vector>

namespace cpexc::quad {

struct Result {
  double value;
  double error;
  int evaluations;
};

namespace detail {

inline constexpr std::array<double, 8> kKronrodNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, 7).
inline constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
  double a, b, value, error;
  int depth;
  bool operator<(const Segment& o) const { return error < o.error; }
};

template <class F>
Segment gk15(F& f, double a, double b, int depth) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const double fc = f(c);
  double kron = fc * kKronrodWeights[7];
  double gauss = fc * kGaussWeights[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = h * kKronrodNodes[j];
    const double s = f(c - dx) + f(c + dx);
    kron += kKronrodWeights[j] * s;
    if (j % 2 == 1) gauss += kGaussWeights[j / 2] * s;
  }
  return {a, b, kron * h, std::abs((kron - gauss) * h), depth};
}

}  // namespace detail

/// Globally adaptive G7/K15 on [a, b]. Stops once the summed error estimate
/// is below max(abs_tol, rel_tol * |value|).
template <class F>
Result adaptive(F f, double a, double b, double abs_tol = 1e-13, double rel_tol = 1e-12,
                int max_segments = 4000) {
  if (a == b) return {0.0, 0.0, 0};
  if (!(std::isfinite(a) && std::isfinite(b))) {
    throw std::domain_error("quad::adaptive: finite limits required");
  }
  std::priority_queue<detail::Segment> heap;
  auto first = detail::gk15(f, a, b, 0);
  double value = first.value, error = first.error;
  heap.push(first);
  int evals = 15;
  while (error > std::max(abs_tol, rel_tol * std::abs(value)) &&
         static_cast<int>(heap.size()) < max_segments) {
    const auto worst = heap.top();
    if (worst.depth > 60) break;
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    const auto left = detail::gk15(f, worst.a, mid, worst.depth + 1);
    const auto right = detail::gk15(f, mid, worst.b, worst.depth + 1);
    evals += 30;
    value += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
  }
  // Re-sum to shed accumulated cancellation in the running totals.
  value = 0.0;
  error = 0.0;
  while (!heap.empty()) {
    value += heap.top().value;
    error += heap.top().error;
    heap.pop();
  }
  return {value, error, evals};
}

/// Integral of f over [0, a] where f behaves like u^(p-1) at 0 (p > 0).
/// The substitution u = a w^(1/p) makes the integrand bounded.
template <class F>
Result left_power_singular(F f, double a, double p, double abs_tol = 1e-13,
                           double rel_tol = 1e-12) {
  const double inv_p = 1.0 / p;
  auto g = [&](double w) {
    if (w <= 0.0) return 0.0;
    const double u = a * std::pow(w, inv_p);
    // du = a/p * w^(1/p - 1) dw
    return f(u) * a * inv_p * std::pow(w, inv_p - 1.0);
  };
  return adaptive(g, 0.0, 1.0, abs_tol, rel_tol);
}

/// Gauss-Legendre rule with n nodes on [-1, 1] (Newton on P_n).
struct GaussLegendre {
  std::vector<double> nodes;
  std::vector<double> weights;

  explicit GaussLegendre(int n) : nodes(n), weights(n) {
    constexpr double pi = 3.14159265358979323846;
    for (int i = 0; i < n; ++i) {
      double x = std::cos(pi * (i + 0.75) / (n + 0.5));
      double dp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
          const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        if (n == 1) p0 = 1.0;
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        const double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-16) break;
      }
      nodes[i] = x;
      weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
  }

  template <class F>
  double integrate(F&& f, double a, double b) const {
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    double s = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) s += weights[i] * f(c + h * nodes[i]);
    return s * h;
  }
};

}  // namespace cpexc::quad
