#pragma once

// Scale function W on a uniform grid, two-sided exit probabilities, and the
// height-law oracle built on them.
//
// W has Laplace transform 1/psi. Expanding 1/psi(l) = 1/(b l - l L(l)) with
// L(l) = int exp(-l x) nu_bar(x) dx as a geometric series gives
//   W(x) = (1/b) sum_n b^-n N_n(x),  N_0 = 1,  N_{n+1} = nu_bar * N_n.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "cpexc/model.hpp"

namespace cpexc {

struct ScaleFunctionTable {
  double delta = 0.0;
  std::vector<double> values;  // W(k delta), k = 0..K
  /// Number of series terms kept (including N_0).
  int order = 0;
  /// Bound on the omitted series tail over [0, x_max].
  double eps_w = 0.0;
  double drift = 0.0;
  std::uint64_t spec_hash = 0;
  /// Values combine steps delta and 2 delta by Richardson extrapolation.
  bool extrapolated = false;

  double x_max() const { return delta * static_cast<double>(values.size() - 1); }
  /// Piecewise-linear W(x) for 0 <= x <= x_max; range error beyond.
  double operator()(double x) const;
};

/// Build W on [0, x_max] with step delta by trapezoidal convolution.
///
/// Discontinuities or kinks of nu_bar (the Pareto cutoff, atom locations) must
/// sit on grid nodes. When they also sit on the 2 delta grid, the table is
/// Richardson-extrapolated from steps delta and 2 delta. Series terms are
/// added until the next term's sup is below 1e-12 times the running sup.
ScaleFunctionTable build_scale_table(const ProcessSpec& spec, double x_max, double delta,
                                     bool richardson = true);

/// P_x(H_0 > h) = 1 - W(h - x) / W(h) for 0 < x <= h <= x_max.
double exit_above_prob(const ScaleFunctionTable& table, double x, double h);

/// Same probability extended by 1 for x > h and 0 at x = 0.
double exit_above_prob_extended(const ScaleFunctionTable& table, double x, double h);

/// |q int_0^X exp(-q x) W(x) dx + exp(-q X) W(X) - q / psi(q)|, X = x_max,
/// with Simpson's rule on the table grid. Small when exp(-q X) W(X) is.
double laplace_residual(const ProcessSpec& spec, const ScaleFunctionTable& table, double q);

/// P(H_0 > h1, Hhat_0 > h2, tau_0^+ < inf) as
///   b^-1 int_0^inf dx P_x(H_0 > h1) int P_y(H_0 > h2) nu(x + dy),
/// with the region where both probabilities equal 1 integrated in closed form.
/// The inner integral is exact for the piecewise-linear exit probability
/// against the Pareto density; the outer one is Gauss-Legendre on each smooth
/// piece. Requires h1, h2 <= x_max.
double lemma21_height_oracle(const ProcessSpec& spec, const ScaleFunctionTable& table, double h1,
                             double h2);

/// CSV `x,W` with `#` metadata lines (spec hash, delta, N, eps_W, drift).
void write_scale_table(std::ostream& os, const ScaleFunctionTable& table,
                       const std::vector<std::string>& extra_metadata = {});
ScaleFunctionTable read_scale_table(std::istream& is);

}  // namespace cpexc
