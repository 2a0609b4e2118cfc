#pragma once

// Verification suites shared by the CLI and the acceptance runner. Each suite
// yields rows with an observed value, the reference, a tolerance and a
// verdict. Monte Carlo suites are accumulators fed by a streaming pass so one
// simulation can serve several suites.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "cpexc/estimate.hpp"
#include "cpexc/limits.hpp"
#include "cpexc/scalefun.hpp"
#include "cpexc/simulate.hpp"

namespace cpexc {

struct CheckRow {
  std::string suite;
  std::string check;
  double observed = 0.0;
  double expected = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::string note;
};

/// pass iff |observed - expected| <= tolerance.
CheckRow row_abs(std::string suite, std::string check, double observed, double expected,
                 double tolerance, std::string note = {});
/// pass iff lo < observed < hi; expected and tolerance hold the midpoint and half-width.
CheckRow row_open_interval(std::string suite, std::string check, double observed, double lo,
                           double hi, std::string note = {});

bool all_pass(const std::vector<CheckRow>& rows);
/// `suite,check,observed,expected,tolerance,pass,note`
void write_checks_csv(std::ostream& os, const std::vector<CheckRow>& rows);
std::vector<CheckRow> read_checks_csv(std::istream& is);

/// Runs samples [first, first + count) in chunks and hands each chunk to sink
/// together with the index of its first sample.
void stream_excursions(const ProcessSpec& spec, const SimConfig& config, std::uint64_t first,
                       std::uint64_t count, std::uint64_t chunk,
                       const std::function<void(const std::vector<ExcursionSample>&, std::uint64_t)>& sink);

/// Joint Laplace transform on grid x grid, plus (0, 0) for transient specs.
class LaplaceSuite {
 public:
  LaplaceSuite(const ProcessSpec& spec, const std::vector<double>& grid, double unknown_return_weight = 1.0);
  void add(const ExcursionSample& s);
  /// Tolerance 3 SE plus the censoring bias bound.
  std::vector<CheckRow> rows() const;

 private:
  const ProcessSpec* spec_;
  double weight_;
  std::vector<LaplaceAccumulator> acc_;
};

/// P(H0 > h1, Hhat0 > h2, tau_0^+ < inf) against the quadrature oracle.
class HeightJointSuite {
 public:
  explicit HeightJointSuite(std::vector<std::pair<double, double>> pairs);
  void add(const ExcursionSample& s);
  /// MC rows (3 SE from the oracle value) and swap-symmetry rows (1e-8).
  std::vector<CheckRow> rows(const ProcessSpec& spec, const ScaleFunctionTable& table) const;

 private:
  std::vector<std::pair<double, double>> pairs_;
  std::vector<EventAccumulator> acc_;
};

/// Drift balance, marginal equality and joint exchangeability.
class StructuralSuite {
 public:
  StructuralSuite(const ProcessSpec& spec, std::vector<double> t_grid, std::vector<double> h_grid);
  void add(const ExcursionSample& s);
  const SampleSummary& summary() const { return summary_; }
  std::vector<CheckRow> rows() const;

 private:
  const ProcessSpec* spec_;
  SampleSummary summary_;
  std::vector<std::string> names_;
  std::vector<PairedDifference> diffs_;
};

/// P(T0 - tau > a t | tau > t, tau < inf) against (1 + a)^(1 - theta); the
/// verdict is containment of the limit in the Wilson interval.
class TransientConditionalSuite {
 public:
  TransientConditionalSuite(double t, std::vector<double> a_grid);
  void add(const ExcursionSample& s);
  std::vector<CheckRow> rows(double theta) const;

 private:
  double t_;
  std::vector<double> a_;
  std::vector<ConditionalAccumulator> acc_;
};

/// Ratio of survival estimates to the tail asymptote, band [1 - tol, 1 + tol].
std::vector<CheckRow> ratio_band_rows(const std::string& suite, const std::vector<RatioPoint>& curve,
                                      double tol);
/// |ratio - 1| strictly decreasing along the curve.
std::vector<CheckRow> ratio_drift_rows(const std::string& suite, const std::vector<RatioPoint>& curve);

/// Two-sided exit probabilities from simulated upper segments, plus checks of
/// the W table (closed form below the Pareto cutoff, Laplace residuals).
struct ExitSuiteConfig {
  std::vector<double> x;
  std::vector<double> h;
  std::uint64_t n = 100000;
  std::uint64_t seed = 0;
  std::uint64_t jump_cap = 10'000'000;
  unsigned workers = 1;
  double delta = 0.005;
  /// 0: use the largest h.
  double x_max = 0.0;
};
std::vector<CheckRow> exit_suite(const ProcessSpec& spec, const ExitSuiteConfig& cfg);

/// Table checks only (used by exit_suite and the scalefun command).
std::vector<CheckRow> scale_table_rows(const ProcessSpec& spec, const ScaleFunctionTable& table);

/// f/h identity on 20 log-spaced a, D triple agreement, ranges and
/// monotonicity of h and g, corollary constants.
std::vector<CheckRow> limits_identity_rows(const LimitParams& p);

/// Same samples for worker counts 1 and workers (and a repeat), by fingerprint.
std::vector<CheckRow> determinism_rows(const ProcessSpec& spec, const SimConfig& config,
                                       std::uint64_t count, unsigned workers);

}  // namespace cpexc
