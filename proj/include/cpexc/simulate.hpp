#pragma once

// Exact event-driven simulation of excursions away from zero.
//
// Between jumps the path decreases at rate b, so the infimum below zero is
// attained just before a jump and the supremum above zero just after one.
// Each event consumes uniforms in a fixed order: inter-jump time first, then
// the jump size (not drawn when the above-zero segment hits 0 first).

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "cpexc/model.hpp"
#include "cpexc/rng.hpp"

namespace cpexc {

enum class SampleStatus : std::uint8_t { complete, censored_depth, censored_jumps };

/// Whether the excursion is known to come back to zero (tau_0^+ < inf).
enum class ReturnState : std::uint8_t { yes, no, unknown };

/// Excursion functionals addressed by the estimators.
enum class Quantity : std::uint8_t { tau_plus, t_above, h0, hhat0, max_length, max_height };

std::string to_string(SampleStatus s);
std::string to_string(Quantity q);
Quantity parse_quantity(const std::string& name);

/// One sampled quadruple (tau_0^+, T_0 - tau_0^+, H_0, Hhat_0).
///
/// For complete samples every field is exact. For censored samples a field
/// whose bit is clear in `exact` holds a lower bound (the value accumulated
/// before censoring).
struct ExcursionSample {
  double tau_plus = 0.0;
  double t_above = 0.0;
  double h0 = 0.0;
  double hhat0 = 0.0;
  double jump_sum = 0.0;
  std::uint64_t n_jumps = 0;
  SampleStatus status = SampleStatus::complete;
  ReturnState returned = ReturnState::yes;
  std::uint8_t exact = kAllExact;
  /// A jump landed exactly on 0 below zero (atoms only); t_above = 0.
  bool zero_hit = false;

  static constexpr std::uint8_t bit(Quantity q) { return static_cast<std::uint8_t>(1u << static_cast<unsigned>(q)); }
  static constexpr std::uint8_t kAllExact = 0x0F;

  bool complete() const { return status == SampleStatus::complete; }
  /// Value, or lower bound when not exact.
  double value(Quantity q) const;
  bool is_exact(Quantity q) const;
};

/// Ladder completion of a censored below-zero phase.
///
/// From depth d the ascending ladder heights of X are i.i.d. with density
/// nu_bar / m1, and each further ladder epoch exists with probability
/// m1 / b (1 in the recurrent case). Summing ladder heights until they exceed
/// d decides exactly whether the path gets back above zero and with which
/// overshoot, without simulating the remaining below-zero time.
enum class Completion : std::uint8_t { none, ladder };

struct SimConfig {
  std::uint64_t seed = 0;
  std::uint64_t n_samples = 0;
  /// Depth cap M for the below-zero phase (transient regime only).
  double depth_cap = std::numeric_limits<double>::infinity();
  /// Maximum number of simulated jumps per phase.
  std::uint64_t jump_cap = 10'000'000;
  unsigned worker_count = 1;
  Completion completion = Completion::ladder;

  void validate() const;
};

struct UpperSegment {
  double tau0_minus = 0.0;
  double sup = 0.0;
  std::uint64_t n_jumps = 0;
  SampleStatus status = SampleStatus::complete;
  /// Stopped early because sup exceeded the requested level; tau0_minus and
  /// sup are then lower bounds.
  bool stopped = false;
};

namespace detail {

// Neumaier compensated sum.
struct CompensatedSum {
  double sum = 0.0;
  double comp = 0.0;
  void add(double v) {
    const double t = sum + v;
    comp += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
    sum = t;
  }
  double value() const { return sum + comp; }
};

struct SegmentState {
  double t = 0.0;
  double sup = 0.0;
  double jump_sum = 0.0;
  std::uint64_t jumps = 0;
  bool censored = false;
  bool stopped = false;
};

// Above-zero dynamics from y > 0 until the path creeps down to 0, or until the
// running supremum exceeds stop_above.
template <class Rng>
SegmentState run_above(const ProcessSpec& spec, double y, Rng& rng, std::uint64_t jump_cap,
                       double stop_above = std::numeric_limits<double>::infinity()) {
  const double b = spec.drift();
  const double rate = spec.jumps().total_mass();
  const JumpMeasure& nu = spec.jumps();
  SegmentState st;
  st.sup = y;
  CompensatedSum time, jumps;
  for (;;) {
    if (st.jumps >= jump_cap) {
      st.censored = true;
      break;
    }
    const double e = rng.exponential(rate);
    const double to_zero = y / b;
    if (to_zero <= e) {
      time.add(to_zero);
      break;
    }
    time.add(e);
    const double j = nu.jump_from_uniform(rng.uniform());
    jumps.add(j);
    ++st.jumps;
    y = (y - b * e) + j;
    if (y > st.sup) st.sup = y;
    if (st.sup > stop_above) {
      st.stopped = true;
      break;
    }
  }
  st.t = time.value();
  st.jump_sum = jumps.value();
  return st;
}

// Ladder completion from depth d > 0. Returns the overshoot above zero, or a
// negative value if the path never returns.
template <class Rng>
double ladder_overshoot(const ProcessSpec& spec, double depth, Rng& rng) {
  const double cont = spec.regime() == Regime::recurrent
                          ? 1.0
                          : spec.jumps().first_moment() / spec.drift();
  double level = 0.0;
  for (;;) {
    if (cont < 1.0 && rng.uniform() > cont) return -1.0;
    level += spec.jumps().integrated_tail_from_uniform(rng.uniform());
    if (level > depth) return level - depth;
  }
}

}  // namespace detail

/// Sample one excursion away from zero started at X_0 = 0.
///
/// Below zero: draw E ~ Exp(nu total mass), record the pre-jump depth, add the
/// jump; stop once X > 0. Above zero: from y, hit 0 after y / b unless a jump
/// arrives first. Censoring (post-jump depth beyond M in the transient regime,
/// jump cap in either phase) is reported in `status`; with ladder completion a
/// phase-1 censoring is followed by an exact decision on the return and, on
/// return, by a simulated above-zero phase with a fresh jump budget.
template <class Rng>
ExcursionSample sample_excursion(const ProcessSpec& spec, Rng& rng, const SimConfig& config) {
  const double b = spec.drift();
  const double rate = spec.jumps().total_mass();
  const JumpMeasure& nu = spec.jumps();
  const bool depth_capped = spec.regime() == Regime::transient;

  ExcursionSample s;
  detail::CompensatedSum time, jumps;
  double x = 0.0;
  double depth = 0.0;
  bool censored = false;

  for (;;) {
    const double e = rng.exponential(rate);
    time.add(e);
    const double pre = x - b * e;
    if (-pre > depth) depth = -pre;
    const double j = nu.jump_from_uniform(rng.uniform());
    jumps.add(j);
    ++s.n_jumps;
    x = pre + j;
    if (x > 0.0) break;
    if (x == 0.0) {
      // Lands exactly on zero: T_0 reached without an above-zero part.
      s.tau_plus = time.value();
      s.hhat0 = depth;
      s.jump_sum = jumps.value();
      s.zero_hit = true;
      return s;
    }
    if (depth_capped && -x > config.depth_cap) {
      s.status = SampleStatus::censored_depth;
      censored = true;
      break;
    }
    if (s.n_jumps >= config.jump_cap) {
      s.status = SampleStatus::censored_jumps;
      censored = true;
      break;
    }
  }

  s.tau_plus = time.value();
  s.hhat0 = depth;
  s.jump_sum = jumps.value();

  if (censored) {
    s.exact = 0;
    if (config.completion == Completion::none) {
      s.returned = ReturnState::unknown;
      return s;
    }
    const double y = detail::ladder_overshoot(spec, -x, rng);
    if (y < 0.0) {
      s.returned = ReturnState::no;
      return s;
    }
    s.returned = ReturnState::yes;
    x = y;
  }

  const auto above = detail::run_above(spec, x, rng, config.jump_cap);
  s.t_above = above.t;
  s.h0 = above.sup;
  s.n_jumps += above.jumps;
  if (!censored) s.jump_sum += above.jump_sum;
  if (above.censored) {
    if (s.status == SampleStatus::complete) s.status = SampleStatus::censored_jumps;
    s.exact &= static_cast<std::uint8_t>(~(ExcursionSample::bit(Quantity::t_above) |
                                           ExcursionSample::bit(Quantity::h0)));
  } else if (censored) {
    s.exact = ExcursionSample::bit(Quantity::t_above) | ExcursionSample::bit(Quantity::h0);
  }
  return s;
}

/// Above-zero dynamics started at x > 0 until the first passage below 0.
/// With a finite stop_above the run ends as soon as sup > stop_above, which
/// is enough to decide {sup > h} for h <= stop_above.
template <class Rng>
UpperSegment sample_upper_segment(const ProcessSpec& spec, double x, Rng& rng,
                                  std::uint64_t jump_cap,
                                  double stop_above = std::numeric_limits<double>::infinity()) {
  if (!(x > 0.0)) throw std::domain_error("sample_upper_segment: x must be positive");
  const auto st = detail::run_above(spec, x, rng, jump_cap, stop_above);
  return {st.t, st.sup, st.jumps,
          st.censored ? SampleStatus::censored_jumps : SampleStatus::complete, st.stopped};
}

/// Relative drift-balance residual |b (tau + t_above) - jump_sum| / jump_sum.
double drift_balance_residual(const ProcessSpec& spec, const ExcursionSample& s);

/// Samples [first, first + count) of the experiment, each drawn from its own
/// stream (seed, excursion domain, index). Output order is by index and does
/// not depend on config.worker_count.
std::vector<ExcursionSample> simulate_excursions(const ProcessSpec& spec, const SimConfig& config,
                                                 std::uint64_t first, std::uint64_t count);

/// Upper segments from x, streams (seed, upper_segment domain, stream_base + i).
std::vector<UpperSegment> simulate_upper_segments(const ProcessSpec& spec, double x,
                                                  std::uint64_t seed, std::uint64_t stream_base,
                                                  std::uint64_t count, std::uint64_t jump_cap,
                                                  unsigned workers, double stop_above);

// ---------------------------------------------------------------------------
// Ruin probability (Pollaczek-Khinchine)

/// psi_ruin(x) = P(sup_t X_t > x | X_0 = 0) for a transient spec, as the
/// compound-geometric series (1 - phi) sum_{n>=1} phi^n (1 - F_I^{*n}(x)),
/// phi = m1 / b. F_I is lumped onto the lattice {k delta} by rounding ladder
/// heights up, so the result is an upper bound up to the 1e-10 truncation.
double ruin_probability(const ProcessSpec& spec, double x, double delta);

/// psi_ruin on the whole grid {0, delta, ..., k_max delta}, summed in closed
/// form by the Panjer recursion for compound-geometric sums (same lattice).
std::vector<double> ruin_curve(const ProcessSpec& spec, double delta, std::size_t k_max);

/// A depth cap M with psi_ruin(M) <= target: the first point of a ruin_curve
/// grid, coarsened until the grid reaches the target (an upper bound, so the
/// returned M can only be conservative).
double default_depth_cap(const ProcessSpec& spec, double target = 1e-4);

// ---------------------------------------------------------------------------
// Accumulators

struct LaplaceEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  /// Largest possible contribution of censored samples, divided by n.
  double bias_bound = 0.0;
  std::uint64_t n = 0;
};

/// Mergeable sums for the joint Laplace transform estimator.
struct LaplaceAccumulator {
  double q1 = 0.0, q2 = 0.0;
  std::uint64_t n = 0;
  double sum = 0.0, sum_sq = 0.0, bias_mass = 0.0;

  /// unknown_return_weight multiplies the bias mass of samples whose return
  /// is undecided (e.g. psi_ruin(M) for depth-censored samples).
  void add(const ExcursionSample& s, double unknown_return_weight = 1.0);
  void merge(const LaplaceAccumulator& o);
  LaplaceEstimate result() const;
};

/// Sample mean of exp(-q1 tau - q2 (T0 - tau)); censored samples contribute 0
/// unless the fields entering the exponent are exact.
LaplaceEstimate estimate_joint_laplace(const std::vector<ExcursionSample>& samples, double q1,
                                       double q2, double unknown_return_weight = 1.0);

/// Closed-form E[exp(-q1 tau - q2 (T0 - tau)); tau < inf]
///   = 1 - (q1 - q2) / (b (Phi(q1) - Phi(q2))), with the q1 = q2 limit
///   1 - psi'(Phi(q)) / b.
double joint_laplace_closed_form(const ProcessSpec& spec, double q1, double q2);

/// Run-level bookkeeping: status counts and the worst drift-balance residual.
struct SampleSummary {
  std::uint64_t n = 0;
  std::uint64_t complete = 0;
  std::uint64_t censored_depth = 0;
  std::uint64_t censored_jumps = 0;
  std::uint64_t returned_by_ladder = 0;
  std::uint64_t escaped_by_ladder = 0;
  std::uint64_t unknown_return = 0;
  std::uint64_t zero_hits = 0;
  std::uint64_t total_jumps = 0;
  std::uint64_t max_jumps = 0;
  double max_balance_residual = 0.0;

  void add(const ProcessSpec& spec, const ExcursionSample& s);
  void merge(const SampleSummary& o);
};

/// Raw dump: header `tau_plus,t_above,h0,hhat0,status,n_jumps`.
void write_samples_csv(std::ostream& os, const std::vector<ExcursionSample>& samples);
void write_summary_csv(std::ostream& os, const SampleSummary& summary);

/// FNV-1a over the sample fields, for determinism checks.
std::uint64_t fingerprint(const std::vector<ExcursionSample>& samples);

}  // namespace cpexc
