#pragma once

// Survival curves, conditional proportions and ratio-to-asymptote diagnostics
// from excursion samples.
//
// Conditioning on tau_0^+ < inf is "returned == yes". Values that are only
// lower bounds (censored samples) decide an exceedance when they already
// exceed the threshold; otherwise the sample is counted as undecided and
// enters bias_bound. Samples with unknown return enter bias_bound weighted by
// the caller's bound on their return probability (e.g. psi_ruin(M)).

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "cpexc/limits.hpp"
#include "cpexc/simulate.hpp"

namespace cpexc {

struct TailEstimate {
  std::uint64_t n = 0;
  std::uint64_t k = 0;
  double p_hat = 0.0;
  double ci_low = 0.0;
  double ci_high = 1.0;
  double bias_bound = 0.0;

  /// Binomial standard error sqrt(p (1 - p) / n).
  double std_error() const;
};

/// Wilson score interval at 95%.
TailEstimate wilson(std::uint64_t n, std::uint64_t k, double bias_bound = 0.0);

/// Counts for one event; a monoid under merge.
struct TailCounts {
  std::uint64_t n = 0;          // denominator
  std::uint64_t k = 0;          // decided successes
  std::uint64_t undecided = 0;  // in the denominator, event not decidable
  std::uint64_t unknown = 0;    // return not decided, outside the denominator

  void merge(const TailCounts& o);
  bool operator==(const TailCounts&) const = default;
  TailEstimate estimate(double unknown_return_weight = 1.0) const;
};

/// Streaming survival counts of one quantity over a threshold grid.
class SurvivalAccumulator {
 public:
  SurvivalAccumulator(Quantity field, std::vector<double> thresholds);
  void add(const ExcursionSample& s);
  void merge(const SurvivalAccumulator& o);
  const std::vector<double>& thresholds() const { return thresholds_; }
  const std::vector<TailCounts>& counts() const { return counts_; }
  Quantity field() const { return field_; }

 private:
  Quantity field_;
  std::vector<double> thresholds_;
  std::vector<TailCounts> counts_;
};

/// Streaming counts for P(target > t2 | cond > t1).
class ConditionalAccumulator {
 public:
  ConditionalAccumulator(Quantity cond, double cond_threshold, Quantity target, double target_threshold);
  void add(const ExcursionSample& s);
  void merge(const ConditionalAccumulator& o);
  /// Denominator is the decided conditioning count.
  const TailCounts& counts() const { return counts_; }
  /// Throws if the condition was never observed or seen fewer than 30 times.
  TailEstimate estimate(double unknown_return_weight = 1.0) const;

 private:
  Quantity cond_, target_;
  double t1_, t2_;
  TailCounts counts_;
};

/// Conjunction of exceedances {q_1 > t_1, ..., q_k > t_k}.
struct Event {
  std::vector<std::pair<Quantity, double>> terms;
};

/// Streaming counts of an event over all samples (given_return = false, so
/// escaped samples count as failures) or over returned samples only.
class EventAccumulator {
 public:
  explicit EventAccumulator(Event e, bool given_return = true);
  void add(const ExcursionSample& s);
  void merge(const EventAccumulator& o);
  const TailCounts& counts() const { return counts_; }

 private:
  Event event_;
  bool given_return_;
  TailCounts counts_;
};

/// Streaming mean of 1{A} - 1{B} over returned samples where both events are
/// decided. Its standard error accounts for the pairing.
class PairedDifference {
 public:
  PairedDifference(Event a, Event b);
  PairedDifference(Quantity a, double ta, Quantity b, double tb);
  void add(const ExcursionSample& s);
  void merge(const PairedDifference& o);
  std::uint64_t n() const { return n_; }
  std::uint64_t undecided() const { return undecided_; }
  double mean() const;
  double std_error() const;

 private:
  Event a_, b_;
  std::uint64_t n_ = 0, undecided_ = 0;
  std::int64_t sum_ = 0;
  std::uint64_t sum_sq_ = 0;
};

TailEstimate survival(const std::vector<ExcursionSample>& samples, Quantity field, double threshold,
                      double unknown_return_weight = 1.0);

TailEstimate conditional_ratio(const std::vector<ExcursionSample>& samples, Quantity cond_field,
                               double cond_threshold, Quantity target_field, double target_threshold,
                               double unknown_return_weight = 1.0);

struct RatioPoint {
  double arg = 0.0;
  double ratio = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double asymptote = 0.0;
  TailEstimate estimate;
};

/// Survival quantity used for an asymptote kind: t_above for lengths, h0 for
/// heights (both exact under ladder completion).
Quantity default_field(AsymptoteKind kind);

/// p_hat / asymptote with the Wilson band scaled the same way.
std::vector<RatioPoint> ratio_curve(const SurvivalAccumulator& acc, const ProcessSpec& spec,
                                    AsymptoteKind kind, double unknown_return_weight = 1.0);

std::vector<RatioPoint> ratio_to_asymptote(const std::vector<ExcursionSample>& samples,
                                           AsymptoteKind kind, const std::vector<double>& grid,
                                           const ProcessSpec& spec, double unknown_return_weight = 1.0);

/// `threshold,n,k,p_hat,ci_low,ci_high,bias_bound`
void write_tail_csv(std::ostream& os, const std::vector<double>& thresholds,
                    const std::vector<TailEstimate>& estimates);
/// `arg,ratio,ci_low,ci_high,asymptote`
void write_ratio_csv(std::ostream& os, const std::vector<RatioPoint>& curve);

}  // namespace cpexc
