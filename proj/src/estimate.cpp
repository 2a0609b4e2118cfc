#include "cpexc/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>

namespace cpexc {

namespace {

constexpr double kZ95 = 1.959963984540054;

enum class Decision { yes, no, undecided };

Decision decide(const ExcursionSample& s, Quantity q, double threshold) {
  if (s.value(q) > threshold) return Decision::yes;
  return s.is_exact(q) ? Decision::no : Decision::undecided;
}

Decision decide(const ExcursionSample& s, const Event& e) {
  bool open = false;
  for (const auto& [q, t] : e.terms) {
    const auto d = decide(s, q, t);
    if (d == Decision::no) return Decision::no;
    open |= d == Decision::undecided;
  }
  return open ? Decision::undecided : Decision::yes;
}

void require_samples(const std::vector<ExcursionSample>& samples) {
  if (samples.empty()) throw std::invalid_argument("no samples");
}

}  // namespace

double TailEstimate::std_error() const {
  if (n == 0) return 0.0;
  return std::sqrt(p_hat * (1.0 - p_hat) / static_cast<double>(n));
}

TailEstimate wilson(std::uint64_t n, std::uint64_t k, double bias_bound) {
  if (n == 0) throw std::invalid_argument("wilson: empty denominator");
  if (k > n) throw std::invalid_argument("wilson: k > n");
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(k) / nn;
  const double z2 = kZ95 * kZ95;
  const double denom = 1.0 + z2 / nn;
  const double center = (p + z2 / (2.0 * nn)) / denom;
  const double half = kZ95 * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
  TailEstimate e;
  e.n = n;
  e.k = k;
  e.p_hat = p;
  e.ci_low = std::clamp(center - half, 0.0, p);
  e.ci_high = std::clamp(center + half, p, 1.0);
  e.bias_bound = bias_bound;
  return e;
}

void TailCounts::merge(const TailCounts& o) {
  n += o.n;
  k += o.k;
  undecided += o.undecided;
  unknown += o.unknown;
}

TailEstimate TailCounts::estimate(double unknown_return_weight) const {
  if (n == 0) throw std::runtime_error("no returned samples in the denominator");
  const double bias = (static_cast<double>(undecided) +
                       unknown_return_weight * static_cast<double>(unknown)) /
                      static_cast<double>(n);
  return wilson(n, k, bias);
}

SurvivalAccumulator::SurvivalAccumulator(Quantity field, std::vector<double> thresholds)
    : field_(field), thresholds_(std::move(thresholds)), counts_(thresholds_.size()) {
  if (thresholds_.empty()) throw std::invalid_argument("empty threshold grid");
  if (!std::is_sorted(thresholds_.begin(), thresholds_.end())) {
    throw std::invalid_argument("threshold grid must be sorted ascending");
  }
}

void SurvivalAccumulator::add(const ExcursionSample& s) {
  if (s.zero_hit || s.returned == ReturnState::no) return;
  if (s.returned == ReturnState::unknown) {
    for (auto& c : counts_) ++c.unknown;
    return;
  }
  for (std::size_t i = 0; i < thresholds_.size(); ++i) {
    auto& c = counts_[i];
    ++c.n;
    switch (decide(s, field_, thresholds_[i])) {
      case Decision::yes: ++c.k; break;
      case Decision::undecided: ++c.undecided; break;
      case Decision::no: break;
    }
  }
}

void SurvivalAccumulator::merge(const SurvivalAccumulator& o) {
  if (o.field_ != field_ || o.thresholds_ != thresholds_) {
    throw std::invalid_argument("merging survival accumulators with different grids");
  }
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i].merge(o.counts_[i]);
}

ConditionalAccumulator::ConditionalAccumulator(Quantity cond, double cond_threshold, Quantity target,
                                               double target_threshold)
    : cond_(cond), target_(target), t1_(cond_threshold), t2_(target_threshold) {}

void ConditionalAccumulator::add(const ExcursionSample& s) {
  if (s.zero_hit || s.returned == ReturnState::no) return;
  if (s.returned == ReturnState::unknown) {
    ++counts_.unknown;
    return;
  }
  switch (decide(s, cond_, t1_)) {
    case Decision::no: return;
    case Decision::undecided: ++counts_.undecided; return;
    case Decision::yes: break;
  }
  ++counts_.n;
  switch (decide(s, target_, t2_)) {
    case Decision::yes: ++counts_.k; break;
    case Decision::undecided: ++counts_.undecided; break;
    case Decision::no: break;
  }
}

void ConditionalAccumulator::merge(const ConditionalAccumulator& o) {
  if (o.cond_ != cond_ || o.target_ != target_ || o.t1_ != t1_ || o.t2_ != t2_) {
    throw std::invalid_argument("merging conditional accumulators for different events");
  }
  counts_.merge(o.counts_);
}

TailEstimate ConditionalAccumulator::estimate(double unknown_return_weight) const {
  if (counts_.n == 0) throw std::runtime_error("condition never observed");
  if (counts_.n < 30) {
    throw std::runtime_error("condition observed only " + std::to_string(counts_.n) +
                             " times (need 30); simulate more samples");
  }
  return counts_.estimate(unknown_return_weight);
}

EventAccumulator::EventAccumulator(Event e, bool given_return)
    : event_(std::move(e)), given_return_(given_return) {
  if (event_.terms.empty()) throw std::invalid_argument("empty event");
}

void EventAccumulator::add(const ExcursionSample& s) {
  if (s.zero_hit) return;
  if (s.returned == ReturnState::unknown) {
    ++counts_.unknown;
    return;
  }
  if (s.returned == ReturnState::no) {
    if (!given_return_) ++counts_.n;
    return;
  }
  ++counts_.n;
  switch (decide(s, event_)) {
    case Decision::yes: ++counts_.k; break;
    case Decision::undecided: ++counts_.undecided; break;
    case Decision::no: break;
  }
}

void EventAccumulator::merge(const EventAccumulator& o) {
  if (o.event_.terms != event_.terms || o.given_return_ != given_return_) {
    throw std::invalid_argument("merging event accumulators for different events");
  }
  counts_.merge(o.counts_);
}

PairedDifference::PairedDifference(Event a, Event b) : a_(std::move(a)), b_(std::move(b)) {
  if (a_.terms.empty() || b_.terms.empty()) throw std::invalid_argument("empty event");
}

PairedDifference::PairedDifference(Quantity a, double ta, Quantity b, double tb)
    : PairedDifference(Event{{{a, ta}}}, Event{{{b, tb}}}) {}

void PairedDifference::add(const ExcursionSample& s) {
  if (s.zero_hit || s.returned != ReturnState::yes) return;
  const auto da = decide(s, a_);
  const auto db = decide(s, b_);
  if (da == Decision::undecided || db == Decision::undecided) {
    ++undecided_;
    return;
  }
  ++n_;
  const int d = int(da == Decision::yes) - int(db == Decision::yes);
  sum_ += d;
  sum_sq_ += static_cast<std::uint64_t>(d * d);
}

void PairedDifference::merge(const PairedDifference& o) {
  if (o.a_.terms != a_.terms || o.b_.terms != b_.terms) {
    throw std::invalid_argument("merging paired differences for different events");
  }
  n_ += o.n_;
  undecided_ += o.undecided_;
  sum_ += o.sum_;
  sum_sq_ += o.sum_sq_;
}

double PairedDifference::mean() const {
  return n_ == 0 ? 0.0 : static_cast<double>(sum_) / static_cast<double>(n_);
}

double PairedDifference::std_error() const {
  if (n_ < 2) return 0.0;
  const double nn = static_cast<double>(n_);
  const double m = mean();
  const double var = (static_cast<double>(sum_sq_) / nn - m * m) * nn / (nn - 1.0);
  return std::sqrt(std::max(var, 0.0) / nn);
}

TailEstimate survival(const std::vector<ExcursionSample>& samples, Quantity field, double threshold,
                      double unknown_return_weight) {
  require_samples(samples);
  SurvivalAccumulator acc(field, {threshold});
  for (const auto& s : samples) acc.add(s);
  return acc.counts()[0].estimate(unknown_return_weight);
}

TailEstimate conditional_ratio(const std::vector<ExcursionSample>& samples, Quantity cond_field,
                               double cond_threshold, Quantity target_field, double target_threshold,
                               double unknown_return_weight) {
  require_samples(samples);
  ConditionalAccumulator acc(cond_field, cond_threshold, target_field, target_threshold);
  for (const auto& s : samples) acc.add(s);
  return acc.estimate(unknown_return_weight);
}

Quantity default_field(AsymptoteKind kind) {
  return kind == AsymptoteKind::length_rec || kind == AsymptoteKind::length_tra ? Quantity::t_above
                                                                                : Quantity::h0;
}

std::vector<RatioPoint> ratio_curve(const SurvivalAccumulator& acc, const ProcessSpec& spec,
                                    AsymptoteKind kind, double unknown_return_weight) {
  std::vector<RatioPoint> out;
  out.reserve(acc.thresholds().size());
  for (std::size_t i = 0; i < acc.thresholds().size(); ++i) {
    RatioPoint pt;
    pt.arg = acc.thresholds()[i];
    pt.asymptote = tail_asymptote(spec, kind, pt.arg);
    pt.estimate = acc.counts()[i].estimate(unknown_return_weight);
    pt.ratio = pt.estimate.p_hat / pt.asymptote;
    pt.ci_low = pt.estimate.ci_low / pt.asymptote;
    pt.ci_high = pt.estimate.ci_high / pt.asymptote;
    out.push_back(pt);
  }
  return out;
}

std::vector<RatioPoint> ratio_to_asymptote(const std::vector<ExcursionSample>& samples,
                                           AsymptoteKind kind, const std::vector<double>& grid,
                                           const ProcessSpec& spec, double unknown_return_weight) {
  require_samples(samples);
  SurvivalAccumulator acc(default_field(kind), grid);
  for (const auto& s : samples) acc.add(s);
  return ratio_curve(acc, spec, kind, unknown_return_weight);
}

void write_tail_csv(std::ostream& os, const std::vector<double>& thresholds,
                    const std::vector<TailEstimate>& estimates) {
  if (thresholds.size() != estimates.size()) throw std::invalid_argument("size mismatch");
  const auto old = os.precision(12);
  os << "threshold,n,k,p_hat,ci_low,ci_high,bias_bound\n";
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    const auto& e = estimates[i];
    os << thresholds[i] << ',' << e.n << ',' << e.k << ',' << e.p_hat << ',' << e.ci_low << ','
       << e.ci_high << ',' << e.bias_bound << '\n';
  }
  os.precision(old);
}

void write_ratio_csv(std::ostream& os, const std::vector<RatioPoint>& curve) {
  const auto old = os.precision(12);
  os << "arg,ratio,ci_low,ci_high,asymptote\n";
  for (const auto& p : curve) {
    os << p.arg << ',' << p.ratio << ',' << p.ci_low << ',' << p.ci_high << ',' << p.asymptote << '\n';
  }
  os.precision(old);
}

}  // namespace cpexc
