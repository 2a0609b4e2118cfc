#include "cpexc/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <thread>

namespace cpexc {

std::string to_string(SampleStatus s) {
  switch (s) {
    case SampleStatus::complete: return "complete";
    case SampleStatus::censored_depth: return "censored_depth";
    case SampleStatus::censored_jumps: return "censored_jumps";
  }
  return "unknown";
}

std::string to_string(Quantity q) {
  switch (q) {
    case Quantity::tau_plus: return "tau_plus";
    case Quantity::t_above: return "t_above";
    case Quantity::h0: return "h0";
    case Quantity::hhat0: return "hhat0";
    case Quantity::max_length: return "max_length";
    case Quantity::max_height: return "max_height";
  }
  return "unknown";
}

Quantity parse_quantity(const std::string& name) {
  for (auto q : {Quantity::tau_plus, Quantity::t_above, Quantity::h0, Quantity::hhat0,
                 Quantity::max_length, Quantity::max_height}) {
    if (to_string(q) == name) return q;
  }
  throw std::invalid_argument("unknown field: " + name);
}

double ExcursionSample::value(Quantity q) const {
  switch (q) {
    case Quantity::tau_plus: return tau_plus;
    case Quantity::t_above: return t_above;
    case Quantity::h0: return h0;
    case Quantity::hhat0: return hhat0;
    case Quantity::max_length: return std::max(tau_plus, t_above);
    case Quantity::max_height: return std::max(h0, hhat0);
  }
  return 0.0;
}

bool ExcursionSample::is_exact(Quantity q) const {
  switch (q) {
    case Quantity::max_length:
      return is_exact(Quantity::tau_plus) && is_exact(Quantity::t_above);
    case Quantity::max_height:
      return is_exact(Quantity::h0) && is_exact(Quantity::hhat0);
    default:
      return (exact & bit(q)) != 0;
  }
}

void SimConfig::validate() const {
  if (n_samples == 0) throw std::invalid_argument("sim.n_samples must be positive");
  if (!(depth_cap > 0.0)) throw std::invalid_argument("sim.depth_cap must be positive");
  if (jump_cap < 1) throw std::invalid_argument("sim.jump_cap must be at least 1");
  if (worker_count < 1) throw std::invalid_argument("sim.workers must be at least 1");
}

double drift_balance_residual(const ProcessSpec& spec, const ExcursionSample& s) {
  const double lhs = spec.drift() * (s.tau_plus + s.t_above);
  return std::abs(lhs - s.jump_sum) / s.jump_sum;
}

namespace {

template <class Fn>
void parallel_blocks(std::uint64_t count, unsigned workers, Fn fn) {
  workers = std::max(1u, workers);
  if (workers == 1 || count < 2) {
    fn(std::uint64_t{0}, count);
    return;
  }
  const std::uint64_t w = std::min<std::uint64_t>(workers, count);
  std::vector<std::thread> pool;
  pool.reserve(w);
  for (std::uint64_t i = 0; i < w; ++i) {
    const std::uint64_t lo = count * i / w;
    const std::uint64_t hi = count * (i + 1) / w;
    pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
  }
  for (auto& t : pool) t.join();
}

}  // namespace

std::vector<ExcursionSample> simulate_excursions(const ProcessSpec& spec, const SimConfig& config,
                                                 std::uint64_t first, std::uint64_t count) {
  std::vector<ExcursionSample> out(count);
  parallel_blocks(count, config.worker_count, [&](std::uint64_t lo, std::uint64_t hi) {
    for (std::uint64_t i = lo; i < hi; ++i) {
      StreamRng rng(config.seed, StreamDomain::excursion, first + i);
      out[i] = sample_excursion(spec, rng, config);
    }
  });
  return out;
}

std::vector<UpperSegment> simulate_upper_segments(const ProcessSpec& spec, double x,
                                                  std::uint64_t seed, std::uint64_t stream_base,
                                                  std::uint64_t count, std::uint64_t jump_cap,
                                                  unsigned workers, double stop_above) {
  std::vector<UpperSegment> out(count);
  parallel_blocks(count, workers, [&](std::uint64_t lo, std::uint64_t hi) {
    for (std::uint64_t i = lo; i < hi; ++i) {
      StreamRng rng(seed, StreamDomain::upper_segment, stream_base + i);
      out[i] = sample_upper_segment(spec, x, rng, jump_cap, stop_above);
    }
  });
  return out;
}

// ---------------------------------------------------------------------------

namespace {

void require_transient(const ProcessSpec& spec, const char* who) {
  if (spec.regime() != Regime::transient) {
    throw std::domain_error(std::string(who) + ": requires a transient spec (series diverges)");
  }
}

// Masses of F_I on the cells ((k-1) delta, k delta], k = 1..k_max; index 0
// holds no mass. Rounding ladder heights up makes every sum stochastically
// larger, so ruin probabilities computed from this lattice are upper bounds.
std::vector<double> lattice_ladder_masses(const JumpMeasure& nu, double delta, std::size_t k_max) {
  std::vector<double> p(k_max + 1, 0.0);
  const double m1 = nu.first_moment();
  double prev = nu.tail_integral(0.0);
  for (std::size_t k = 1; k <= k_max; ++k) {
    const double cur = nu.tail_integral(static_cast<double>(k) * delta);
    p[k] = (prev - cur) / m1;
    prev = cur;
  }
  return p;
}

}  // namespace

double ruin_probability(const ProcessSpec& spec, double x, double delta) {
  require_transient(spec, "ruin_probability");
  if (x < 0.0) throw std::domain_error("ruin_probability: x must be nonnegative");
  if (!(delta > 0.0)) throw std::domain_error("ruin_probability: grid step must be positive");
  const double phi_c = spec.jumps().first_moment() / spec.drift();
  const auto k_max = static_cast<std::size_t>(std::floor(x / delta + 1e-9));
  const auto p = lattice_ladder_masses(spec.jumps(), delta, k_max);

  std::vector<double> cur = p, next(k_max + 1);
  double result = 0.0;
  double weight = phi_c;  // phi^n
  for (int n = 1;; ++n) {
    double cdf = 0.0;
    for (double v : cur) cdf += v;
    result += (1.0 - phi_c) * weight * std::max(0.0, 1.0 - cdf);
    if (weight * phi_c < 1e-10) {
      // Remaining geometric mass; every omitted term is at most this.
      result += weight * phi_c;
      break;
    }
    weight *= phi_c;
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t i = 1; i <= k_max; ++i) {
      if (cur[i] == 0.0) continue;
      for (std::size_t j = 1; i + j <= k_max; ++j) next[i + j] += cur[i] * p[j];
    }
    cur.swap(next);
  }
  return std::min(result, phi_c);
}

std::vector<double> ruin_curve(const ProcessSpec& spec, double delta, std::size_t k_max) {
  require_transient(spec, "ruin_curve");
  if (!(delta > 0.0)) throw std::domain_error("ruin_curve: grid step must be positive");
  const double phi_c = spec.jumps().first_moment() / spec.drift();
  const auto p = lattice_ladder_masses(spec.jumps(), delta, k_max);
  // Panjer recursion for a geometric number of summands with p_0 = 0.
  std::vector<double> g(k_max + 1, 0.0);
  g[0] = 1.0 - phi_c;
  for (std::size_t k = 1; k <= k_max; ++k) {
    double s = 0.0;
    for (std::size_t j = 1; j <= k; ++j) s += p[j] * g[k - j];
    g[k] = phi_c * s;
  }
  std::vector<double> out(k_max + 1);
  double cdf = 0.0;
  for (std::size_t k = 0; k <= k_max; ++k) {
    cdf += g[k];
    out[k] = std::max(0.0, 1.0 - cdf);
  }
  return out;
}

double default_depth_cap(const ProcessSpec& spec, double target) {
  require_transient(spec, "default_depth_cap");
  if (!(target > 0.0 && target < 1.0)) throw std::domain_error("default_depth_cap: target in (0,1)");
  const double mean_jump = spec.jumps().first_moment() / spec.jumps().total_mass();
  constexpr std::size_t kCells = 2048;
  double span = 64.0 * mean_jump;
  for (int attempt = 0; attempt < 40; ++attempt, span *= 4.0) {
    const double delta = span / kCells;
    const auto curve = ruin_curve(spec, delta, kCells);
    for (std::size_t k = 1; k <= kCells; ++k) {
      if (curve[k] <= target) return static_cast<double>(k) * delta;
    }
  }
  throw NumericError("default_depth_cap: target not reached");
}

// ---------------------------------------------------------------------------

void LaplaceAccumulator::add(const ExcursionSample& s, double unknown_return_weight) {
  if (s.zero_hit) return;
  ++n;
  if (s.returned == ReturnState::no) return;
  const double e = std::exp(-(q1 > 0.0 ? q1 * s.tau_plus : 0.0) -
                            (q2 > 0.0 ? q2 * s.t_above : 0.0));
  const bool decided = s.returned == ReturnState::yes &&
                       (q1 == 0.0 || s.is_exact(Quantity::tau_plus)) &&
                       (q2 == 0.0 || s.is_exact(Quantity::t_above));
  if (decided) {
    sum += e;
    sum_sq += e * e;
  } else {
    bias_mass += s.returned == ReturnState::unknown ? e * unknown_return_weight : e;
  }
}

void LaplaceAccumulator::merge(const LaplaceAccumulator& o) {
  n += o.n;
  sum += o.sum;
  sum_sq += o.sum_sq;
  bias_mass += o.bias_mass;
}

LaplaceEstimate LaplaceAccumulator::result() const {
  if (n == 0) throw std::invalid_argument("estimate_joint_laplace: no samples");
  LaplaceEstimate r;
  r.n = n;
  const double nn = static_cast<double>(n);
  r.estimate = sum / nn;
  const double var = n > 1 ? std::max(0.0, (sum_sq - nn * r.estimate * r.estimate) / (nn - 1.0)) : 0.0;
  r.std_error = std::sqrt(var / nn);
  r.bias_bound = bias_mass / nn;
  return r;
}

LaplaceEstimate estimate_joint_laplace(const std::vector<ExcursionSample>& samples, double q1,
                                       double q2, double unknown_return_weight) {
  if (q1 < 0.0 || q2 < 0.0) throw std::domain_error("estimate_joint_laplace: q must be >= 0");
  LaplaceAccumulator acc;
  acc.q1 = q1;
  acc.q2 = q2;
  for (const auto& s : samples) acc.add(s, unknown_return_weight);
  return acc.result();
}

double joint_laplace_closed_form(const ProcessSpec& spec, double q1, double q2) {
  if (q1 < 0.0 || q2 < 0.0) throw std::domain_error("joint_laplace_closed_form: q must be >= 0");
  const double b = spec.drift();
  const double p1 = phi(spec, q1);
  const double p2 = phi(spec, q2);
  const double gap = p1 - p2;
  if (std::abs(gap) <= 1e-9 * std::max(1.0, std::abs(p1))) {
    return 1.0 - psi_derivative(spec, 0.5 * (p1 + p2)) / b;
  }
  return 1.0 - (q1 - q2) / (b * gap);
}

// ---------------------------------------------------------------------------

void SampleSummary::add(const ProcessSpec& spec, const ExcursionSample& s) {
  ++n;
  switch (s.status) {
    case SampleStatus::complete: ++complete; break;
    case SampleStatus::censored_depth: ++censored_depth; break;
    case SampleStatus::censored_jumps: ++censored_jumps; break;
  }
  if (s.returned == ReturnState::unknown) {
    ++unknown_return;
  } else if (s.returned == ReturnState::no) {
    ++escaped_by_ladder;
  } else if (!s.is_exact(Quantity::tau_plus)) {
    ++returned_by_ladder;
  }
  if (s.zero_hit) ++zero_hits;
  total_jumps += s.n_jumps;
  max_jumps = std::max(max_jumps, s.n_jumps);
  if (s.complete() && !s.zero_hit) {
    max_balance_residual = std::max(max_balance_residual, drift_balance_residual(spec, s));
  }
}

void SampleSummary::merge(const SampleSummary& o) {
  n += o.n;
  complete += o.complete;
  censored_depth += o.censored_depth;
  censored_jumps += o.censored_jumps;
  returned_by_ladder += o.returned_by_ladder;
  escaped_by_ladder += o.escaped_by_ladder;
  unknown_return += o.unknown_return;
  zero_hits += o.zero_hits;
  total_jumps += o.total_jumps;
  max_jumps = std::max(max_jumps, o.max_jumps);
  max_balance_residual = std::max(max_balance_residual, o.max_balance_residual);
}

void write_samples_csv(std::ostream& os, const std::vector<ExcursionSample>& samples) {
  os << "tau_plus,t_above,h0,hhat0,status,n_jumps\n";
  const auto old = os.precision(17);
  for (const auto& s : samples) {
    os << s.tau_plus << ',' << s.t_above << ',' << s.h0 << ',' << s.hhat0 << ','
       << to_string(s.status) << ',' << s.n_jumps << '\n';
  }
  os.precision(old);
}

void write_summary_csv(std::ostream& os, const SampleSummary& s) {
  os << "n,complete,censored_depth,censored_jumps,returned_by_ladder,escaped_by_ladder,"
        "unknown_return,zero_hits,total_jumps,max_jumps,max_balance_residual\n";
  os << s.n << ',' << s.complete << ',' << s.censored_depth << ',' << s.censored_jumps << ','
     << s.returned_by_ladder << ',' << s.escaped_by_ladder << ',' << s.unknown_return << ','
     << s.zero_hits << ',' << s.total_jumps << ',' << s.max_jumps << ','
     << s.max_balance_residual << '\n';
}

std::uint64_t fingerprint(const std::vector<ExcursionSample>& samples) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](const void* p, std::size_t len) {
    const auto* c = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= c[i];
      h *= 0x100000001b3ull;
    }
  };
  for (const auto& s : samples) {
    mix(&s.tau_plus, sizeof(double));
    mix(&s.t_above, sizeof(double));
    mix(&s.h0, sizeof(double));
    mix(&s.hhat0, sizeof(double));
    mix(&s.jump_sum, sizeof(double));
    mix(&s.n_jumps, sizeof(s.n_jumps));
    const std::uint8_t tags[4] = {static_cast<std::uint8_t>(s.status),
                                  static_cast<std::uint8_t>(s.returned), s.exact,
                                  static_cast<std::uint8_t>(s.zero_hit)};
    mix(tags, sizeof(tags));
  }
  return h;
}

}  // namespace cpexc
