#include <cmath>
#include <deque>
#include <sstream>

#include "common.hpp"
#include "cpexc/simulate.hpp"
#include "doctest.h"

using namespace cpexc;
using cpexc::testing::rec_spec;
using cpexc::testing::tra_spec;

namespace {

// Replays a fixed list of uniforms; exponentials by inversion.
struct ScriptedRng {
  std::deque<double> script;
  double uniform() {
    if (script.empty()) throw std::logic_error("script exhausted");
    const double u = script.front();
    script.pop_front();
    return u;
  }
  double exponential(double rate) { return -std::log(uniform()) / rate; }
};

// Uniform that inverts to an exponential time e at the given rate.
double time_to_uniform(double e, double rate) { return std::exp(-rate * e); }

bool within_3se(double est, double se, double target) { return std::abs(est - target) <= 3.0 * se; }

SimConfig small_config(std::uint64_t seed, std::uint64_t n) {
  SimConfig c;
  c.seed = seed;
  c.n_samples = n;
  c.depth_cap = 50.0;
  c.jump_cap = 2000;
  return c;
}

}  // namespace

TEST_CASE("hand simulation with a single atom") {
  // Atom at 3 with weight 1/4 and b = 1: m1 = 0.75, beta = 0.25.
  const ProcessSpec spec(1.0, JumpMeasure::bounded_discrete({{3.0, 0.25}}));
  ScriptedRng rng{{time_to_uniform(1.0, 0.25), 0.5, time_to_uniform(3.0, 0.25)}};
  SimConfig cfg;
  const auto s = sample_excursion(spec, rng, cfg);
  CHECK(s.complete());
  CHECK(s.tau_plus == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(s.t_above == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(s.h0 == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(s.hhat0 == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(s.jump_sum == 3.0);
  CHECK(s.n_jumps == 1);
  CHECK(rng.script.empty());
}

TEST_CASE("first jump already upcrosses") {
  const auto spec = rec_spec();
  const double e1 = 0.2;
  ScriptedRng rng{{time_to_uniform(e1, 1.0), 0.5, time_to_uniform(100.0, 1.0)}};
  const auto s = sample_excursion(spec, rng, SimConfig{});
  const double j1 = std::pow(0.5, -1.0 / 1.5);
  REQUIRE(j1 > 3.0 * e1);
  CHECK(s.tau_plus == doctest::Approx(e1).epsilon(1e-14));
  CHECK(s.hhat0 == doctest::Approx(3.0 * e1).epsilon(1e-14));
  CHECK(s.h0 == doctest::Approx(j1 - 3.0 * e1).epsilon(1e-14));
  CHECK(s.t_above == doctest::Approx((j1 - 3.0 * e1) / 3.0).epsilon(1e-14));
}

TEST_CASE("a jump landing on zero ends the excursion") {
  const ProcessSpec spec(1.0, JumpMeasure::bounded_discrete({{1.0, 0.5}}));
  ScriptedRng rng{{time_to_uniform(1.0, 0.5), 0.5}};
  const auto s = sample_excursion(spec, rng, SimConfig{});
  CHECK(s.zero_hit);
  CHECK(s.t_above == 0.0);
  CHECK(s.tau_plus == doctest::Approx(1.0));
}

TEST_CASE("pure drift upper segment") {
  const ProcessSpec spec(1.0, JumpMeasure::bounded_discrete({{0.5, 0.4}}));
  ScriptedRng rng{{time_to_uniform(2.0, 0.4)}};
  const auto seg = sample_upper_segment(spec, 1.0, rng, 100);
  CHECK(seg.tau0_minus == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(seg.sup == 1.0);
  CHECK(seg.status == SampleStatus::complete);
  ScriptedRng rng2{};
  CHECK_THROWS_AS(sample_upper_segment(spec, 0.0, rng2, 100), std::domain_error);
}

TEST_CASE("mean first passage below zero is x / beta") {
  const auto spec = tra_spec();
  const double x = 2.0;
  const auto segs = simulate_upper_segments(spec, x, 5, 0, 200000, 1'000'000, 1,
                                            std::numeric_limits<double>::infinity());
  double s = 0.0;
  for (const auto& g : segs) {
    REQUIRE(g.status == SampleStatus::complete);
    s += g.tau0_minus;
  }
  // Infinite variance (tail ~ t^-2): fixed relative tolerance.
  CHECK(s / segs.size() == doctest::Approx(x / spec.beta()).epsilon(0.05));
}

TEST_CASE("drift balance and sign invariants on complete samples") {
  for (const auto& spec : {rec_spec(), tra_spec()}) {
    const auto cfg = small_config(11, 50000);
    const auto samples = simulate_excursions(spec, cfg, 0, cfg.n_samples);
    SampleSummary sum;
    for (const auto& s : samples) {
      sum.add(spec, s);
      if (s.complete()) {
        CHECK(s.tau_plus > 0.0);
        CHECK(s.t_above > 0.0);
        CHECK(s.h0 > 0.0);
        CHECK(s.hhat0 > 0.0);
        CHECK(s.exact == ExcursionSample::kAllExact);
      }
    }
    CHECK(sum.n == 50000);
    CHECK(sum.complete + sum.censored_depth + sum.censored_jumps == sum.n);
    CHECK(sum.max_balance_residual <= 1e-9);
  }
}

TEST_CASE("reruns are bit-identical and worker-count independent") {
  const auto spec = tra_spec();
  auto cfg = small_config(99, 20000);
  const auto a = simulate_excursions(spec, cfg, 0, cfg.n_samples);
  cfg.worker_count = 3;
  const auto b = simulate_excursions(spec, cfg, 0, cfg.n_samples);
  CHECK(fingerprint(a) == fingerprint(b));
  // Chunked generation reproduces the same sample sequence.
  cfg.worker_count = 1;
  auto c = simulate_excursions(spec, cfg, 0, 7000);
  const auto d = simulate_excursions(spec, cfg, 7000, 13000);
  c.insert(c.end(), d.begin(), d.end());
  CHECK(fingerprint(a) == fingerprint(c));
  cfg.seed = 100;
  CHECK(fingerprint(a) != fingerprint(simulate_excursions(spec, cfg, 0, 20000)));
}

TEST_CASE("ladder completion keeps the return law exact") {
  // Depth cap 5 censors a large share of paths; completion must still give
  // P(return) = 1 - beta / b and the Laplace transform of the above-zero time.
  const auto spec = tra_spec();
  auto cfg = small_config(21, 200000);
  cfg.depth_cap = 5.0;
  const auto samples = simulate_excursions(spec, cfg, 0, cfg.n_samples);
  SampleSummary sum;
  for (const auto& s : samples) sum.add(spec, s);
  CHECK(sum.censored_depth > 20000);
  CHECK(sum.unknown_return == 0);

  const auto p0 = estimate_joint_laplace(samples, 0.0, 0.0);
  CHECK(p0.bias_bound == 0.0);
  CHECK(within_3se(p0.estimate, p0.std_error, 2.0 / 3.0));
  const auto l = estimate_joint_laplace(samples, 0.0, 1.0);
  CHECK(l.bias_bound == 0.0);
  CHECK(within_3se(l.estimate, l.std_error, joint_laplace_closed_form(spec, 0.0, 1.0)));

  // Without completion the return state stays unknown and is bias-bounded.
  cfg.completion = Completion::none;
  const auto raw = simulate_excursions(spec, cfg, 0, 20000);
  const auto r = estimate_joint_laplace(raw, 0.0, 0.0);
  CHECK(r.bias_bound > 0.0);
}

TEST_CASE("recurrent jump cap with completion") {
  const auto spec = rec_spec();
  auto cfg = small_config(22, 200000);
  cfg.jump_cap = 30;
  const auto samples = simulate_excursions(spec, cfg, 0, cfg.n_samples);
  SampleSummary sum;
  for (const auto& s : samples) sum.add(spec, s);
  CHECK(sum.returned_by_ladder > 30000);
  const auto p0 = estimate_joint_laplace(samples, 0.0, 0.0);
  CHECK(p0.estimate == 1.0);
  const auto l = estimate_joint_laplace(samples, 0.0, 0.5);
  CHECK(l.bias_bound < 1e-5);
  CHECK(std::abs(l.estimate - joint_laplace_closed_form(spec, 0.0, 0.5)) <= 3.0 * l.std_error + l.bias_bound);
}

TEST_CASE("joint Laplace transform against the closed form") {
  for (const auto& spec : {rec_spec(), tra_spec()}) {
    const auto cfg = small_config(7, 200000);
    const auto samples = simulate_excursions(spec, cfg, 0, cfg.n_samples);
    for (auto [q1, q2] : {std::pair{1.0, 2.0}, std::pair{0.5, 0.5}, std::pair{2.0, 0.2}}) {
      const auto est = estimate_joint_laplace(samples, q1, q2);
      CAPTURE(q1);
      CAPTURE(q2);
      CHECK(est.bias_bound < 1e-6);
      CHECK(within_3se(est.estimate, est.std_error, joint_laplace_closed_form(spec, q1, q2)));
    }
  }
  CHECK_THROWS(estimate_joint_laplace({}, 1.0, 1.0));
}

TEST_CASE("closed form: diagonal limit and return probability") {
  const auto tra = tra_spec();
  CHECK(joint_laplace_closed_form(tra, 0.0, 0.0) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(joint_laplace_closed_form(rec_spec(), 0.0, 0.0) == doctest::Approx(1.0).epsilon(1e-14));
  // Continuity across the diagonal.
  const double d = joint_laplace_closed_form(tra, 1.0, 1.0);
  const double near = joint_laplace_closed_form(tra, 1.0, 1.0 + 1e-6);
  CHECK(d == doctest::Approx(near).epsilon(1e-6));
  // Symmetry in (q1, q2).
  CHECK(joint_laplace_closed_form(tra, 0.5, 2.0) ==
        doctest::Approx(joint_laplace_closed_form(tra, 2.0, 0.5)).epsilon(1e-15));
}

TEST_CASE("ruin probability") {
  const auto spec = tra_spec();
  CHECK(ruin_probability(spec, 0.0, 0.01) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(ruin_probability(spec, 0.0, 0.01) == doctest::Approx(1.0 - spec.beta() / spec.drift()).epsilon(1e-12));
  double prev = 1.0;
  for (double x : {0.5, 1.0, 2.0, 5.0, 10.0, 20.0}) {
    const double v = ruin_probability(spec, x, 0.02);
    CHECK(v < prev);
    prev = v;
  }
  // The series and the Panjer recursion share the lattice.
  const auto curve = ruin_curve(spec, 0.02, 500);
  for (std::size_t k : {0u, 50u, 250u, 500u}) {
    CHECK(curve[k] == doctest::Approx(ruin_probability(spec, 0.02 * k, 0.02)).epsilon(1e-8));
  }
  CHECK_THROWS_AS(ruin_probability(rec_spec(), 1.0, 0.01), std::domain_error);
  CHECK_THROWS_AS(ruin_probability(spec, 1.0, 0.0), std::domain_error);
}

TEST_CASE("ruin probability at x = 10 against brute-force return frequency") {
  const auto spec = tra_spec();
  const double psi10 = ruin_probability(spec, 10.0, 0.01);
  // Walk from -10; a path deeper than 1e4 is scored as no return
  // (bias below psi_ruin(1e4), far under the standard error).
  const int n = 20000;
  int returns = 0;
  for (int i = 0; i < n; ++i) {
    StreamRng rng(77, StreamDomain::test, static_cast<std::uint64_t>(i));
    double x = -10.0;
    for (;;) {
      x -= 3.0 * rng.exponential(1.0);
      if (x < -1e4) break;
      x += spec.jumps().jump_from_uniform(rng.uniform());
      if (x > 0.0) {
        ++returns;
        break;
      }
    }
  }
  const double p = returns / double(n);
  CHECK(within_3se(p, std::sqrt(p * (1.0 - p) / n), psi10));
}

TEST_CASE("default depth cap meets the target") {
  const auto spec = tra_spec();
  const double m = default_depth_cap(spec, 1e-3);
  CHECK(ruin_probability(spec, m, m / 4000.0) <= 1e-3);
  CHECK(ruin_probability(spec, 0.5 * m, m / 4000.0) > 1e-3);
}

TEST_CASE("CSV dump header and rows") {
  const auto spec = rec_spec();
  const auto samples = simulate_excursions(spec, small_config(1, 3), 0, 3);
  std::ostringstream os;
  write_samples_csv(os, samples);
  std::string first;
  std::istringstream is(os.str());
  std::getline(is, first);
  CHECK(first == "tau_plus,t_above,h0,hhat0,status,n_jumps");
  int rows = 0;
  for (std::string line; std::getline(is, line);) ++rows;
  CHECK(rows == 3);
}

TEST_CASE("config validation") {
  SimConfig c;
  CHECK_THROWS(c.validate());
  c.n_samples = 1;
  CHECK_NOTHROW(c.validate());
  c.jump_cap = 0;
  CHECK_THROWS(c.validate());
  c.jump_cap = 1;
  c.depth_cap = 0.0;
  CHECK_THROWS(c.validate());
}
