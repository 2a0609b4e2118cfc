#include <cmath>
#include <sstream>

#include "common.hpp"
#include "cpexc/scalefun.hpp"
#include "cpexc/simulate.hpp"
#include "doctest.h"

using namespace cpexc;
using cpexc::testing::rec_spec;
using cpexc::testing::tra_spec;

namespace {

const ScaleFunctionTable& rec_table() {
  static const auto t = build_scale_table(rec_spec(), 20.0, 0.005);
  return t;
}

const ScaleFunctionTable& tra_table() {
  static const auto t = build_scale_table(tra_spec(), 20.0, 0.005);
  return t;
}

// W from the renewal equation b W(x) = 1 + int_0^x nu_bar(u) W(x - u) du,
// marched forward with the trapezoidal rule.
std::vector<double> renewal_solution(const ProcessSpec& spec, double delta, std::size_t k_max) {
  std::vector<double> nub(k_max + 1), w(k_max + 1);
  for (std::size_t k = 0; k <= k_max; ++k) nub[k] = spec.jumps().tail(delta * k);
  const double b = spec.drift();
  w[0] = 1.0 / b;
  for (std::size_t k = 1; k <= k_max; ++k) {
    double s = 0.5 * nub[k] * w[0];
    for (std::size_t j = 1; j < k; ++j) s += nub[j] * w[k - j];
    // unknown w[k] appears with weight delta / 2 * nub[0]
    w[k] = (1.0 + delta * s) / (b - 0.5 * delta * nub[0]);
  }
  return w;
}

}  // namespace

TEST_CASE("W(0) = 1/b and strict monotonicity") {
  CHECK(rec_table().values[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(tra_table().values[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  for (const auto* t : {&rec_table(), &tra_table()}) {
    CHECK(t->extrapolated);
    for (std::size_t k = 1; k < t->values.size(); ++k) REQUIRE(t->values[k] > t->values[k - 1]);
  }
}

TEST_CASE("W equals exp(x/b)/b below the jump cutoff") {
  const auto& t = rec_table();
  double worst = 0.0;
  for (std::size_t k = 0; k * t.delta <= 1.0 + 1e-12; ++k) {
    const double x = k * t.delta;
    worst = std::max(worst, std::abs(t.values[k] - std::exp(x / 3.0) / 3.0));
  }
  CHECK(worst <= 1e-8);
  CHECK(t(1.0) == doctest::Approx(0.46520).epsilon(1e-5));
}

TEST_CASE("series agrees with the renewal-equation solution on the same grid") {
  const auto spec = rec_spec();
  const auto plain = build_scale_table(spec, 10.0, 0.01, false);
  const auto ref = renewal_solution(spec, 0.01, plain.values.size() - 1);
  for (std::size_t k = 0; k < ref.size(); ++k) {
    REQUIRE(plain.values[k] == doctest::Approx(ref[k]).epsilon(1e-10));
  }
}

TEST_CASE("Laplace transform residual") {
  for (const auto& [spec, t] : {std::pair{rec_spec(), &rec_table()}, std::pair{tra_spec(), &tra_table()}}) {
    for (double q : {1.0, 2.0, 5.0, 10.0}) {
      CAPTURE(q);
      CHECK(laplace_residual(spec, *t, q) <= 1e-6);
    }
  }
  const ProcessSpec atoms(2.0, JumpMeasure::bounded_discrete({{0.5, 1.0}, {1.5, 0.4}}));
  const auto ta = build_scale_table(atoms, 30.0, 0.005);
  for (std::size_t k = 1; k * ta.delta <= 10.0; ++k) REQUIRE(ta.values[k] > ta.values[k - 1]);
  for (double q : {1.0, 2.0, 5.0}) CHECK(laplace_residual(atoms, ta, q) <= 1e-6);
}

TEST_CASE("truncation bookkeeping") {
  const auto& t = rec_table();
  CHECK(t.order > 10);
  CHECK(t.eps_w >= 0.0);
  CHECK(t.eps_w < 1e-8);
}

TEST_CASE("regular variation of W in the recurrent case") {
  const auto t = build_scale_table(rec_spec(), 200.0, 0.05);
  // Top decade of the table: index alpha - 1 = 0.5.
  for (double x : {20.0, 50.0, 100.0}) {
    const double idx = std::log(t(2.0 * x) / t(x)) / std::log(2.0);
    CAPTURE(x);
    CHECK(std::abs(idx - 0.5) <= 0.05);
  }
}

TEST_CASE("transient W approaches 1/beta") {
  const auto t = build_scale_table(tra_spec(), 200.0, 0.05);
  CHECK(t(200.0) < 1.0);
  CHECK(t(200.0) > 0.98);
}

TEST_CASE("exit probabilities") {
  const auto& t = rec_table();
  CHECK(exit_above_prob(t, 0.5, 1.0) == doctest::Approx(1.0 - std::exp(-1.0 / 6.0)).epsilon(1e-8));
  CHECK(exit_above_prob(t, 0.5, 1.0) == doctest::Approx(0.15352).epsilon(1e-4));
  CHECK(exit_above_prob(t, 1e-9, 4.0) < 1e-8);
  CHECK(exit_above_prob(t, 4.0, 4.0) == doctest::Approx(1.0 - (1.0 / 3.0) / t(4.0)).epsilon(1e-14));
  CHECK_THROWS_AS(exit_above_prob(t, 0.0, 1.0), std::domain_error);
  CHECK_THROWS_AS(exit_above_prob(t, 2.0, 1.0), std::domain_error);
  CHECK_THROWS_AS(exit_above_prob(t, 1.0, 25.0), std::range_error);
  CHECK_THROWS_AS(build_scale_table(rec_spec(), 10.0, 0.3), std::domain_error);
  CHECK_THROWS_AS(build_scale_table(rec_spec(), 0.0, 0.01), std::domain_error);
  CHECK_THROWS_AS(build_scale_table(rec_spec(), 10.0, -0.01), std::domain_error);
}

TEST_CASE("exit probabilities against simulated upper segments") {
  const auto spec = rec_spec();
  const auto& t = rec_table();
  const std::uint64_t n = 20000;
  std::uint64_t base = 0;
  for (auto [x, h] : {std::pair{0.5, 4.0}, std::pair{2.0, 8.0}, std::pair{4.0, 4.0}}) {
    const auto segs = simulate_upper_segments(spec, x, 13, base, n, 1'000'000, 1, h);
    base += n;
    std::uint64_t k = 0;
    for (const auto& s : segs) {
      REQUIRE(s.status == SampleStatus::complete);
      k += s.sup > h;
    }
    const double p = exit_above_prob(t, x, h);
    const double phat = double(k) / n;
    CAPTURE(x);
    CAPTURE(h);
    CHECK(std::abs(phat - p) <= 3.0 * std::sqrt(p * (1 - p) / n));
  }
}

TEST_CASE("height oracle at zero levels is the return probability") {
  CHECK(lemma21_height_oracle(rec_spec(), rec_table(), 0.0, 0.0) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(lemma21_height_oracle(tra_spec(), tra_table(), 0.0, 0.0) == doctest::Approx(2.0 / 3.0).epsilon(1e-13));
  const ProcessSpec atoms(2.0, JumpMeasure::bounded_discrete({{0.5, 1.0}, {1.5, 0.4}}));
  const auto ta = build_scale_table(atoms, 10.0, 0.005);
  CHECK(lemma21_height_oracle(atoms, ta, 0.0, 0.0) == doctest::Approx(1.1 / 2.0).epsilon(1e-12));
}

TEST_CASE("height oracle is symmetric and monotone") {
  const auto spec = rec_spec();
  const auto& t = rec_table();
  for (auto [a, b] : {std::pair{2.0, 5.0}, std::pair{0.7, 3.3}, std::pair{1.0, 0.0}}) {
    const double ab = lemma21_height_oracle(spec, t, a, b);
    const double ba = lemma21_height_oracle(spec, t, b, a);
    CHECK(std::abs(ab - ba) <= 1e-8);
  }
  const double p22 = lemma21_height_oracle(spec, t, 2.0, 2.0);
  const double p25 = lemma21_height_oracle(spec, t, 2.0, 5.0);
  const double p55 = lemma21_height_oracle(spec, t, 5.0, 5.0);
  CHECK(p22 > p25);
  CHECK(p25 > p55);
  CHECK(p55 > 0.0);
  const ProcessSpec atoms(2.0, JumpMeasure::bounded_discrete({{0.5, 1.0}, {1.5, 0.4}}));
  const auto ta = build_scale_table(atoms, 10.0, 0.005);
  CHECK(lemma21_height_oracle(atoms, ta, 0.3, 1.1) ==
        doctest::Approx(lemma21_height_oracle(atoms, ta, 1.1, 0.3)).epsilon(1e-10));
  CHECK_THROWS_AS(lemma21_height_oracle(spec, t, 30.0, 1.0), std::range_error);
  CHECK_THROWS_AS(lemma21_height_oracle(tra_spec(), t, 1.0, 1.0), std::invalid_argument);
}

TEST_CASE("height oracle against simulated excursions") {
  for (const auto& [spec, t] : {std::pair{rec_spec(), &rec_table()}, std::pair{tra_spec(), &tra_table()}}) {
    SimConfig cfg;
    cfg.seed = 31;
    cfg.n_samples = 100000;
    cfg.depth_cap = 20.0;
    cfg.jump_cap = 2000;
    const auto samples = simulate_excursions(spec, cfg, 0, cfg.n_samples);
    for (auto [h1, h2] : {std::pair{1.0, 2.0}, std::pair{2.0, 1.0}}) {
      std::uint64_t k = 0, undecided = 0;
      for (const auto& s : samples) {
        if (s.returned != ReturnState::yes) continue;
        const bool hi = s.h0 > h1;
        const bool lo = s.hhat0 > h2;
        if (!s.is_exact(Quantity::h0) && !hi) ++undecided;
        if (!s.is_exact(Quantity::hhat0) && !lo) ++undecided;
        k += hi && lo;
      }
      const double n = double(samples.size());
      const double p = lemma21_height_oracle(spec, *t, h1, h2);
      CAPTURE(h1);
      CHECK(undecided == 0);
      CHECK(std::abs(k / n - p) <= 3.0 * std::sqrt(p * (1 - p) / n));
    }
  }
}

TEST_CASE("CSV round trip") {
  const auto t = build_scale_table(rec_spec(), 2.0, 0.01);
  std::stringstream ss;
  write_scale_table(ss, t, {"source=test"});
  const auto back = read_scale_table(ss);
  CHECK(back.spec_hash == t.spec_hash);
  CHECK(back.delta == t.delta);
  CHECK(back.order == t.order);
  CHECK(back.values.size() == t.values.size());
  for (std::size_t k = 0; k < t.values.size(); ++k) REQUIRE(back.values[k] == t.values[k]);
  std::istringstream bad("# delta=0.1\nx,W\n0,1\n");
  CHECK_THROWS(read_scale_table(bad));
}
