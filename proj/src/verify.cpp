#include "cpexc/verify.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace cpexc {

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

std::string csv_safe(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

}  // namespace

CheckRow row_abs(std::string suite, std::string check, double observed, double expected,
                 double tolerance, std::string note) {
  CheckRow r{std::move(suite), std::move(check), observed, expected, tolerance, false, std::move(note)};
  r.pass = std::abs(observed - expected) <= tolerance;
  return r;
}

CheckRow row_open_interval(std::string suite, std::string check, double observed, double lo,
                           double hi, std::string note) {
  CheckRow r{std::move(suite), std::move(check), observed, 0.5 * (lo + hi), 0.5 * (hi - lo), false,
             std::move(note)};
  r.pass = observed > lo && observed < hi;
  return r;
}

bool all_pass(const std::vector<CheckRow>& rows) {
  return std::all_of(rows.begin(), rows.end(), [](const CheckRow& r) { return r.pass; });
}

void write_checks_csv(std::ostream& os, const std::vector<CheckRow>& rows) {
  const auto old = os.precision(12);
  os << "suite,check,observed,expected,tolerance,pass,note\n";
  for (const auto& r : rows) {
    os << csv_safe(r.suite) << ',' << csv_safe(r.check) << ',' << r.observed << ',' << r.expected << ','
       << r.tolerance << ',' << (r.pass ? "PASS" : "FAIL") << ',' << csv_safe(r.note) << '\n';
  }
  os.precision(old);
}

std::vector<CheckRow> read_checks_csv(std::istream& is) {
  std::vector<CheckRow> rows;
  std::string line;
  bool header = false;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != "suite,check,observed,expected,tolerance,pass,note") {
        throw std::runtime_error("not a checks table: " + line);
      }
      header = true;
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (line.back() == ',') f.emplace_back();
    if (f.size() != 7) throw std::runtime_error("malformed checks row: " + line);
    CheckRow r;
    r.suite = f[0];
    r.check = f[1];
    r.observed = std::stod(f[2]);
    r.expected = std::stod(f[3]);
    r.tolerance = std::stod(f[4]);
    if (f[5] != "PASS" && f[5] != "FAIL") throw std::runtime_error("bad verdict: " + f[5]);
    r.pass = f[5] == "PASS";
    r.note = f[6];
    rows.push_back(std::move(r));
  }
  if (!header) throw std::runtime_error("checks table without header");
  return rows;
}

void stream_excursions(const ProcessSpec& spec, const SimConfig& config, std::uint64_t first,
                       std::uint64_t count, std::uint64_t chunk,
                       const std::function<void(const std::vector<ExcursionSample>&, std::uint64_t)>& sink) {
  if (chunk == 0) throw std::invalid_argument("chunk must be positive");
  for (std::uint64_t off = 0; off < count; off += chunk) {
    const std::uint64_t len = std::min(chunk, count - off);
    sink(simulate_excursions(spec, config, first + off, len), first + off);
  }
}

// ---------------------------------------------------------------------------

LaplaceSuite::LaplaceSuite(const ProcessSpec& spec, const std::vector<double>& grid,
                           double unknown_return_weight)
    : spec_(&spec), weight_(unknown_return_weight) {
  if (grid.empty()) throw std::invalid_argument("empty Laplace grid");
  for (double q1 : grid) {
    for (double q2 : grid) {
      LaplaceAccumulator a;
      a.q1 = q1;
      a.q2 = q2;
      acc_.push_back(a);
    }
  }
  if (spec.regime() == Regime::transient) acc_.push_back(LaplaceAccumulator{});
}

void LaplaceSuite::add(const ExcursionSample& s) {
  for (auto& a : acc_) a.add(s, weight_);
}

std::vector<CheckRow> LaplaceSuite::rows() const {
  std::vector<CheckRow> out;
  for (const auto& a : acc_) {
    const auto r = a.result();
    const double exact = joint_laplace_closed_form(*spec_, a.q1, a.q2);
    std::string note = "n=" + std::to_string(r.n) + " se=" + fmt(r.std_error) + " bias=" + fmt(r.bias_bound);
    if (a.q1 == 0.0 && a.q2 == 0.0) note += " (return probability 1-beta/b)";
    out.push_back(row_abs("laplace", "q1=" + fmt(a.q1) + " q2=" + fmt(a.q2), r.estimate, exact,
                          3.0 * r.std_error + r.bias_bound, note));
  }
  return out;
}

// ---------------------------------------------------------------------------

HeightJointSuite::HeightJointSuite(std::vector<std::pair<double, double>> pairs) : pairs_(std::move(pairs)) {
  for (auto [h1, h2] : pairs_) {
    acc_.emplace_back(Event{{{Quantity::h0, h1}, {Quantity::hhat0, h2}}}, false);
  }
}

void HeightJointSuite::add(const ExcursionSample& s) {
  for (auto& a : acc_) a.add(s);
}

std::vector<CheckRow> HeightJointSuite::rows(const ProcessSpec& spec, const ScaleFunctionTable& table) const {
  std::vector<CheckRow> out;
  for (std::size_t i = 0; i < pairs_.size(); ++i) {
    const auto [h1, h2] = pairs_[i];
    const auto& c = acc_[i].counts();
    const double p = lemma21_height_oracle(spec, table, h1, h2);
    const double n = static_cast<double>(c.n);
    const double phat = static_cast<double>(c.k) / n;
    const double bias = (static_cast<double>(c.undecided) + static_cast<double>(c.unknown)) / n;
    out.push_back(row_abs("lemma21", "P(H0>" + fmt(h1) + ", Hhat0>" + fmt(h2) + ")", phat, p,
                          3.0 * std::sqrt(p * (1.0 - p) / n) + bias,
                          "n=" + std::to_string(c.n) + " undecided=" + std::to_string(c.undecided)));
  }
  for (auto [h1, h2] : pairs_) {
    const double ab = lemma21_height_oracle(spec, table, h1, h2);
    const double ba = lemma21_height_oracle(spec, table, h2, h1);
    out.push_back(row_abs("lemma21", "oracle swap symmetry (" + fmt(h1) + "," + fmt(h2) + ")", ab, ba, 1e-8));
  }
  return out;
}

// ---------------------------------------------------------------------------

StructuralSuite::StructuralSuite(const ProcessSpec& spec, std::vector<double> t_grid,
                                 std::vector<double> h_grid)
    : spec_(&spec) {
  auto add_family = [&](const std::string& tag, Quantity a, Quantity b, const std::vector<double>& g) {
    for (double x : g) {
      names_.push_back("marginal " + tag + " at " + fmt(x));
      diffs_.emplace_back(a, x, b, x);
    }
    for (std::size_t i = 0; i < g.size(); ++i) {
      for (std::size_t j = i + 1; j < g.size(); ++j) {
        names_.push_back("exchangeable " + tag + " at (" + fmt(g[i]) + "," + fmt(g[j]) + ")");
        diffs_.emplace_back(Event{{{a, g[i]}, {b, g[j]}}}, Event{{{a, g[j]}, {b, g[i]}}});
      }
    }
  };
  add_family("tau_plus/t_above", Quantity::tau_plus, Quantity::t_above, t_grid);
  add_family("h0/hhat0", Quantity::h0, Quantity::hhat0, h_grid);
}

void StructuralSuite::add(const ExcursionSample& s) {
  summary_.add(*spec_, s);
  for (auto& d : diffs_) d.add(s);
}

std::vector<CheckRow> StructuralSuite::rows() const {
  std::vector<CheckRow> out;
  out.push_back(row_abs("structural", "drift balance (max relative residual)", summary_.max_balance_residual,
                        0.0, 1e-9, "n=" + std::to_string(summary_.n)));
  for (std::size_t i = 0; i < diffs_.size(); ++i) {
    const auto& d = diffs_[i];
    const double n = std::max<double>(1.0, static_cast<double>(d.n()));
    const double slack = static_cast<double>(d.undecided()) / n;
    out.push_back(row_abs("structural", names_[i], d.mean(), 0.0, 3.0 * d.std_error() + slack,
                          "paired n=" + std::to_string(d.n()) + " undecided=" + std::to_string(d.undecided())));
  }
  return out;
}

// ---------------------------------------------------------------------------

TransientConditionalSuite::TransientConditionalSuite(double t, std::vector<double> a_grid)
    : t_(t), a_(std::move(a_grid)) {
  for (double a : a_) acc_.emplace_back(Quantity::tau_plus, t_, Quantity::t_above, a * t_);
}

void TransientConditionalSuite::add(const ExcursionSample& s) {
  for (auto& c : acc_) c.add(s);
}

std::vector<CheckRow> TransientConditionalSuite::rows(double theta) const {
  std::vector<CheckRow> out;
  for (std::size_t i = 0; i < a_.size(); ++i) {
    const auto e = acc_[i].estimate();
    const double lim = transient_limit(a_[i], theta);
    const double tol = (lim >= e.p_hat ? e.ci_high - e.p_hat : e.p_hat - e.ci_low) + e.bias_bound;
    out.push_back(row_abs("transient_conditional",
                          "P(above>" + fmt(a_[i]) + "t | tau>t) t=" + fmt(t_), e.p_hat, lim, tol,
                          "n=" + std::to_string(e.n) + " ci=[" + fmt(e.ci_low) + ";" + fmt(e.ci_high) + "]"));
  }
  return out;
}

std::vector<CheckRow> ratio_band_rows(const std::string& suite, const std::vector<RatioPoint>& curve,
                                      double tol) {
  std::vector<CheckRow> out;
  for (const auto& p : curve) {
    out.push_back(row_abs(suite, "ratio at " + fmt(p.arg), p.ratio, 1.0, tol,
                          "k=" + std::to_string(p.estimate.k) + " ci=[" + fmt(p.ci_low) + ";" +
                              fmt(p.ci_high) + "]"));
  }
  return out;
}

std::vector<CheckRow> ratio_drift_rows(const std::string& suite, const std::vector<RatioPoint>& curve) {
  std::vector<CheckRow> out;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    const double d = std::abs(curve[i].ratio - 1.0) - std::abs(curve[i - 1].ratio - 1.0);
    CheckRow r{suite,
               "|ratio-1| decreases " + fmt(curve[i - 1].arg) + " -> " + fmt(curve[i].arg),
               d,
               0.0,
               0.0,
               d < 0.0,
               "ratios " + fmt(curve[i - 1].ratio) + " -> " + fmt(curve[i].ratio) + "; pass iff negative"};
    out.push_back(r);
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<CheckRow> scale_table_rows(const ProcessSpec& spec, const ScaleFunctionTable& table) {
  std::vector<CheckRow> out;
  const double b = spec.drift();
  out.push_back(row_abs("scalefun", "W(0) = 1/b", table.values.front(), 1.0 / b, 1e-14));
  const auto& nu = spec.jumps();
  if (nu.family() == JumpFamily::pareto_tail) {
    // nu_bar is constant below xmin, so W(x) = exp(mass x / b) / b there.
    double worst = 0.0;
    for (std::size_t k = 0; k < table.values.size() && k * table.delta <= nu.xmin() + 1e-12; ++k) {
      const double x = k * table.delta;
      worst = std::max(worst, std::abs(table.values[k] - std::exp(nu.total_mass() * x / b) / b));
    }
    out.push_back(row_abs("scalefun", "closed form on [0, xmin]", worst, 0.0, 1e-8));
  }
  for (double q : {1.0, 2.0, 5.0, 10.0}) {
    out.push_back(row_abs("scalefun", "Laplace residual q=" + fmt(q), laplace_residual(spec, table, q), 0.0, 1e-6));
  }
  out.push_back(row_abs("scalefun", "series truncation bound eps_W", table.eps_w, 0.0, 1e-8));
  return out;
}

std::vector<CheckRow> exit_suite(const ProcessSpec& spec, const ExitSuiteConfig& cfg) {
  if (cfg.x.empty() || cfg.h.empty()) throw std::invalid_argument("exit suite needs x and h grids");
  const double x_max = cfg.x_max > 0.0 ? cfg.x_max : *std::max_element(cfg.h.begin(), cfg.h.end());
  const auto table = build_scale_table(spec, x_max, cfg.delta);
  auto out = scale_table_rows(spec, table);
  std::uint64_t base = 0;
  for (double h : cfg.h) {
    for (double x : cfg.x) {
      if (x > h) continue;
      const double p = exit_above_prob(table, x, h);
      const auto segs = simulate_upper_segments(spec, x, cfg.seed, base, cfg.n, cfg.jump_cap, cfg.workers, h);
      base += cfg.n;
      std::uint64_t k = 0, open = 0;
      for (const auto& s : segs) {
        if (s.sup > h) {
          ++k;
        } else if (s.status != SampleStatus::complete) {
          ++open;
        }
      }
      const double n = static_cast<double>(cfg.n);
      out.push_back(row_abs("exit", "P_x(H0>h) x=" + fmt(x) + " h=" + fmt(h), k / n, p,
                            3.0 * std::sqrt(p * (1.0 - p) / n) + open / n,
                            "n=" + std::to_string(cfg.n) + " censored=" + std::to_string(open)));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<CheckRow> limits_identity_rows(const LimitParams& p) {
  p.validate();
  std::vector<CheckRow> out;
  const double rho = p.rho, alpha = p.alpha;
  for (int i = 0; i < 20; ++i) {
    const double a = std::pow(10.0, -2.0 + 4.0 * i / 19.0);
    const double h = limit_h(a, rho);
    const double lhs = std::tgamma(rho) * limit_f(a, rho);
    out.push_back(row_abs("limits", "Gamma(rho) f(a) = a^(rho-1) + h(a) at a=" + fmt(a), lhs,
                          std::pow(a, rho - 1.0) + h, 1e-7));
    out.push_back(row_open_interval("limits", "h(a) in (0,1) at a=" + fmt(a), h, 0.0, 1.0));
  }
  for (double q : {0.5, 1.0, 2.0, 5.0}) {
    const double d = stieltjes_D(q, rho);
    out.push_back(row_abs("limits", "D closed form vs int m/(q+u) at q=" + fmt(q), stieltjes_D_integral(q, rho), d, 1e-6));
    out.push_back(row_abs("limits", "D closed form vs Stieltjes form of h at q=" + fmt(q),
                          stieltjes_D_from_h(q, rho), d, 1e-6));
  }
  double prev = 1.0;
  for (double a : {0.25, 0.5, 1.0, 2.0, 4.0}) {
    const double g = limit_g(a, alpha);
    out.push_back(row_open_interval("limits", "g(a) in (0,1) at a=" + fmt(a), g, 0.0, 1.0));
    out.push_back(row_open_interval("limits", "g decreasing at a=" + fmt(a), g, 0.0, prev));
    prev = g;
  }
  out.push_back(row_open_interval("limits", "1/(Gamma(rho) f(1)) in (1/2,1)", recurrent_length_corollary(rho), 0.5, 1.0));
  out.push_back(row_open_interval("limits", "1/(2 - g(1)) in (1/2,1)", recurrent_height_corollary(alpha), 0.5, 1.0));
  out.push_back(row_abs("limits", "transient limit at a=1", transient_limit(1.0, p.theta),
                        std::pow(2.0, 1.0 - p.theta), 1e-15));
  return out;
}

std::vector<CheckRow> determinism_rows(const ProcessSpec& spec, const SimConfig& config,
                                       std::uint64_t count, unsigned workers) {
  SimConfig one = config;
  one.worker_count = 1;
  SimConfig many = config;
  many.worker_count = std::max(2u, workers);
  const auto a = fingerprint(simulate_excursions(spec, one, 0, count));
  const auto b = fingerprint(simulate_excursions(spec, many, 0, count));
  const auto c = fingerprint(simulate_excursions(spec, one, 0, count));
  std::vector<CheckRow> out;
  out.push_back(row_abs("structural", "bit-identical rerun", a == c ? 1.0 : 0.0, 1.0, 0.0,
                        "n=" + std::to_string(count)));
  out.push_back(row_abs("structural", "bit-identical with " + std::to_string(many.worker_count) + " workers",
                        a == b ? 1.0 : 0.0, 1.0, 0.0, "n=" + std::to_string(count)));
  return out;
}

}  // namespace cpexc
