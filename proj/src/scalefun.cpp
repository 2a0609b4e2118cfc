#include "cpexc/scalefun.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <boost/math/special_functions/gamma.hpp>

#include "cpexc/quadrature.hpp"

namespace cpexc {

namespace {

bool on_grid(double x, double step) {
  const double r = x / step;
  return std::abs(r - std::round(r)) <= 1e-9 * std::max(1.0, r);
}

// nu_bar sampled on the grid; at an atom location the midpoint of the left
// and right limits, which keeps the trapezoidal rule second order.
std::vector<double> tail_on_grid(const JumpMeasure& nu, double delta, std::size_t k_max) {
  std::vector<double> out(k_max + 1);
  for (std::size_t k = 0; k <= k_max; ++k) out[k] = nu.tail(static_cast<double>(k) * delta);
  if (nu.family() == JumpFamily::bounded_discrete) {
    for (const auto& a : nu.atoms()) {
      const auto k = static_cast<std::size_t>(std::llround(a.location / delta));
      if (k <= k_max) out[k] -= 0.5 * a.weight;
    }
  }
  return out;
}

bool aligned(const JumpMeasure& nu, double step) {
  if (nu.family() == JumpFamily::pareto_tail) return on_grid(nu.xmin(), step);
  return std::all_of(nu.atoms().begin(), nu.atoms().end(),
                     [&](const Atom& a) { return on_grid(a.location, step); });
}

struct SeriesResult {
  std::vector<double> w;
  int order;
};

SeriesResult scale_series(const ProcessSpec& spec, double delta, std::size_t k_max) {
  const double b = spec.drift();
  const auto nub = tail_on_grid(spec.jumps(), delta, k_max);
  const std::size_t n = k_max + 1;
  std::vector<double> term(n, 1.0), next(n), sum(n, 1.0), rev(n);
  int order = 1;
  double sum_sup = 1.0;
  for (int it = 0; it < 100000; ++it) {
    // next = (nu_bar * term) / b by the trapezoidal rule; reversing `term`
    // turns each convolution sum into a forward dot product.
    std::reverse_copy(term.begin(), term.end(), rev.begin());
    const double* r = rev.data();
    const double* v = nub.data();
    double next_sup = 0.0;
    next[0] = 0.0;
    for (std::size_t k = 1; k < n; ++k) {
      const double* rk = r + (k_max - k);
      double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
      std::size_t j = 0;
      for (; j + 3 <= k; j += 4) {
        s0 += v[j] * rk[j];
        s1 += v[j + 1] * rk[j + 1];
        s2 += v[j + 2] * rk[j + 2];
        s3 += v[j + 3] * rk[j + 3];
      }
      for (; j <= k; ++j) s0 += v[j] * rk[j];
      const double full = (s0 + s1) + (s2 + s3);
      const double val = delta * (full - 0.5 * v[0] * term[k] - 0.5 * v[k] * term[0]) / b;
      next[k] = val;
      next_sup = std::max(next_sup, std::abs(val));
    }
    if (next_sup < 1e-12 * sum_sup) break;
    for (std::size_t k = 0; k < n; ++k) {
      sum[k] += next[k];
      sum_sup = std::max(sum_sup, sum[k]);
    }
    term.swap(next);
    ++order;
  }
  for (auto& v : sum) v /= b;
  return {std::move(sum), order};
}

}  // namespace

double ScaleFunctionTable::operator()(double x) const {
  const double top = x_max();
  if (!(x >= 0.0) || x > top * (1.0 + 1e-12)) {
    throw std::range_error("scale table: x = " + std::to_string(x) + " outside [0, " +
                           std::to_string(top) + "]");
  }
  const double r = x / delta;
  auto k = static_cast<std::size_t>(r);
  if (k >= values.size() - 1) return values.back();
  const double frac = r - static_cast<double>(k);
  return values[k] + frac * (values[k + 1] - values[k]);
}

ScaleFunctionTable build_scale_table(const ProcessSpec& spec, double x_max, double delta,
                                     bool richardson) {
  if (!(delta > 0.0) || !std::isfinite(delta)) throw std::domain_error("build_scale_table: delta must be positive");
  if (!(x_max > 0.0) || !std::isfinite(x_max)) throw std::domain_error("build_scale_table: x_max must be positive");
  if (!aligned(spec.jumps(), delta)) {
    throw std::domain_error("build_scale_table: jump cutoff / atoms must be multiples of delta");
  }
  auto k_max = static_cast<std::size_t>(std::ceil(x_max / delta - 1e-9));
  if (k_max % 2) ++k_max;  // even, for Simpson and the coarse grid

  ScaleFunctionTable t;
  t.delta = delta;
  t.drift = spec.drift();
  t.spec_hash = spec_hash(spec);
  auto fine = scale_series(spec, delta, k_max);
  t.order = fine.order;
  t.values = std::move(fine.w);

  if (richardson && aligned(spec.jumps(), 2.0 * delta)) {
    const auto coarse = scale_series(spec, 2.0 * delta, k_max / 2);
    std::vector<double> corr(k_max + 1, 0.0);
    for (std::size_t k = 0; k <= k_max; k += 2) corr[k] = (t.values[k] - coarse.w[k / 2]) / 3.0;
    for (std::size_t k = 1; k < k_max; k += 2) corr[k] = 0.5 * (corr[k - 1] + corr[k + 1]);
    for (std::size_t k = 0; k <= k_max; ++k) t.values[k] += corr[k];
    t.extrapolated = true;
  }

  // Once W saturates (transient case) increments drop below double
  // resolution; only a decrease beyond rounding level is an error.
  for (std::size_t k = 1; k <= k_max; ++k) {
    if (!(t.values[k] > t.values[k - 1] - 1e-13 * t.values[k])) {
      throw NumericError("build_scale_table: W not strictly increasing at x = " +
                         std::to_string(static_cast<double>(k) * delta));
    }
  }
  // N_n <= (mass x)^n / n!, so the omitted tail is a Poisson tail.
  const double mu = spec.jumps().total_mass() * t.x_max() / spec.drift();
  t.eps_w = std::exp(mu) * boost::math::gamma_p(static_cast<double>(t.order), mu) / spec.drift();
  return t;
}

double exit_above_prob(const ScaleFunctionTable& table, double x, double h) {
  if (!(x > 0.0)) throw std::domain_error("exit_above_prob: x must be positive");
  if (x > h) throw std::domain_error("exit_above_prob: x must not exceed h");
  if (h > table.x_max() * (1.0 + 1e-12)) {
    throw std::range_error("exit_above_prob: h = " + std::to_string(h) +
                           " beyond the scale table (x_max = " + std::to_string(table.x_max()) +
                           "); rebuild the table with a larger x_max");
  }
  return 1.0 - table(h - x) / table(h);
}

double exit_above_prob_extended(const ScaleFunctionTable& table, double x, double h) {
  if (x > h) return 1.0;
  if (x <= 0.0) return 0.0;
  return exit_above_prob(table, x, h);
}

double laplace_residual(const ProcessSpec& spec, const ScaleFunctionTable& table, double q) {
  if (!(q > 0.0)) throw std::domain_error("laplace_residual: q must be positive");
  const std::size_t k_max = table.values.size() - 1;
  if (k_max % 2) throw std::domain_error("laplace_residual: table needs an even number of cells");
  double s = 0.0;
  for (std::size_t k = 0; k <= k_max; ++k) {
    const double f = std::exp(-q * table.delta * static_cast<double>(k)) * table.values[k];
    const double w = (k == 0 || k == k_max) ? 1.0 : (k % 2 ? 4.0 : 2.0);
    s += w * f;
  }
  const double integral = s * table.delta / 3.0;
  const double lhs = q * integral + std::exp(-q * table.x_max()) * table.values.back();
  return std::abs(lhs - q / psi(spec, q));
}

// ---------------------------------------------------------------------------
// Height oracle

namespace {

// Piecewise-linear y -> P_y(H_0 > h) on [0, h], pieces ascending in y.
struct LinearPiece {
  double lo, hi, f_lo, f_hi;
  double slope() const { return (f_hi - f_lo) / (hi - lo); }
  double at(double y) const { return f_lo + (y - lo) * slope(); }
};

std::vector<LinearPiece> exit_pieces(const ScaleFunctionTable& table, double h) {
  std::vector<double> ys;
  const double d = table.delta;
  for (std::size_t k = 0; static_cast<double>(k) * d < h; ++k) ys.push_back(h - static_cast<double>(k) * d);
  ys.push_back(0.0);
  std::reverse(ys.begin(), ys.end());
  std::vector<LinearPiece> out;
  const double wh = table(h);
  auto f = [&](double y) { return y <= 0.0 ? 0.0 : 1.0 - table(h - y) / wh; };
  for (std::size_t i = 0; i + 1 < ys.size(); ++i) {
    if (ys[i + 1] - ys[i] <= 1e-14 * std::max(1.0, h)) continue;
    out.push_back({ys[i], ys[i + 1], f(ys[i]), f(ys[i + 1])});
  }
  return out;
}

double eval_pieces(const std::vector<LinearPiece>& pieces, double y, double h) {
  if (y >= h) return 1.0;
  if (y <= 0.0) return 0.0;
  auto it = std::upper_bound(pieces.begin(), pieces.end(), y,
                             [](double v, const LinearPiece& p) { return v < p.hi; });
  if (it == pieces.end()) return pieces.empty() ? 1.0 : pieces.back().f_hi;
  return it->at(y);
}

std::vector<double> sorted_breaks(std::vector<double> pts, double lo, double hi) {
  pts.push_back(lo);
  pts.push_back(hi);
  std::vector<double> out;
  for (double p : pts) {
    if (p >= lo && p <= hi) out.push_back(p);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end(),
                        [&](double a, double b) { return b - a <= 1e-13 * std::max(1.0, hi); }),
            out.end());
  return out;
}

// int_{zl}^{zh} (a0 + a1 z) c z^(-g-1) dz
double power_moment(double a0, double a1, double c, double g, double zl, double zh) {
  const double m0 = (std::pow(zl, -g) - std::pow(zh, -g)) / g;
  const double m1 = (std::pow(zh, 1.0 - g) - std::pow(zl, 1.0 - g)) / (1.0 - g);
  return c * (a0 * m0 + a1 * m1);
}

double oracle_pareto(const ProcessSpec& spec, const ScaleFunctionTable& table, double h1, double h2) {
  const auto& nu = spec.jumps();
  const double xmin = nu.xmin(), g = nu.gamma();
  const double c = nu.total_mass() * g * std::pow(xmin, g);
  const auto fp = exit_pieces(table, h2);
  const auto gp = exit_pieces(table, h1);
  const quad::GaussLegendre gl(10);

  // int_0^h2 F(y) p(x + y) dy + nu_bar(x + h2)
  auto inner = [&](double x) {
    double s = nu.tail(x + h2);
    const double y_start = xmin - x;
    for (const auto& p : fp) {
      const double lo = std::max(p.lo, y_start);
      if (lo >= p.hi) continue;
      const double slope = p.slope();
      const double a = p.f_lo - slope * p.lo;  // F(y) = a + slope y
      s += power_moment(a - slope * x, slope, c, g, x + lo, x + p.hi);
    }
    return s;
  };

  double total = 0.0;
  // Outer integral over x in [0, h1], split where G or the inner integral kinks.
  std::vector<double> pts;
  for (const auto& p : gp) pts.push_back(p.lo);
  for (const auto& p : fp) pts.push_back(xmin - p.lo), pts.push_back(xmin - p.hi);
  pts.push_back(xmin);
  const auto xs = sorted_breaks(pts, 0.0, h1);
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    total += gl.integrate([&](double x) { return eval_pieces(gp, x, h1) * inner(x); }, xs[i], xs[i + 1]);
  }
  // int_0^h2 F(y) nu_bar(h1 + y) dy
  std::vector<double> ypts;
  for (const auto& p : fp) ypts.push_back(p.lo);
  ypts.push_back(xmin - h1);
  const auto ys = sorted_breaks(ypts, 0.0, h2);
  for (std::size_t i = 0; i + 1 < ys.size(); ++i) {
    total += gl.integrate([&](double y) { return eval_pieces(fp, y, h2) * nu.tail(h1 + y); }, ys[i], ys[i + 1]);
  }
  total += nu.tail_integral(h1 + h2);
  return total / spec.drift();
}

double oracle_atoms(const ProcessSpec& spec, const ScaleFunctionTable& table, double h1, double h2) {
  // nu(x + dy) puts mass w_i at y = a_i - x.
  const auto fp = exit_pieces(table, h2);
  const auto gp = exit_pieces(table, h1);
  const quad::GaussLegendre gl(6);
  double total = 0.0;
  for (const auto& atom : spec.jumps().atoms()) {
    const double a = atom.location;
    std::vector<double> pts;
    for (const auto& p : gp) pts.push_back(p.lo);
    for (const auto& p : fp) pts.push_back(a - p.lo);
    pts.push_back(h1);
    pts.push_back(a - h2);
    const auto xs = sorted_breaks(pts, 0.0, a);
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
      total += atom.weight * gl.integrate(
                                 [&](double x) {
                                   return eval_pieces(gp, x, h1) * eval_pieces(fp, a - x, h2);
                                 },
                                 xs[i], xs[i + 1]);
    }
  }
  return total / spec.drift();
}

}  // namespace

double lemma21_height_oracle(const ProcessSpec& spec, const ScaleFunctionTable& table, double h1,
                             double h2) {
  if (h1 < 0.0 || h2 < 0.0) throw std::domain_error("lemma21_height_oracle: levels must be >= 0");
  const double top = table.x_max() * (1.0 + 1e-12);
  if (h1 > top || h2 > top) {
    throw std::range_error("lemma21_height_oracle: levels exceed the scale table (x_max = " +
                           std::to_string(table.x_max()) + ")");
  }
  if (table.spec_hash != spec_hash(spec)) {
    throw std::invalid_argument("lemma21_height_oracle: table was built for a different spec");
  }
  return spec.jumps().family() == JumpFamily::pareto_tail ? oracle_pareto(spec, table, h1, h2)
                                                          : oracle_atoms(spec, table, h1, h2);
}

// ---------------------------------------------------------------------------

void write_scale_table(std::ostream& os, const ScaleFunctionTable& t,
                       const std::vector<std::string>& extra_metadata) {
  for (const auto& line : extra_metadata) os << "# " << line << '\n';
  os.precision(17);
  os << "# spec_hash=" << std::hex << t.spec_hash << std::dec << '\n';
  os << "# delta=" << t.delta << '\n';
  os << "# order=" << t.order << '\n';
  os << "# eps_W=" << t.eps_w << '\n';
  os << "# drift=" << t.drift << '\n';
  os << "# extrapolated=" << (t.extrapolated ? 1 : 0) << '\n';
  os << "x,W\n";
  for (std::size_t k = 0; k < t.values.size(); ++k) {
    os << t.delta * static_cast<double>(k) << ',' << t.values[k] << '\n';
  }
}

ScaleFunctionTable read_scale_table(std::istream& is) {
  std::map<std::string, std::string> meta;
  std::string line;
  bool header = false;
  ScaleFunctionTable t;
  std::vector<double> xs;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq != std::string::npos) {
        auto key = line.substr(1, eq - 1);
        key.erase(0, key.find_first_not_of(' '));
        meta[key] = line.substr(eq + 1);
      }
      continue;
    }
    if (!header) {
      if (line != "x,W") throw std::invalid_argument("scale table: expected header x,W");
      header = true;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw std::invalid_argument("scale table: malformed row: " + line);
    xs.push_back(std::stod(line.substr(0, comma)));
    t.values.push_back(std::stod(line.substr(comma + 1)));
  }
  for (const char* k : {"spec_hash", "delta", "order", "eps_W", "drift"}) {
    if (!meta.count(k)) throw std::invalid_argument(std::string("scale table: missing metadata ") + k);
  }
  if (t.values.size() < 2) throw std::invalid_argument("scale table: too few rows");
  t.spec_hash = std::stoull(meta["spec_hash"], nullptr, 16);
  t.delta = std::stod(meta["delta"]);
  t.order = std::stoi(meta["order"]);
  t.eps_w = std::stod(meta["eps_W"]);
  t.drift = std::stod(meta["drift"]);
  t.extrapolated = meta.count("extrapolated") && meta["extrapolated"] == "1";
  for (std::size_t k = 0; k < xs.size(); ++k) {
    if (std::abs(xs[k] - t.delta * static_cast<double>(k)) > 1e-9 * std::max(1.0, xs[k])) {
      throw std::invalid_argument("scale table: rows are not on a uniform grid");
    }
    if (k && !(t.values[k] > t.values[k - 1] - 1e-13 * t.values[k])) {
      throw std::invalid_argument("scale table: W is not strictly increasing");
    }
  }
  return t;
}

}  // namespace cpexc
