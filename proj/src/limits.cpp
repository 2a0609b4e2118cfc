#include "cpexc/limits.hpp"

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "cpexc/quadrature.hpp"

namespace cpexc {

namespace {

constexpr double kPi = std::numbers::pi;

void check_rho(double rho) {
  if (!(rho > 0.0 && rho < 1.0)) throw std::domain_error("rho must lie in (0, 1)");
}

void check_alpha(double alpha) {
  if (!(alpha > 1.0 && alpha < 2.0)) throw std::domain_error("alpha must lie in (1, 2)");
}

void check_arg(double a) {
  if (!(a > 0.0) || !std::isfinite(a)) throw std::domain_error("argument must be positive and finite");
}

// m(u) / u^(rho-1), bounded near 0.
double m_reduced(double u, double rho) {
  const double s = std::sin(kPi * rho) / kPi;
  const double ur = std::pow(u, rho);
  return s * (1.0 + u) / (ur * ur - 2.0 * ur * std::cos(kPi * rho) + 1.0);
}

double m_value(double u, double rho) {
  const double s = std::sin(kPi * rho) / kPi;
  if (u <= 1.0) return m_reduced(u, rho) * std::pow(u, rho - 1.0);
  // Divide through by u^(2 rho) so nothing overflows for large u.
  const double r = std::pow(u, -rho);
  return s * (r / u + r) / (1.0 - 2.0 * r * std::cos(kPi * rho) + r * r);
}

// int over [lo, hi] (1 <= lo) of a smooth positive integrand after u = exp(y).
template <class F>
double log_piece(F f, double lo, double hi, double rel) {
  if (hi <= lo) return 0.0;
  auto g = [&](double y) {
    const double u = std::exp(y);
    return f(u) * u;
  };
  return quad::adaptive(g, std::log(lo), std::log(hi), 1e-300, rel).value;
}

// int_0^c t^(rho-1) k(t) dt with k smooth, split at 1 when c > 1.
template <class K>
double power_then_log(K k, double c, double rho, double rel) {
  const double c0 = std::min(c, 1.0);
  double v = quad::left_power_singular([&](double t) { return std::pow(t, rho - 1.0) * k(t); }, c0,
                                       rho, 1e-300, rel)
                 .value;
  if (c > 1.0) v += log_piece([&](double t) { return std::pow(t, rho - 1.0) * k(t); }, 1.0, c, rel);
  return v;
}

}  // namespace

LimitParams LimitParams::from_rho(double rho, double theta) {
  LimitParams p;
  p.rho = rho;
  p.alpha = 1.0 / rho;
  p.theta = theta;
  p.validate();
  return p;
}

LimitParams LimitParams::from_alpha(double alpha, double theta) {
  LimitParams p;
  p.alpha = alpha;
  p.rho = 1.0 / alpha;
  p.theta = theta;
  p.validate();
  return p;
}

void LimitParams::validate() const {
  check_alpha(alpha);
  check_rho(rho);
  if (std::abs(alpha * rho - 1.0) > 1e-12) throw std::domain_error("alpha * rho must equal 1");
  if (!(theta > 1.0)) throw std::domain_error("theta must exceed 1");
  if (!(tol > 0.0 && tol < 1.0)) throw std::domain_error("quadrature tolerance must lie in (0, 1)");
}

double stieltjes_m(double u, double rho) {
  check_rho(rho);
  if (!(u > 0.0)) throw std::domain_error("stieltjes_m: u must be positive");
  if (std::isinf(u)) return 0.0;
  return m_value(u, rho);
}

double stieltjes_D(double q, double rho) {
  check_rho(rho);
  if (!(q > 0.0) || !std::isfinite(q)) throw std::domain_error("stieltjes_D: q must be positive");
  const double eps = std::log(q);
  if (std::abs(q - 1.0) < 1e-4) {
    return (1.0 - rho) / rho * (1.0 - eps / 2.0 + (2.0 - rho) * eps * eps / 12.0);
  }
  return -std::expm1((rho - 1.0) * eps) / std::expm1(rho * eps);
}

double stieltjes_D_integral(double q, double rho, double tol) {
  check_rho(rho);
  if (!(q > 0.0) || !std::isfinite(q)) throw std::domain_error("stieltjes_D: q must be positive");
  // [0, 1]: m(u) ~ u^(rho-1).
  const double lower =
      quad::left_power_singular([&](double u) { return m_value(u, rho) / (q + u); }, 1.0, rho,
                                1e-300, tol)
          .value;
  // [1, inf) with u = 1/v: m(1/v) / (v (q v + 1)) ~ v^(rho-1).
  const double upper = quad::left_power_singular(
                           [&](double v) {
                             // m(1/v) / v = v^(rho-1) (1 + v) / (1 - 2 v^rho cos + v^(2 rho)) * s
                             const double vr = std::pow(v, rho);
                             const double s = std::sin(kPi * rho) / kPi;
                             const double mv = s * std::pow(v, rho - 1.0) * (1.0 + v) /
                                               (1.0 - 2.0 * vr * std::cos(kPi * rho) + vr * vr);
                             return mv / (q * v + 1.0);
                           },
                           1.0, rho, 1e-300, tol)
                           .value;
  return lower + upper;
}

double limit_h(double a, double rho, double tol) {
  check_arg(a);
  check_rho(rho);
  const double half = 0.5 * a;
  // Left half: u^(rho-1) singularity at 0, kernel (a - u)^(rho-1) smooth.
  const double left =
      power_then_log([&](double u) { return m_reduced(u, rho) * std::pow(a - u, rho - 1.0); }, half,
                     rho, tol);
  // Right half with t = a - u: t^(rho-1) singularity at 0, m(a - t) smooth.
  const double right = power_then_log([&](double t) { return m_value(a - t, rho); }, half, rho, tol);
  return left + right;
}

double limit_f(double a, double rho, double tol) {
  check_arg(a);
  check_rho(rho);
  boost::math::quadrature::tanh_sinh<double> ts;
  const double inv = 1.0 / rho;
  const double scale = std::pow(a, rho) / rho;
  const double top = std::pow(0.5, rho);
  // u = a w^(1/rho): (a - u)^(rho-1) m(u) du = scale (a - u)^(rho-1) m(u) / u^(rho-1) dw
  auto left = [&](double w) {
    const double u = a * std::pow(w, inv);
    return scale * std::pow(a - u, rho - 1.0) * m_reduced(u, rho);
  };
  // u = a (1 - v^(1/rho)): (a - u)^(rho-1) du = scale dv
  auto right = [&](double v) {
    const double u = a * (1.0 - std::pow(v, inv));
    return u > 0.0 ? scale * m_value(u, rho) : 0.0;
  };
  const double h = ts.integrate(left, 0.0, top, tol) + ts.integrate(right, 0.0, top, tol);
  return (std::pow(a, rho - 1.0) + h) / std::tgamma(rho);
}

double stieltjes_D_from_h(double q, double rho, double tol) {
  check_rho(rho);
  if (!(q > 0.0) || !std::isfinite(q)) throw std::domain_error("stieltjes_D: q must be positive");
  const double inner = std::min(1e-12, tol * 1e-2);
  // [0, 1]: h(s) ~ s^(2 rho - 1).
  const double lower = quad::left_power_singular(
                           [&](double s) { return limit_h(s, rho, inner) / std::pow(q + s, rho + 1.0); },
                           1.0, 2.0 * rho, 1e-300, tol)
                           .value;
  // [1, inf) with s = 1/v: h(1/v) v^(rho-1) / (q v + 1)^(rho+1).
  const double upper = quad::left_power_singular(
                           [&](double v) {
                             return limit_h(1.0 / v, rho, inner) * std::pow(v, rho - 1.0) /
                                    std::pow(q * v + 1.0, rho + 1.0);
                           },
                           1.0, rho, 1e-300, tol)
                           .value;
  return rho * (lower + upper);
}

double limit_g(double a, double alpha, double tol) {
  check_arg(a);
  check_alpha(alpha);
  const double k = 1.0 / (alpha - 1.0);
  const double p = 2.0 - alpha;
  // 1 - (1 - w)^k without cancellation.
  auto one_minus = [k](double w) { return -std::expm1(k * std::log1p(-w)); };
  // Outer variable z = 1 - tau, inner variable w = 1 - sigma. Near the corner
  // the integrand is (a (1 - t) + (1 - s))^(1 - alpha) ~ (k (a z + w))^(1 - alpha).
  auto inner = [&](double z) {
    const double c = a * one_minus(z);
    return quad::left_power_singular(
               [&](double w) { return std::pow(c + one_minus(w), 1.0 - alpha); }, 1.0, p, 1e-300,
               tol * 1e-2)
        .value;
  };
  const double total = quad::left_power_singular(inner, 1.0, p, 1e-300, tol).value;
  return total / ((alpha - 1.0) * std::tgamma(2.0 - alpha) * std::tgamma(alpha - 1.0));
}

double recurrent_length_limit(double a, double rho) {
  return std::pow(a, rho - 1.0) + 1.0 - std::tgamma(rho) * limit_f(a, rho);
}

double recurrent_height_limit(double a, double alpha) { return limit_g(a, alpha); }

double transient_limit(double a, double theta) {
  check_arg(a);
  if (!(theta > 1.0)) throw std::domain_error("theta must exceed 1");
  return std::pow(1.0 + a, 1.0 - theta);
}

double recurrent_length_corollary(double rho) { return 1.0 / (std::tgamma(rho) * limit_f(1.0, rho)); }

double recurrent_height_corollary(double alpha) { return 1.0 / (2.0 - limit_g(1.0, alpha)); }

double transient_corollary(double theta) {
  if (!(theta > 1.0)) throw std::domain_error("theta must exceed 1");
  return 1.0 / (2.0 - std::pow(2.0, 1.0 - theta));
}

std::string to_string(AsymptoteKind k) {
  switch (k) {
    case AsymptoteKind::length_rec: return "length_rec";
    case AsymptoteKind::height_rec: return "height_rec";
    case AsymptoteKind::length_tra: return "length_tra";
    case AsymptoteKind::height_tra: return "height_tra";
  }
  return "?";
}

AsymptoteKind parse_asymptote_kind(const std::string& name) {
  for (auto k : {AsymptoteKind::length_rec, AsymptoteKind::height_rec, AsymptoteKind::length_tra,
                 AsymptoteKind::height_tra}) {
    if (to_string(k) == name) return k;
  }
  throw std::invalid_argument("unknown asymptote kind: " + name);
}

double tail_asymptote(const ProcessSpec& spec, AsymptoteKind kind, double arg) {
  check_arg(arg);
  const bool rec_kind = kind == AsymptoteKind::length_rec || kind == AsymptoteKind::height_rec;
  if (rec_kind != (spec.regime() == Regime::recurrent)) {
    throw std::domain_error("asymptote " + to_string(kind) + " does not match the " +
                            to_string(spec.regime()) + " regime");
  }
  const double b = spec.drift();
  switch (kind) {
    case AsymptoteKind::length_rec:
      return 1.0 / (b * std::tgamma(spec.rho()) * arg * phi(spec, 1.0 / arg));
    case AsymptoteKind::height_rec: {
      const double alpha = spec.alpha();
      return std::tgamma(2.0 - alpha) * std::tgamma(alpha - 1.0) * arg * spec.jumps().tail(arg) / b;
    }
    case AsymptoteKind::length_tra: {
      const double beta = spec.beta();
      const double x = beta * arg;
      return x * spec.jumps().tail(x) / ((spec.theta() - 1.0) * (b - beta));
    }
    case AsymptoteKind::height_tra:
      return arg * spec.jumps().tail(arg) / ((spec.theta() - 1.0) * (b - spec.beta()));
  }
  return 0.0;
}

}  // namespace cpexc
