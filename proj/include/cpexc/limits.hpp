#pragma once

// Limit objects of the conditional limit theorems and the Stieltjes
// machinery behind them.
//
//   m(u)  = sin(pi rho)/pi (1 + u) u^(rho-1) / (u^(2 rho) - 2 u^rho cos(pi rho) + 1)
//   h(s)  = int_0^s (s - u)^(rho-1) m(u) du
//   f(x)  = (x^(rho-1) + h(x)) / Gamma(rho)
//   D(q)  = (1 - q^(rho-1)) / (q^rho - 1) = int_0^inf m(u) / (q + u) du
//   g(x)  = (alpha-1)/(Gamma(2-alpha) Gamma(alpha-1))
//           int_0^1 s^(alpha-2) int_0^1 t^(alpha-2) (x + 1 - x t - s)^(1-alpha) dt ds

#include <string>

#include "cpexc/model.hpp"

namespace cpexc {

/// Parameters of the limit functions; alpha rho = 1 is enforced.
struct LimitParams {
  double rho = 2.0 / 3.0;
  double alpha = 1.5;
  double theta = 2.0;
  double tol = 1e-8;

  static LimitParams from_rho(double rho, double theta = 2.0);
  static LimitParams from_alpha(double alpha, double theta = 2.0);
  void validate() const;
};

double stieltjes_m(double u, double rho);
/// Closed form; series in log q for |q - 1| < 1e-4.
double stieltjes_D(double q, double rho);
/// int_0^inf m(u) / (q + u) du, split at 1 with u -> 1/u on the tail.
double stieltjes_D_integral(double q, double rho, double tol = 1e-12);
/// rho int_0^inf h(s) / (q + s)^(rho+1) ds.
double stieltjes_D_from_h(double q, double rho, double tol = 1e-10);

/// h(a) by Gauss-Kronrod on pieces [0, a/2] and [a/2, a], with power
/// substitutions at the singular endpoints and log substitution over [1, a/2].
double limit_h(double a, double rho, double tol = 1e-12);
/// f(a) from its defining integral with the substitutions u = a w^(1/rho)
/// (left half) and u = a (1 - v^(1/rho)) (right half), tanh-sinh quadrature.
double limit_f(double a, double rho, double tol = 1e-12);
/// g(a) after sigma = s^(alpha-1), tau = t^(alpha-1), nested adaptive
/// quadrature with power substitutions at the (1, 1) corner.
double limit_g(double a, double alpha, double tol = 1e-10);

/// a^(rho-1) + 1 - Gamma(rho) f(a).
double recurrent_length_limit(double a, double rho);
double recurrent_height_limit(double a, double alpha);
/// (1 + a)^(1 - theta).
double transient_limit(double a, double theta);

/// 1 / (Gamma(rho) f(1)).
double recurrent_length_corollary(double rho);
/// 1 / (2 - g(1)).
double recurrent_height_corollary(double alpha);
/// 1 / (2 - 2^(1 - theta)).
double transient_corollary(double theta);

enum class AsymptoteKind { length_rec, height_rec, length_tra, height_tra };
std::string to_string(AsymptoteKind k);
AsymptoteKind parse_asymptote_kind(const std::string& name);

/// Right-hand side of the tail theorems:
///   length_rec  1 / (b Gamma(rho) t Phi(1/t))
///   height_rec  Gamma(2-alpha) Gamma(alpha-1) h nu_bar(h) / b
///   length_tra  beta t nu_bar(beta t) / ((theta-1)(b-beta))
///   height_tra  h nu_bar(h) / ((theta-1)(b-beta))
/// The transient ones are conditional on tau_0^+ < inf.
double tail_asymptote(const ProcessSpec& spec, AsymptoteKind kind, double arg);

}  // namespace cpexc
