#pragma once

// Process model: drift b > 0 plus a finite jump measure on (0, inf).
//
// The process is X_t = -b t + (sum of jumps up to t), spectrally positive,
// with Laplace exponent psi(l) = b l + int (exp(-l x) - 1) nu(dx).

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cpexc {

/// Raised by root finders that fail to converge on a valid input.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class JumpFamily { pareto_tail, bounded_discrete };

struct Atom {
  double location;
  double weight;
};

/// Finite jump measure on (0, inf).
///
/// pareto_tail: tail function nu_bar(h) = mass * min(1, (h / xmin)^-gamma),
///   i.e. jumps are Pareto(xmin, gamma) with total rate `mass`.
/// bounded_discrete: finitely many atoms; used for brute-force oracles.
class JumpMeasure {
 public:
  static JumpMeasure pareto_tail(double mass, double xmin, double gamma);
  static JumpMeasure bounded_discrete(std::vector<Atom> atoms);

  JumpFamily family() const { return family_; }
  double total_mass() const { return mass_; }
  /// First moment m1 = int_0^inf nu_bar(x) dx.
  double first_moment() const { return m1_; }

  /// nu_bar(h) = nu[h, inf), nu_bar(0) = total mass. For atoms this is
  /// left-continuous (an atom at h is counted in nu_bar(h)).
  double tail(double h) const;
  /// int_h^inf nu_bar(x) dx.
  double tail_integral(double h) const;
  /// int_0^inf (1 - exp(-l x)) nu(dx), l >= 0.
  double laplace_deficit(double lambda) const;
  /// int_0^inf x exp(-l x) nu(dx), l >= 0.
  double laplace_first_moment(double lambda) const;

  /// Jump size from a uniform u in (0, 1]. Inverse CDF for pareto_tail, alias
  /// table lookup for bounded_discrete.
  double jump_from_uniform(double u) const;
  /// Sample from the integrated-tail law F_I with density nu_bar / m1.
  double integrated_tail_from_uniform(double u) const;

  // pareto_tail parameters (NaN for bounded_discrete)
  double xmin() const { return xmin_; }
  double gamma() const { return gamma_; }
  const std::vector<Atom>& atoms() const { return atoms_; }

 private:
  JumpMeasure() = default;

  JumpFamily family_ = JumpFamily::pareto_tail;
  double mass_ = 0.0;
  double m1_ = 0.0;
  double xmin_ = 0.0;
  double gamma_ = 0.0;
  double inv_gamma_ = 0.0;
  std::vector<Atom> atoms_;  // sorted by location
  // Walker alias table for bounded_discrete.
  std::vector<double> alias_prob_;
  std::vector<std::uint32_t> alias_index_;
  // Integrated-tail CDF knots for bounded_discrete (F_I is piecewise linear).
  std::vector<double> it_x_;
  std::vector<double> it_cdf_;
};

enum class Regime { recurrent, transient };

std::string to_string(Regime r);
std::string to_string(JumpFamily f);

struct MeanAndRegime {
  double m1;
  double beta;
  Regime regime;
};

/// Relative tolerance for classifying beta = 0.
inline constexpr double kDriftTolerance = 1e-12;

/// Drift plus jump measure with derived quantities.
///
/// Construction validates b > 0 and beta = b - m1 >= 0. A pareto_tail
/// process with beta = 0 must have gamma in (1, 2).
class ProcessSpec {
 public:
  ProcessSpec(double drift, JumpMeasure nu);

  /// Recurrent process: drift set to the closed-form first moment.
  static ProcessSpec recurrent(JumpMeasure nu);

  double drift() const { return b_; }
  const JumpMeasure& jumps() const { return nu_; }
  double beta() const { return beta_; }
  Regime regime() const { return regime_; }

  /// Stable index alpha = gamma (recurrent pareto_tail only).
  double alpha() const;
  /// rho = 1 / alpha.
  double rho() const;
  /// Tail index theta = gamma (transient pareto_tail only).
  double theta() const;

 private:
  double b_;
  JumpMeasure nu_;
  double beta_;
  Regime regime_;
};

/// Laplace exponent psi(l) = b l + int (exp(-l x) - 1) nu(dx).
double psi(const ProcessSpec& spec, double lambda);
/// psi'(l) = b - int x exp(-l x) nu(dx).
double psi_derivative(const ProcessSpec& spec, double lambda);
/// Right inverse Phi(q) = sup{l >= 0 : psi(l) = q}.
double phi(const ProcessSpec& spec, double q);
/// m1, beta and the regime tag. Throws std::domain_error if beta < 0.
MeanAndRegime mean_and_regime(double drift, const JumpMeasure& nu);
MeanAndRegime mean_and_regime(const ProcessSpec& spec);

/// Canonical `key = value` description (the config keys of the spec).
std::string describe(const ProcessSpec& spec);
/// FNV-1a hash of describe(spec).
std::uint64_t spec_hash(const ProcessSpec& spec);

/// Generalized exponential integral E_s(z) = int_1^inf t^-s exp(-z t) dt for
/// s > 1, z >= 0.
double expint_general(double s, double z);

}  // namespace cpexc
