#include "cpexc/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <boost/math/special_functions/expint.hpp>
#include <boost/math/special_functions/gamma.hpp>

namespace cpexc {

namespace {

bool is_integer(double s) { return std::floor(s) == s; }

// Modified Lentz evaluation of the continued fraction for E_s(z), z > 1.
double expint_cf(double s, double z) {
  constexpr double tiny = 1e-300;
  constexpr double eps = 1e-16;
  double b = z + s;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -i * (s - 1.0 + i);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = c * d;
    h *= del;
    if (std::abs(del - 1.0) < eps) return h * std::exp(-z);
  }
  throw NumericError("expint_general: continued fraction did not converge");
}

}  // namespace

double expint_general(double s, double z) {
  if (!(s > 1.0) || !(z >= 0.0)) {
    throw std::domain_error("expint_general: requires s > 1 and z >= 0");
  }
  if (z == 0.0) return 1.0 / (s - 1.0);
  if (z > 1.0) return expint_cf(s, z);
  if (is_integer(s)) {
    return boost::math::expint(static_cast<unsigned>(s), z);
  }
  // Order a in (0, 1): E_a(z) = z^(a-1) Gamma(1-a, z); then recur upward.
  const double base = s - std::floor(s);
  double e = std::pow(z, base - 1.0) * boost::math::tgamma(1.0 - base, z);
  const double ez = std::exp(-z);
  for (double a = base; a + 0.5 < s; a += 1.0) e = (ez - z * e) / a;
  return e;
}

std::string to_string(Regime r) {
  return r == Regime::recurrent ? "recurrent" : "transient";
}

std::string to_string(JumpFamily f) {
  return f == JumpFamily::pareto_tail ? "pareto_tail" : "bounded_discrete";
}

// ---------------------------------------------------------------------------
// JumpMeasure

JumpMeasure JumpMeasure::pareto_tail(double mass, double xmin, double gamma) {
  if (!(mass > 0.0) || !std::isfinite(mass)) {
    throw std::domain_error("pareto_tail: mass must be positive and finite");
  }
  if (!(xmin > 0.0) || !std::isfinite(xmin)) {
    throw std::domain_error("pareto_tail: xmin must be positive and finite");
  }
  if (!(gamma > 1.0) || !std::isfinite(gamma)) {
    throw std::domain_error("pareto_tail: gamma must exceed 1");
  }
  JumpMeasure m;
  m.family_ = JumpFamily::pareto_tail;
  m.mass_ = mass;
  m.xmin_ = xmin;
  m.gamma_ = gamma;
  m.inv_gamma_ = 1.0 / gamma;
  m.m1_ = mass * xmin * gamma / (gamma - 1.0);
  return m;
}

JumpMeasure JumpMeasure::bounded_discrete(std::vector<Atom> atoms) {
  if (atoms.empty()) {
    throw std::domain_error("bounded_discrete: at least one atom required");
  }
  for (const auto& a : atoms) {
    if (!(a.location > 0.0) || !std::isfinite(a.location) || !(a.weight > 0.0) ||
        !std::isfinite(a.weight)) {
      throw std::domain_error("bounded_discrete: atoms need location > 0 and weight > 0");
    }
  }
  std::sort(atoms.begin(), atoms.end(),
            [](const Atom& l, const Atom& r) { return l.location < r.location; });
  JumpMeasure m;
  m.family_ = JumpFamily::bounded_discrete;
  m.atoms_ = std::move(atoms);
  m.xmin_ = std::numeric_limits<double>::quiet_NaN();
  m.gamma_ = std::numeric_limits<double>::quiet_NaN();
  for (const auto& a : m.atoms_) {
    m.mass_ += a.weight;
    m.m1_ += a.weight * a.location;
  }

  // Walker alias table.
  const std::size_t n = m.atoms_.size();
  m.alias_prob_.assign(n, 0.0);
  m.alias_index_.assign(n, 0);
  std::vector<double> scaled(n);
  std::vector<std::uint32_t> small, large;
  for (std::size_t i = 0; i < n; ++i) {
    scaled[i] = m.atoms_[i].weight * static_cast<double>(n) / m.mass_;
    (scaled[i] < 1.0 ? small : large).push_back(static_cast<std::uint32_t>(i));
  }
  while (!small.empty() && !large.empty()) {
    const auto s = small.back();
    small.pop_back();
    const auto l = large.back();
    m.alias_prob_[s] = scaled[s];
    m.alias_index_[s] = l;
    scaled[l] = (scaled[l] + scaled[s]) - 1.0;
    if (scaled[l] < 1.0) {
      large.pop_back();
      small.push_back(l);
    }
  }
  for (auto i : large) m.alias_prob_[i] = 1.0, m.alias_index_[i] = i;
  for (auto i : small) m.alias_prob_[i] = 1.0, m.alias_index_[i] = i;

  // Integrated tail survival knots: 1 - F_I at 0 and at each atom.
  m.it_x_.push_back(0.0);
  for (const auto& a : m.atoms_) m.it_x_.push_back(a.location);
  m.it_cdf_.reserve(m.it_x_.size());
  for (double x : m.it_x_) m.it_cdf_.push_back(1.0 - m.tail_integral(x) / m.m1_);
  return m;
}

double JumpMeasure::tail(double h) const {
  if (family_ == JumpFamily::pareto_tail) {
    if (h <= xmin_) return mass_;
    return mass_ * std::pow(h / xmin_, -gamma_);
  }
  double s = 0.0;
  for (const auto& a : atoms_) {
    if (a.location >= h) s += a.weight;
  }
  return s;
}

double JumpMeasure::tail_integral(double h) const {
  if (h < 0.0) return m1_ - h * mass_;
  if (family_ == JumpFamily::pareto_tail) {
    const double beyond = mass_ * xmin_ / (gamma_ - 1.0);
    if (h <= xmin_) return mass_ * (xmin_ - h) + beyond;
    return beyond * std::pow(h / xmin_, 1.0 - gamma_);
  }
  double s = 0.0;
  for (const auto& a : atoms_) {
    if (a.location > h) s += a.weight * (a.location - h);
  }
  return s;
}

double JumpMeasure::laplace_deficit(double lambda) const {
  if (lambda == 0.0) return 0.0;
  if (family_ == JumpFamily::pareto_tail) {
    const double z = lambda * xmin_;
    return mass_ * (-std::expm1(-z) + z * expint_general(gamma_, z));
  }
  double s = 0.0;
  for (const auto& a : atoms_) s += -a.weight * std::expm1(-lambda * a.location);
  return s;
}

double JumpMeasure::laplace_first_moment(double lambda) const {
  if (family_ == JumpFamily::pareto_tail) {
    return mass_ * gamma_ * xmin_ * expint_general(gamma_, lambda * xmin_);
  }
  double s = 0.0;
  for (const auto& a : atoms_) s += a.weight * a.location * std::exp(-lambda * a.location);
  return s;
}

double JumpMeasure::jump_from_uniform(double u) const {
  if (family_ == JumpFamily::pareto_tail) {
    if (gamma_ == 2.0) return xmin_ / std::sqrt(u);
    return xmin_ * std::exp(-std::log(u) * inv_gamma_);
  }
  const std::size_t n = atoms_.size();
  const double scaled = (1.0 - u) * static_cast<double>(n);
  auto column = static_cast<std::size_t>(scaled);
  if (column >= n) column = n - 1;
  const double frac = scaled - static_cast<double>(column);
  const std::size_t pick = frac < alias_prob_[column] ? column : alias_index_[column];
  return atoms_[pick].location;
}

double JumpMeasure::integrated_tail_from_uniform(double u) const {
  // u plays the role of the survival probability 1 - F_I(y).
  if (family_ == JumpFamily::pareto_tail) {
    const double beyond = mass_ * xmin_ / (gamma_ - 1.0);
    const double target = u * m1_;
    if (target >= beyond) return xmin_ - (target - beyond) / mass_;
    return xmin_ * std::pow(target / beyond, -1.0 / (gamma_ - 1.0));
  }
  const double cdf = 1.0 - u;
  auto it = std::upper_bound(it_cdf_.begin(), it_cdf_.end(), cdf);
  if (it == it_cdf_.end()) return it_x_.back();
  const auto k = static_cast<std::size_t>(it - it_cdf_.begin());
  const double c0 = it_cdf_[k - 1], c1 = it_cdf_[k];
  return it_x_[k - 1] + (cdf - c0) / (c1 - c0) * (it_x_[k] - it_x_[k - 1]);
}

// ---------------------------------------------------------------------------
// ProcessSpec

MeanAndRegime mean_and_regime(double drift, const JumpMeasure& nu) {
  const double m1 = nu.first_moment();
  double beta = drift - m1;
  if (beta < -kDriftTolerance * std::max(1.0, m1)) {
    throw std::domain_error("drift insufficient: b = " + std::to_string(drift) +
                            " is below the jump mean m1 = " + std::to_string(m1));
  }
  if (std::abs(beta) <= kDriftTolerance * std::max(1.0, m1)) beta = 0.0;
  return {m1, beta, beta == 0.0 ? Regime::recurrent : Regime::transient};
}

MeanAndRegime mean_and_regime(const ProcessSpec& spec) {
  return {spec.jumps().first_moment(), spec.beta(), spec.regime()};
}

ProcessSpec::ProcessSpec(double drift, JumpMeasure nu) : b_(drift), nu_(std::move(nu)) {
  if (!(drift > 0.0) || !std::isfinite(drift)) {
    throw std::domain_error("drift must be positive and finite");
  }
  const auto mr = mean_and_regime(drift, nu_);
  beta_ = mr.beta;
  regime_ = mr.regime;
  if (regime_ == Regime::recurrent && nu_.family() == JumpFamily::pareto_tail &&
      !(nu_.gamma() > 1.0 && nu_.gamma() < 2.0)) {
    throw std::domain_error("recurrent pareto_tail process requires gamma in (1, 2)");
  }
}

ProcessSpec ProcessSpec::recurrent(JumpMeasure nu) {
  const double m1 = nu.first_moment();
  return ProcessSpec(m1, std::move(nu));
}

double ProcessSpec::alpha() const {
  if (regime_ != Regime::recurrent || nu_.family() != JumpFamily::pareto_tail) {
    throw std::domain_error("alpha is defined for recurrent pareto_tail processes only");
  }
  return nu_.gamma();
}

double ProcessSpec::rho() const { return 1.0 / alpha(); }

double ProcessSpec::theta() const {
  if (regime_ != Regime::transient || nu_.family() != JumpFamily::pareto_tail) {
    throw std::domain_error("theta is defined for transient pareto_tail processes only");
  }
  return nu_.gamma();
}

// ---------------------------------------------------------------------------
// psi and Phi

double psi(const ProcessSpec& spec, double lambda) {
  if (!(lambda >= 0.0)) throw std::domain_error("psi: lambda must be >= 0");
  if (lambda == 0.0) return 0.0;
  return spec.drift() * lambda - spec.jumps().laplace_deficit(lambda);
}

double psi_derivative(const ProcessSpec& spec, double lambda) {
  if (!(lambda >= 0.0)) throw std::domain_error("psi_derivative: lambda must be >= 0");
  if (lambda == 0.0) return spec.beta();
  return spec.drift() - spec.jumps().laplace_first_moment(lambda);
}

double phi(const ProcessSpec& spec, double q) {
  if (!(q >= 0.0) || !std::isfinite(q)) throw std::domain_error("phi: q must be >= 0");
  // beta >= 0 and convexity make psi increasing on (0, inf): 0 is the only zero.
  if (q == 0.0) return 0.0;

  double lo = 0.0;
  double hi = (q + spec.jumps().total_mass()) / spec.drift();
  constexpr int kMaxIter = 200;
  int iter = 0;
  // Bisection down to a coarse relative width, then Newton.
  while (hi - lo > 1e-6 * hi) {
    if (++iter > kMaxIter) throw NumericError("phi: bisection did not converge");
    const double mid = 0.5 * (lo + hi);
    (psi(spec, mid) < q ? lo : hi) = mid;
  }
  double lam = 0.5 * (lo + hi);
  for (;;) {
    if (++iter > kMaxIter) throw NumericError("phi: Newton polish did not converge");
    const double f = psi(spec, lam) - q;
    const double d = psi_derivative(spec, lam);
    double next = lam - f / d;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);  // stay bracketed
    (f < 0.0 ? lo : hi) = lam;
    const double step = std::abs(next - lam);
    lam = next;
    if (step <= 1e-14 * lam || f == 0.0) break;
  }
  return lam;
}

// ---------------------------------------------------------------------------

std::string describe(const ProcessSpec& spec) {
  std::ostringstream os;
  os.precision(17);
  os << "drift = " << spec.drift() << '\n';
  const auto& nu = spec.jumps();
  os << "jump.family = " << to_string(nu.family()) << '\n';
  if (nu.family() == JumpFamily::pareto_tail) {
    os << "jump.mass = " << nu.total_mass() << '\n';
    os << "jump.xmin = " << nu.xmin() << '\n';
    os << "jump.gamma = " << nu.gamma() << '\n';
  } else {
    os << "jump.atoms = ";
    for (std::size_t i = 0; i < nu.atoms().size(); ++i) {
      if (i) os << ", ";
      os << nu.atoms()[i].location << ':' << nu.atoms()[i].weight;
    }
    os << '\n';
  }
  return os.str();
}

std::uint64_t spec_hash(const ProcessSpec& spec) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : describe(spec)) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace cpexc
