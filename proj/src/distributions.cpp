#include "rep/distributions.hpp"

#include <cmath>
#include <limits>

#include "rep/errors.hpp"

namespace rep {

namespace {

constexpr double kEps = 1e-15;
constexpr int kMaxIter = 500;
constexpr double kTiny = 1e-300;

// Lower regularized incomplete gamma by series expansion; valid x < a + 1.
double gamma_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int n = 0; n < kMaxIter; ++n) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * kEps) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Upper regularized incomplete gamma by Lentz continued fraction; x >= a + 1.
double gamma_cf(double a, double x) {
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= kMaxIter; ++i) {
    double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

// Continued fraction for the incomplete beta function (Lentz).
double beta_cf(double a, double b, double x) {
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

void check_dof(const DistributionId& d) {
  switch (d.family) {
    case Family::standard_normal:
      return;
    case Family::student_t:
    case Family::chi_square:
      if (d.dof1 < 1) throw InvalidDof("degrees of freedom must be >= 1");
      return;
    case Family::f:
      if (d.dof1 < 1 || d.dof2 < 1)
        throw InvalidDof("degrees of freedom must be >= 1");
      return;
    case Family::hotelling_t2:
      if (d.dof1 < 1 || d.dof2 < 1)
        throw InvalidDof("Hotelling parameters must be >= 1");
      if (d.dof2 - d.dof1 + 1 < 1)
        throw InvalidDof("Hotelling m - p + 1 must be >= 1");
      return;
  }
  throw InvalidDof("unknown family");
}

double pdf(const DistributionId& d, double x) {
  switch (d.family) {
    case Family::standard_normal:
      return normal_pdf(x);
    case Family::student_t: {
      double v = d.dof1;
      double lg = std::lgamma(0.5 * (v + 1.0)) - std::lgamma(0.5 * v) -
                  0.5 * std::log(v * M_PI) -
                  0.5 * (v + 1.0) * std::log1p(x * x / v);
      return std::exp(lg);
    }
    case Family::chi_square: {
      if (x <= 0.0) return 0.0;
      double k = 0.5 * d.dof1;
      double lg = (k - 1.0) * std::log(x) - 0.5 * x - k * std::log(2.0) -
                  std::lgamma(k);
      return std::exp(lg);
    }
    case Family::f: {
      if (x <= 0.0) return 0.0;
      double d1 = d.dof1, d2 = d.dof2;
      double lg = 0.5 * d1 * std::log(d1) + 0.5 * d2 * std::log(d2) +
                  (0.5 * d1 - 1.0) * std::log(x) -
                  0.5 * (d1 + d2) * std::log(d2 + d1 * x) +
                  std::lgamma(0.5 * (d1 + d2)) - std::lgamma(0.5 * d1) -
                  std::lgamma(0.5 * d2);
      return std::exp(lg);
    }
    case Family::hotelling_t2: {
      // Derivative of the F transform below.
      double p = d.dof1, m = d.dof2;
      double scale = (m - p + 1.0) / (m * p);
      return scale * pdf(DistributionId::fdist(d.dof1, d.dof2 - d.dof1 + 1),
                         scale * x);
    }
  }
  return 0.0;
}

}  // namespace

double normal_pdf(double x) {
  static const double kInvSqrt2Pi = 0.3989422804014327;
  return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / M_SQRT2); }

double reg_inc_gamma_lower(double a, double x) {
  if (x < 0.0 || a <= 0.0)
    throw std::invalid_argument("reg_inc_gamma_lower domain");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) return gamma_series(a, x);
  return 1.0 - gamma_cf(a, x);
}

double reg_inc_beta(double a, double b, double x) {
  if (a <= 0.0 || b <= 0.0 || x < 0.0 || x > 1.0)
    throw std::invalid_argument("reg_inc_beta domain");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  double front = std::exp(std::lgamma(a + b) - std::lgamma(a) -
                          std::lgamma(b) + a * std::log(x) +
                          b * std::log1p(-x));
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
  return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double cdf(const DistributionId& d, double x) {
  check_dof(d);
  switch (d.family) {
    case Family::standard_normal:
      return normal_cdf(x);
    case Family::student_t: {
      double v = d.dof1;
      if (x == 0.0) return 0.5;
      double ib = reg_inc_beta(0.5 * v, 0.5, v / (v + x * x));
      return x > 0.0 ? 1.0 - 0.5 * ib : 0.5 * ib;
    }
    case Family::chi_square:
      if (x <= 0.0) return 0.0;
      return reg_inc_gamma_lower(0.5 * d.dof1, 0.5 * x);
    case Family::f: {
      if (x <= 0.0) return 0.0;
      double d1 = d.dof1, d2 = d.dof2;
      return reg_inc_beta(0.5 * d1, 0.5 * d2, d1 * x / (d1 * x + d2));
    }
    case Family::hotelling_t2: {
      // Two-sample T^2(p, m): (m - p + 1) / (m p) T^2 ~ F_{p, m - p + 1}.
      double p = d.dof1, m = d.dof2;
      double scale = (m - p + 1.0) / (m * p);
      return cdf(DistributionId::fdist(d.dof1, d.dof2 - d.dof1 + 1),
                 scale * x);
    }
  }
  return 0.0;
}

double quantile(const DistributionId& d, double p) {
  check_dof(d);
  if (!(p > 0.0 && p < 1.0))
    throw ProbabilityOutOfRange("quantile needs p in (0, 1)");

  // Bracket the root.
  double lo, hi;
  const bool nonneg = d.family == Family::chi_square || d.family == Family::f ||
                      d.family == Family::hotelling_t2;
  if (nonneg) {
    lo = 0.0;
    hi = 1.0;
    while (cdf(d, hi) < p) {
      hi *= 2.0;
      if (hi > 1e300) return std::numeric_limits<double>::infinity();
    }
  } else {
    lo = -1.0;
    hi = 1.0;
    while (cdf(d, lo) > p) lo *= 2.0;
    while (cdf(d, hi) < p) hi *= 2.0;
  }

  // Bisection, then Newton polish on the CDF.
  double x = 0.5 * (lo + hi);
  for (int i = 0; i < 120; ++i) {
    x = 0.5 * (lo + hi);
    if (hi - lo < 1e-13 * (std::fabs(x) + 1.0)) break;
    if (cdf(d, x) < p)
      lo = x;
    else
      hi = x;
  }
  for (int i = 0; i < 4; ++i) {
    double f = cdf(d, x) - p;
    double g = pdf(d, x);
    if (g <= 0.0) break;
    double step = f / g;
    double x_new = x - step;
    if (x_new <= lo || x_new >= hi) break;
    x = x_new;
    if (std::fabs(step) < 1e-14 * (std::fabs(x) + 1.0)) break;
  }
  return x;
}

double rho(int j, double a0) {
  if (j < 1) throw InvalidDof("rho needs j >= 1");
  if (a0 <= 0.0) throw std::invalid_argument("rho needs a0 > 0");
  double num = cdf(DistributionId::chi2(j + 2), a0);
  double den = cdf(DistributionId::chi2(j), a0);
  return num / den;
}

}  // namespace rep
