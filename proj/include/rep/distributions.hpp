#pragma once

namespace rep {

enum class Family { standard_normal, student_t, chi_square, f, hotelling_t2 };

// Reference distribution identifier. dof1/dof2 are used as required by the
// family: student_t and chi_square read dof1; f reads (dof1, dof2);
// hotelling_t2 reads (dimension, m) for the two-sample T^2 with m = N - 2.
struct DistributionId {
  Family family = Family::standard_normal;
  int dof1 = 0;
  int dof2 = 0;

  static DistributionId normal() { return {Family::standard_normal, 0, 0}; }
  static DistributionId t(int dof) { return {Family::student_t, dof, 0}; }
  static DistributionId chi2(int dof) { return {Family::chi_square, dof, 0}; }
  static DistributionId fdist(int d1, int d2) { return {Family::f, d1, d2}; }
  static DistributionId hotelling(int dim, int m) {
    return {Family::hotelling_t2, dim, m};
  }
};

double cdf(const DistributionId& d, double x);
double quantile(const DistributionId& d, double p);

// Covariance reduction factor of ellipsoid rerandomization,
// rho(J, a0) = P(chi^2_{J+2} <= a0) / P(chi^2_J <= a0), in (0, 1).
double rho(int j, double a0);

// Building blocks, exposed for tests.
double normal_cdf(double x);
double normal_pdf(double x);
double reg_inc_gamma_lower(double a, double x);   // P(a, x)
double reg_inc_beta(double a, double b, double x);  // I_x(a, b)

}  // namespace rep
