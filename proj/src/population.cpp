#include "rep/population.hpp"

#include <cmath>

#include "rep/errors.hpp"
#include "rep/regression.hpp"

namespace rep {

std::string to_string(LinkFamily f) {
  switch (f) {
    case LinkFamily::cubic_sum: return "cubic-sum";
    case LinkFamily::linear: return "linear";
    case LinkFamily::binary_logit: return "binary-logit-synthetic";
  }
  return "?";
}

LinkFamily link_from_string(const std::string& s) {
  if (s == "cubic-sum") return LinkFamily::cubic_sum;
  if (s == "linear") return LinkFamily::linear;
  if (s == "binary-logit-synthetic") return LinkFamily::binary_logit;
  throw InvalidSpec("unknown link family: " + s);
}

GeneratorSpec GeneratorSpec::two_arm_cubic() {
  GeneratorSpec s;
  s.n = 500;
  s.j = 5;
  s.q = 2;
  s.arms = {400, 100};
  s.link = LinkFamily::cubic_sum;
  s.noise_sd = {0.1, 0.4};  // (control, treated)
  return s;
}

GeneratorSpec GeneratorSpec::multi_arm_binary() {
  GeneratorSpec s;
  s.n = 2298;
  s.j = 7;
  s.q = 4;
  s.arms = {526, 610, 584, 578};
  s.link = LinkFamily::binary_logit;
  s.slope_scale = 3.0;
  return s;
}

void GeneratorSpec::validate() const {
  if (n < 4) throw InvalidSpec("population too small");
  if (j < 0) throw InvalidSpec("negative covariate count");
  if (q < 2) throw InvalidSpec("need at least two arms");
  if (static_cast<int>(arms.size()) != q)
    throw InvalidSpec("arms length must equal Q");
  int total = 0;
  for (int a : arms) {
    if (a < 2) throw InvalidSpec("every arm needs at least two units");
    total += a;
  }
  if (total != n) throw InvalidSpec("arm sizes must sum to N");
  if (link != LinkFamily::binary_logit) {
    if (static_cast<int>(noise_sd.size()) != q)
      throw InvalidSpec("noise_sd length must equal Q");
    for (double s : noise_sd)
      if (s < 0.0) throw InvalidSpec("negative noise scale");
  }
}

ExperimentFrame PotentialOutcomeTable::frame() const {
  return ExperimentFrame::from_external(covariates, spec.arms);
}

Vector PotentialOutcomeTable::ybar() const {
  const int n = static_cast<int>(potentials.rows());
  const int q = static_cast<int>(potentials.cols());
  Vector out(q, 0.0);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < q; ++k) out[k] += potentials(i, k);
  for (double& v : out) v /= n;
  return out;
}

double PotentialOutcomeTable::tau(const Contrast& contrast) const {
  Vector yb = ybar();
  return (contrast.g * yb)[0];
}

Vector PotentialOutcomeTable::observed(
    const std::vector<int>& internal_assignment) const {
  const int n = static_cast<int>(potentials.rows());
  Vector y(n);
  for (int i = 0; i < n; ++i)
    y[i] = potentials(i, internal_assignment[i] - 1);
  return y;
}

namespace {

// External arm index for an internal level: two-arm experiments store
// (treated, control) internally but (control, treated) externally.
int external_index(const GeneratorSpec& spec, int level) {
  if (spec.q == 2) return level == 1 ? 1 : 0;
  return level - 1;
}

void center_column(Matrix& m, int col) {
  double mean = 0.0;
  const int n = static_cast<int>(m.rows());
  for (int i = 0; i < n; ++i) mean += m(i, col);
  mean /= n;
  for (int i = 0; i < n; ++i) m(i, col) -= mean;
}

}  // namespace

PotentialOutcomeTable generate_population(const GeneratorSpec& spec,
                                          RngStream& rng) {
  spec.validate();
  PotentialOutcomeTable pop;
  pop.spec = spec;
  pop.seed = rng.seed();
  pop.stream = rng.stream_id();

  const int n = spec.n, j = spec.j, q = spec.q;
  pop.covariates = Matrix(n, j);
  pop.potentials = Matrix(n, q);

  switch (spec.link) {
    case LinkFamily::cubic_sum: {
      if (q != 2) throw InvalidSpec("cubic-sum link is a two-arm design");
      for (int i = 0; i < n; ++i) {
        double g = 0.0;
        for (int k = 0; k < j; ++k) {
          double x = 2.0 * rng.next_double() - 1.0;
          pop.covariates(i, k) = x;
          g += x * x * x;
        }
        // internal level 1 = treated, level 2 = control
        pop.potentials(i, 0) = g + spec.noise_sd[1] * rng.next_normal();
        pop.potentials(i, 1) = -g + spec.noise_sd[0] * rng.next_normal();
      }
      // center each potential column so tau = 0 exactly
      center_column(pop.potentials, 0);
      center_column(pop.potentials, 1);
      break;
    }
    case LinkFamily::linear: {
      for (int i = 0; i < n; ++i)
        for (int k = 0; k < j; ++k)
          pop.covariates(i, k) = 2.0 * rng.next_double() - 1.0;
      for (int level = 1; level <= q; ++level) {
        const double sd = spec.noise_sd[external_index(spec, level)];
        for (int i = 0; i < n; ++i) {
          double mean = 0.2 * level;
          for (int k = 0; k < j; ++k)
            mean += (1.0 + 0.5 * (level - 1)) * (1.0 - 0.5 * k / std::max(j, 1)) *
                    pop.covariates(i, k);
          pop.potentials(i, level - 1) =
              mean + (sd > 0.0 ? sd * rng.next_normal() : 0.0);
        }
      }
      break;
    }
    case LinkFamily::binary_logit: {
      // A mix of binary and continuous baseline covariates.
      for (int k = 0; k < j; ++k) {
        bool binary = k < (j + 1) / 2;
        double p = 0.5 - 0.08 * k;
        for (int i = 0; i < n; ++i) {
          if (binary)
            pop.covariates(i, k) = rng.next_double() < p ? 1.0 : 0.0;
          else
            pop.covariates(i, k) = rng.next_double();
        }
      }
      // Arm-specific logit coefficients; the draw is part of the recorded
      // provenance through (seed, stream). Potentials are imputed by
      // thresholding the fitted probability at 0.5, so they are fixed
      // binary functions of the covariates.
      for (int level = 1; level <= q; ++level) {
        Vector b(j);
        for (int k = 0; k < j; ++k)
          b[k] = spec.slope_scale * (0.4 + 0.6 * rng.next_double()) *
                 ((k + level) % 2 == 0 ? 1.0 : -1.0);
        double b0 = spec.slope_scale * (0.25 * level - 0.4);
        for (int i = 0; i < n; ++i) {
          double eta = b0;
          for (int k = 0; k < j; ++k) eta += b[k] * (pop.covariates(i, k) - 0.4);
          pop.potentials(i, level - 1) = eta > 0.0 ? 1.0 : 0.0;
        }
      }
      break;
    }
  }

  // center covariates for direct use as an analysis frame
  for (int k = 0; k < j; ++k) center_column(pop.covariates, k);
  return pop;
}

TheoryMoments theory_variances(const PotentialOutcomeTable& pop) {
  if (pop.potentials.empty()) throw MissingPotentials("empty potential table");
  const int n = static_cast<int>(pop.potentials.rows());
  const int q = static_cast<int>(pop.potentials.cols());
  const int j = static_cast<int>(pop.covariates.cols());

  ExperimentFrame fr = pop.frame();
  TheoryMoments out;

  // gamma_q: slope of the theoretical fit lm(Y(q) ~ 1 + x) over all units.
  Matrix design(n, j + 1);
  for (int i = 0; i < n; ++i) {
    design(i, 0) = 1.0;
    for (int k = 0; k < j; ++k) design(i, k + 1) = fr.x()(i, k);
  }
  out.gamma_q.resize(q);
  for (int level = 0; level < q; ++level) {
    OlsFit fit = ols_fit(design, pop.potentials.col(level));
    out.gamma_q[level] =
        Vector(fit.coefficients.begin() + 1, fit.coefficients.end());
  }

  Vector shares(q);
  for (int level = 1; level <= q; ++level) shares[level - 1] = fr.e(level);
  Vector gamma_f(j, 0.0);
  for (int level = 0; level < q; ++level)
    for (int k = 0; k < j; ++k)
      gamma_f[k] += shares[level] * out.gamma_q[level][k];

  Vector ybar = pop.ybar();
  auto adjusted = [&](int i, int level, int which) {
    double y = pop.potentials(i, level);
    if (which == 0) return y;  // N
    const Vector& g = which == 1 ? gamma_f : out.gamma_q[level];
    double adj = 0.0;
    for (int k = 0; k < j; ++k) adj += fr.x()(i, k) * g[k];
    return y - adj;
  };

  auto build_s = [&](int which) {
    Matrix s(q, q);
    for (int a = 0; a < q; ++a)
      for (int b = a; b < q; ++b) {
        double acc = 0.0;
        for (int i = 0; i < n; ++i)
          acc += (adjusted(i, a, which) - ybar[a]) *
                 (adjusted(i, b, which) - ybar[b]);
        s(a, b) = acc / (n - 1);
        s(b, a) = s(a, b);
      }
    return s;
  };
  out.s_n = build_s(0);
  out.s_f = build_s(1);
  out.s_l = build_s(2);

  auto build_v = [&](const Matrix& s) {
    Matrix v = -1.0 * s;
    for (int a = 0; a < q; ++a) v(a, a) += s(a, a) / shares[a] ;
    return v;
  };
  out.v_n = build_v(out.s_n);
  out.v_f = build_v(out.s_f);
  out.v_l = build_v(out.s_l);

  out.gamma_n = gamma_map(out.gamma_q, EstimatorKind::unadjusted, shares);
  out.gamma_f = gamma_map(out.gamma_q, EstimatorKind::additive, shares);

  if (q == 2) {
    const double e1 = shares[0], e0 = shares[1];
    out.v_x = (1.0 / (e0 * e1)) * fr.s2x();
    const Vector& g1 = out.gamma_q[0];
    const Vector& g0 = out.gamma_q[1];
    Vector cn(j), cf(j);
    for (int k = 0; k < j; ++k) {
      cn[k] = g0[k] / e0 + g1[k] / e1;
      cf[k] = (1.0 / e1 - 1.0 / e0) * (g1[k] - g0[k]);
    }
    out.c_n = fr.s2x() * cn;
    out.c_f = fr.s2x() * cf;
    auto contract = [](const Matrix& v) {
      return v(0, 0) + v(1, 1) - 2.0 * v(0, 1);
    };
    out.v_n_scalar = contract(out.v_n);
    out.v_f_scalar = contract(out.v_f);
    out.v_l_scalar = contract(out.v_l);
  }
  return out;
}

}  // namespace rep
