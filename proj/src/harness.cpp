#include "rep/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include "rep/design.hpp"
#include "rep/distributions.hpp"
#include "rep/errors.hpp"

namespace rep {

namespace {

double quantile_of(std::vector<double> v, double p) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  double idx = p * (v.size() - 1);
  std::size_t lo = static_cast<std::size_t>(idx);
  std::size_t hi = std::min(lo + 1, v.size() - 1);
  double w = idx - lo;
  return (1.0 - w) * v[lo] + w * v[hi];
}

struct MeanVar {
  double mean = 0.0;
  double var = 0.0;
  double var_se = 0.0;
  double mean_se = 0.0;
};

MeanVar moments(const std::vector<double>& v) {
  MeanVar out;
  const double n = static_cast<double>(v.size());
  if (v.empty()) return out;
  for (double x : v) out.mean += x;
  out.mean /= n;
  double m2 = 0.0, m4 = 0.0;
  for (double x : v) {
    double d = x - out.mean;
    m2 += d * d;
    m4 += d * d * d * d;
  }
  out.var = m2 / (n - 1);
  m2 /= n;
  m4 /= n;
  out.var_se = std::sqrt(std::max(m4 - m2 * m2, 0.0) / n);
  out.mean_se = std::sqrt(out.var / n);
  return out;
}

double ratio_se(double a, double a_se, double b, double b_se) {
  double r = a / b;
  return std::fabs(r) *
         std::sqrt(a_se * a_se / (a * a) + b_se * b_se / (b * b));
}

}  // namespace

std::vector<ReplicationRecord> run_replications(
    const PotentialOutcomeTable& pop, const std::vector<BalanceScheme>& schemes,
    const RunConfig& config) {
  if (config.n_reps < 1) throw InvalidSpec("need at least one replication");
  const ExperimentFrame base = pop.frame();
  for (const auto& s : schemes) s.validate(base.j(), base.q());

  Contrast contrast = config.contrast
                          ? Contrast(*config.contrast)
                          : (base.q() == 2
                                 ? Contrast::difference_two_arm()
                                 : throw InvalidSpec(
                                       "multi-arm runs need a contrast"));
  const double tau_true = pop.tau(contrast);
  const double z_crit =
      quantile(DistributionId::normal(), 1.0 - (1.0 - config.ci_level) / 2.0);

  const std::size_t per_rep = schemes.size() + 1;  // cre row first
  std::vector<ReplicationRecord> records(config.n_reps * per_rep);

  auto worker = [&](long first, long last) {
    ExperimentFrame frame = base;
    for (long rep = first; rep < last; ++rep) {
      RngStream rng(config.master_seed, static_cast<std::uint64_t>(rep));
      std::vector<int> external =
          complete_randomization(base.q() == 2
                                     ? std::vector<int>{base.n0(), base.n1()}
                                     : base.counts(),
                                 rng);
      frame.set_assignment(external);
      frame.set_outcomes(pop.observed(frame.assignment()));

      ReplicationRecord rec;
      rec.rep_id = rep;
      {
        Vector t = base.q() == 2 ? frame.taux_hat() : frame.xhat_plus();
        rec.taux_norm = norm2(t);
      }
      if (base.q() == 2) {
        for (EstimatorKind kind :
             {EstimatorKind::unadjusted, EstimatorKind::additive,
              EstimatorKind::interacted}) {
          EffectEstimate est = estimate_two_arm(frame, kind, config.ci_level);
          double tau = est.point_scalar();
          double se = est.se_scalar();
          int hit = std::fabs(tau - tau_true) <= z_crit * se ? 1 : 0;
          if (kind == EstimatorKind::unadjusted) {
            rec.tau_n = tau; rec.se_n = se; rec.hit_n = hit;
          } else if (kind == EstimatorKind::additive) {
            rec.tau_f = tau; rec.se_f = se; rec.hit_f = hit;
          } else {
            rec.tau_l = tau; rec.se_l = se; rec.hit_l = hit;
          }
        }
      } else {
        for (EstimatorKind kind :
             {EstimatorKind::unadjusted, EstimatorKind::additive,
              EstimatorKind::interacted}) {
          ArmMeansFit fit = estimate_multi_arm(frame, kind);
          auto [tauv, cov] = apply_contrast(fit.y_hat, fit.ehw_cov, contrast);
          double tau = tauv[0];
          double se = std::sqrt(cov(0, 0));
          int hit = std::fabs(tau - tau_true) <= z_crit * se ? 1 : 0;
          if (kind == EstimatorKind::unadjusted) {
            rec.tau_n = tau; rec.se_n = se; rec.hit_n = hit;
          } else if (kind == EstimatorKind::additive) {
            rec.tau_f = tau; rec.se_f = se; rec.hit_f = hit;
          } else {
            rec.tau_l = tau; rec.se_l = se; rec.hit_l = hit;
          }
        }
      }
      rec.gap_nf = rec.tau_n - rec.tau_f;
      rec.gap_nl = rec.tau_n - rec.tau_l;
      rec.gap_fl = rec.tau_f - rec.tau_l;

      ReplicationRecord cre = rec;
      cre.scheme_id = "cre";
      cre.accepted = true;
      records[rep * per_rep] = cre;

      for (std::size_t s = 0; s < schemes.size(); ++s) {
        ReplicationRecord row = rec;
        row.scheme_id = schemes[s].display_id();
        row.accepted = evaluate(frame, schemes[s]).accepted;
        records[rep * per_rep + s + 1] = row;
      }
    }
  };

  long workers = config.parallelism > 0
                     ? config.parallelism
                     : static_cast<long>(std::thread::hardware_concurrency());
  workers = std::max<long>(1, std::min<long>(workers, config.n_reps));
  if (workers == 1) {
    worker(0, config.n_reps);
  } else {
    std::vector<std::thread> pool;
    long chunk = (config.n_reps + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      long first = w * chunk;
      long last = std::min<long>(config.n_reps, first + chunk);
      if (first >= last) break;
      pool.emplace_back(worker, first, last);
    }
    for (auto& t : pool) t.join();
  }
  return records;
}

const SchemeSummary& Summary::by_id(const std::string& id) const {
  for (const auto& s : schemes)
    if (s.scheme_id == id) return s;
  throw std::out_of_range("no scheme summary with id " + id);
}

Summary summarize(const std::vector<ReplicationRecord>& records) {
  Summary out;
  if (records.empty()) return out;

  std::vector<std::string> order;
  for (const auto& r : records)
    if (std::find(order.begin(), order.end(), r.scheme_id) == order.end())
      order.push_back(r.scheme_id);

  auto summarize_one = [&](const std::string& id) {
    SchemeSummary s;
    s.scheme_id = id;
    std::vector<double> tn, tf, tl, taux2, g2nf, g2nl, g2fl;
    long hits_n = 0, hits_f = 0, hits_l = 0;
    for (const auto& r : records) {
      if (r.scheme_id != id) continue;
      ++s.n_total;
      if (!r.accepted) continue;
      ++s.n_accepted;
      tn.push_back(r.tau_n);
      tf.push_back(r.tau_f);
      tl.push_back(r.tau_l);
      taux2.push_back(r.taux_norm * r.taux_norm);
      g2nf.push_back(r.gap_nf * r.gap_nf);
      g2nl.push_back(r.gap_nl * r.gap_nl);
      g2fl.push_back(r.gap_fl * r.gap_fl);
      hits_n += r.hit_n;
      hits_f += r.hit_f;
      hits_l += r.hit_l;
    }
    if (s.n_accepted < 100)
      throw TooFewAccepted("scheme " + id + " kept fewer than 100 records");
    s.acceptance_rate = double(s.n_accepted) / s.n_total;

    auto fill = [&](EstimatorSummary& es, const std::vector<double>& v,
                    long hits) {
      MeanVar mv = moments(v);
      es.mean = mv.mean;
      es.var = mv.var;
      es.var_se = mv.var_se;
      es.q025 = quantile_of(v, 0.025);
      es.q975 = quantile_of(v, 0.975);
      es.coverage = double(hits) / v.size();
      es.coverage_se =
          std::sqrt(es.coverage * (1.0 - es.coverage) / v.size());
    };
    fill(s.est_n, tn, hits_n);
    fill(s.est_f, tf, hits_f);
    fill(s.est_l, tl, hits_l);

    MeanVar mt = moments(taux2);
    s.taux_sq_mean = mt.mean;
    s.taux_sq_se = mt.mean_se;
    MeanVar mnf = moments(g2nf), mnl = moments(g2nl), mfl = moments(g2fl);
    s.gap_sq_nf = mnf.mean;
    s.gap_sq_nf_se = mnf.mean_se;
    s.gap_sq_nl = mnl.mean;
    s.gap_sq_nl_se = mnl.mean_se;
    s.gap_sq_fl = mfl.mean;
    s.gap_sq_fl_se = mfl.mean_se;
    return s;
  };

  for (const auto& id : order) out.schemes.push_back(summarize_one(id));
  out.n_reps = out.schemes.front().n_total;

  const double nan = std::numeric_limits<double>::quiet_NaN();
  const SchemeSummary* cre = nullptr;
  for (const auto& s : out.schemes)
    if (s.scheme_id == "cre") cre = &s;
  for (auto& s : out.schemes) {
    if (!cre || s.scheme_id == "cre") {
      s.var_ratio_n = s.var_ratio_f = s.var_ratio_l = nan;
      s.taux_sq_ratio = nan;
      s.gap_sq_ratio_nf = s.gap_sq_ratio_nl = s.gap_sq_ratio_fl = nan;
      continue;
    }
    auto vr = [&](const EstimatorSummary& a, const EstimatorSummary& b,
                  double& r, double& se) {
      r = a.var / b.var;
      se = ratio_se(a.var, a.var_se, b.var, b.var_se);
    };
    vr(s.est_n, cre->est_n, s.var_ratio_n, s.var_ratio_n_se);
    vr(s.est_f, cre->est_f, s.var_ratio_f, s.var_ratio_f_se);
    vr(s.est_l, cre->est_l, s.var_ratio_l, s.var_ratio_l_se);
    s.taux_sq_ratio = s.taux_sq_mean / cre->taux_sq_mean;
    s.taux_sq_ratio_se =
        ratio_se(s.taux_sq_mean, s.taux_sq_se, cre->taux_sq_mean,
                 cre->taux_sq_se);
    s.gap_sq_ratio_nf = s.gap_sq_nf / cre->gap_sq_nf;
    s.gap_sq_ratio_nf_se =
        ratio_se(s.gap_sq_nf, s.gap_sq_nf_se, cre->gap_sq_nf,
                 cre->gap_sq_nf_se);
    s.gap_sq_ratio_nl = s.gap_sq_nl / cre->gap_sq_nl;
    s.gap_sq_ratio_nl_se =
        ratio_se(s.gap_sq_nl, s.gap_sq_nl_se, cre->gap_sq_nl,
                 cre->gap_sq_nl_se);
    s.gap_sq_ratio_fl = s.gap_sq_fl / cre->gap_sq_fl;
    s.gap_sq_ratio_fl_se =
        ratio_se(s.gap_sq_fl, s.gap_sq_fl_se, cre->gap_sq_fl,
                 cre->gap_sq_fl_se);
  }
  return out;
}

namespace {

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void emit_records_csv(const std::vector<ReplicationRecord>& records,
                      std::ostream& out) {
  out << "rep_id,scheme_id,accepted,taux_norm,tau_n,tau_f,tau_l,"
         "se_n,se_f,se_l,hit_n,hit_f,hit_l,gap_nf,gap_nl,gap_fl\n";
  for (const auto& r : records) {
    out << r.rep_id << ',' << r.scheme_id << ',' << (r.accepted ? 1 : 0) << ','
        << fmt_double(r.taux_norm) << ',' << fmt_double(r.tau_n) << ','
        << fmt_double(r.tau_f) << ',' << fmt_double(r.tau_l) << ','
        << fmt_double(r.se_n) << ',' << fmt_double(r.se_f) << ','
        << fmt_double(r.se_l) << ',' << r.hit_n << ',' << r.hit_f << ','
        << r.hit_l << ',' << fmt_double(r.gap_nf) << ','
        << fmt_double(r.gap_nl) << ',' << fmt_double(r.gap_fl) << '\n';
  }
}

void emit_records_csv(const std::vector<ReplicationRecord>& records,
                      const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  emit_records_csv(records, out);
  if (!out.good()) throw IoError("write failure on " + path);
}

std::vector<ReplicationRecord> read_records_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty records file " + path);
  std::vector<ReplicationRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    ReplicationRecord r;
    auto next = [&]() {
      if (!std::getline(ss, field, ','))
        throw IoError("short record row in " + path);
      return field;
    };
    r.rep_id = std::stol(next());
    r.scheme_id = next();
    r.accepted = std::stoi(next()) != 0;
    r.taux_norm = std::stod(next());
    r.tau_n = std::stod(next());
    r.tau_f = std::stod(next());
    r.tau_l = std::stod(next());
    r.se_n = std::stod(next());
    r.se_f = std::stod(next());
    r.se_l = std::stod(next());
    r.hit_n = std::stoi(next());
    r.hit_f = std::stoi(next());
    r.hit_l = std::stoi(next());
    r.gap_nf = std::stod(next());
    r.gap_nl = std::stod(next());
    r.gap_fl = std::stod(next());
    out.push_back(std::move(r));
  }
  return out;
}

namespace {

// NaN (cre rows have no ratio against themselves) must become null.
std::string fmt_json_double(double v) {
  if (std::isnan(v) || std::isinf(v)) return "null";
  return fmt_double(v);
}

}  // namespace

std::string summary_to_json(const Summary& summary) {
  std::ostringstream out;
  out << "{\n  \"schema_version\": \"" << summary.schema_version << "\",\n"
      << "  \"master_seed\": " << summary.master_seed << ",\n"
      << "  \"rng_streams\": \"replication r draws from stream id r\",\n"
      << "  \"n_reps\": " << summary.n_reps << ",\n  \"schemes\": [\n";
  for (std::size_t i = 0; i < summary.schemes.size(); ++i) {
    const auto& s = summary.schemes[i];
    auto est = [&](const char* name, const EstimatorSummary& e,
                   double vr, double vr_se) {
      out << "      \"" << name << "\": {\"mean\": " << fmt_json_double(e.mean)
          << ", \"var\": " << fmt_json_double(e.var)
          << ", \"var_se\": " << fmt_json_double(e.var_se)
          << ", \"q025\": " << fmt_json_double(e.q025)
          << ", \"q975\": " << fmt_json_double(e.q975)
          << ", \"coverage\": " << fmt_json_double(e.coverage)
          << ", \"coverage_se\": " << fmt_json_double(e.coverage_se)
          << ", \"var_ratio_vs_cre\": " << fmt_json_double(vr)
          << ", \"var_ratio_se\": " << fmt_json_double(vr_se) << "}";
    };
    out << "    {\n      \"scheme_id\": \"" << s.scheme_id << "\",\n"
        << "      \"n_total\": " << s.n_total << ",\n"
        << "      \"n_accepted\": " << s.n_accepted << ",\n"
        << "      \"acceptance_rate\": " << fmt_json_double(s.acceptance_rate)
        << ",\n";
    est("tau_n", s.est_n, s.var_ratio_n, s.var_ratio_n_se);
    out << ",\n";
    est("tau_f", s.est_f, s.var_ratio_f, s.var_ratio_f_se);
    out << ",\n";
    est("tau_l", s.est_l, s.var_ratio_l, s.var_ratio_l_se);
    out << ",\n      \"taux_sq\": {\"mean\": " << fmt_json_double(s.taux_sq_mean)
        << ", \"se\": " << fmt_json_double(s.taux_sq_se)
        << ", \"ratio_vs_cre\": " << fmt_json_double(s.taux_sq_ratio)
        << ", \"ratio_se\": " << fmt_json_double(s.taux_sq_ratio_se) << "},\n"
        << "      \"gap_sq\": {"
        << "\"nf\": " << fmt_json_double(s.gap_sq_nf)
        << ", \"nl\": " << fmt_json_double(s.gap_sq_nl)
        << ", \"fl\": " << fmt_json_double(s.gap_sq_fl)
        << ", \"ratio_nf\": " << fmt_json_double(s.gap_sq_ratio_nf)
        << ", \"ratio_nl\": " << fmt_json_double(s.gap_sq_ratio_nl)
        << ", \"ratio_fl\": " << fmt_json_double(s.gap_sq_ratio_fl) << "}\n    }";
    out << (i + 1 < summary.schemes.size() ? ",\n" : "\n");
  }
  out << "  ]\n}\n";
  return out.str();
}

void emit_summary_json(const Summary& summary, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << summary_to_json(summary);
  if (!out.good()) throw IoError("write failure on " + path);
}

void emit_histograms_csv(const std::vector<ReplicationRecord>& records,
                         const std::string& path, int bins) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "scheme_id,quantity,bin_lo,bin_hi,count,q025,q975\n";

  std::vector<std::string> order;
  for (const auto& r : records)
    if (std::find(order.begin(), order.end(), r.scheme_id) == order.end())
      order.push_back(r.scheme_id);

  const std::vector<std::string> quantities = {
      "taux_norm", "tau_n", "tau_f", "tau_l", "gap_nf", "gap_nl", "gap_fl"};
  auto value_of = [](const ReplicationRecord& r, const std::string& q) {
    if (q == "taux_norm") return r.taux_norm;
    if (q == "tau_n") return r.tau_n;
    if (q == "tau_f") return r.tau_f;
    if (q == "tau_l") return r.tau_l;
    if (q == "gap_nf") return r.gap_nf;
    if (q == "gap_nl") return r.gap_nl;
    return r.gap_fl;
  };

  for (const auto& q : quantities) {
    // bin edges from the cre rows so every scheme shares the same grid
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& r : records) {
      if (r.scheme_id != "cre") continue;
      lo = std::min(lo, value_of(r, q));
      hi = std::max(hi, value_of(r, q));
    }
    if (!(hi > lo)) continue;
    const double width = (hi - lo) / bins;
    for (const auto& id : order) {
      std::vector<long> counts(bins, 0);
      std::vector<double> values;
      for (const auto& r : records) {
        if (r.scheme_id != id || !r.accepted) continue;
        double v = value_of(r, q);
        values.push_back(v);
        int b = static_cast<int>((v - lo) / width);
        b = std::max(0, std::min(bins - 1, b));
        ++counts[b];
      }
      double q025 = quantile_of(values, 0.025);
      double q975 = quantile_of(values, 0.975);
      for (int b = 0; b < bins; ++b)
        out << id << ',' << q << ',' << fmt_double(lo + b * width) << ','
            << fmt_double(lo + (b + 1) * width) << ',' << counts[b] << ','
            << fmt_double(q025) << ',' << fmt_double(q975) << '\n';
    }
  }
  if (!out.good()) throw IoError("write failure on " + path);
}

}  // namespace rep
