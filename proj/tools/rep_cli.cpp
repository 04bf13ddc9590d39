// Command-line front end: rerandomization, balance checks, effect
// estimation, Monte Carlo runs, and law summaries over CSV/JSON files.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "rep/asymlaw.hpp"
#include "rep/balance.hpp"
#include "rep/csv.hpp"
#include "rep/design.hpp"
#include "rep/distributions.hpp"
#include "rep/errors.hpp"
#include "rep/estimate.hpp"
#include "rep/harness.hpp"
#include "rep/population.hpp"

using nlohmann::json;

namespace {

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw rep::IoError("cannot open " + path);
  json j;
  in >> j;
  return j;
}

void write_json_file(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw rep::IoError("cannot open " + path + " for writing");
  out << j.dump(2) << '\n';
}

rep::BalanceScheme scheme_from_json(const json& j) {
  rep::BalanceScheme s;
  s.model = rep::model_from_string(j.at("model").get<std::string>());
  s.rule = rep::rule_from_string(j.at("rule").get<std::string>());
  if (j.contains("alpha_marginal")) {
    if (j["alpha_marginal"].is_number())
      s.alpha_marginal = {j["alpha_marginal"].get<double>()};
    else
      s.alpha_marginal = j["alpha_marginal"].get<std::vector<double>>();
  }
  if (j.contains("alpha_joint")) s.alpha_joint = j["alpha_joint"].get<double>();
  if (j.contains("joint_reference")) {
    std::string ref = j["joint_reference"].get<std::string>();
    if (ref == "wald")
      s.joint_reference = rep::JointReference::wald;
    else if (ref == "default")
      s.joint_reference = rep::JointReference::default_ref;
    else
      throw rep::IncompatibleScheme("unknown joint_reference: " + ref);
  }
  if (j.contains("studentization")) {
    std::string st = j["studentization"].get<std::string>();
    if (st == "ehw")
      s.studentization = rep::Studentization::ehw;
    else if (st == "classic")
      s.studentization = rep::Studentization::classic;
    else
      throw rep::IncompatibleScheme("unknown studentization: " + st);
  }
  if (j.contains("id")) s.id = j["id"].get<std::string>();
  return s;
}

json scheme_to_json(const rep::BalanceScheme& s) {
  json j;
  j["model"] = rep::to_string(s.model);
  j["rule"] = rep::to_string(s.rule);
  j["alpha_marginal"] = s.alpha_marginal;
  j["alpha_joint"] = s.alpha_joint;
  j["joint_reference"] =
      s.joint_reference == rep::JointReference::wald ? "wald" : "default";
  j["studentization"] =
      s.studentization == rep::Studentization::ehw ? "ehw" : "classic";
  j["id"] = s.display_id();
  return j;
}

json report_to_json(const rep::BalanceReport& r) {
  json j;
  j["marginal_stats"] = r.marginal_stats;
  j["marginal_pvalues"] = r.marginal_pvalues;
  if (r.joint_stat) j["joint_stat"] = *r.joint_stat;
  if (r.joint_pvalue) j["joint_pvalue"] = *r.joint_pvalue;
  j["taux_hat"] = r.taux_hat;
  j["accepted"] = r.accepted;
  j["diagnostics"] = r.diagnostics;
  return j;
}

rep::GeneratorSpec spec_from_json(const json& j) {
  rep::GeneratorSpec s;
  s.n = j.at("n").get<int>();
  s.j = j.at("j").get<int>();
  s.q = j.value("q", 2);
  s.arms = j.at("arms").get<std::vector<int>>();
  s.link = rep::link_from_string(j.value("link", "cubic-sum"));
  if (j.contains("noise_sd"))
    s.noise_sd = j["noise_sd"].get<std::vector<double>>();
  s.slope_scale = j.value("slope_scale", 3.0);
  return s;
}

std::vector<int> infer_arm_sizes(const std::vector<int>& z) {
  std::map<int, int> counts;
  for (int v : z) ++counts[v];
  bool zero_one = counts.size() == 2 && counts.count(0) && counts.count(1);
  std::vector<int> arms;
  if (zero_one) {
    arms = {counts[0], counts[1]};  // (control, treated)
  } else {
    int q = counts.rbegin()->first;
    for (int level = 1; level <= q; ++level) {
      if (!counts.count(level))
        throw rep::InvalidFrame("assignment is missing level " +
                                std::to_string(level));
      arms.push_back(counts[level]);
    }
    if (arms.size() == 2) arms = {counts[2], counts[1]};  // labels 1/2
  }
  return arms;
}

json interval_to_json(const rep::Interval& iv) {
  return json{{"lo", iv.lo}, {"hi", iv.hi}};
}

int run_randomize(const std::string& covariates_path,
                  const std::string& arms_text, const std::string& scheme_path,
                  std::uint64_t seed, long max_draws,
                  const std::string& out_path) {
  rep::Matrix x = rep::read_covariates_csv(covariates_path);
  std::vector<int> arms;
  {
    std::stringstream ss(arms_text);
    std::string tok;
    while (std::getline(ss, tok, ',')) arms.push_back(std::stoi(tok));
  }
  rep::ExperimentFrame frame = rep::ExperimentFrame::from_external(x, arms);
  rep::BalanceScheme scheme = scheme_from_json(read_json_file(scheme_path));

  rep::RngStream rng(seed, 0);
  rep::DesignResult result;
  try {
    result = rep::rerandomize(frame, scheme, rng, max_draws, &std::cerr);
  } catch (const rep::MaxDrawsExceeded& e) {
    std::cerr << "error: " << e.what() << "\n"
              << "attempted " << e.attempted << " draws; best joint p-value "
              << e.best_joint_p << "\n";
    return 2;
  }

  json out;
  out["assignment"] = result.assignment;
  out["draws_used"] = result.draws_used;
  out["acceptance_rate_estimate"] = result.acceptance_rate_estimate;
  out["report"] = report_to_json(result.report);
  out["scheme"] = scheme_to_json(result.scheme);
  out["seed"] = seed;
  out["stream_id"] = 0;
  write_json_file(out, out_path);
  std::cout << "accepted after " << result.draws_used << " draw(s); wrote "
            << out_path << "\n";
  return 0;
}

int run_check(const std::string& covariates_path,
              const std::string& assignment_path,
              const std::string& scheme_path, const std::string& out_path) {
  rep::Matrix x = rep::read_covariates_csv(covariates_path);
  std::vector<int> z = rep::read_assignment_csv(assignment_path);
  rep::ExperimentFrame frame =
      rep::ExperimentFrame::from_external(x, infer_arm_sizes(z));
  frame.set_assignment(z);
  rep::BalanceScheme scheme = scheme_from_json(read_json_file(scheme_path));
  rep::BalanceReport report = rep::evaluate(frame, scheme);

  json out;
  out["report"] = report_to_json(report);
  out["scheme"] = scheme_to_json(scheme);
  write_json_file(out, out_path);
  std::cout << (report.accepted ? "accepted" : "rejected") << "; wrote "
            << out_path << "\n";
  return 0;
}

int run_estimate(const std::string& data_path, const std::string& kind_text,
                 const std::string& contrast_path, bool plugin,
                 const std::string& scheme_path, double level, long draws,
                 std::uint64_t seed, const std::string& out_path) {
  rep::EstimationData data = rep::read_estimation_csv(data_path);
  rep::ExperimentFrame frame =
      rep::ExperimentFrame::from_external(data.x, infer_arm_sizes(data.z));
  frame.set_assignment(data.z);
  frame.set_outcomes(data.y);
  rep::EstimatorKind kind = rep::kind_from_string(kind_text);

  json out;
  out["kind"] = rep::to_string(kind);
  out["level"] = level;

  if (frame.q() == 2 && contrast_path.empty()) {
    rep::EffectEstimate est = rep::estimate_two_arm(frame, kind, level);
    out["point"] = est.point_scalar();
    out["se"] = est.se_scalar();
    out["normal_ci"] = interval_to_json(est.normal_ci[0]);
    if (!est.gamma_hats.empty()) {
      out["gamma_l_treated"] = est.gamma_hats[0];
      out["gamma_l_control"] = est.gamma_hats[1];
      out["c_hat_n"] = *est.c_hat_n;
      out["c_hat_f"] = *est.c_hat_f;
    }
    if (plugin) {
      rep::BalanceScheme scheme =
          scheme_from_json(read_json_file(scheme_path));
      rep::RngStream rng(seed, 1);
      rep::Interval iv =
          rep::plugin_inference(est, frame, scheme, level, draws, rng);
      out["plugin_ci"] = interval_to_json(iv);
      out["plugin_law_draws"] = draws;
    }
  } else {
    rep::ArmMeansFit fit = rep::estimate_multi_arm(frame, kind);
    out["y_hat"] = fit.y_hat;
    json cov = json::array();
    for (std::size_t a = 0; a < fit.ehw_cov.rows(); ++a) {
      json row = json::array();
      for (std::size_t b = 0; b < fit.ehw_cov.cols(); ++b)
        row.push_back(fit.ehw_cov(a, b));
      cov.push_back(row);
    }
    out["ehw_cov"] = cov;
    if (!contrast_path.empty()) {
      rep::Contrast contrast(rep::read_contrast_csv(contrast_path));
      auto [tau, tau_cov] =
          rep::apply_contrast(fit.y_hat, fit.ehw_cov, contrast);
      out["tau"] = tau;
      out["tau_se"] = std::sqrt(tau_cov(0, 0));
      const double z =
          rep::quantile(rep::DistributionId::normal(), 1.0 - (1 - level) / 2);
      out["normal_ci"] = interval_to_json(
          {tau[0] - z * std::sqrt(tau_cov(0, 0)),
           tau[0] + z * std::sqrt(tau_cov(0, 0))});
      if (plugin) {
        rep::BalanceScheme scheme =
            scheme_from_json(read_json_file(scheme_path));
        rep::RngStream rng(seed, 1);
        rep::Interval iv = rep::plugin_inference_multi_arm(
            frame, scheme, kind, contrast, level, draws, rng);
        out["plugin_ci"] = interval_to_json(iv);
        out["plugin_note"] = "multi-arm plug-in law is experimental";
      }
    }
  }
  write_json_file(out, out_path);
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

int run_simulate(const std::string& spec_path, const std::string& schemes_path,
                 long reps, std::uint64_t seed, int threads,
                 const std::string& outdir) {
  rep::GeneratorSpec spec = spec_from_json(read_json_file(spec_path));
  json schemes_json = read_json_file(schemes_path);
  std::vector<rep::BalanceScheme> schemes;
  for (const auto& j : schemes_json) schemes.push_back(scheme_from_json(j));

  rep::RngStream pop_rng(seed, 0x706f7075ULL);  // population substream
  rep::PotentialOutcomeTable pop = rep::generate_population(spec, pop_rng);

  rep::RunConfig cfg;
  cfg.n_reps = reps;
  cfg.master_seed = seed;
  cfg.parallelism = threads;
  json spec_json = read_json_file(spec_path);
  if (spec_json.contains("contrast")) {
    auto rows = spec_json["contrast"].get<std::vector<std::vector<double>>>();
    rep::Matrix g(rows.size(), rows[0].size());
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (std::size_t c = 0; c < rows[r].size(); ++c) g(r, c) = rows[r][c];
    cfg.contrast = g;
  }

  auto records = rep::run_replications(pop, schemes, cfg);

  std::filesystem::create_directories(outdir);
  rep::emit_records_csv(records, outdir + "/records.csv");
  rep::emit_histograms_csv(records, outdir + "/hist.csv");
  rep::Summary summary = rep::summarize(records);
  summary.master_seed = seed;
  rep::emit_summary_json(summary, outdir + "/summary.json");

  std::cout << "wrote " << outdir << "/records.csv, hist.csv, summary.json ("
            << records.size() << " records)\n";
  return 0;
}

int run_law(int j, double alpha0, const std::string& scheme_path,
            const std::string& covariates_path, const std::string& arms_text,
            long draws, std::uint64_t seed, const std::string& out_path) {
  json out;
  rep::RngStream rng(seed, 2);

  rep::ConstrainedLaw law;
  if (scheme_path.empty()) {
    // Bare ellipsoid law: the a0-truncated standard normal in J dimensions.
    double a0 = rep::quantile(rep::DistributionId::chi2(j), 1.0 - alpha0);
    law = rep::make_constrained_law(rep::Matrix::identity(j));
    law.ellipsoid = rep::ConstrainedLaw::Ellipsoid{rep::Matrix::identity(j), a0};
    out["a0"] = a0;
    out["rho"] = rep::rho(j, a0);
  } else {
    if (covariates_path.empty())
      throw rep::IoError("--scheme needs --covariates");
    rep::Matrix x = rep::read_covariates_csv(covariates_path);
    std::vector<int> arms;
    std::stringstream ss(arms_text);
    std::string tok;
    while (std::getline(ss, tok, ',')) arms.push_back(std::stoi(tok));
    if (arms.empty())
      throw rep::IoError("--scheme needs --arms for the law geometry");
    rep::ExperimentFrame frame = rep::ExperimentFrame::from_external(x, arms);
    rep::BalanceScheme scheme = scheme_from_json(read_json_file(scheme_path));
    j = frame.j();
    if (frame.q() == 2) {
      rep::Vector unit_c(frame.j(), 0.0);
      rep::LawParams params =
          rep::build_law_params_two_arm(frame, scheme, 1.0, unit_c);
      law = params.law;
    } else {
      std::vector<rep::Vector> zeros(frame.q(),
                                     rep::Vector(frame.j(), 0.0));
      rep::LawParams params = rep::build_law_params_multi_arm(
          frame, scheme, zeros, rep::EstimatorKind::unadjusted,
          rep::Matrix::identity(frame.q()));
      law = params.law;
    }
    out["scheme"] = scheme_to_json(scheme);
    if (scheme.uses_joint()) {
      int dim = static_cast<int>(law.dim());
      double a0 =
          rep::quantile(rep::DistributionId::chi2(dim), 1.0 - scheme.alpha_joint);
      out["a0"] = a0;
      out["rho"] = rep::rho(dim, a0);
    }
  }

  rep::Matrix sample = rep::sample_constrained(law, draws, rng);
  const std::size_t d = sample.cols();
  rep::Vector mean(d, 0.0), var(d, 0.0);
  double mean_sq = 0.0;
  for (std::size_t i = 0; i < sample.rows(); ++i)
    for (std::size_t k = 0; k < d; ++k) {
      mean[k] += sample(i, k);
      var[k] += sample(i, k) * sample(i, k);
      mean_sq += sample(i, k) * sample(i, k);
    }
  for (std::size_t k = 0; k < d; ++k) {
    mean[k] /= sample.rows();
    var[k] = var[k] / sample.rows() - mean[k] * mean[k];
  }
  mean_sq /= sample.rows() * static_cast<double>(d);
  out["dim"] = d;
  out["draws"] = draws;
  out["moments"] = {{"mean", mean}, {"var", var}, {"mean_sq_over_dim", mean_sq}};

  json quantiles;
  for (double p : {0.025, 0.25, 0.5, 0.75, 0.975}) {
    rep::Vector per_coord(d);
    for (std::size_t k = 0; k < d; ++k) {
      std::vector<double> col(sample.rows());
      for (std::size_t i = 0; i < sample.rows(); ++i) col[i] = sample(i, k);
      std::sort(col.begin(), col.end());
      per_coord[k] = col[static_cast<std::size_t>(p * (col.size() - 1))];
    }
    quantiles[std::to_string(p)] = per_coord;
  }
  out["quantiles"] = quantiles;
  out["seed"] = seed;
  write_json_file(out, out_path);
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rerandomization by p-values: design, checks, estimation"};
  app.require_subcommand(1);

  // randomize
  std::string cov_path, arms_text, scheme_path, out_path;
  std::uint64_t seed = 1;
  long max_draws = rep::kDefaultMaxDraws;
  auto* rand_cmd =
      app.add_subcommand("randomize", "draw an acceptable allocation");
  rand_cmd->add_option("--covariates", cov_path)->required();
  rand_cmd->add_option("--arms", arms_text)->required();
  rand_cmd->add_option("--scheme", scheme_path)->required();
  rand_cmd->add_option("--seed", seed);
  rand_cmd->add_option("--max-draws", max_draws);
  rand_cmd->add_option("--out", out_path)->required();

  // check
  std::string assignment_path;
  auto* check_cmd =
      app.add_subcommand("check", "evaluate a scheme on an assignment");
  check_cmd->add_option("--covariates", cov_path)->required();
  check_cmd->add_option("--assignment", assignment_path)->required();
  check_cmd->add_option("--scheme", scheme_path)->required();
  check_cmd->add_option("--out", out_path)->required();

  // estimate
  std::string data_path, kind_text = "l", contrast_path;
  bool plugin = false;
  double level = 0.95;
  long draws = 100000;
  auto* est_cmd = app.add_subcommand("estimate", "treatment-effect estimates");
  est_cmd->add_option("--data", data_path)->required();
  est_cmd->add_option("--kind", kind_text)->required();
  est_cmd->add_option("--contrast", contrast_path);
  est_cmd->add_flag("--plugin", plugin);
  est_cmd->add_option("--scheme", scheme_path);
  est_cmd->add_option("--level", level);
  est_cmd->add_option("--draws", draws);
  est_cmd->add_option("--seed", seed);
  est_cmd->add_option("--out", out_path)->required();

  // simulate
  std::string spec_path, schemes_path, outdir;
  long reps = 5000;
  int threads = 0;
  auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo replications");
  sim_cmd->add_option("--spec", spec_path)->required();
  sim_cmd->add_option("--schemes", schemes_path)->required();
  sim_cmd->add_option("--reps", reps);
  sim_cmd->add_option("--seed", seed);
  sim_cmd->add_option("--threads", threads);
  sim_cmd->add_option("--outdir", outdir)->required();

  // law
  int law_j = 1;
  double alpha0 = 0.5;
  auto* law_cmd = app.add_subcommand("law", "constrained-law summaries");
  law_cmd->add_option("--j", law_j);
  law_cmd->add_option("--alpha0", alpha0);
  law_cmd->add_option("--scheme", scheme_path);
  law_cmd->add_option("--covariates", cov_path);
  law_cmd->add_option("--arms", arms_text);
  law_cmd->add_option("--draws", draws);
  law_cmd->add_option("--seed", seed);
  law_cmd->add_option("--out", out_path)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (rand_cmd->parsed())
      return run_randomize(cov_path, arms_text, scheme_path, seed, max_draws,
                           out_path);
    if (check_cmd->parsed())
      return run_check(cov_path, assignment_path, scheme_path, out_path);
    if (est_cmd->parsed())
      return run_estimate(data_path, kind_text, contrast_path, plugin,
                          scheme_path, level, draws, seed, out_path);
    if (sim_cmd->parsed())
      return run_simulate(spec_path, schemes_path, reps, seed, threads, outdir);
    if (law_cmd->parsed())
      return run_law(law_j, alpha0, scheme_path, cov_path, arms_text, draws,
                     seed, out_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
