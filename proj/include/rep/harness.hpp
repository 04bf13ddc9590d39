#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rep/balance.hpp"
#include "rep/estimate.hpp"
#include "rep/population.hpp"

namespace rep {

// One (replication, scheme) row of a Monte Carlo run. All schemes are
// evaluated on the same initial complete randomization per replication;
// acceptance is a flag, not a rejection loop.
struct ReplicationRecord {
  long rep_id = 0;
  std::string scheme_id;
  bool accepted = false;
  double taux_norm = 0.0;  // ||taux||_2 (Q=2) or ||xhat_plus||_2
  double tau_n = 0.0, tau_f = 0.0, tau_l = 0.0;
  double se_n = 0.0, se_f = 0.0, se_l = 0.0;
  int hit_n = 0, hit_f = 0, hit_l = 0;  // CI covers the true tau
  double gap_nf = 0.0, gap_nl = 0.0, gap_fl = 0.0;
};

struct RunConfig {
  long n_reps = 5000;
  std::uint64_t master_seed = 1;
  int parallelism = 0;  // 0 = hardware concurrency
  double ci_level = 0.95;
  std::optional<Matrix> contrast;  // single row; default (1, -1) for Q = 2
};

// Record ids: "cre" rows (identity filter) are always emitted first, then
// one row per scheme in the given order. Deterministic for a fixed
// master_seed regardless of parallelism.
std::vector<ReplicationRecord> run_replications(
    const PotentialOutcomeTable& pop, const std::vector<BalanceScheme>& schemes,
    const RunConfig& config);

struct EstimatorSummary {
  double mean = 0.0;
  double var = 0.0;
  double var_se = 0.0;
  double q025 = 0.0;
  double q975 = 0.0;
  double coverage = 0.0;
  double coverage_se = 0.0;
};

struct SchemeSummary {
  std::string scheme_id;
  long n_total = 0;
  long n_accepted = 0;
  double acceptance_rate = 0.0;
  EstimatorSummary est_n, est_f, est_l;
  double taux_sq_mean = 0.0, taux_sq_se = 0.0;
  double gap_sq_nf = 0.0, gap_sq_nl = 0.0, gap_sq_fl = 0.0;
  double gap_sq_nf_se = 0.0, gap_sq_nl_se = 0.0, gap_sq_fl_se = 0.0;
  // Ratios against the cre rows; NaN for the cre summary itself.
  double var_ratio_n = 0.0, var_ratio_f = 0.0, var_ratio_l = 0.0;
  double var_ratio_n_se = 0.0, var_ratio_f_se = 0.0, var_ratio_l_se = 0.0;
  double taux_sq_ratio = 0.0, taux_sq_ratio_se = 0.0;
  double gap_sq_ratio_nf = 0.0, gap_sq_ratio_nl = 0.0, gap_sq_ratio_fl = 0.0;
  double gap_sq_ratio_nf_se = 0.0, gap_sq_ratio_nl_se = 0.0,
         gap_sq_ratio_fl_se = 0.0;
};

struct Summary {
  std::string schema_version = "1";
  std::uint64_t master_seed = 0;
  long n_reps = 0;
  std::vector<SchemeSummary> schemes;

  const SchemeSummary& by_id(const std::string& id) const;
};

// Per-scheme moments, quantiles, and ratios against the cre rows. Throws
// TooFewAccepted when a scheme retains fewer than 100 replications.
Summary summarize(const std::vector<ReplicationRecord>& records);

void emit_records_csv(const std::vector<ReplicationRecord>& records,
                      std::ostream& out);
void emit_records_csv(const std::vector<ReplicationRecord>& records,
                      const std::string& path);
std::vector<ReplicationRecord> read_records_csv(const std::string& path);

std::string summary_to_json(const Summary& summary);
void emit_summary_json(const Summary& summary, const std::string& path);

// Data-only figure output: per scheme and quantity, fixed-width histogram
// bins over the cre range plus the 2.5%/97.5% quantile markers.
void emit_histograms_csv(const std::vector<ReplicationRecord>& records,
                         const std::string& path, int bins = 40);

}  // namespace rep
