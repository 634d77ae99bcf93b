#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "snspec/clustercount.hpp"
#include "snspec/modelgen.hpp"
#include "snspec/speclust.hpp"

namespace snspec {

enum class CriterionChoice { EDA, EDB, PseudoEDA, PseudoEDB, ASI, GS };

std::string criterion_choice_name(CriterionChoice c);
CriterionChoice criterion_choice_from_name(const std::string& name);

/// Full description of a Monte Carlo scenario. Either a case preset id
/// (1..8) or an explicit mixture + covariance.
struct ScenarioConfig {
  int preset = 0;  // 0 means explicit mixture/covariance below
  std::optional<MixtureSpec> mixture;
  std::optional<CovarianceSpec> covariance;
  NoiseLaw noise = NoiseLaw::Gaussian;
  std::size_t p = 0;
  std::size_t n = 0;
  bool centered = false;
  std::size_t replications = 200;
  std::uint64_t master_seed = 1;
  std::vector<CriterionChoice> criteria;
  std::optional<std::size_t> w_override;
  std::size_t declared_K = 1;
  std::size_t threads = 1;
  bool strict = true;

  double c_n() const { return static_cast<double>(p) / static_cast<double>(n); }
  std::size_t w() const;
  void validate() const;
  MixtureSpec resolved_mixture() const;
  CovarianceSpec resolved_covariance() const;

  std::string canonical_text() const;
  std::uint64_t scenario_hash() const;

  static ScenarioConfig from_json_text(const std::string& text);
  static ScenarioConfig from_json_file(const std::string& path);
};

struct SelectionRow {
  std::string criterion;
  double f_minus = 0.0;
  double f_star = 0.0;
  double f_plus = 0.0;
};

struct SelectionTable {
  std::vector<SelectionRow> rows;
  std::size_t replications = 0;
  std::size_t excluded = 0;  // non-strict runs only
  bool w_capped_below_K = false;
};

struct ReplicationOutcome {
  std::size_t rep = 0;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::size_t>> k_hat;  // per criterion
  bool failed = false;
  std::string error;
};

struct SelectionResult {
  SelectionTable table;
  std::vector<ReplicationOutcome> outcomes;
  std::uint64_t scenario_hash = 0;
};

/// Generate, decompose and score each replication; percentages of under/
/// exact/over estimation against declared_K. Output is bit-identical for
/// identical (config, master_seed) regardless of the thread count.
SelectionResult run_selection(const ScenarioConfig& config);

enum class MatchKind { SignalPlusNoise, EquivalentWishart };

/// Rank-2 signal with a spiked Toeplitz covariance: d1 g1 r1^T + d2 g2 r2^T
/// with g1, g2 fixed orthonormal in the first two coordinates, r1, r2 a
/// random orthonormal pair, Sigma = Toeplitz(0.4) + 6 e3 e3^T.
struct EigenMatchConfig {
  std::size_t p = 100;
  std::size_t n = 200;
  std::size_t replications = 500;
  std::uint64_t master_seed = 1;
  std::size_t threads = 1;
  std::size_t top = 3;           // eigenvalues/eigenvectors tracked
  std::size_t probe_axis = 0;    // v = e_{probe_axis+1}
};

struct EigenMatchRow {
  std::string statistic;
  double mean = 0.0;
  double sd = 0.0;
  std::size_t n_reps = 0;
};

struct EigenMatchReport {
  std::vector<EigenMatchRow> rows;
  MatchKind kind = MatchKind::SignalPlusNoise;
};

EigenMatchReport run_eigen_match(const EigenMatchConfig& config, MatchKind kind);

struct BbpDemoResult {
  std::vector<double> eigenvalues;  // descending sample eigenvalues of X X^T
  double gamma1 = 0.0, gamma2 = 0.0;
  double limit1 = 0.0, limit2 = 0.0;  // phi(gamma) for distant, bulk edge otherwise
  double bulk_edge = 0.0;
};

/// Scree data for the rank-one signal / spiked covariance demo:
/// X = d g r^T + Sigma^{1/2} W, Sigma = diag(ell+1, 1, ..), g aligned with
/// e1 by g1 (rest of the weight on e2).
BbpDemoResult run_bbp_demo(double d, double ell, double g1, std::size_t p, std::size_t n,
                           std::uint64_t seed);

struct SpikeLimit {
  double gamma = 0.0;
  std::size_t multiplicity = 0;
  double phi = 0.0;
  double phi_prime = 0.0;
  bool distant = false;
  double omega = 0.0;
  double eta = 0.0;
  std::vector<double> c_kj;
};

/// The full theoretical side of a scenario: population spectrum, spike
/// classification and limits, zeta and the gap-condition verdicts.
struct LimitsReport {
  bool centered = false;
  std::size_t p = 0, n = 0;
  double c_n = 0.0;
  std::vector<std::pair<double, std::size_t>> atoms;
  std::vector<SpikeLimit> spikes;
  std::vector<std::pair<double, double>> bulk_support;
  double bulk_edge = 0.0;
  std::vector<double> zeta;
  GapConditionReport gaps;
  std::string zeta_note;  // nonempty when the zeta limits are unavailable
};

LimitsReport limits_report(const ScenarioConfig& config);

void write_selection_csv(const SelectionResult& result, std::ostream& table_out);
void write_replications_csv(const SelectionResult& result, std::ostream& out);
void write_match_csv(const EigenMatchReport& report, std::ostream& out);
void write_scree_csv(const BbpDemoResult& result, std::ostream& values_out,
                     std::ostream& theory_out);
std::string limits_report_json(const LimitsReport& report);

}  // namespace snspec
