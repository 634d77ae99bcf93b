#include "snspec/harness.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"

namespace snspec {

using json = nlohmann::json;

std::string criterion_choice_name(CriterionChoice c) {
  switch (c) {
    case CriterionChoice::EDA: return "EDA";
    case CriterionChoice::EDB: return "EDB";
    case CriterionChoice::PseudoEDA: return "pEDA";
    case CriterionChoice::PseudoEDB: return "pEDB";
    case CriterionChoice::ASI: return "ASI";
    case CriterionChoice::GS: return "GS";
  }
  return "EDA";
}

CriterionChoice criterion_choice_from_name(const std::string& name) {
  if (name == "EDA") return CriterionChoice::EDA;
  if (name == "EDB") return CriterionChoice::EDB;
  if (name == "pEDA") return CriterionChoice::PseudoEDA;
  if (name == "pEDB") return CriterionChoice::PseudoEDB;
  if (name == "ASI") return CriterionChoice::ASI;
  if (name == "GS") return CriterionChoice::GS;
  throw std::invalid_argument("unknown criterion: " + name);
}

std::size_t ScenarioConfig::w() const {
  return w_override ? *w_override : default_w(n);
}

MixtureSpec ScenarioConfig::resolved_mixture() const {
  if (preset > 0) return case_preset(preset, p, n).mixture;
  if (!mixture) throw std::invalid_argument("ScenarioConfig: no mixture and no preset");
  MixtureSpec m = *mixture;
  if (m.p != p || m.n != n)
    throw std::invalid_argument("ScenarioConfig: mixture dimensions disagree with p, n");
  return m;
}

CovarianceSpec ScenarioConfig::resolved_covariance() const {
  if (preset > 0) return case_preset(preset, p, n).covariance;
  if (!covariance) throw std::invalid_argument("ScenarioConfig: no covariance and no preset");
  return *covariance;
}

void ScenarioConfig::validate() const {
  if (p == 0 || n == 0) throw std::invalid_argument("ScenarioConfig: p and n must be >= 1");
  if (replications == 0) throw std::invalid_argument("ScenarioConfig: replications >= 1");
  if (declared_K == 0) throw std::invalid_argument("ScenarioConfig: declared_K >= 1");
  if (threads == 0) throw std::invalid_argument("ScenarioConfig: threads >= 1");
  if (preset < 0 || preset > 8) throw std::invalid_argument("ScenarioConfig: preset must be 1..8");
  resolved_mixture().validate();
  const std::size_t cap = w();
  if (cap < 1) throw std::invalid_argument("ScenarioConfig: w must be >= 1");
  for (CriterionChoice c : criteria) {
    const bool direct = c == CriterionChoice::EDA || c == CriterionChoice::EDB;
    const bool pseudo = c == CriterionChoice::PseudoEDA || c == CriterionChoice::PseudoEDB;
    if (direct && c_n() > 1.0)
      throw std::invalid_argument(
          "ScenarioConfig: direct EDA/EDB are undefined for c_n > 1, use the pseudo variants");
    if (direct && cap + 1 >= p)
      throw std::invalid_argument("ScenarioConfig: w too large for p");
    if (pseudo && cap + 1 >= n)
      throw std::invalid_argument("ScenarioConfig: w too large for n");
  }
}

std::string ScenarioConfig::canonical_text() const {
  json j;
  j["preset"] = preset;
  j["p"] = p;
  j["n"] = n;
  j["noise"] = noise_law_name(noise);
  j["centered"] = centered;
  j["replications"] = replications;
  j["master_seed"] = master_seed;
  j["declared_K"] = declared_K;
  j["strict"] = strict;
  if (w_override) j["w_override"] = *w_override;
  std::vector<std::string> names;
  for (CriterionChoice c : criteria) names.push_back(criterion_choice_name(c));
  j["criteria"] = names;
  if (preset == 0 && mixture) {
    json m;
    m["K"] = mixture->K;
    m["fractions"] = mixture->fractions;
    m["means"] = mixture->means;
    j["mixture"] = m;
  }
  if (preset == 0 && covariance) {
    json cv;
    switch (covariance->kind) {
      case CovarianceKind::Identity: cv["kind"] = "identity"; break;
      case CovarianceKind::Toeplitz:
        cv["kind"] = "toeplitz";
        cv["rho"] = covariance->rho;
        break;
      case CovarianceKind::ToeplitzPlusSpike:
        cv["kind"] = "toeplitz_plus_spike";
        cv["rho"] = covariance->rho;
        cv["excess"] = covariance->excess;
        cv["position"] = covariance->position;
        break;
      case CovarianceKind::Custom: {
        cv["kind"] = "custom";
        std::vector<std::vector<double>> rows;
        for (std::size_t i = 0; i < covariance->custom.rows(); ++i)
          rows.emplace_back(covariance->custom.row(i),
                            covariance->custom.row(i) + covariance->custom.cols());
        cv["matrix"] = rows;
        break;
      }
    }
    j["covariance"] = cv;
  }
  return j.dump();
}

std::uint64_t ScenarioConfig::scenario_hash() const {
  const std::string text = canonical_text();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

namespace {

void reject_unknown_keys(const json& j, const std::vector<std::string>& allowed,
                         const std::string& where) {
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const auto& k : allowed) ok = ok || item.key() == k;
    if (!ok) throw std::invalid_argument("config: unknown key '" + item.key() + "' in " + where);
  }
}

MixtureSpec mixture_from_json(const json& j, std::size_t p, std::size_t n) {
  reject_unknown_keys(j, {"K", "means", "fractions"}, "mixture");
  MixtureSpec m;
  m.p = p;
  m.n = n;
  m.K = j.at("K").get<std::size_t>();
  m.means = j.at("means").get<std::vector<std::vector<double>>>();
  m.fractions = j.at("fractions").get<std::vector<double>>();
  return m;
}

CovarianceSpec covariance_from_json(const json& j) {
  reject_unknown_keys(j, {"kind", "rho", "excess", "position", "matrix"}, "covariance");
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "identity") return CovarianceSpec::identity();
  if (kind == "toeplitz") return CovarianceSpec::toeplitz(j.at("rho").get<double>());
  if (kind == "toeplitz_plus_spike")
    return CovarianceSpec::toeplitz_plus_spike(j.at("rho").get<double>(),
                                               j.at("excess").get<double>(),
                                               j.at("position").get<std::size_t>());
  if (kind == "custom") {
    const auto rows = j.at("matrix").get<std::vector<std::vector<double>>>();
    DenseMatrix m(rows.size(), rows.empty() ? 0 : rows[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != m.cols())
        throw std::invalid_argument("config: ragged covariance matrix");
      for (std::size_t jj = 0; jj < m.cols(); ++jj) m(i, jj) = rows[i][jj];
    }
    return CovarianceSpec::custom_matrix(std::move(m));
  }
  throw std::invalid_argument("config: unknown covariance kind '" + kind + "'");
}

}  // namespace

ScenarioConfig ScenarioConfig::from_json_text(const std::string& text) {
  json j = json::parse(text);
  reject_unknown_keys(j,
                      {"preset", "mixture", "covariance", "noise", "p", "n", "centered",
                       "replications", "master_seed", "criteria", "w_override", "declared_K",
                       "threads", "strict"},
                      "scenario");
  ScenarioConfig cfg;
  cfg.p = j.at("p").get<std::size_t>();
  cfg.n = j.at("n").get<std::size_t>();
  if (j.contains("preset")) cfg.preset = j["preset"].get<int>();
  if (j.contains("noise")) cfg.noise = noise_law_from_name(j["noise"].get<std::string>());
  if (j.contains("centered")) cfg.centered = j["centered"].get<bool>();
  if (j.contains("replications")) cfg.replications = j["replications"].get<std::size_t>();
  if (j.contains("master_seed")) cfg.master_seed = j["master_seed"].get<std::uint64_t>();
  if (j.contains("w_override")) cfg.w_override = j["w_override"].get<std::size_t>();
  if (j.contains("threads")) cfg.threads = j["threads"].get<std::size_t>();
  if (j.contains("strict")) cfg.strict = j["strict"].get<bool>();
  if (j.contains("criteria"))
    for (const auto& name : j["criteria"])
      cfg.criteria.push_back(criterion_choice_from_name(name.get<std::string>()));
  if (j.contains("mixture")) cfg.mixture = mixture_from_json(j["mixture"], cfg.p, cfg.n);
  if (j.contains("covariance")) cfg.covariance = covariance_from_json(j["covariance"]);
  if (j.contains("declared_K"))
    cfg.declared_K = j["declared_K"].get<std::size_t>();
  else if (cfg.preset > 0)
    cfg.declared_K = case_preset(cfg.preset, cfg.p, cfg.n).K;
  else if (cfg.mixture)
    cfg.declared_K = cfg.mixture->K;
  return cfg;
}

ScenarioConfig ScenarioConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

namespace {

void parallel_for(std::size_t count, std::size_t threads,
                  const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  const std::size_t workers = std::min(threads, count);
  pool.reserve(workers);
  for (std::size_t t = 0; t < workers; ++t) {
    pool.emplace_back([&]() {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) break;
        fn(i);
      }
    });
  }
  for (auto& th : pool) th.join();
}

void add_in_place(DenseMatrix& X, const DenseMatrix& A) {
  double* x = X.data();
  const double* a = A.data();
  for (std::size_t i = 0; i < X.rows() * X.cols(); ++i) x[i] += a[i];
}

// descending sample eigenvalues of X X^T, length p, computed on the
// cheaper Gram side
std::vector<double> sample_eigenvalues(const DenseMatrix& X) {
  const std::size_t p = X.rows();
  const std::size_t n = X.cols();
  if (p <= n) return sym_eig_values(gram(X, GramSide::Left));
  std::vector<double> vals = sym_eig_values(gram(X, GramSide::Right));
  vals.resize(p, 0.0);
  return vals;
}

}  // namespace

SelectionResult run_selection(const ScenarioConfig& config) {
  config.validate();
  if (config.criteria.empty())
    throw std::invalid_argument("run_selection: no criteria requested");

  const MixtureSpec mix = config.resolved_mixture();
  const CovarianceSpec cov = config.resolved_covariance();
  auto [A, labels] = build_signal(mix);
  const bool identity_sigma = cov.kind == CovarianceKind::Identity;
  DenseMatrix sigma_sqrt;
  if (!identity_sigma) sigma_sqrt = psd_sqrt(build_covariance(cov, config.p));
  const std::size_t w = config.w();
  const std::size_t reps = config.replications;

  std::vector<ReplicationOutcome> outcomes(reps);
  auto run_one = [&](std::size_t rep) {
    ReplicationOutcome& out = outcomes[rep];
    out.rep = rep;
    out.seed = config.master_seed;
    try {
      RngStream noise_rng = RngStream::keyed(config.master_seed, rep, StreamRole::Noise);
      DenseMatrix W = sample_noise(config.noise, config.p, config.n, noise_rng);
      DenseMatrix X;
      if (identity_sigma) {
        X = std::move(W);
        add_in_place(X, A);
        if (config.centered) center_columns(X);
      } else {
        X = assemble_with_sqrt(A, sigma_sqrt, W, config.centered);
      }

      bool need_eigs = false;
      for (CriterionChoice c : config.criteria)
        need_eigs = need_eigs || (c != CriterionChoice::ASI && c != CriterionChoice::GS);
      EigenvalueSeq seq;
      if (need_eigs) seq = EigenvalueSeq(sample_eigenvalues(X), config.p, config.n);

      for (CriterionChoice c : config.criteria) {
        std::size_t k_hat = 0;
        switch (c) {
          case CriterionChoice::EDA: k_hat = eda(seq, w).k_hat; break;
          case CriterionChoice::EDB: k_hat = edb(seq, w).k_hat; break;
          case CriterionChoice::PseudoEDA: k_hat = pseudo_eda(seq, w).k_hat; break;
          case CriterionChoice::PseudoEDB: k_hat = pseudo_edb(seq, w).k_hat; break;
          case CriterionChoice::ASI: {
            RngStream rng = RngStream::keyed(config.master_seed, rep, StreamRole::Kmeans);
            std::vector<std::size_t> range;
            for (std::size_t k = 2; k <= std::min(w, config.n - 1); ++k) range.push_back(k);
            k_hat = silhouette_k(X, range, rng);
            break;
          }
          case CriterionChoice::GS: {
            RngStream rng = RngStream::keyed(config.master_seed, rep, StreamRole::Reference);
            std::vector<std::size_t> range;
            for (std::size_t k = 1; k <= std::min(w, config.n - 1); ++k) range.push_back(k);
            k_hat = gap_statistic_k(X, range, 50, rng);
            break;
          }
        }
        out.k_hat.emplace_back(criterion_choice_name(c), k_hat);
      }
    } catch (const std::exception& e) {
      out.failed = true;
      out.error = e.what();
    }
  };
  parallel_for(reps, config.threads, run_one);

  SelectionResult result;
  result.scenario_hash = config.scenario_hash();
  result.outcomes = std::move(outcomes);

  std::size_t excluded = 0;
  for (const auto& out : result.outcomes) {
    if (!out.failed) continue;
    if (config.strict)
      throw std::runtime_error("run_selection: replication " + std::to_string(out.rep) +
                               " failed: " + out.error);
    ++excluded;
  }
  const std::size_t valid = reps - excluded;
  if (valid == 0) throw std::runtime_error("run_selection: every replication failed");

  result.table.replications = reps;
  result.table.excluded = excluded;
  result.table.w_capped_below_K = w < config.declared_K;
  for (std::size_t ci = 0; ci < config.criteria.size(); ++ci) {
    const std::string name = criterion_choice_name(config.criteria[ci]);
    std::size_t minus = 0, star = 0, plus = 0;
    for (const auto& out : result.outcomes) {
      if (out.failed) continue;
      const std::size_t k_hat = out.k_hat[ci].second;
      if (k_hat < config.declared_K)
        ++minus;
      else if (k_hat == config.declared_K)
        ++star;
      else
        ++plus;
    }
    SelectionRow row;
    row.criterion = name;
    row.f_minus = 100.0 * static_cast<double>(minus) / static_cast<double>(valid);
    row.f_star = 100.0 * static_cast<double>(star) / static_cast<double>(valid);
    row.f_plus = 100.0 * static_cast<double>(plus) / static_cast<double>(valid);
    result.table.rows.push_back(std::move(row));
  }
  return result;
}

namespace {

// signal used by the eigenvalue/eigenvector matching experiment:
// A = 3 g1 r1^T + 2 g2 r2^T, Sigma = Toeplitz(0.4) + 6 e3 e3^T
struct MatchSetup {
  DenseMatrix A;
  DenseMatrix Sigma;
};

MatchSetup match_setup(const EigenMatchConfig& cfg) {
  const std::size_t p = cfg.p, n = cfg.n;
  if (p < 3) throw std::invalid_argument("run_eigen_match: p must be >= 3");
  RngStream rng = RngStream::keyed(cfg.master_seed, 0, StreamRole::Signal);
  std::vector<double> r1(n), r2(n);
  for (auto& v : r1) v = rng.normal();
  for (auto& v : r2) v = rng.normal();
  const double n1 = norm2(r1);
  for (auto& v : r1) v /= n1;
  const double proj = dot(r1, r2);
  for (std::size_t i = 0; i < n; ++i) r2[i] -= proj * r1[i];
  const double n2 = norm2(r2);
  for (auto& v : r2) v /= n2;

  const double inv_sqrt2 = 0.7071067811865475244;
  MatchSetup out;
  out.A = DenseMatrix(p, n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    // g1 = (1,1,0,..)/sqrt2, g2 = (-1,1,0,..)/sqrt2, d1 = 3, d2 = 2
    out.A(0, j) = 3.0 * inv_sqrt2 * r1[j] - 2.0 * inv_sqrt2 * r2[j];
    out.A(1, j) = 3.0 * inv_sqrt2 * r1[j] + 2.0 * inv_sqrt2 * r2[j];
  }
  out.Sigma = build_covariance(CovarianceSpec::toeplitz_plus_spike(0.4, 6.0, 3), p);
  return out;
}

}  // namespace

EigenMatchReport run_eigen_match(const EigenMatchConfig& cfg, MatchKind kind) {
  if (cfg.replications == 0) throw std::invalid_argument("run_eigen_match: replications >= 1");
  const MatchSetup setup = match_setup(cfg);
  const std::size_t top = cfg.top;

  DenseMatrix mult;  // matrix applied to W
  bool add_signal = false;
  if (kind == MatchKind::SignalPlusNoise) {
    mult = psd_sqrt(setup.Sigma);
    add_signal = true;
  } else {
    DenseMatrix R = gram(setup.A, GramSide::Left);
    for (std::size_t i = 0; i < R.rows(); ++i)
      for (std::size_t j = 0; j < R.cols(); ++j) R(i, j) += setup.Sigma(i, j);
    mult = psd_sqrt(R);
  }

  const std::size_t reps = cfg.replications;
  std::vector<std::vector<double>> stats(reps, std::vector<double>(2 * top, 0.0));
  std::vector<std::string> errors(reps);
  auto run_one = [&](std::size_t rep) {
    try {
      RngStream rng = RngStream::keyed(cfg.master_seed, rep, StreamRole::Noise);
      DenseMatrix W = sample_noise(NoiseLaw::Gaussian, cfg.p, cfg.n, rng);
      DenseMatrix X = matmul(mult, W);
      if (add_signal) add_in_place(X, setup.A);
      SymEigResult eig = sym_eig(gram(X, GramSide::Left));
      for (std::size_t i = 0; i < top; ++i) {
        stats[rep][i] = eig.values[i];
        const double overlap = eig.vectors(cfg.probe_axis, i);
        stats[rep][top + i] = overlap * overlap;
      }
    } catch (const std::exception& e) {
      errors[rep] = e.what();
    }
  };
  parallel_for(reps, cfg.threads, run_one);
  for (std::size_t rep = 0; rep < reps; ++rep)
    if (!errors[rep].empty())
      throw std::runtime_error("run_eigen_match: replication " + std::to_string(rep) +
                               " failed: " + errors[rep]);

  EigenMatchReport report;
  report.kind = kind;
  for (std::size_t s = 0; s < 2 * top; ++s) {
    double mean = 0.0;
    for (std::size_t rep = 0; rep < reps; ++rep) mean += stats[rep][s];
    mean /= static_cast<double>(reps);
    double var = 0.0;
    for (std::size_t rep = 0; rep < reps; ++rep) {
      const double d = stats[rep][s] - mean;
      var += d * d;
    }
    var = reps > 1 ? var / static_cast<double>(reps - 1) : 0.0;
    EigenMatchRow row;
    row.statistic = (s < top ? "lambda_" + std::to_string(s + 1)
                             : "overlap_" + std::to_string(s - top + 1));
    row.mean = mean;
    row.sd = std::sqrt(var);
    row.n_reps = reps;
    report.rows.push_back(std::move(row));
  }
  return report;
}

BbpDemoResult run_bbp_demo(double d, double ell, double g1, std::size_t p, std::size_t n,
                           std::uint64_t seed) {
  if (p < 2 || n < 1) throw std::invalid_argument("run_bbp_demo: bad dimensions");
  if (g1 < 0.0 || g1 > 1.0) throw std::invalid_argument("run_bbp_demo: g1 must be in [0,1]");
  RngStream sig_rng = RngStream::keyed(seed, 0, StreamRole::Signal);
  std::vector<double> r(n);
  for (auto& v : r) v = sig_rng.uniform01();
  const double rn = norm2(r);
  for (auto& v : r) v /= rn;

  const double g2 = std::sqrt(std::max(0.0, 1.0 - g1 * g1));
  RngStream noise_rng = RngStream::keyed(seed, 0, StreamRole::Noise);
  DenseMatrix X = sample_noise(NoiseLaw::Gaussian, p, n, noise_rng);
  const double s0 = std::sqrt(ell + 1.0);
  for (std::size_t j = 0; j < n; ++j) X(0, j) *= s0;  // Sigma^(1/2) = diag(sqrt(ell+1),1,..)
  for (std::size_t j = 0; j < n; ++j) {
    X(0, j) += d * g1 * r[j];
    X(1, j) += d * g2 * r[j];
  }

  BbpDemoResult out;
  out.eigenvalues = sample_eigenvalues(X);
  const auto [gamma1, gamma2] = spiked_sigma_two_eigs(d, ell, g1);
  out.gamma1 = gamma1;
  out.gamma2 = gamma2;
  const double c = static_cast<double>(p) / static_cast<double>(n);
  out.bulk_edge = (1.0 + std::sqrt(c)) * (1.0 + std::sqrt(c));
  auto limit = [&](double gamma) {
    if (gamma > 1.0 + std::sqrt(c)) return gamma * (1.0 + c / (gamma - 1.0));
    return out.bulk_edge;
  };
  out.limit1 = limit(gamma1);
  out.limit2 = limit(gamma2);
  return out;
}

LimitsReport limits_report(const ScenarioConfig& config) {
  config.validate();
  const MixtureSpec mix = config.resolved_mixture();
  const CovarianceSpec cov = config.resolved_covariance();
  auto [A, labels] = build_signal(mix);
  const DenseMatrix Sigma = build_covariance(cov, config.p);
  const EquivalentModel model = population_model(A, Sigma, config.centered);

  LimitsReport report;
  report.centered = config.centered;
  report.p = config.p;
  report.n = config.n;
  report.c_n = config.c_n();
  for (const auto& atom : model.measure.atoms)
    report.atoms.emplace_back(atom.value, atom.multiplicity);

  const std::size_t K = config.declared_K;
  const std::size_t L = spike_atoms_for(model.measure, K);
  const AspectRatio c = model.aspect();
  const SpectralMeasure bulk = bulk_measure(model.measure, L);
  const auto support = support_endpoints(bulk, c);
  for (const auto& iv : support) report.bulk_support.emplace_back(iv.lower, iv.upper);
  report.bulk_edge = support.back().upper;

  const auto omegas = omega_roots(model.measure, config.n);
  for (std::size_t a = 0; a < L; ++a) {
    SpikeLimit s;
    s.gamma = model.measure.atoms[a].value;
    s.multiplicity = model.measure.atoms[a].multiplicity;
    const auto cls = classify_spike(s.gamma, bulk, c);
    s.phi = cls.phi_value;
    s.phi_prime = cls.phi_derivative;
    s.distant = cls.kind == SpikeKind::Distant;
    s.omega = omegas[a];
    s.eta = eta(a, model.measure, config.n);
    s.c_kj = projection_coeffs(a, model.measure, config.n);
    report.spikes.push_back(std::move(s));
  }

  try {
    report.zeta = zeta_limits(model, K);
    report.gaps = gap_report(model, K, config.p, config.n);
  } catch (const std::exception& e) {
    report.zeta.clear();
    report.gaps = GapConditionReport{};
    report.gaps.eda_ok = false;
    report.gaps.edb_ok = false;
    report.zeta_note = e.what();
  }
  return report;
}

void write_selection_csv(const SelectionResult& result, std::ostream& out) {
  out << "criterion,F_minus,F_star,F_plus\n";
  for (const auto& row : result.table.rows)
    out << row.criterion << ',' << row.f_minus << ',' << row.f_star << ',' << row.f_plus
        << '\n';
}

void write_replications_csv(const SelectionResult& result, std::ostream& out) {
  out << "scenario_hash,replication,seed,criterion,k_hat\n";
  char hash_hex[19];
  std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                static_cast<unsigned long long>(result.scenario_hash));
  for (const auto& rec : result.outcomes) {
    if (rec.failed) {
      out << hash_hex << ',' << rec.rep << ',' << rec.seed << ",failed,0\n";
      continue;
    }
    for (const auto& [criterion, k_hat] : rec.k_hat)
      out << hash_hex << ',' << rec.rep << ',' << rec.seed << ',' << criterion << ',' << k_hat
          << '\n';
  }
}

void write_match_csv(const EigenMatchReport& report, std::ostream& out) {
  out << "statistic,mean,sd,n_reps\n";
  for (const auto& row : report.rows)
    out << row.statistic << ',' << row.mean << ',' << row.sd << ',' << row.n_reps << '\n';
}

void write_scree_csv(const BbpDemoResult& result, std::ostream& values_out,
                     std::ostream& theory_out) {
  values_out << "rank,eigenvalue\n";
  for (std::size_t i = 0; i < result.eigenvalues.size(); ++i)
    values_out << (i + 1) << ',' << result.eigenvalues[i] << '\n';
  theory_out << "name,value\n";
  theory_out << "gamma_1," << result.gamma1 << '\n';
  theory_out << "gamma_2," << result.gamma2 << '\n';
  theory_out << "limit_1," << result.limit1 << '\n';
  theory_out << "limit_2," << result.limit2 << '\n';
  theory_out << "bulk_edge," << result.bulk_edge << '\n';
}

std::string limits_report_json(const LimitsReport& report) {
  json j;
  j["centered"] = report.centered;
  j["p"] = report.p;
  j["n"] = report.n;
  j["c_n"] = report.c_n;
  json atoms = json::array();
  for (const auto& [value, mult] : report.atoms) atoms.push_back({value, mult});
  j["atoms"] = atoms;
  json spikes = json::array();
  for (const auto& s : report.spikes) {
    json sp;
    sp["gamma"] = s.gamma;
    sp["multiplicity"] = s.multiplicity;
    sp["phi"] = s.phi;
    sp["phi_prime"] = s.phi_prime;
    sp["kind"] = s.distant ? "distant" : "close";
    sp["omega"] = s.omega;
    sp["eta"] = s.eta;
    sp["c_kj"] = s.c_kj;
    spikes.push_back(sp);
  }
  j["spikes"] = spikes;
  json support = json::array();
  for (const auto& [lo, hi] : report.bulk_support) support.push_back({lo, hi});
  j["bulk_support"] = support;
  j["bulk_edge"] = report.bulk_edge;
  j["zeta"] = report.zeta;
  j["a_seq"] = report.gaps.a_seq;
  j["b_seq"] = report.gaps.b_seq;
  j["eda_gap_ok"] = report.gaps.eda_ok;
  j["edb_gap_ok"] = report.gaps.edb_ok;
  if (!report.zeta_note.empty()) j["zeta_note"] = report.zeta_note;
  return j.dump(2);
}

}  // namespace snspec
