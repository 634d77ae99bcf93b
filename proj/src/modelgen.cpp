#include "snspec/modelgen.hpp"

#include <cmath>
#include <stdexcept>

namespace snspec {

std::vector<std::size_t> MixtureSpec::cluster_sizes() const {
  std::vector<std::size_t> sizes(K, 0);
  std::size_t used = 0;
  for (std::size_t s = 0; s < K; ++s) {
    sizes[s] = static_cast<std::size_t>(std::floor(fractions[s] * static_cast<double>(n)));
    used += sizes[s];
  }
  if (used > n) throw std::invalid_argument("MixtureSpec: fractions exceed 1");
  sizes[K - 1] += n - used;  // remainder to the last cluster
  return sizes;
}

void MixtureSpec::validate() const {
  if (K == 0) throw std::invalid_argument("MixtureSpec: K must be >= 1");
  if (means.size() != K || fractions.size() != K)
    throw std::invalid_argument("MixtureSpec: K, means and fractions disagree");
  double total = 0.0;
  for (double f : fractions) {
    if (f <= 0.0) throw std::invalid_argument("MixtureSpec: nonpositive fraction");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("MixtureSpec: fractions sum to " + std::to_string(total));
  for (const auto& mu : means)
    if (mu.size() != p) throw std::invalid_argument("MixtureSpec: mean length != p");
  for (std::size_t s : cluster_sizes())
    if (s == 0) throw std::invalid_argument("MixtureSpec: rounding produced an empty cluster");
}

CovarianceSpec CovarianceSpec::identity() { return CovarianceSpec{}; }

CovarianceSpec CovarianceSpec::toeplitz(double rho) {
  CovarianceSpec s;
  s.kind = CovarianceKind::Toeplitz;
  s.rho = rho;
  return s;
}

CovarianceSpec CovarianceSpec::toeplitz_plus_spike(double rho, double excess,
                                                   std::size_t position) {
  CovarianceSpec s;
  s.kind = CovarianceKind::ToeplitzPlusSpike;
  s.rho = rho;
  s.excess = excess;
  s.position = position;
  return s;
}

CovarianceSpec CovarianceSpec::custom_matrix(DenseMatrix m) {
  CovarianceSpec s;
  s.kind = CovarianceKind::Custom;
  s.custom = std::move(m);
  return s;
}

std::string noise_law_name(NoiseLaw law) {
  switch (law) {
    case NoiseLaw::Gaussian: return "gaussian";
    case NoiseLaw::StudentT8: return "student_t8";
    case NoiseLaw::Rademacher: return "rademacher";
    case NoiseLaw::ChiSquare3: return "chi_square3";
  }
  return "gaussian";
}

NoiseLaw noise_law_from_name(const std::string& name) {
  if (name == "gaussian") return NoiseLaw::Gaussian;
  if (name == "student_t8") return NoiseLaw::StudentT8;
  if (name == "rademacher") return NoiseLaw::Rademacher;
  if (name == "chi_square3") return NoiseLaw::ChiSquare3;
  throw std::invalid_argument("unknown noise law: " + name);
}

std::pair<DenseMatrix, std::vector<std::size_t>> build_signal(const MixtureSpec& spec) {
  spec.validate();
  const auto sizes = spec.cluster_sizes();
  const double scale = 1.0 / std::sqrt(static_cast<double>(spec.n));
  DenseMatrix A(spec.p, spec.n, 0.0);
  std::vector<std::size_t> labels(spec.n, 0);
  std::size_t col = 0;
  for (std::size_t s = 0; s < spec.K; ++s) {
    for (std::size_t r = 0; r < sizes[s]; ++r, ++col) {
      labels[col] = s;
      for (std::size_t i = 0; i < spec.p; ++i) A(i, col) = spec.means[s][i] * scale;
    }
  }
  return {std::move(A), std::move(labels)};
}

DenseMatrix build_covariance(const CovarianceSpec& spec, std::size_t p) {
  if (p == 0) throw std::invalid_argument("build_covariance: p must be >= 1");
  switch (spec.kind) {
    case CovarianceKind::Identity:
      return DenseMatrix::identity(p);
    case CovarianceKind::Toeplitz:
    case CovarianceKind::ToeplitzPlusSpike: {
      if (std::abs(spec.rho) >= 1.0)
        throw std::invalid_argument("build_covariance: |rho| must be < 1");
      DenseMatrix S(p, p);
      for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < p; ++j)
          S(i, j) = std::pow(spec.rho, std::abs(static_cast<double>(i) - static_cast<double>(j)));
      if (spec.kind == CovarianceKind::ToeplitzPlusSpike) {
        if (spec.position < 1 || spec.position > p)
          throw std::invalid_argument("build_covariance: spike position out of range");
        S(spec.position - 1, spec.position - 1) += spec.excess;
      }
      return S;
    }
    case CovarianceKind::Custom: {
      if (spec.custom.rows() != p || spec.custom.cols() != p)
        throw std::invalid_argument("build_covariance: custom matrix is not p x p");
      psd_sqrt(spec.custom);  // validates PSD within tolerance
      return spec.custom;
    }
  }
  throw std::invalid_argument("build_covariance: unknown kind");
}

namespace {

double chi2_draw(RngStream& rng, int dof) {
  // chi^2_{2k} = -2 log(U_1 ... U_k); odd dof adds one squared normal
  double v = 0.0;
  for (int i = 0; i < dof / 2; ++i) v += -2.0 * std::log(rng.uniform01());
  if (dof % 2 == 1) {
    const double z = rng.normal();
    v += z * z;
  }
  return v;
}

double standardized_draw(NoiseLaw law, RngStream& rng) {
  switch (law) {
    case NoiseLaw::Gaussian:
      return rng.normal();
    case NoiseLaw::StudentT8: {
      const double z = rng.normal();
      const double v = chi2_draw(rng, 8);
      const double t = z / std::sqrt(v / 8.0);
      return t / std::sqrt(8.0 / 6.0);  // Var(t_8) = 8/6
    }
    case NoiseLaw::Rademacher:
      return rng.sign();
    case NoiseLaw::ChiSquare3:
      return (chi2_draw(rng, 3) - 3.0) / std::sqrt(6.0);
  }
  return 0.0;
}

}  // namespace

DenseMatrix sample_noise(NoiseLaw law, std::size_t p, std::size_t n, RngStream& rng) {
  if (p == 0 || n == 0) throw std::invalid_argument("sample_noise: empty dimensions");
  DenseMatrix W(p, n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  double* data = W.data();
  const std::size_t total = p * n;
  for (std::size_t i = 0; i < total; ++i) data[i] = standardized_draw(law, rng) * scale;
  return W;
}

void center_columns(DenseMatrix& X) {
  const std::size_t p = X.rows();
  const std::size_t n = X.cols();
  for (std::size_t i = 0; i < p; ++i) {
    double* row = X.row(i);
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += row[j];
    mean /= static_cast<double>(n);
    for (std::size_t j = 0; j < n; ++j) row[j] -= mean;
  }
}

DenseMatrix assemble_with_sqrt(const DenseMatrix& A, const DenseMatrix& sigma_sqrt,
                               const DenseMatrix& W, bool centered) {
  if (A.rows() != W.rows() || A.cols() != W.cols())
    throw std::invalid_argument("assemble: A and W dimensions differ");
  if (sigma_sqrt.rows() != A.rows() || sigma_sqrt.cols() != A.rows())
    throw std::invalid_argument("assemble: Sigma is not p x p");
  DenseMatrix X = matmul(sigma_sqrt, W);
  for (std::size_t i = 0; i < X.rows(); ++i) {
    double* xi = X.row(i);
    const double* ai = A.row(i);
    for (std::size_t j = 0; j < X.cols(); ++j) xi[j] += ai[j];
  }
  if (centered) center_columns(X);
  return X;
}

DenseMatrix assemble(const DenseMatrix& A, const DenseMatrix& Sigma, const DenseMatrix& W,
                     bool centered) {
  return assemble_with_sqrt(A, psd_sqrt(Sigma), W, centered);
}

EquivalentModel population_model(const DenseMatrix& A, const DenseMatrix& Sigma, bool centered,
                                 double group_tol) {
  const std::size_t p = A.rows();
  const std::size_t n = A.cols();
  if (Sigma.rows() != p || Sigma.cols() != p)
    throw std::invalid_argument("population_model: Sigma is not p x p");

  EquivalentModel model;
  model.A = A;
  model.Sigma = Sigma;
  model.centered = centered;

  DenseMatrix base = A;
  if (centered) center_columns(base);  // A Phi
  DenseMatrix R = gram(base, GramSide::Left);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j) R(i, j) += Sigma(i, j);
  model.R = R;
  model.eig = sym_eig(R);
  model.measure = measure_from_eigenvalues(model.eig.values, group_tol);
  model.atom_start.resize(model.measure.atoms.size());
  std::size_t start = 0;
  for (std::size_t k = 0; k < model.measure.atoms.size(); ++k) {
    model.atom_start[k] = start;
    start += model.measure.atoms[k].multiplicity;
  }
  (void)n;
  return model;
}

namespace {

std::vector<double> unit_mean(std::size_t p, std::size_t axis, double value) {
  std::vector<double> mu(p, 0.0);
  mu[axis] = value;
  return mu;
}

std::vector<double> head_mean(std::size_t p, std::vector<double> head, double tail) {
  std::vector<double> mu(p, tail);
  for (std::size_t i = 0; i < head.size() && i < p; ++i) mu[i] = head[i];
  return mu;
}

}  // namespace

CasePreset case_preset(int id, std::size_t p, std::size_t n) {
  if (p < 6) throw std::invalid_argument("case_preset: p too small for the preset means");
  CasePreset out;
  MixtureSpec& mix = out.mixture;
  mix.p = p;
  mix.n = n;
  switch (id) {
    case 1: {
      mix.K = 3;
      mix.means = {unit_mean(p, 0, 3.0), unit_mean(p, 1, 3.0), unit_mean(p, 2, 3.0)};
      mix.fractions = {0.3, 0.3, 0.4};
      out.covariance = CovarianceSpec::identity();
      break;
    }
    case 2:
    case 4:
    case 8: {
      // case 4 repeats case 2's covariance as printed; case 8 rescales a
      const double a = (id == 8) ? std::sqrt(static_cast<double>(n) / 10.0)
                                 : std::sqrt(static_cast<double>(p) / 10.0);
      mix.K = 4;
      mix.means = {head_mean(p, {2 * a, a, -a, a}, 1.0), head_mean(p, {a, a, 2 * a, -3 * a}, 1.0),
                   head_mean(p, {a, -2 * a, -a, a}, 1.0),
                   head_mean(p, {-2 * a, a, a, a}, 1.0)};
      mix.fractions = {0.3, 0.2, 0.3, 0.2};
      out.covariance = CovarianceSpec::toeplitz(0.2);
      break;
    }
    case 3: {
      mix.K = 4;
      mix.means = {head_mean(p, {5, 0, -4, 0}, 0.0), head_mean(p, {0, 4, 0, -6}, 0.0),
                   head_mean(p, {0, -5, -5, 0}, 0.0), head_mean(p, {-6, 0, 0, 6}, 0.0)};
      mix.fractions = {0.3, 0.2, 0.3, 0.2};
      out.covariance = CovarianceSpec::toeplitz(0.2);
      break;
    }
    case 5: {
      mix.K = 3;
      mix.means = {unit_mean(p, 0, 5.0), unit_mean(p, 1, 6.0), head_mean(p, {-2, 0, 4}, 0.0)};
      mix.fractions = {0.3, 0.3, 0.4};
      out.covariance = CovarianceSpec::toeplitz(0.2);
      break;
    }
    case 6:
    case 7: {
      mix.K = 3;
      mix.means = {unit_mean(p, 0, 4.0), unit_mean(p, 1, 4.0), unit_mean(p, 2, 4.0)};
      mix.fractions = {0.3, 0.3, 0.4};
      out.covariance =
          (id == 6) ? CovarianceSpec::identity() : CovarianceSpec::toeplitz(0.2);
      break;
    }
    default:
      throw std::invalid_argument("case_preset: id must be 1..8");
  }
  out.K = mix.K;
  mix.validate();
  return out;
}

}  // namespace snspec
