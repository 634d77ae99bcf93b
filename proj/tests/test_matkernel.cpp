#include "doctest.h"

#include <cmath>
#include <stdexcept>

#include "snspec/matkernel.hpp"
#include "snspec/rng.hpp"

using namespace snspec;

namespace {

DenseMatrix random_symmetric(std::size_t n, RngStream& rng) {
  DenseMatrix M(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) M(i, j) = M(j, i) = rng.normal();
  return M;
}

double spectral_scale(const SymEigResult& eig) {
  double s = 0.0;
  for (double v : eig.values) s = std::max(s, std::abs(v));
  return s;
}

}  // namespace

TEST_CASE("sym_eig identity") {
  const auto eig = sym_eig(DenseMatrix::identity(3));
  for (double v : eig.values) CHECK(v == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("sym_eig 2x2 closed form") {
  DenseMatrix M(2, 2);
  M(0, 0) = 2; M(0, 1) = 1; M(1, 0) = 1; M(1, 1) = 2;
  const auto eig = sym_eig(M);
  CHECK(eig.values[0] == doctest::Approx(3.0).epsilon(1e-13));
  CHECK(eig.values[1] == doctest::Approx(1.0).epsilon(1e-13));
  const double s = 1.0 / std::sqrt(2.0);
  CHECK(std::abs(eig.vectors(0, 0) * eig.vectors(1, 0)) ==
        doctest::Approx(s * s).epsilon(1e-10));  // (1,1)/sqrt2 up to sign
  CHECK(eig.vectors(0, 1) * eig.vectors(1, 1) ==
        doctest::Approx(-s * s).epsilon(1e-10));  // (1,-1)/sqrt2 up to sign
}

TEST_CASE("sym_eig residual and orthonormality on a random 50x50") {
  RngStream rng(42);
  const DenseMatrix M = random_symmetric(50, rng);
  const auto eig = sym_eig(M);
  const double scale = spectral_scale(eig);

  // residual oracle computed directly from the output
  for (std::size_t k = 0; k < 50; ++k) {
    const auto v = eig.vector(k);
    const auto Mv = matvec(M, v);
    double res = 0.0;
    for (std::size_t i = 0; i < 50; ++i) {
      const double d = Mv[i] - eig.values[k] * v[i];
      res += d * d;
    }
    CHECK(std::sqrt(res) <= 1e-10 * (1.0 + scale));
  }
  // orthonormality
  for (std::size_t a = 0; a < 50; ++a)
    for (std::size_t b = a; b < 50; ++b) {
      const double g = dot(eig.vector(a), eig.vector(b));
      CHECK(std::abs(g - (a == b ? 1.0 : 0.0)) <= 1e-10);
    }
  // trace identity
  double tr = 0.0, sum = 0.0;
  for (std::size_t i = 0; i < 50; ++i) tr += M(i, i);
  for (double v : eig.values) sum += v;
  CHECK(std::abs(sum - tr) <= 1e-8 * (1.0 + std::abs(tr)));
  // descending order
  for (std::size_t k = 1; k < 50; ++k) CHECK(eig.values[k - 1] >= eig.values[k]);
}

TEST_CASE("sym_eig reconstruction M = V L V^T") {
  RngStream rng(7);
  const DenseMatrix M = random_symmetric(30, rng);
  const auto eig = sym_eig(M);
  DenseMatrix R(30, 30, 0.0);
  for (std::size_t i = 0; i < 30; ++i)
    for (std::size_t j = 0; j < 30; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 30; ++k)
        s += eig.vectors(i, k) * eig.values[k] * eig.vectors(j, k);
      R(i, j) = M(i, j) - s;
    }
  CHECK(frobenius_norm(R) <= 1e-9 * frobenius_norm(M));
}

TEST_CASE("sym_eig rejects bad input") {
  CHECK_THROWS_AS(sym_eig(DenseMatrix(2, 3)), std::invalid_argument);
  DenseMatrix M(2, 2);
  M(0, 1) = 1.0;
  M(1, 0) = 2.0;
  CHECK_THROWS_AS(sym_eig(M), std::invalid_argument);
}

TEST_CASE("sym_eig_values matches the full decomposition") {
  RngStream rng(11);
  const DenseMatrix M = random_symmetric(40, rng);
  const auto eig = sym_eig(M);
  const auto vals = sym_eig_values(M);
  for (std::size_t k = 0; k < 40; ++k)
    CHECK(vals[k] == doctest::Approx(eig.values[k]).epsilon(1e-11));
}

TEST_CASE("gram hand checks") {
  CHECK(frobenius_norm(gram(DenseMatrix::identity(2), GramSide::Left)) ==
        doctest::Approx(std::sqrt(2.0)));
  DenseMatrix X(2, 2, 0.0);
  X(0, 0) = 1; X(0, 1) = 2;
  const DenseMatrix R = gram(X, GramSide::Right);
  CHECK(R(0, 0) == 1.0);
  CHECK(R(0, 1) == 2.0);
  CHECK(R(1, 0) == 2.0);
  CHECK(R(1, 1) == 4.0);
}

TEST_CASE("gram sides share nonzero eigenvalues") {
  RngStream rng(5);
  DenseMatrix X(8, 13);
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 13; ++j) X(i, j) = rng.normal();
  const auto left = sym_eig_values(gram(X, GramSide::Left));    // 8 values
  const auto right = sym_eig_values(gram(X, GramSide::Right));  // 13 values
  for (std::size_t k = 0; k < 8; ++k)
    CHECK(std::abs(left[k] - right[k]) <= 1e-9);
}

TEST_CASE("psd_sqrt basics") {
  const DenseMatrix I5 = psd_sqrt(DenseMatrix::identity(5));
  DenseMatrix D(2, 2, 0.0);
  D(0, 0) = 4; D(1, 1) = 9;
  const DenseMatrix Q = psd_sqrt(D);
  CHECK(I5(0, 0) == doctest::Approx(1.0));
  CHECK(Q(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(Q(1, 1) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(std::abs(Q(0, 1)) < 1e-12);
}

TEST_CASE("psd_sqrt reconstructs a Toeplitz matrix") {
  const std::size_t p = 20;
  DenseMatrix S(p, p);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j)
      S(i, j) = std::pow(0.2, std::abs(double(i) - double(j)));
  const DenseMatrix Q = psd_sqrt(S);
  const DenseMatrix QQ = matmul(Q, Q);
  DenseMatrix diff = S;
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j) diff(i, j) -= QQ(i, j);
  CHECK(frobenius_norm(diff) <= 1e-9 * frobenius_norm(S));
}

TEST_CASE("psd_sqrt rejects indefinite input") {
  DenseMatrix M(2, 2, 0.0);
  M(0, 0) = 1.0;
  M(1, 1) = -0.5;
  CHECK_THROWS_AS(psd_sqrt(M), std::domain_error);
}

TEST_CASE("psd_sqrt squaring is idempotent within tolerance") {
  RngStream rng(19);
  DenseMatrix B(10, 10);
  for (std::size_t i = 0; i < 10; ++i)
    for (std::size_t j = 0; j < 10; ++j) B(i, j) = rng.normal();
  const DenseMatrix S = gram(B, GramSide::Left);  // PSD by construction
  const DenseMatrix Q = psd_sqrt(S);
  const DenseMatrix QQ = matmul(Q, Q);
  DenseMatrix diff = S;
  for (std::size_t i = 0; i < 10; ++i)
    for (std::size_t j = 0; j < 10; ++j) diff(i, j) -= QQ(i, j);
  CHECK(frobenius_norm(diff) <= 1e-9 * frobenius_norm(S));
}
