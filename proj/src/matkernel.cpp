#include "snspec/matkernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace snspec {

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix I(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) I(i, i) = 1.0;
  return I;
}

bool DenseMatrix::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

DenseMatrix transpose(const DenseMatrix& A) {
  DenseMatrix T(A.cols(), A.rows());
  for (std::size_t i = 0; i < A.rows(); ++i)
    for (std::size_t j = 0; j < A.cols(); ++j) T(j, i) = A(i, j);
  return T;
}

DenseMatrix matmul(const DenseMatrix& A, const DenseMatrix& B) {
  if (A.cols() != B.rows()) throw std::invalid_argument("matmul: inner dimensions differ");
  DenseMatrix C(A.rows(), B.cols(), 0.0);
  // i-k-j order keeps the inner loop contiguous in row-major storage
  for (std::size_t i = 0; i < A.rows(); ++i) {
    double* ci = C.row(i);
    for (std::size_t k = 0; k < A.cols(); ++k) {
      const double aik = A(i, k);
      if (aik == 0.0) continue;
      const double* bk = B.row(k);
      for (std::size_t j = 0; j < B.cols(); ++j) ci[j] += aik * bk[j];
    }
  }
  return C;
}

std::vector<double> matvec(const DenseMatrix& A, const std::vector<double>& x) {
  if (A.cols() != x.size()) throw std::invalid_argument("matvec: dimension mismatch");
  std::vector<double> y(A.rows(), 0.0);
  for (std::size_t i = 0; i < A.rows(); ++i) {
    const double* ai = A.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) s += ai[j] * x[j];
    y[i] = s;
  }
  return y;
}

double frobenius_norm(const DenseMatrix& A) {
  double s = 0.0;
  const double* p = A.data();
  const std::size_t n = A.rows() * A.cols();
  for (std::size_t i = 0; i < n; ++i) s += p[i] * p[i];
  return std::sqrt(s);
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

std::vector<double> SymEigResult::vector(std::size_t k) const {
  std::vector<double> v(vectors.rows());
  for (std::size_t i = 0; i < vectors.rows(); ++i) v[i] = vectors(i, k);
  return v;
}

namespace {

void check_symmetric(const DenseMatrix& M) {
  if (M.rows() != M.cols()) throw std::invalid_argument("sym_eig: matrix is not square");
  double scale = 0.0;
  for (std::size_t i = 0; i < M.rows(); ++i)
    for (std::size_t j = 0; j < M.cols(); ++j) scale = std::max(scale, std::abs(M(i, j)));
  const double tol = 1e-12 * std::max(scale, 1.0);
  for (std::size_t i = 0; i < M.rows(); ++i)
    for (std::size_t j = i + 1; j < M.cols(); ++j)
      if (std::abs(M(i, j) - M(j, i)) > tol)
        throw std::invalid_argument("sym_eig: matrix asymmetric beyond 1e-12 at (" +
                                    std::to_string(i) + "," + std::to_string(j) + ")");
}

// Householder reduction to tridiagonal form (EISPACK tred2 lineage).
// With want_vectors the orthogonal transform is accumulated in `a`.
void tridiagonalize(DenseMatrix& a, std::vector<double>& d, std::vector<double>& e,
                    bool want_vectors) {
  const std::size_t n = a.rows();
  d.assign(n, 0.0);
  e.assign(n, 0.0);
  for (std::size_t ip1 = n - 1; ip1 >= 1; --ip1) {
    const std::size_t i = ip1;
    const std::size_t l = i - 1;
    double h = 0.0;
    if (l > 0) {
      double scale = 0.0;
      for (std::size_t k = 0; k <= l; ++k) scale += std::abs(a(i, k));
      if (scale == 0.0) {
        e[i] = a(i, l);
      } else {
        for (std::size_t k = 0; k <= l; ++k) {
          a(i, k) /= scale;
          h += a(i, k) * a(i, k);
        }
        double f = a(i, l);
        double g = (f >= 0.0) ? -std::sqrt(h) : std::sqrt(h);
        e[i] = scale * g;
        h -= f * g;
        a(i, l) = f - g;
        f = 0.0;
        for (std::size_t j = 0; j <= l; ++j) {
          if (want_vectors) a(j, i) = a(i, j) / h;
          g = 0.0;
          for (std::size_t k = 0; k <= j; ++k) g += a(j, k) * a(i, k);
          for (std::size_t k = j + 1; k <= l; ++k) g += a(k, j) * a(i, k);
          e[j] = g / h;
          f += e[j] * a(i, j);
        }
        const double hh = f / (h + h);
        for (std::size_t j = 0; j <= l; ++j) {
          f = a(i, j);
          e[j] = g = e[j] - hh * f;
          for (std::size_t k = 0; k <= j; ++k) a(j, k) -= f * e[k] + g * a(i, k);
        }
      }
    } else {
      e[i] = a(i, l);
    }
    d[i] = h;
  }
  if (want_vectors) d[0] = 0.0;
  e[0] = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (want_vectors) {
      if (d[i] != 0.0) {
        for (std::size_t j = 0; j < i; ++j) {
          double g = 0.0;
          for (std::size_t k = 0; k < i; ++k) g += a(i, k) * a(k, j);
          for (std::size_t k = 0; k < i; ++k) a(k, j) -= g * a(k, i);
        }
      }
      d[i] = a(i, i);
      a(i, i) = 1.0;
      for (std::size_t j = 0; j < i; ++j) a(j, i) = a(i, j) = 0.0;
    } else {
      d[i] = a(i, i);
    }
  }
}

// Implicit-shift QL on a tridiagonal (d, e); rotates columns of z when given.
void ql_implicit(std::vector<double>& d, std::vector<double>& e, DenseMatrix* z) {
  const std::size_t n = d.size();
  if (n <= 1) return;
  constexpr int kMaxSweeps = 64;
  const double eps = std::numeric_limits<double>::epsilon();
  for (std::size_t i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;
  for (std::size_t l = 0; l < n; ++l) {
    int iter = 0;
    std::size_t m;
    do {
      for (m = l; m + 1 < n; ++m) {
        const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
        if (std::abs(e[m]) <= eps * dd) break;
      }
      if (m != l) {
        if (iter++ == kMaxSweeps)
          throw std::runtime_error("sym_eig: QL failed to converge for eigenvalue index " +
                                   std::to_string(l));
        double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
        double r = std::hypot(g, 1.0);
        g = d[m] - d[l] + e[l] / (g + (g >= 0.0 ? std::abs(r) : -std::abs(r)));
        double s = 1.0, c = 1.0, p = 0.0;
        bool deflated_early = false;
        for (std::size_t i = m; i-- > l;) {
          double f = s * e[i];
          const double b = c * e[i];
          r = std::hypot(f, g);
          e[i + 1] = r;
          if (r == 0.0) {
            d[i + 1] -= p;
            e[m] = 0.0;
            deflated_early = true;
            break;
          }
          s = f / r;
          c = g / r;
          g = d[i + 1] - p;
          r = (d[i] - g) * s + 2.0 * c * b;
          p = s * r;
          d[i + 1] = g + p;
          g = c * r - b;
          if (z) {
            for (std::size_t k = 0; k < n; ++k) {
              f = (*z)(k, i + 1);
              (*z)(k, i + 1) = s * (*z)(k, i) + c * f;
              (*z)(k, i) = c * (*z)(k, i) - s * f;
            }
          }
        }
        if (deflated_early) continue;
        d[l] -= p;
        e[l] = g;
        e[m] = 0.0;
      }
    } while (m != l);
  }
}

std::vector<std::size_t> descending_order(const std::vector<double>& d) {
  std::vector<std::size_t> idx(d.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return d[a] > d[b]; });
  return idx;
}

}  // namespace

SymEigResult sym_eig(const DenseMatrix& M) {
  check_symmetric(M);
  const std::size_t n = M.rows();
  DenseMatrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) = 0.5 * (M(i, j) + M(j, i));
  std::vector<double> d, e;
  tridiagonalize(a, d, e, true);
  ql_implicit(d, e, &a);

  const auto idx = descending_order(d);
  SymEigResult out;
  out.values.resize(n);
  out.vectors = DenseMatrix(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = d[idx[k]];
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = a(i, idx[k]);
  }
  return out;
}

std::vector<double> sym_eig_values(const DenseMatrix& M) {
  check_symmetric(M);
  const std::size_t n = M.rows();
  DenseMatrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) = 0.5 * (M(i, j) + M(j, i));
  std::vector<double> d, e;
  tridiagonalize(a, d, e, false);
  ql_implicit(d, e, nullptr);
  std::sort(d.begin(), d.end(), std::greater<double>());
  return d;
}

DenseMatrix gram(const DenseMatrix& X, GramSide side) {
  if (X.rows() == 0 || X.cols() == 0) throw std::invalid_argument("gram: empty matrix");
  if (side == GramSide::Left) {
    const std::size_t p = X.rows();
    DenseMatrix S(p, p, 0.0);
    for (std::size_t i = 0; i < p; ++i) {
      const double* xi = X.row(i);
      for (std::size_t j = i; j < p; ++j) {
        const double* xj = X.row(j);
        double s = 0.0;
        for (std::size_t k = 0; k < X.cols(); ++k) s += xi[k] * xj[k];
        S(i, j) = S(j, i) = s;
      }
    }
    return S;
  }
  const std::size_t m = X.cols();
  DenseMatrix S(m, m, 0.0);
  for (std::size_t k = 0; k < X.rows(); ++k) {
    const double* xk = X.row(k);
    for (std::size_t i = 0; i < m; ++i) {
      const double v = xk[i];
      if (v == 0.0) continue;
      double* si = S.row(i);
      for (std::size_t j = i; j < m; ++j) si[j] += v * xk[j];
    }
  }
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < i; ++j) S(i, j) = S(j, i);
  return S;
}

DenseMatrix psd_sqrt(const DenseMatrix& S) {
  SymEigResult eig = sym_eig(S);
  const std::size_t n = S.rows();
  double norm = 0.0;
  for (double v : eig.values) norm = std::max(norm, std::abs(v));
  std::vector<double> sq(n);
  for (std::size_t i = 0; i < n; ++i) {
    double lam = eig.values[i];
    if (lam < -1e-10 * std::max(norm, 1.0))
      throw std::domain_error("psd_sqrt: eigenvalue " + std::to_string(lam) +
                              " below PSD tolerance");
    sq[i] = std::sqrt(std::max(lam, 0.0));
  }
  // Q = V sqrt(L) V^T, symmetrized entry pair by entry pair
  DenseMatrix Q(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += eig.vectors(i, k) * sq[k] * eig.vectors(j, k);
      Q(i, j) = Q(j, i) = s;
    }
  }
  return Q;
}

}  // namespace snspec
