#include "hlcr/linalg.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

namespace hlcr {

SpdMatrix::SpdMatrix(std::size_t dim, std::vector<double> row_major)
    : dim_(dim), data_(std::move(row_major)) {
  if (data_.size() != dim_ * dim_) {
    throw std::invalid_argument("SpdMatrix: expected " + std::to_string(dim_ * dim_) +
                                " entries, got " + std::to_string(data_.size()));
  }
}

SpdMatrix SpdMatrix::scaled_identity(std::size_t dim, double scale) {
  SpdMatrix m(dim);
  for (std::size_t i = 0; i < dim; ++i) m(i, i) = scale;
  return m;
}

SpdMatrix SpdMatrix::diagonal(std::span<const double> diag) {
  SpdMatrix m(diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
  return m;
}

void SpdMatrix::add_outer(std::span<const double> x, double scale) {
  assert(x.size() == dim_);
  for (std::size_t r = 0; r < dim_; ++r) {
    const double xr = scale * x[r];
    double* row = data_.data() + r * dim_;
    for (std::size_t c = 0; c < dim_; ++c) row[c] += xr * x[c];
  }
}

void SpdMatrix::blend(double a, const SpdMatrix& other, double b) {
  assert(other.dim_ == dim_);
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] = a * data_[i] + b * other.data_[i];
}

SpdMatrix& SpdMatrix::operator+=(const SpdMatrix& other) {
  assert(other.dim_ == dim_);
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

void SpdMatrix::symmetrize() {
  for (std::size_t r = 0; r < dim_; ++r) {
    for (std::size_t c = r + 1; c < dim_; ++c) {
      const double avg = 0.5 * ((*this)(r, c) + (*this)(c, r));
      (*this)(r, c) = avg;
      (*this)(c, r) = avg;
    }
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

Vec mat_vec(const SpdMatrix& m, std::span<const double> x) {
  const std::size_t n = m.dim();
  assert(x.size() == n);
  Vec out(n, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < n; ++c) s += m(r, c) * x[c];
    out[r] = s;
  }
  return out;
}

double quad_form(const SpdMatrix& m, std::span<const double> x) { return bilinear(x, m, x); }

double bilinear(std::span<const double> a, const SpdMatrix& m, std::span<const double> b) {
  const Vec mb = mat_vec(m, b);
  return dot(a, mb);
}

SpdMatrix mat_mul(const SpdMatrix& a, const SpdMatrix& b) {
  const std::size_t n = a.dim();
  assert(b.dim() == n);
  SpdMatrix out(n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t k = 0; k < n; ++k) {
      const double ark = a(r, k);
      for (std::size_t c = 0; c < n; ++c) out(r, c) += ark * b(k, c);
    }
  }
  return out;
}

double max_abs_diff(const SpdMatrix& a, const SpdMatrix& b) {
  assert(a.dim() == b.dim());
  double m = 0.0;
  const auto da = a.row_major();
  const auto db = b.row_major();
  for (std::size_t i = 0; i < da.size(); ++i) m = std::max(m, std::abs(da[i] - db[i]));
  return m;
}

double frobenius_norm(const SpdMatrix& m) {
  double s = 0.0;
  for (double v : m.row_major()) s += v * v;
  return std::sqrt(s);
}

double frobenius_diff(const SpdMatrix& a, const SpdMatrix& b) {
  assert(a.dim() == b.dim());
  double s = 0.0;
  const auto da = a.row_major();
  const auto db = b.row_major();
  for (std::size_t i = 0; i < da.size(); ++i) s += (da[i] - db[i]) * (da[i] - db[i]);
  return std::sqrt(s);
}

double inverse_residual(const SpdMatrix& a, const SpdMatrix& b) {
  return max_abs_diff(mat_mul(a, b), SpdMatrix::identity(a.dim()));
}

SpdMatrix cholesky(const SpdMatrix& m) {
  const std::size_t n = m.dim();
  SpdMatrix l(n);
  for (std::size_t j = 0; j < n; ++j) {
    double diag = m(j, j);
    for (std::size_t k = 0; k < j; ++k) diag -= l(j, k) * l(j, k);
    if (!(diag > 0.0) || !std::isfinite(diag)) {
      throw NonPositiveDefinite("cholesky: non-positive pivot " + std::to_string(diag) +
                                " at column " + std::to_string(j));
    }
    const double ljj = std::sqrt(diag);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = m(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return l;
}

bool is_positive_definite(const SpdMatrix& m) {
  try {
    (void)cholesky(m);
    return true;
  } catch (const NonPositiveDefinite&) {
    return false;
  }
}

double log_det(const SpdMatrix& m) {
  const SpdMatrix l = cholesky(m);
  double s = 0.0;
  for (std::size_t i = 0; i < l.dim(); ++i) s += std::log(l(i, i));
  return 2.0 * s;
}

SpdMatrix invert(const SpdMatrix& d) {
  const std::size_t n = d.dim();
  const SpdMatrix l = cholesky(d);

  // L^{-1} by forward substitution, column by column.
  SpdMatrix linv(n);
  for (std::size_t c = 0; c < n; ++c) {
    linv(c, c) = 1.0 / l(c, c);
    for (std::size_t r = c + 1; r < n; ++r) {
      double s = 0.0;
      for (std::size_t k = c; k < r; ++k) s -= l(r, k) * linv(k, c);
      linv(r, c) = s / l(r, r);
    }
  }

  // D^{-1} = L^{-T} L^{-1}
  SpdMatrix h(n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c <= r; ++c) {
      double s = 0.0;
      for (std::size_t k = r; k < n; ++k) s += linv(k, r) * linv(k, c);
      h(r, c) = s;
      h(c, r) = s;
    }
  }
  return h;
}

void rank1_update_inverse_inplace(SpdMatrix& h, std::span<const double> x, double s) {
  const Vec hx = mat_vec(h, x);
  const double denom = 1.0 + s * dot(x, hx);
  h.add_outer(hx, -s / denom);
  h.symmetrize();
}

bool rank1_downdate_inverse_inplace(SpdMatrix& h, std::span<const double> x, double s) {
  const Vec hx = mat_vec(h, x);
  const double denom = 1.0 - s * dot(x, hx);
  if (!(denom > kDowndateEpsilon)) return false;
  h.add_outer(hx, s / denom);
  h.symmetrize();
  return true;
}

SpdMatrix rank1_update_inverse(const SpdMatrix& h, std::span<const double> x, double s) {
  SpdMatrix out = h;
  rank1_update_inverse_inplace(out, x, s);
  return out;
}

SpdMatrix rank1_downdate_inverse(const SpdMatrix& h, std::span<const double> x, double s) {
  SpdMatrix out = h;
  if (!rank1_downdate_inverse_inplace(out, x, s)) {
    throw DowndateSingular("rank1_downdate_inverse: 1 - s x^T H x <= " +
                           std::to_string(kDowndateEpsilon));
  }
  return out;
}

}  // namespace hlcr
