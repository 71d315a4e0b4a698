#pragma once

// Dense symmetric matrices with Cholesky inversion and O(F^2) rank-one
// maintenance of an inverse Gram matrix.

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hlcr {

using Vec = std::vector<double>;

class NonPositiveDefinite : public std::runtime_error {
 public:
  explicit NonPositiveDefinite(const std::string& what) : std::runtime_error(what) {}
};

class DowndateSingular : public std::runtime_error {
 public:
  explicit DowndateSingular(const std::string& what) : std::runtime_error(what) {}
};

/// Square matrix stored dense row-major. Every matrix handed out by the
/// constructors and operations in this header is symmetric; the ones built
/// from a positive diagonal plus outer products are also positive definite.
class SpdMatrix {
 public:
  SpdMatrix() = default;
  explicit SpdMatrix(std::size_t dim) : dim_(dim), data_(dim * dim, 0.0) {}
  SpdMatrix(std::size_t dim, std::vector<double> row_major);

  static SpdMatrix identity(std::size_t dim) { return scaled_identity(dim, 1.0); }
  static SpdMatrix scaled_identity(std::size_t dim, double scale);
  static SpdMatrix diagonal(std::span<const double> diag);

  std::size_t dim() const { return dim_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * dim_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * dim_ + c]; }

  std::span<const double> row_major() const { return data_; }
  std::span<double> row_major() { return data_; }

  /// this += scale * x x^T
  void add_outer(std::span<const double> x, double scale);
  /// this = a * this + b * other
  void blend(double a, const SpdMatrix& other, double b);
  SpdMatrix& operator+=(const SpdMatrix& other);
  /// (M + M^T) / 2
  void symmetrize();

  bool operator==(const SpdMatrix&) const = default;

 private:
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

// Small vector/matrix helpers.
double dot(std::span<const double> a, std::span<const double> b);
Vec mat_vec(const SpdMatrix& m, std::span<const double> x);
/// x^T M x
double quad_form(const SpdMatrix& m, std::span<const double> x);
/// a^T M b
double bilinear(std::span<const double> a, const SpdMatrix& m, std::span<const double> b);
SpdMatrix mat_mul(const SpdMatrix& a, const SpdMatrix& b);
double max_abs_diff(const SpdMatrix& a, const SpdMatrix& b);
double frobenius_norm(const SpdMatrix& m);
double frobenius_diff(const SpdMatrix& a, const SpdMatrix& b);
/// ||A B - I||_max
double inverse_residual(const SpdMatrix& a, const SpdMatrix& b);

/// Lower-triangular Cholesky factor L with M = L L^T, stored row-major in an
/// SpdMatrix container (upper triangle zero). Throws NonPositiveDefinite.
SpdMatrix cholesky(const SpdMatrix& m);
bool is_positive_definite(const SpdMatrix& m);
/// log det M via Cholesky.
double log_det(const SpdMatrix& m);

/// Inverse of an SPD matrix through its Cholesky factor.
SpdMatrix invert(const SpdMatrix& d);

/// Given H = D^{-1}, returns (D + s x x^T)^{-1}.
SpdMatrix rank1_update_inverse(const SpdMatrix& h, std::span<const double> x, double s);
/// Given H = D^{-1}, returns (D - s x x^T)^{-1}. Throws DowndateSingular when
/// 1 - s x^T H x falls to kDowndateEpsilon or below.
SpdMatrix rank1_downdate_inverse(const SpdMatrix& h, std::span<const double> x, double s);

// In-place forms used on hot paths. The downdate variant returns false (and
// leaves h untouched) instead of throwing.
void rank1_update_inverse_inplace(SpdMatrix& h, std::span<const double> x, double s);
bool rank1_downdate_inverse_inplace(SpdMatrix& h, std::span<const double> x, double s);

inline constexpr double kDowndateEpsilon = 1e-10;

}  // namespace hlcr
