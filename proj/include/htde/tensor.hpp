#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <stdexcept>
#include <string>
#include <utility>

namespace htde {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Dense 3-way tensor stored as its (d1*d2) x d3 unfolding.
///
/// The pairing of the first two modes is fixed once for the whole project:
/// entry (i, j, k) lives at flat(i * d2 + j, k), i.e. the first mode is the
/// slow index of the combined row. Slices g(:,:,k) are exposed as row-major
/// views of the unfolding columns, so converting between the tensor and its
/// unfolding matrix never copies or reorders data.
template <typename Scalar>
class Tensor3T {
 public:
  using MatrixType = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using SliceView = Eigen::Map<
      const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using SliceRef = Eigen::Map<
      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

  Tensor3T() = default;

  Tensor3T(Index d1, Index d2, Index d3)
      : d1_(d1), d2_(d2), d3_(d3), flat_(MatrixType::Zero(d1 * d2, d3)) {
    if (d1 < 1 || d2 < 1 || d3 < 1)
      throw std::invalid_argument("Tensor3: dimensions must be positive");
  }

  /// Reinterprets a (d1*d2) x d3 unfolding as a tensor; inverse of to_matrix().
  static Tensor3T from_matrix(MatrixType flat, Index d1, Index d2) {
    if (d1 < 1 || d2 < 1 || flat.rows() != d1 * d2 || flat.cols() < 1)
      throw std::invalid_argument("Tensor3::from_matrix: shape mismatch");
    Tensor3T t;
    t.d1_ = d1;
    t.d2_ = d2;
    t.d3_ = flat.cols();
    t.flat_ = std::move(flat);
    return t;
  }

  Index dim1() const { return d1_; }
  Index dim2() const { return d2_; }
  Index dim3() const { return d3_; }
  Index size() const { return d1_ * d2_ * d3_; }

  Scalar operator()(Index i, Index j, Index k) const { return flat_(i * d2_ + j, k); }
  Scalar& operator()(Index i, Index j, Index k) { return flat_(i * d2_ + j, k); }

  SliceView slice(Index k) const { return SliceView(flat_.col(k).data(), d1_, d2_); }
  SliceRef slice_ref(Index k) { return SliceRef(flat_.col(k).data(), d1_, d2_); }

  const MatrixType& to_matrix() const { return flat_; }
  MatrixType& matrix_ref() { return flat_; }

  double frobenius_norm() const { return flat_.norm(); }

  void setZero() { flat_.setZero(); }

  bool same_dims(const Tensor3T& o) const {
    return d1_ == o.d1_ && d2_ == o.d2_ && d3_ == o.d3_;
  }

 private:
  Index d1_ = 0, d2_ = 0, d3_ = 0;
  MatrixType flat_;
};

using Tensor3 = Tensor3T<double>;

class SvdError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thin SVD m = U * diag(S) * V^T with S sorted descending.
template <typename Scalar>
struct SvdResultT {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> U;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> S;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> V;
};

using SvdResult = SvdResultT<double>;

template <typename Derived>
SvdResultT<typename Derived::Scalar> svd(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Eigen::BDCSVD<Mat> dec(m.derived(), Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (dec.info() != Eigen::Success)
    throw SvdError("svd: decomposition failed on " + std::to_string(m.rows()) +
                   "x" + std::to_string(m.cols()) + " matrix");
  return {dec.matrixU(), dec.singularValues(), dec.matrixV()};
}

template <typename Derived>
double spectral_norm(const Eigen::MatrixBase<Derived>& m) {
  if (m.rows() == 0 || m.cols() == 0) return 0.0;
  return svd(m).S(0);
}

/// Best rank-r approximation plus bookkeeping about clamping.
template <typename Scalar>
struct TruncatedT {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> matrix;
  Index rank = 0;            // rank actually used
  bool rank_clamped = false; // requested rank exceeded min(rows, cols)
};

using Truncated = TruncatedT<double>;

/// Spectral-norm-optimal rank-r projection. Requests beyond min(rows, cols)
/// are clamped and flagged in the returned metadata.
template <typename Derived>
TruncatedT<typename Derived::Scalar> truncate_rank(const Eigen::MatrixBase<Derived>& m,
                                                   Index r) {
  using Scalar = typename Derived::Scalar;
  if (r < 1) throw std::invalid_argument("truncate_rank: rank must be >= 1");
  const Index full = std::min(m.rows(), m.cols());
  const bool clamped = r > full;
  const Index keep = clamped ? full : r;
  if (keep == full) return {m.derived(), keep, clamped};
  SvdResultT<Scalar> f = svd(m);
  return {f.U.leftCols(keep) * f.S.head(keep).asDiagonal() *
              f.V.leftCols(keep).transpose(),
          keep, clamped};
}

/// Moore-Penrose pseudo-inverse with singular values below rel_tol * sigma_max
/// zeroed. An all-zero input yields the zero matrix of transposed shape.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> pinv(
    const Eigen::MatrixBase<Derived>& m, double rel_tol = 1e-12) {
  using Scalar = typename Derived::Scalar;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (!(rel_tol > 0.0 && rel_tol < 1.0))
    throw std::invalid_argument("pinv: rel_tol must lie in (0, 1)");
  Mat out = Mat::Zero(m.cols(), m.rows());
  if (m.rows() == 0 || m.cols() == 0) return out;
  SvdResultT<Scalar> f = svd(m);
  const double smax = f.S.size() > 0 ? static_cast<double>(f.S(0)) : 0.0;
  if (smax <= 0.0) return out;
  const double cutoff = rel_tol * smax;
  Index keep = 0;
  while (keep < f.S.size() && f.S(keep) >= cutoff) ++keep;
  if (keep == 0) return out;
  out.noalias() = f.V.leftCols(keep) *
                  f.S.head(keep).cwiseInverse().asDiagonal() *
                  f.U.leftCols(keep).transpose();
  return out;
}

/// out(:,:,k) = a * g(:,:,k) * b^T for every slice k.
template <typename Scalar, typename DerivedA, typename DerivedB>
Tensor3T<Scalar> sandwich(const Eigen::MatrixBase<DerivedA>& a, const Tensor3T<Scalar>& g,
                          const Eigen::MatrixBase<DerivedB>& b) {
  if (a.cols() != g.dim1())
    throw std::invalid_argument(
        "sandwich: mode-1 mismatch, a has " + std::to_string(a.cols()) +
        " columns but g.dim1 = " + std::to_string(g.dim1()));
  if (b.cols() != g.dim2())
    throw std::invalid_argument(
        "sandwich: mode-2 mismatch, b has " + std::to_string(b.cols()) +
        " columns but g.dim2 = " + std::to_string(g.dim2()));
  Tensor3T<Scalar> out(a.rows(), b.rows(), g.dim3());
  for (Index k = 0; k < g.dim3(); ++k)
    out.slice_ref(k).noalias() = a.derived() * g.slice(k) * b.derived().transpose();
  return out;
}

/// out(:,:,c) = sum_k g(:,:,k) * v(k, c); contracts the third mode.
template <typename Scalar, typename Derived>
Tensor3T<Scalar> contract_third_mode(const Tensor3T<Scalar>& g,
                                     const Eigen::MatrixBase<Derived>& v) {
  if (v.rows() != g.dim3())
    throw std::invalid_argument(
        "contract_third_mode: v has " + std::to_string(v.rows()) +
        " rows but g.dim3 = " + std::to_string(g.dim3()));
  return Tensor3T<Scalar>::from_matrix(g.to_matrix() * v.derived(), g.dim1(), g.dim2());
}

}  // namespace htde
