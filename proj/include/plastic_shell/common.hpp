#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>

namespace plastic_shell {

template <typename Scalar>
using Vec2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Mat2 = Eigen::Matrix<Scalar, 2, 2>;
template <typename Scalar>
using Mat3 = Eigen::Matrix<Scalar, 3, 3>;

using Vec2d = Vec2<double>;
using Vec3d = Vec3<double>;
using Mat2d = Mat2<double>;
using Mat3d = Mat3<double>;
using Vec6d = Eigen::Matrix<double, 6, 1>;

/// Index value used for "no neighbour" / "no vertex".
inline constexpr int kNone = -1;

/// Error raised by every module. `stage` names the pipeline stage that failed
/// (mesh, plasticity, equilibrium, ...); `index` is the offending triangle or
/// vertex when one is known, -1 otherwise.
class Error : public std::runtime_error {
 public:
  Error(std::string stage, const std::string& message, long index = -1);

  const std::string& stage() const noexcept { return stage_; }
  long index() const noexcept { return index_; }

 private:
  std::string stage_;
  long index_;
};

// Symmetric 2x2 matrices are packed as (xx, yy, xy) everywhere in the library.

template <typename Scalar>
Mat2<Scalar> unpack_sym(const Vec3<Scalar>& v) {
  Mat2<Scalar> m;
  m << v(0), v(2), v(2), v(1);
  return m;
}

template <typename Derived>
Vec3<typename Derived::Scalar> pack_sym(const Eigen::MatrixBase<Derived>& m) {
  return Vec3<typename Derived::Scalar>(m(0, 0), m(1, 1), m(0, 1));
}

template <typename Derived>
Mat2<typename Derived::Scalar> symmetrize(const Eigen::MatrixBase<Derived>& m) {
  using S = typename Derived::Scalar;
  Mat2<S> r;
  const S off = (m(0, 1) + m(1, 0)) * 0.5;
  r << m(0, 0), off, off, m(1, 1);
  return r;
}

template <typename Derived>
Mat2<typename Derived::Scalar> inverse2(const Eigen::MatrixBase<Derived>& m) {
  using S = typename Derived::Scalar;
  const S det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
  Mat2<S> r;
  r << m(1, 1) / det, -m(0, 1) / det, -m(1, 0) / det, m(0, 0) / det;
  return r;
}

template <typename Derived>
typename Derived::Scalar det2(const Eigen::MatrixBase<Derived>& m) {
  return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
}

/// Worker threads used by per-triangle loops. Reads PLASTIC_SHELL_THREADS;
/// defaults to the hardware concurrency.
int worker_count();

/// Runs body(begin, end) over [0, count) split into contiguous chunks, one per
/// worker. Chunks are disjoint, so bodies may write to per-item storage freely.
void parallel_for(std::size_t count, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace plastic_shell
