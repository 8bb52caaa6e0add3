#pragma once

#include <cstddef>

#include <Eigen/Core>

#include "hyperreg/errors.hpp"

namespace hyperreg {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// One 3-vector per mesh node, stored flat as [x0 y0 z0 x1 y1 z1 ...].
/// Used for displacements (m) and nodal forces (N).
class NodalField {
 public:
  NodalField() = default;
  explicit NodalField(std::size_t nodes)
      : values_(Eigen::VectorXd::Zero(3 * static_cast<Eigen::Index>(nodes))) {}
  explicit NodalField(Eigen::VectorXd flat) : values_(std::move(flat)) {
    if (values_.size() % 3 != 0)
      throw InvalidArgument("nodal field length must be a multiple of 3");
  }

  std::size_t node_count() const noexcept {
    return static_cast<std::size_t>(values_.size() / 3);
  }
  std::size_t dof_count() const noexcept { return static_cast<std::size_t>(values_.size()); }

  auto node(std::size_t i) { return values_.segment<3>(3 * static_cast<Eigen::Index>(i)); }
  auto node(std::size_t i) const {
    return values_.segment<3>(3 * static_cast<Eigen::Index>(i));
  }

  Eigen::VectorXd& vec() noexcept { return values_; }
  const Eigen::VectorXd& vec() const noexcept { return values_; }

  double norm() const { return values_.norm(); }

  NodalField& operator+=(const NodalField& o) {
    values_ += o.values_;
    return *this;
  }
  friend NodalField operator+(NodalField a, const NodalField& b) { return a += b; }
  friend NodalField operator-(const NodalField& a, const NodalField& b) {
    return NodalField(Eigen::VectorXd(a.values_ - b.values_));
  }
  friend NodalField operator*(double s, const NodalField& a) {
    return NodalField(Eigen::VectorXd(s * a.values_));
  }
  friend bool operator==(const NodalField& a, const NodalField& b) {
    return a.values_.size() == b.values_.size() && a.values_ == b.values_;
  }

 private:
  Eigen::VectorXd values_;
};

}  // namespace hyperreg
