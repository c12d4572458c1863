#pragma once

#include <Eigen/Dense>

namespace georecon {

using Real = double;
using Index = Eigen::Index;

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Atomic coordinates, one row per atom, Angstrom.
using Coords = Eigen::Matrix<Real, Eigen::Dynamic, 3>;

using RowMat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMatMap = Eigen::Map<RowMat>;
using ConstRowMatMap = Eigen::Map<const RowMat>;

}  // namespace georecon
