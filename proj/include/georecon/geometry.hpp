#pragma once

#include <cstdint>
#include <vector>

#include "georecon/types.hpp"

namespace georecon {

/// One molecule: atomic numbers plus Cartesian coordinates in Angstrom.
struct Conformation {
  std::vector<int> atomic_numbers;
  Coords coords;

  Index num_atoms() const { return coords.rows(); }
};

/// Validates the basic conformation invariants; throws std::invalid_argument.
void validate(const Conformation& conf);

/// Shifts coordinates so the centroid is the zero vector. Atomic numbers pass through.
Conformation center(const Conformation& conf);

Vec3 centroid(const Coords& coords);

/// Proper rigid alignment of y onto x: x ~ y*R^T + t per row.
struct AlignmentResult {
  Mat3 rotation;
  Vec3 translation;
  Real distance = 0.0;  // Frobenius norm over atoms at the optimum, Angstrom
};

/// Minimizes ||x - (R y + t)|| over proper rotations and translations via the
/// SVD of the 3x3 cross-covariance, with determinant sign correction so
/// reflections are excluded.
AlignmentResult kabsch_align(const Coords& x, const Coords& y);

/// Procrustes distance between two conformations' coordinates.
inline Real procrustes_distance(const Coords& x, const Coords& y) {
  return kabsch_align(x, y).distance;
}

/// Orthonormal basis of the rigid-body subspace (uniform translations plus
/// infinitesimal rotations about the centroid) in flattened row-major
/// coordinate order. The projector P = I - Q Q^T maps onto the non-rigid
/// complement.
struct RigidProjector {
  Mat basis;        // 3N x k, orthonormal columns, k in {3..6}
  Index dimension;  // 3N

  Index rank() const { return dimension - basis.cols(); }
};

RigidProjector rigid_basis(const Conformation& conf);

/// v - Q Q^T v for a flattened 3N-vector.
Vec project_nonrigid(const RigidProjector& proj, const Vec& v);

/// Clean / noised / rec coordinate variants sharing one noise draw.
/// Invariants hold bitwise: noised - clean == epsilon and
/// rec - clean == lambda * epsilon, coordinatewise in double arithmetic.
struct NoiseTriple {
  Coords clean;
  Coords noised;
  Coords rec;
  Coords epsilon;
  Real sigma = 0.0;
  Real lambda = 1.0;
};

NoiseTriple sample_noise_triple(const Conformation& conf, Real sigma, Real lambda,
                                std::uint64_t seed);

// Flattened (row-major, x1 y1 z1 x2 ...) coordinate bridging.
Vec flatten_coords(const Coords& c);
Coords unflatten_coords(const Vec& v);

}  // namespace georecon
