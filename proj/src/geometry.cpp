#include "georecon/geometry.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <stdexcept>

#include "georecon/rng.hpp"

namespace georecon {

void validate(const Conformation& conf) {
  if (conf.coords.rows() < 1) throw std::invalid_argument("conformation: no atoms");
  if (static_cast<Index>(conf.atomic_numbers.size()) != conf.coords.rows())
    throw std::invalid_argument("conformation: atomic number count does not match coordinates");
  for (int z : conf.atomic_numbers)
    if (z < 1) throw std::invalid_argument("conformation: atomic numbers must be positive");
  if (!conf.coords.allFinite())
    throw std::invalid_argument("conformation: non-finite coordinates");
}

Vec3 centroid(const Coords& coords) { return coords.colwise().mean().transpose(); }

Conformation center(const Conformation& conf) {
  Conformation out = conf;
  out.coords.rowwise() -= centroid(conf.coords).transpose();
  return out;
}

AlignmentResult kabsch_align(const Coords& x, const Coords& y) {
  if (x.rows() != y.rows()) throw std::invalid_argument("kabsch: atom count mismatch");
  if (x.rows() < 1) throw std::invalid_argument("kabsch: empty conformation");
  if (!x.allFinite() || !y.allFinite())
    throw std::invalid_argument("kabsch: non-finite coordinates");

  const Vec3 cx = centroid(x);
  const Vec3 cy = centroid(y);
  const Coords xc = x.rowwise() - cx.transpose();
  const Coords yc = y.rowwise() - cy.transpose();

  const Mat3 cov = xc.transpose() * yc;
  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Real sign = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  Mat3 correction = Mat3::Identity();
  correction(2, 2) = sign;

  AlignmentResult result;
  result.rotation = svd.matrixU() * correction * svd.matrixV().transpose();
  result.translation = cx - result.rotation * cy;
  result.distance = (xc - yc * result.rotation.transpose()).norm();
  return result;
}

RigidProjector rigid_basis(const Conformation& conf) {
  const Index n = conf.num_atoms();
  const Index dim = 3 * n;
  const Coords centered = conf.coords.rowwise() - centroid(conf.coords).transpose();
  const Real coord_scale = centered.norm();

  std::vector<Vec> candidates;
  // Uniform translations, one per axis; orthonormal by construction.
  for (int axis = 0; axis < 3; ++axis) {
    Vec t = Vec::Zero(dim);
    for (Index i = 0; i < n; ++i) t[3 * i + axis] = 1.0 / std::sqrt(static_cast<Real>(n));
    candidates.push_back(std::move(t));
  }
  // Infinitesimal rotations about the centroid: atom blocks e_axis x (r_i - rbar).
  for (int axis = 0; axis < 3; ++axis) {
    Vec3 e = Vec3::Zero();
    e[axis] = 1.0;
    Vec g = Vec::Zero(dim);
    for (Index i = 0; i < n; ++i) g.segment<3>(3 * i) = e.cross(centered.row(i).transpose());
    if (g.norm() < 1e-8 * coord_scale) continue;  // null generator (collinear / single atom)
    candidates.push_back(std::move(g));
  }

  // Modified Gram-Schmidt with a second pass; near-dependent candidates dropped.
  const Real drop_tol = 1e-10 * std::max(1.0, coord_scale);
  std::vector<Vec> basis;
  for (Vec& c : candidates) {
    Vec v = c;
    for (int pass = 0; pass < 2; ++pass)
      for (const Vec& q : basis) v -= q.dot(v) * q;
    const Real nv = v.norm();
    if (nv < drop_tol) continue;
    basis.push_back(v / nv);
  }

  RigidProjector proj;
  proj.dimension = dim;
  proj.basis.resize(dim, static_cast<Index>(basis.size()));
  for (Index j = 0; j < proj.basis.cols(); ++j) proj.basis.col(j) = basis[static_cast<std::size_t>(j)];
  return proj;
}

Vec project_nonrigid(const RigidProjector& proj, const Vec& v) {
  if (v.size() != proj.dimension)
    throw std::invalid_argument("project_nonrigid: dimension mismatch");
  return v - proj.basis * (proj.basis.transpose() * v);
}

namespace {

// Chooses a noise value near eps_raw such that both triple identities evaluate
// bitwise in double arithmetic:
//   (clean + eps) - clean == eps
//   (clean + lambda*eps) - clean == lambda*eps (one rounding on the product)
// The draw is snapped to a power-of-two grid ~2^-51 below the data scale and
// nudged along that grid until both round trips are exact. The adjustment is
// orders of magnitude below the noise scale itself.
void make_exact_noise(Real clean, Real eps_raw, Real lambda, Real& eps_out, Real& noised_out,
                      Real& rec_out) {
  const Real scale =
      std::max({std::abs(clean), std::abs(eps_raw), std::abs(lambda * eps_raw)});
  if (scale == 0.0 || eps_raw == 0.0) {
    eps_out = 0.0;
    noised_out = clean;
    rec_out = clean;
    return;
  }
  const Real grid = std::ldexp(1.0, std::ilogb(scale) - 51);
  const long long k0 = std::llround(eps_raw / grid);
  for (long long step = 0; step <= 4096; ++step) {
    for (int dir = 0; dir < 2; ++dir) {
      if (step == 0 && dir == 1) continue;
      const long long k = dir == 0 ? k0 + step : k0 - step;
      const Real eps = static_cast<Real>(k) * grid;
      const Real noised = clean + eps;
      if (noised - clean != eps) continue;
      const Real u = lambda * eps;
      const Real rec = clean + u;
      if (rec - clean != u) continue;
      eps_out = eps;
      noised_out = noised;
      rec_out = rec;
      return;
    }
  }
  eps_out = 0.0;
  noised_out = clean;
  rec_out = clean;
}

}  // namespace

NoiseTriple sample_noise_triple(const Conformation& conf, Real sigma, Real lambda,
                                std::uint64_t seed) {
  validate(conf);
  if (sigma <= 0.0) throw std::invalid_argument("sample_noise_triple: sigma must be positive");
  if (lambda <= 0.0) throw std::invalid_argument("sample_noise_triple: lambda must be positive");

  NoiseTriple triple;
  triple.sigma = sigma;
  triple.lambda = lambda;
  const Index n = conf.num_atoms();
  triple.clean = conf.coords;
  triple.noised.resize(n, 3);
  triple.rec.resize(n, 3);
  triple.epsilon.resize(n, 3);

  Rng rng(seed);
  for (Index i = 0; i < n; ++i) {
    for (int axis = 0; axis < 3; ++axis) {
      const Real raw = sigma * rng.gaussian();
      make_exact_noise(triple.clean(i, axis), raw, lambda, triple.epsilon(i, axis),
                       triple.noised(i, axis), triple.rec(i, axis));
    }
  }
  return triple;
}

Vec flatten_coords(const Coords& c) {
  Vec v(c.size());
  for (Index i = 0; i < c.rows(); ++i)
    for (Index a = 0; a < 3; ++a) v[3 * i + a] = c(i, a);
  return v;
}

Coords unflatten_coords(const Vec& v) {
  const Index n = v.size() / 3;
  Coords c(n, 3);
  for (Index i = 0; i < n; ++i)
    for (Index a = 0; a < 3; ++a) c(i, a) = v[3 * i + a];
  return c;
}

}  // namespace georecon
