#include "georecon/objectives.hpp"

#include <cmath>
#include <stdexcept>

#include "georecon/geometry.hpp"

namespace georecon {

using ad::Shape;
using ad::Tape;
using ad::Value;

namespace {

void require_same_shape(const Coords& a, const Coords& b, const char* what) {
  if (a.rows() != b.rows()) throw std::invalid_argument(std::string(what) + ": shape mismatch");
}

}  // namespace

Real loss_nsd(const Coords& eps_hat, const Coords& epsilon) {
  require_same_shape(eps_hat, epsilon, "loss_nsd");
  return (eps_hat - epsilon).squaredNorm() / static_cast<Real>(eps_hat.size());
}

Real loss_rec(const Coords& eps_hat_rec, const Coords& epsilon, Real lambda) {
  require_same_shape(eps_hat_rec, epsilon, "loss_rec");
  return (eps_hat_rec - lambda * epsilon).squaredNorm() / static_cast<Real>(epsilon.size());
}

Real loss_cln(const Coords& eps_hat_cln) {
  return eps_hat_cln.squaredNorm() / static_cast<Real>(eps_hat_cln.size());
}

Real total_loss(const LossReport& components, const LossWeights& weights) {
  if (weights.nsd < 0.0 || weights.rec < 0.0 || weights.cln < 0.0)
    throw std::invalid_argument("total_loss: negative weights");
  return weights.nsd * components.nsd + weights.rec * components.rec +
         weights.cln * components.cln;
}

LossReport make_report(Real nsd, Real rec, Real cln, const LossWeights& weights) {
  LossReport r;
  r.nsd = nsd;
  r.rec = rec;
  r.cln = cln;
  r.total = total_loss(r, weights);
  return r;
}

namespace {

Value mse_against(Tape& t, const Value& pred, const Coords& target) {
  if (pred.shape().rows() != target.rows() || pred.shape().cols() != 3)
    throw std::invalid_argument("loss: prediction shape mismatch");
  Value tgt = t.constant(Shape::matrix(target.rows(), 3), ad::flatten_rowmajor(target));
  Value diff = t.sub(pred, tgt);
  return t.mean(t.mul(diff, diff));
}

}  // namespace

Value loss_nsd(Tape& t, const Value& eps_hat, const Coords& epsilon) {
  return mse_against(t, eps_hat, epsilon);
}

Value loss_rec(Tape& t, const Value& eps_hat_rec, const Coords& epsilon, Real lambda) {
  return mse_against(t, eps_hat_rec, lambda * epsilon);
}

Value loss_cln(Tape& t, const Value& eps_hat_cln) {
  return mse_against(t, eps_hat_cln, Coords::Zero(eps_hat_cln.shape().rows(), 3));
}

Coords dsm_target(const Coords& clean, const Coords& noised, Real sigma) {
  require_same_shape(clean, noised, "dsm_target");
  if (sigma <= 0.0) throw std::invalid_argument("dsm_target: sigma must be positive");
  return (clean - noised) / (sigma * sigma);
}

Coords analytic_mixture_score(const ScoreOracle& oracle, const Coords& x) {
  if (oracle.centers.empty())
    throw std::invalid_argument("mixture score: oracle has no centers");
  if (oracle.sigma <= 0.0) throw std::invalid_argument("mixture score: sigma must be positive");
  const Real inv_var = 1.0 / (oracle.sigma * oracle.sigma);

  // Responsibilities via log-sum-exp so far-away centers underflow gracefully.
  const std::size_t k = oracle.centers.size();
  std::vector<Real> logw(k);
  Real max_logw = -std::numeric_limits<Real>::infinity();
  for (std::size_t i = 0; i < k; ++i) {
    if (oracle.centers[i].rows() != x.rows())
      throw std::invalid_argument("mixture score: center atom count mismatch");
    logw[i] = -0.5 * inv_var * (x - oracle.centers[i]).squaredNorm();
    max_logw = std::max(max_logw, logw[i]);
  }
  Real denom = 0.0;
  for (std::size_t i = 0; i < k; ++i) denom += std::exp(logw[i] - max_logw);

  Coords score = Coords::Zero(x.rows(), 3);
  for (std::size_t i = 0; i < k; ++i) {
    const Real w = std::exp(logw[i] - max_logw) / denom;
    score += w * (oracle.centers[i] - x) * inv_var;
  }
  return score;
}

}  // namespace georecon
