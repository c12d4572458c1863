#pragma once

#include <vector>

#include "georecon/autodiff.hpp"
#include "georecon/types.hpp"

namespace georecon {

struct LossWeights {
  Real nsd = 1.0;
  Real rec = 0.45;
  Real cln = 0.1;
};

struct LossReport {
  Real nsd = 0.0;
  Real rec = 0.0;
  Real cln = 0.0;
  Real total = 0.0;
};

// Mean squared error over all 3N components, plain and on-tape variants.
// The tape variants are what training differentiates; the plain variants
// evaluate the same arithmetic on raw matrices.

Real loss_nsd(const Coords& eps_hat, const Coords& epsilon);
Real loss_rec(const Coords& eps_hat_rec, const Coords& epsilon, Real lambda);
Real loss_cln(const Coords& eps_hat_cln);
Real total_loss(const LossReport& components, const LossWeights& weights);
LossReport make_report(Real nsd, Real rec, Real cln, const LossWeights& weights);

ad::Value loss_nsd(ad::Tape& t, const ad::Value& eps_hat, const Coords& epsilon);
ad::Value loss_rec(ad::Tape& t, const ad::Value& eps_hat_rec, const Coords& epsilon, Real lambda);
ad::Value loss_cln(ad::Tape& t, const ad::Value& eps_hat_cln);

/// Score-matching target (clean - noised) / sigma^2.
Coords dsm_target(const Coords& clean, const Coords& noised, Real sigma);

/// Gaussian mixture over conformations with isotropic width sigma; its score
/// is the force-field stand-in that a trained denoiser should recover.
struct ScoreOracle {
  std::vector<Coords> centers;
  Real sigma = 1.0;
};

/// grad_x log q_sigma(x) via log-sum-exp stabilized responsibilities.
Coords analytic_mixture_score(const ScoreOracle& oracle, const Coords& x);

}  // namespace georecon
