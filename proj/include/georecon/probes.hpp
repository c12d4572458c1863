#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "georecon/autodiff.hpp"
#include "georecon/corpus.hpp"
#include "georecon/geometry.hpp"
#include "georecon/model.hpp"
#include "georecon/training.hpp"

namespace georecon {

/// A differentiable map from one conformation's coordinates to an embedding
/// vector; the atomic species are baked in.
struct EmbedFn {
  Index output_dim = 0;
  std::function<ad::Value(ad::Tape&, ad::Value)> build;  // coords leaf (N,3) -> (d,)
};

/// Pooled graph embedding of a trained model as an EmbedFn.
EmbedFn pooled_embed_fn(const ParamSet& params, const EncoderConfig& cfg,
                        const std::vector<int>& atomic_numbers);

/// Local Lipschitz constant ||J_f(x) P||_2 via power iteration restricted to
/// the non-rigid subspace: v <- normalize(P J^T J P v), using one recorded
/// tape and repeated tangent/adjoint sweeps. Returns the square root of the
/// final Rayleigh quotient, or nullopt when the non-rigid subspace is empty
/// (single atom).
std::optional<Real> lipschitz_power(const EmbedFn& f, const Conformation& conf, int steps,
                                    std::uint64_t seed = 0);

/// Rayleigh-quotient trajectory of the same iteration (one entry per step);
/// the estimate after k steps is sqrt(trajectory[k-1]).
std::vector<Real> lipschitz_rayleigh_trajectory(const EmbedFn& f, const Conformation& conf,
                                                int steps, std::uint64_t seed = 0);

struct LipschitzReport {
  std::vector<int> step_counts;
  std::vector<std::string> molecule_ids;
  /// estimates[m][s] = L(x) of molecule m at step_counts[s]
  std::vector<std::vector<Real>> estimates;
  std::vector<Real> median;  // per step count
  std::vector<Real> p95;
};

using EmbedFactory = std::function<EmbedFn(const std::vector<int>& atomic_numbers)>;

/// Per-molecule estimates at each step count plus median/p95 aggregates.
/// Molecules with no non-rigid directions are skipped. Honors the
/// GEORECON_THREADS environment variable for per-molecule parallelism.
LipschitzReport lipschitz_report(const EmbedFactory& factory, const Corpus& corpus,
                                 const std::vector<int>& step_counts, std::uint64_t seed);

std::string to_csv(const LipschitzReport& report);

struct HeatmapGrid {
  Index atom = 0;
  Vec3 axis_u, axis_v;
  Real range = 1.0;  // Angstrom
  Index resolution = 41;
  Mat values;  // resolution x resolution, ||g(x+du*u+dv*v) - g(x)||
};

/// Embedding-change norms over a 2D grid of displacements of one atom.
/// The center cell compares the embedding with itself and is exactly zero.
HeatmapGrid heatmap(const EmbedFn& f, const Conformation& conf, Index atom, const Vec3& axis_u,
                    const Vec3& axis_v, Real range = 1.0, Index resolution = 41);

std::string to_csv(const HeatmapGrid& grid);

struct NoiseRobustnessReport {
  int trials = 0;
  int violations = 0;  // |delta| exceeding the bound B * L_f * ||eps||
  Real max_delta = 0.0;
  Real mean_delta = 0.0;
  Real max_ratio = 0.0;  // |delta| / bound
};

/// Empirical check of |<w, f(x+eps)> - <w, f(x)>| against B * L_f * ||eps||.
/// L_f is a local estimate, so violations are counted and reported rather
/// than asserted away.
NoiseRobustnessReport noise_robustness_check(const Vec& w, Real bound_b, const EmbedFn& f,
                                             Real lipschitz_estimate, const Conformation& conf,
                                             Real sigma, int trials, std::uint64_t seed);

struct LinearizationRow {
  Index range_begin = 0;
  Index range_end = 0;
  Real pred_cosine = 1.0;
  Real grad_alignment = 1.0;
};

struct LinearizationReport {
  std::vector<LinearizationRow> rows;
  Real step0_cosine = 1.0;  // both deltas vanish at step 0; defined as 1
  bool diverged = false;
};

struct NtkConfig {
  Index n_steps = 100;
  Real lr = 1e-4;
  Index range_len = 100;
  std::uint64_t head_seed = 0;
};

/// Trains encoder + scalar head by full-batch gradient descent while
/// tracking the linearized predictor f(theta0) + <grad f(theta0), theta -
/// theta0> via parameter-space tangent sweeps on tapes recorded once at
/// theta0. Reports per-range cosine similarity between full and linearized
/// prediction deltas, and gradient alignment between consecutive steps.
LinearizationReport ntk_check(const Checkpoint& start, const Corpus& corpus,
                              const std::vector<std::size_t>& sample_idx, const NtkConfig& cfg);

std::string to_csv(const LinearizationReport& report);

}  // namespace georecon
