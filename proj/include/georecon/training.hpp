#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "georecon/checkpoint.hpp"
#include "georecon/corpus.hpp"
#include "georecon/model.hpp"
#include "georecon/objectives.hpp"

namespace georecon {

struct ScheduleConfig {
  Real peak_lr = 4e-4;
  Real lr_min = 1e-7;
  Index warmup_steps = 100;
  Index cosine_length = 2000;
};

/// Warmup-cosine learning rate: linear ramp lr_min -> peak over warmup_steps,
/// half-cosine decay back to lr_min at cosine_length, constant afterwards.
Real lr_at(Index step, const ScheduleConfig& sched);

struct OptimizerError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Adam with bias correction; moments are stored per parameter block.
struct OptimizerState {
  std::vector<Mat> first_moment;
  std::vector<Mat> second_moment;
  Index step = 0;
  Real beta1 = 0.9;
  Real beta2 = 0.999;
  Real epsilon = 1e-8;
};

OptimizerState init_optimizer(const ParamSet& params);

/// One Adam update. Non-finite gradient components abort with a diagnostic
/// naming the offending block; parameters are untouched in that case.
void optimizer_step(ParamSet& params, const std::vector<Mat>& grads, OptimizerState& state,
                    Real lr);

struct RunConfig {
  std::uint64_t seed = 0;
  Index batch_size = 8;
  Index total_steps = 200;
  Index epochs = 20;
  Real sigma = 0.04;  // position noise scale, Angstrom
  Real lambda = 1.0;  // reconstruction noise scale
  LossWeights weights;
  EncoderConfig encoder;
  DecoderConfig decoder;
  ScheduleConfig schedule;
  Real denoising_weight = 0.0;  // auxiliary denoising term during finetuning
  std::string dataset;
  std::string mode = "pretrain";  // pretrain | finetune | linear_probe
  std::string target = "energy";  // active label column
  std::vector<std::string> warnings;  // accepted-but-unused config keys
};

struct LossRow {
  Index step;  // 1-based
  Real lr;
  Real nsd, rec, cln, total;
};

struct PretrainResult {
  Checkpoint checkpoint;
  std::vector<LossRow> log;
  bool diverged = false;
  Index divergence_step = -1;
};

/// Multi-task pretraining. Per step: sample a batch from the train split,
/// build a noise triple per molecule, run the denoise pass on noised
/// coordinates, the clean pass (conditioning + clean target), and the
/// reconstruction pass, then take one Adam step on the weighted total.
/// Fully deterministic for a fixed config.
PretrainResult pretrain(const RunConfig& config, const Corpus& corpus);

struct MaeRow {
  Index epoch;  // 0 = before any update
  Real mae;
};

struct FinetuneResult {
  Checkpoint checkpoint;
  std::vector<MaeRow> log;
};

/// Trains the encoder plus a fresh scalar readout on MSE against the corpus
/// labels; logs validation MAE per epoch. When config.denoising_weight > 0
/// an auxiliary denoising term is added.
FinetuneResult finetune(const RunConfig& config, const Checkpoint& start, const Corpus& corpus);

struct ProbeRow {
  Index epoch;
  Real mae;
  Real w_norm;
};

struct LinearProbeResult {
  std::vector<ProbeRow> log;
  Vec w;
  Real b = 0.0;
};

/// Trains only the affine head (w, b) on frozen pooled embeddings; the
/// encoder parameters receive no gradients and are never written.
LinearProbeResult linear_probe(const RunConfig& config, const Checkpoint& start,
                               const Corpus& corpus);

/// Inner probe trainer on precomputed features; exposed so feature fixtures
/// can be probed directly.
LinearProbeResult train_linear_probe(const Mat& features, const Vec& labels,
                                     const std::vector<std::size_t>& train_idx,
                                     const std::vector<std::size_t>& eval_idx,
                                     const RunConfig& config);

struct ScoreEquivalenceConfig {
  Index hidden = 64;
  Index steps = 1500;
  Index batch = 16;
  Real lr = 3e-3;
  Index eval_samples = 256;
  std::uint64_t seed = 0;
};

struct ScoreEquivalenceResult {
  Real mean_cosine = 0.0;   // rescaled denoiser vs analytic mixture score
  Real final_loss = 0.0;
  std::vector<Real> per_sample_cosine;
};

/// Trains a small dense denoiser on draws from the Gaussian mixture and
/// compares its rescaled prediction -eps_hat/sigma^2 against the analytic
/// mixture score on held-out draws.
ScoreEquivalenceResult run_score_equivalence(const ScoreOracle& oracle,
                                             const ScoreEquivalenceConfig& cfg);

struct AblationAxes {
  std::vector<Real> lambdas;
  std::vector<int> decoder_depths;
  std::vector<Real> rec_weights;
  std::vector<Real> cln_weights;
};

struct AblationCell {
  Real lambda;
  int decoder_depth;
  Real w_rec;
  Real w_cln;
  Real final_loss_total;
  Real finetune_mae;
};

/// One pretrain+finetune run per grid cell, identically seeded; empty axes
/// fall back to the base configuration value.
std::vector<AblationCell> ablation_grid(const RunConfig& base, const AblationAxes& axes,
                                        const Corpus& corpus);

}  // namespace georecon
