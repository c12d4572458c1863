#include "georecon/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "georecon/rng.hpp"

namespace georecon {

using ad::Shape;
using ad::Tape;
using ad::Value;

Real lr_at(Index step, const ScheduleConfig& s) {
  if (!(s.lr_min > 0.0) || s.lr_min > s.peak_lr || s.warmup_steps < 0 ||
      s.cosine_length <= s.warmup_steps)
    throw std::invalid_argument("schedule: requires 0 < lr_min <= peak and cosine_length > warmup");
  if (step < 0) throw std::invalid_argument("schedule: negative step");
  if (step < s.warmup_steps)
    return s.lr_min + (s.peak_lr - s.lr_min) * static_cast<Real>(step) /
                          static_cast<Real>(s.warmup_steps);
  if (step <= s.cosine_length) {
    const Real progress = static_cast<Real>(step - s.warmup_steps) /
                          static_cast<Real>(s.cosine_length - s.warmup_steps);
    return s.lr_min + (s.peak_lr - s.lr_min) * 0.5 * (1.0 + std::cos(M_PI * progress));
  }
  return s.lr_min;
}

OptimizerState init_optimizer(const ParamSet& params) {
  OptimizerState st;
  for (const auto& [name, m] : params.blocks) {
    st.first_moment.push_back(Mat::Zero(m.rows(), m.cols()));
    st.second_moment.push_back(Mat::Zero(m.rows(), m.cols()));
  }
  return st;
}

void optimizer_step(ParamSet& params, const std::vector<Mat>& grads, OptimizerState& state,
                    Real lr) {
  if (grads.size() != params.blocks.size())
    throw std::invalid_argument("optimizer_step: gradient block count mismatch");
  for (std::size_t k = 0; k < grads.size(); ++k) {
    if (grads[k].rows() != params.blocks[k].second.rows() ||
        grads[k].cols() != params.blocks[k].second.cols())
      throw std::invalid_argument("optimizer_step: gradient shape mismatch for block " +
                                  params.blocks[k].first);
    if (!grads[k].allFinite())
      throw OptimizerError("optimizer_step: non-finite gradient in block " +
                           params.blocks[k].first);
  }
  state.step += 1;
  const Real bc1 = 1.0 - std::pow(state.beta1, static_cast<Real>(state.step));
  const Real bc2 = 1.0 - std::pow(state.beta2, static_cast<Real>(state.step));
  for (std::size_t k = 0; k < grads.size(); ++k) {
    Mat& m = state.first_moment[k];
    Mat& v = state.second_moment[k];
    m = state.beta1 * m + (1.0 - state.beta1) * grads[k];
    v = state.beta2 * v + (1.0 - state.beta2) * grads[k].cwiseProduct(grads[k]);
    params.blocks[k].second.array() -=
        lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + state.epsilon);
  }
}

namespace {

std::vector<Mat> zero_grads_like(const ParamSet& params) {
  std::vector<Mat> grads;
  grads.reserve(params.blocks.size());
  for (const auto& [name, m] : params.blocks) grads.push_back(Mat::Zero(m.rows(), m.cols()));
  return grads;
}

void harvest_grads(Tape& t, const BoundParams& bound, std::vector<Mat>& accum) {
  for (std::size_t k = 0; k < bound.leaves.size(); ++k) {
    if (!t.has_grad(bound.leaves[k])) continue;
    const Mat& block = bound.set->blocks[k].second;
    accum[k] += ad::unflatten_rowmajor(t.grad(bound.leaves[k]), block.rows(), block.cols());
  }
}

Value coords_const(Tape& t, const Coords& c) {
  return t.leaf(Shape::matrix(c.rows(), 3), ad::flatten_rowmajor(c), false);
}

struct MoleculeLosses {
  Real nsd = 0.0, rec = 0.0, cln = 0.0;
};

// One molecule's multi-task pass. Branches with zero weight are skipped and
// logged as zero; the clean pass runs whenever the clean target or the
// conditioning embedding needs it.
MoleculeLosses pretrain_pass(const Conformation& conf, const NoiseTriple& triple,
                             const ParamSet& params, const RunConfig& cfg,
                             std::vector<Mat>* grad_accum) {
  Tape t;
  BoundParams bound = bind_params(t, params, grad_accum != nullptr);
  const LossWeights& w = cfg.weights;
  const bool need_clean = w.cln > 0.0 || w.rec > 0.0;

  MoleculeLosses out;
  Value total = t.constant_scalar(0.0);

  Value enc_clean_g;
  if (need_clean) {
    EncoderOut enc_c = encode(t, coords_const(t, triple.clean), conf.atomic_numbers, bound,
                              cfg.encoder);
    if (w.cln > 0.0) {
      Value l_cln = loss_cln(t, denoise_head(t, enc_c, bound));
      out.cln = l_cln.scalar();
      total = t.add(total, t.scale(l_cln, w.cln));
    }
    if (w.rec > 0.0) enc_clean_g = pool(t, enc_c.scalars);
  }
  if (w.nsd > 0.0) {
    EncoderOut enc_n = encode(t, coords_const(t, triple.noised), conf.atomic_numbers, bound,
                              cfg.encoder);
    Value l_nsd = loss_nsd(t, denoise_head(t, enc_n, bound), triple.epsilon);
    out.nsd = l_nsd.scalar();
    total = t.add(total, t.scale(l_nsd, w.nsd));
  }
  if (w.rec > 0.0) {
    EncoderOut enc_r = encode(t, coords_const(t, triple.rec), conf.atomic_numbers, bound,
                              cfg.encoder);
    Value l_rec =
        loss_rec(t, recon_decode(t, enc_clean_g, enc_r, bound, cfg.decoder), triple.epsilon,
                 triple.lambda);
    out.rec = l_rec.scalar();
    total = t.add(total, t.scale(l_rec, w.rec));
  }

  if (grad_accum != nullptr) {
    t.backward(total);
    harvest_grads(t, bound, *grad_accum);
  }
  return out;
}

std::vector<std::size_t> train_indices(const Corpus& corpus) {
  std::vector<std::size_t> idx = corpus.indices(Split::kTrain);
  if (idx.empty()) {
    idx.resize(corpus.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  }
  return idx;
}

std::vector<std::size_t> eval_indices(const Corpus& corpus) {
  std::vector<std::size_t> idx = corpus.indices(Split::kVal);
  return idx.empty() ? train_indices(corpus) : idx;
}

struct LabelScaler {
  Real mean = 0.0;
  Real scale = 1.0;

  static LabelScaler fit(const Vec& labels, const std::vector<std::size_t>& idx) {
    LabelScaler s;
    Real sum = 0.0;
    for (std::size_t i : idx) sum += labels[static_cast<Index>(i)];
    s.mean = sum / static_cast<Real>(idx.size());
    Real var = 0.0;
    for (std::size_t i : idx) {
      const Real d = labels[static_cast<Index>(i)] - s.mean;
      var += d * d;
    }
    s.scale = std::sqrt(var / static_cast<Real>(idx.size()));
    if (s.scale < 1e-12) s.scale = 1.0;
    return s;
  }

  Real to_std(Real y) const { return (y - mean) / scale; }
};

}  // namespace

PretrainResult pretrain(const RunConfig& config, const Corpus& corpus) {
  validate(corpus);
  if (corpus.size() == 0) throw std::invalid_argument("pretrain: dataset empty");
  if (config.batch_size < 1 || config.total_steps < 1)
    throw std::invalid_argument("pretrain: batch_size and total_steps must be >= 1");
  if (config.weights.nsd <= 0.0 && config.weights.rec <= 0.0 && config.weights.cln <= 0.0)
    throw std::invalid_argument("pretrain: all loss weights are zero");

  ParamSet params = init_encoder_params(config.encoder, config.seed);
  add_decoder_params(params, config.encoder, config.decoder, config.seed);
  OptimizerState opt = init_optimizer(params);
  const std::vector<std::size_t> train = train_indices(corpus);

  PretrainResult result;
  Rng batch_rng(derive_seed(config.seed, 0xBA7C4));
  ParamSet last_good = params;

  for (Index step = 0; step < config.total_steps; ++step) {
    const Real lr = lr_at(step, config.schedule);
    std::vector<Mat> grads = zero_grads_like(params);
    MoleculeLosses batch;
    for (Index k = 0; k < config.batch_size; ++k) {
      const std::size_t mol_idx =
          train[static_cast<std::size_t>(batch_rng.uniform_int(static_cast<std::int64_t>(train.size())))];
      const Conformation& mol = corpus.molecules[mol_idx];
      const std::uint64_t noise_seed = derive_seed(
          config.seed ^ 0x9e3779b97f4a7c15ULL,
          static_cast<std::uint64_t>(step) * static_cast<std::uint64_t>(config.batch_size) +
              static_cast<std::uint64_t>(k));
      const NoiseTriple triple = sample_noise_triple(mol, config.sigma, config.lambda, noise_seed);
      const MoleculeLosses losses = pretrain_pass(mol, triple, params, config, &grads);
      batch.nsd += losses.nsd;
      batch.rec += losses.rec;
      batch.cln += losses.cln;
    }
    const Real inv_b = 1.0 / static_cast<Real>(config.batch_size);
    batch.nsd *= inv_b;
    batch.rec *= inv_b;
    batch.cln *= inv_b;
    for (Mat& g : grads) g *= inv_b;

    const LossReport report = make_report(batch.nsd, batch.rec, batch.cln, config.weights);
    if (!std::isfinite(report.total)) {
      result.diverged = true;
      result.divergence_step = step + 1;
      result.checkpoint = Checkpoint{config.encoder, config.decoder, last_good};
      return result;
    }
    result.log.push_back({step + 1, lr, report.nsd, report.rec, report.cln, report.total});

    last_good = params;
    try {
      optimizer_step(params, grads, opt, lr);
    } catch (const OptimizerError&) {
      result.diverged = true;
      result.divergence_step = step + 1;
      result.checkpoint = Checkpoint{config.encoder, config.decoder, last_good};
      return result;
    }
  }

  result.checkpoint = Checkpoint{config.encoder, config.decoder, std::move(params)};
  return result;
}

namespace {

Real finetune_eval_mae(const ParamSet& params, const EncoderConfig& enc_cfg,
                       const Corpus& corpus, const std::vector<std::size_t>& idx,
                       const LabelScaler& scaler) {
  Real mae = 0.0;
  for (std::size_t i : idx) {
    Tape t;
    BoundParams bound = bind_params(t, params, false);
    EncoderOut enc = encode(t, coords_const(t, corpus.molecules[i].coords),
                            corpus.molecules[i].atomic_numbers, bound, enc_cfg);
    const Real pred = scalar_head(t, pool(t, enc.scalars), bound).scalar();
    mae += std::abs(pred - scaler.to_std(corpus.labels[static_cast<Index>(i)]));
  }
  return mae / static_cast<Real>(idx.size()) * scaler.scale;
}

}  // namespace

FinetuneResult finetune(const RunConfig& config, const Checkpoint& start, const Corpus& corpus) {
  validate(corpus);
  if (!corpus.has_labels()) throw std::invalid_argument("finetune: corpus has no labels");

  const EncoderConfig enc_cfg = start.encoder;
  ParamSet params;
  for (const auto& [name, m] : start.params.blocks)
    if (name.rfind("rec.", 0) != 0 && name.rfind("head.", 0) != 0 && name.rfind("probe.", 0) != 0)
      params.add(name, m);
  add_scalar_head_params(params, enc_cfg, config.seed);

  OptimizerState opt = init_optimizer(params);
  const std::vector<std::size_t> train = train_indices(corpus);
  const std::vector<std::size_t> eval = eval_indices(corpus);
  Vec labels(static_cast<Index>(corpus.labels.size()));
  for (Index i = 0; i < labels.size(); ++i) labels[i] = corpus.labels[static_cast<std::size_t>(i)];
  const LabelScaler scaler = LabelScaler::fit(labels, train);

  FinetuneResult result;
  result.log.push_back({0, finetune_eval_mae(params, enc_cfg, corpus, eval, scaler)});

  Rng order_rng(derive_seed(config.seed, 0xF17E));
  Rng noise_rng(derive_seed(config.seed, 0xA0153));
  Index global_step = 0;
  for (Index epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<std::size_t> order(train.size());
    {
      const std::vector<std::size_t> perm = order_rng.permutation(train.size());
      for (std::size_t i = 0; i < train.size(); ++i) order[i] = train[perm[i]];
    }
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), b + static_cast<std::size_t>(config.batch_size));
      std::vector<Mat> grads = zero_grads_like(params);
      for (std::size_t s = b; s < end; ++s) {
        const std::size_t i = order[s];
        const Conformation& mol = corpus.molecules[i];
        Tape t;
        BoundParams bound = bind_params(t, params, true);
        EncoderOut enc = encode(t, coords_const(t, mol.coords), mol.atomic_numbers, bound, enc_cfg);
        Value pred = scalar_head(t, pool(t, enc.scalars), bound);
        Value diff = t.sub(pred, t.constant_scalar(scaler.to_std(corpus.labels[static_cast<Index>(i)])));
        Value loss = t.mul(diff, diff);
        if (config.denoising_weight > 0.0) {
          const NoiseTriple triple =
              sample_noise_triple(mol, config.sigma, 1.0, noise_rng.next_u64());
          EncoderOut enc_n =
              encode(t, coords_const(t, triple.noised), mol.atomic_numbers, bound, enc_cfg);
          Value aux = loss_nsd(t, denoise_head(t, enc_n, bound), triple.epsilon);
          loss = t.add(loss, t.scale(aux, config.denoising_weight));
        }
        t.backward(loss);
        harvest_grads(t, bound, grads);
      }
      for (Mat& g : grads) g *= 1.0 / static_cast<Real>(end - b);
      optimizer_step(params, grads, opt, lr_at(global_step++, config.schedule));
    }
    result.log.push_back(
        {epoch + 1, finetune_eval_mae(params, enc_cfg, corpus, eval, scaler)});
  }

  result.checkpoint = Checkpoint{enc_cfg, start.decoder, std::move(params)};
  return result;
}

LinearProbeResult train_linear_probe(const Mat& raw_features, const Vec& labels,
                                     const std::vector<std::size_t>& train_idx,
                                     const std::vector<std::size_t>& eval_idx,
                                     const RunConfig& config) {
  if (raw_features.rows() != labels.size())
    throw std::invalid_argument("linear probe: feature/label count mismatch");
  const Index d = raw_features.cols();
  const LabelScaler scaler = LabelScaler::fit(labels, train_idx);

  // Feature columns are centered on train-split statistics and scaled by one
  // shared factor (the mean feature deviation), so the probe is well
  // conditioned without reweighting directions of the representation.
  Vec f_mean = Vec::Zero(d);
  for (std::size_t i : train_idx) f_mean += raw_features.row(static_cast<Index>(i)).transpose();
  f_mean /= static_cast<Real>(train_idx.size());
  Real total_var = 0.0;
  for (std::size_t i : train_idx) {
    const Vec dlt = raw_features.row(static_cast<Index>(i)).transpose() - f_mean;
    total_var += dlt.squaredNorm();
  }
  Real shared_scale = std::sqrt(total_var / (static_cast<Real>(train_idx.size()) * static_cast<Real>(d)));
  if (shared_scale < 1e-12) shared_scale = 1.0;
  Mat features = (raw_features.rowwise() - f_mean.transpose()) / shared_scale;

  ParamSet head;
  head.add("probe.w", Mat::Zero(d, 1));
  head.add("probe.b", Mat::Zero(1, 1));
  OptimizerState opt = init_optimizer(head);

  auto eval_mae = [&](const std::vector<std::size_t>& idx) {
    Real mae = 0.0;
    for (std::size_t i : idx) {
      const Real pred = (features.row(static_cast<Index>(i)) * head.at("probe.w"))(0, 0) +
                        head.at("probe.b")(0, 0);
      mae += std::abs(pred - scaler.to_std(labels[static_cast<Index>(i)]));
    }
    return mae / static_cast<Real>(idx.size()) * scaler.scale;
  };

  LinearProbeResult result;
  result.log.push_back({0, eval_mae(eval_idx), head.at("probe.w").norm()});

  Rng order_rng(derive_seed(config.seed, 0x9820b));
  Index global_step = 0;
  for (Index epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<std::size_t> order(train_idx.size());
    const std::vector<std::size_t> perm = order_rng.permutation(train_idx.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = train_idx[perm[i]];
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), b + static_cast<std::size_t>(config.batch_size));
      Vec gw = Vec::Zero(d);
      Real gb = 0.0;
      for (std::size_t s = b; s < end; ++s) {
        const Index i = static_cast<Index>(order[s]);
        const Real pred = (features.row(i) * head.at("probe.w"))(0, 0) + head.at("probe.b")(0, 0);
        const Real resid = pred - scaler.to_std(labels[i]);
        gw += 2.0 * resid * features.row(i).transpose();
        gb += 2.0 * resid;
      }
      const Real inv = 1.0 / static_cast<Real>(end - b);
      std::vector<Mat> grads = {Mat(gw * inv), Mat(Mat::Constant(1, 1, gb * inv))};
      optimizer_step(head, grads, opt, lr_at(global_step++, config.schedule));
    }
    result.log.push_back({epoch + 1, eval_mae(eval_idx), head.at("probe.w").norm()});
  }

  result.w = head.at("probe.w").col(0);
  result.b = head.at("probe.b")(0, 0);
  return result;
}

LinearProbeResult linear_probe(const RunConfig& config, const Checkpoint& start,
                               const Corpus& corpus) {
  validate(corpus);
  if (!corpus.has_labels()) throw std::invalid_argument("linear_probe: corpus has no labels");

  Mat features(static_cast<Index>(corpus.size()), start.encoder.hidden_dim);
  for (std::size_t i = 0; i < corpus.size(); ++i)
    features.row(static_cast<Index>(i)) =
        eval_graph_embedding(corpus.molecules[i].coords, corpus.molecules[i].atomic_numbers,
                             start.params, start.encoder)
            .transpose();
  Vec labels(static_cast<Index>(corpus.labels.size()));
  for (Index i = 0; i < labels.size(); ++i) labels[i] = corpus.labels[static_cast<std::size_t>(i)];
  return train_linear_probe(features, labels, train_indices(corpus), eval_indices(corpus), config);
}

ScoreEquivalenceResult run_score_equivalence(const ScoreOracle& oracle,
                                             const ScoreEquivalenceConfig& cfg) {
  if (oracle.centers.empty())
    throw std::invalid_argument("score equivalence: oracle has no centers");
  const Index n_atoms = oracle.centers.front().rows();
  const Index dim = 3 * n_atoms;
  const Real sigma = oracle.sigma;

  // plain dense denoiser: flat coordinates in, predicted noise out
  ParamSet net;
  {
    Rng wrng(derive_seed(cfg.seed, 0xD15C));
    auto glorot = [&](Index r, Index c) {
      const Real lim = std::sqrt(6.0 / static_cast<Real>(r + c));
      Mat m(r, c);
      for (Index i = 0; i < r; ++i)
        for (Index j = 0; j < c; ++j) m(i, j) = wrng.uniform(-lim, lim);
      return m;
    };
    net.add("w1", glorot(dim, cfg.hidden));
    net.add("b1", Mat::Zero(cfg.hidden, 1));
    net.add("w2", glorot(cfg.hidden, cfg.hidden));
    net.add("b2", Mat::Zero(cfg.hidden, 1));
    net.add("w3", glorot(cfg.hidden, dim));
    net.add("b3", Mat::Zero(dim, 1));
  }

  auto forward = [&](Tape& t, const BoundParams& bound, const Vec& x) {
    Value xv = t.leaf(Shape::matrix(1, dim), x, false);
    Value h1 = t.silu(t.add(t.matmul(xv, bound.at("w1")),
                            t.reshape(bound.at("b1"), Shape::matrix(1, cfg.hidden))));
    Value h2 = t.silu(t.add(t.matmul(h1, bound.at("w2")),
                            t.reshape(bound.at("b2"), Shape::matrix(1, cfg.hidden))));
    return t.add(t.matmul(h2, bound.at("w3")), t.reshape(bound.at("b3"), Shape::matrix(1, dim)));
  };

  auto draw_sample = [&](Rng& rng, Vec& x, Vec& eps) {
    const std::size_t c = static_cast<std::size_t>(
        rng.uniform_int(static_cast<std::int64_t>(oracle.centers.size())));
    eps = rng.gaussian_vec(dim, sigma);
    x = flatten_coords(oracle.centers[c]) + eps;
  };

  OptimizerState opt = init_optimizer(net);
  Rng rng(derive_seed(cfg.seed, 0x5C0DE));
  ScheduleConfig sched;
  sched.peak_lr = cfg.lr;
  sched.lr_min = cfg.lr * 1e-3;
  sched.warmup_steps = cfg.steps / 20 + 1;
  sched.cosine_length = cfg.steps;

  ScoreEquivalenceResult result;
  for (Index step = 0; step < cfg.steps; ++step) {
    Tape t;
    BoundParams bound = bind_params(t, net, true);
    Value loss = t.constant_scalar(0.0);
    for (Index b = 0; b < cfg.batch; ++b) {
      Vec x, eps;
      draw_sample(rng, x, eps);
      Value pred = forward(t, bound, x);
      Value diff = t.sub(pred, t.constant(Shape::matrix(1, dim), eps));
      loss = t.add(loss, t.mean(t.mul(diff, diff)));
    }
    loss = t.scale(loss, 1.0 / static_cast<Real>(cfg.batch));
    t.backward(loss);
    std::vector<Mat> grads;
    for (std::size_t k = 0; k < net.blocks.size(); ++k) {
      const Mat& block = net.blocks[k].second;
      grads.push_back(t.has_grad(bound.leaves[k])
                          ? Mat(ad::unflatten_rowmajor(t.grad(bound.leaves[k]), block.rows(),
                                                       block.cols()))
                          : Mat(Mat::Zero(block.rows(), block.cols())));
    }
    optimizer_step(net, grads, opt, lr_at(step, sched));
    result.final_loss = loss.scalar();
  }

  // held-out comparison against the analytic mixture score
  Rng eval_rng(derive_seed(cfg.seed, 0xE7A1));
  Real cos_sum = 0.0;
  for (Index s = 0; s < cfg.eval_samples; ++s) {
    Vec x, eps;
    draw_sample(eval_rng, x, eps);
    Tape t;
    BoundParams bound = bind_params(t, net, false);
    const Vec eps_hat = forward(t, bound, x).data();
    const Vec model_score = -eps_hat / (sigma * sigma);
    const Vec truth = flatten_coords(analytic_mixture_score(oracle, unflatten_coords(x)));
    const Real denom = model_score.norm() * truth.norm();
    const Real cosine = denom > 0.0 ? model_score.dot(truth) / denom : 0.0;
    result.per_sample_cosine.push_back(cosine);
    cos_sum += cosine;
  }
  result.mean_cosine = cos_sum / static_cast<Real>(cfg.eval_samples);
  return result;
}

std::vector<AblationCell> ablation_grid(const RunConfig& base, const AblationAxes& axes,
                                        const Corpus& corpus) {
  const std::vector<Real> lambdas = axes.lambdas.empty() ? std::vector<Real>{base.lambda}
                                                         : axes.lambdas;
  const std::vector<int> depths =
      axes.decoder_depths.empty() ? std::vector<int>{base.decoder.depth} : axes.decoder_depths;
  const std::vector<Real> w_recs =
      axes.rec_weights.empty() ? std::vector<Real>{base.weights.rec} : axes.rec_weights;
  const std::vector<Real> w_clns =
      axes.cln_weights.empty() ? std::vector<Real>{base.weights.cln} : axes.cln_weights;
  if (lambdas.empty() || depths.empty() || w_recs.empty() || w_clns.empty())
    throw std::invalid_argument("ablation_grid: empty grid");

  std::vector<AblationCell> cells;
  for (Real lambda : lambdas)
    for (int depth : depths)
      for (Real w_rec : w_recs)
        for (Real w_cln : w_clns) {
          RunConfig cfg = base;
          cfg.lambda = lambda;
          cfg.decoder.depth = depth;
          cfg.weights.rec = w_rec;
          cfg.weights.cln = w_cln;
          PretrainResult pre = pretrain(cfg, corpus);
          AblationCell cell{lambda, depth, w_rec, w_cln, pre.log.back().total,
                            std::numeric_limits<Real>::quiet_NaN()};
          if (corpus.has_labels()) {
            FinetuneResult fine = finetune(cfg, pre.checkpoint, corpus);
            cell.finetune_mae = fine.log.back().mae;
          }
          cells.push_back(cell);
        }
  return cells;
}

}  // namespace georecon
