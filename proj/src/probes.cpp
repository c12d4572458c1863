#include "georecon/probes.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <memory>
#include <sstream>
#include <thread>

#include "georecon/rng.hpp"

namespace georecon {

using ad::FlatFn;
using ad::Recording;
using ad::Shape;
using ad::Tape;
using ad::Value;

EmbedFn pooled_embed_fn(const ParamSet& params, const EncoderConfig& cfg,
                        const std::vector<int>& atomic_numbers) {
  EmbedFn f;
  f.output_dim = cfg.hidden_dim;
  f.build = [&params, cfg, atomic_numbers](Tape& t, Value coords) {
    BoundParams bound = bind_params(t, params, false);
    EncoderOut enc = encode(t, coords, atomic_numbers, bound, cfg);
    return pool(t, enc.scalars);
  };
  return f;
}

namespace {

Vec projected_start_vector(const RigidProjector& proj, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x11b5));
  for (int attempt = 0; attempt < 10; ++attempt) {
    Vec v0 = rng.gaussian_vec(proj.dimension);
    v0.normalize();
    Vec v = project_nonrigid(proj, v0);
    const Real norm = v.norm();
    if (norm > 1e-10) return v / norm;
  }
  throw std::runtime_error("lipschitz: could not draw a non-rigid start vector");
}

}  // namespace

std::vector<Real> lipschitz_rayleigh_trajectory(const EmbedFn& f, const Conformation& conf,
                                                int steps, std::uint64_t seed) {
  validate(conf);
  if (steps < 1) throw std::invalid_argument("lipschitz: steps must be >= 1");
  const RigidProjector proj = rigid_basis(conf);
  if (proj.rank() == 0) return {};

  const Index n = conf.num_atoms();
  FlatFn flat{Shape::matrix(n, 3), f.build};
  Recording rec(flat, flatten_coords(conf.coords));

  Vec v = projected_start_vector(proj, seed);
  std::vector<Real> trajectory;
  trajectory.reserve(static_cast<std::size_t>(steps));
  for (int k = 0; k < steps; ++k) {
    const Vec jv = rec.jvp(v);
    trajectory.push_back(jv.squaredNorm());
    Vec u = project_nonrigid(proj, rec.vjp(jv));
    const Real norm = u.norm();
    if (norm == 0.0) {
      // zero Jacobian on the non-rigid subspace; the estimate stays at zero
      while (static_cast<int>(trajectory.size()) < steps) trajectory.push_back(0.0);
      break;
    }
    v = u / norm;
  }
  return trajectory;
}

std::optional<Real> lipschitz_power(const EmbedFn& f, const Conformation& conf, int steps,
                                    std::uint64_t seed) {
  const std::vector<Real> trajectory = lipschitz_rayleigh_trajectory(f, conf, steps, seed);
  if (trajectory.empty()) return std::nullopt;
  return std::sqrt(trajectory.back());
}

namespace {

int probe_threads() {
  const char* env = std::getenv("GEORECON_THREADS");
  if (env == nullptr) return 1;
  const int n = std::atoi(env);
  return n >= 1 ? n : 1;
}

Real percentile_sorted(std::vector<Real> values, Real q) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n == 0) return 0.0;
  const std::size_t rank =
      std::min(n - 1, static_cast<std::size_t>(std::ceil(q * static_cast<Real>(n))) - 1);
  return values[std::max<std::size_t>(rank, 0)];
}

Real median_sorted(std::vector<Real> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n == 0) return 0.0;
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace

LipschitzReport lipschitz_report(const EmbedFactory& factory, const Corpus& corpus,
                                 const std::vector<int>& step_counts, std::uint64_t seed) {
  validate(corpus);
  if (corpus.size() == 0) throw std::invalid_argument("lipschitz_report: empty corpus");
  if (step_counts.empty()) throw std::invalid_argument("lipschitz_report: no step counts");
  const int max_steps = *std::max_element(step_counts.begin(), step_counts.end());

  std::vector<std::vector<Real>> per_molecule(corpus.size());
  std::vector<char> defined(corpus.size(), 0);

  auto run_molecule = [&](std::size_t m) {
    const Conformation& conf = corpus.molecules[m];
    const EmbedFn f = factory(conf.atomic_numbers);
    const std::vector<Real> traj =
        lipschitz_rayleigh_trajectory(f, conf, max_steps, derive_seed(seed, m));
    if (traj.empty()) return;
    std::vector<Real> vals;
    for (int s : step_counts) vals.push_back(std::sqrt(traj[static_cast<std::size_t>(s - 1)]));
    per_molecule[m] = std::move(vals);
    defined[m] = 1;
  };

  const int threads = probe_threads();
  if (threads <= 1) {
    for (std::size_t m = 0; m < corpus.size(); ++m) run_molecule(m);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        for (std::size_t m = static_cast<std::size_t>(t); m < corpus.size();
             m += static_cast<std::size_t>(threads))
          run_molecule(m);
      });
    for (std::thread& th : pool) th.join();
  }

  LipschitzReport report;
  report.step_counts = step_counts;
  for (std::size_t m = 0; m < corpus.size(); ++m) {
    if (!defined[m]) continue;
    report.molecule_ids.push_back("mol" + std::to_string(m));
    report.estimates.push_back(per_molecule[m]);
  }
  for (std::size_t s = 0; s < step_counts.size(); ++s) {
    std::vector<Real> column;
    for (const std::vector<Real>& row : report.estimates) column.push_back(row[s]);
    report.median.push_back(median_sorted(column));
    report.p95.push_back(percentile_sorted(column, 0.95));
  }
  return report;
}

std::string to_csv(const LipschitzReport& report) {
  std::ostringstream os;
  os << "molecule_id,steps,L\n";
  os.precision(17);
  for (std::size_t m = 0; m < report.molecule_ids.size(); ++m)
    for (std::size_t s = 0; s < report.step_counts.size(); ++s)
      os << report.molecule_ids[m] << "," << report.step_counts[s] << ","
         << report.estimates[m][s] << "\n";
  for (std::size_t s = 0; s < report.step_counts.size(); ++s)
    os << "median," << report.step_counts[s] << "," << report.median[s] << "\n";
  for (std::size_t s = 0; s < report.step_counts.size(); ++s)
    os << "p95," << report.step_counts[s] << "," << report.p95[s] << "\n";
  return os.str();
}

HeatmapGrid heatmap(const EmbedFn& f, const Conformation& conf, Index atom, const Vec3& axis_u,
                    const Vec3& axis_v, Real range, Index resolution) {
  validate(conf);
  if (atom < 0 || atom >= conf.num_atoms())
    throw std::invalid_argument("heatmap: atom index out of range");
  if (std::abs(axis_u.norm() - 1.0) > 1e-8 || std::abs(axis_v.norm() - 1.0) > 1e-8 ||
      std::abs(axis_u.dot(axis_v)) > 1e-8)
    throw std::invalid_argument("heatmap: axes must be orthonormal");
  if (resolution < 2 || range <= 0.0) throw std::invalid_argument("heatmap: bad grid");

  const Index n = conf.num_atoms();
  FlatFn flat{Shape::matrix(n, 3), f.build};

  auto embed_at = [&](const Coords& coords) {
    Recording rec(flat, flatten_coords(coords));
    return Vec(rec.output());
  };
  const Vec base = embed_at(conf.coords);

  HeatmapGrid grid;
  grid.atom = atom;
  grid.axis_u = axis_u;
  grid.axis_v = axis_v;
  grid.range = range;
  grid.resolution = resolution;
  grid.values.resize(resolution, resolution);
  for (Index i = 0; i < resolution; ++i) {
    const Real du = -range + 2.0 * range * static_cast<Real>(i) / static_cast<Real>(resolution - 1);
    for (Index j = 0; j < resolution; ++j) {
      const Real dv =
          -range + 2.0 * range * static_cast<Real>(j) / static_cast<Real>(resolution - 1);
      Coords moved = conf.coords;
      moved.row(atom) += du * axis_u.transpose() + dv * axis_v.transpose();
      grid.values(i, j) = (embed_at(moved) - base).norm();
    }
  }
  return grid;
}

std::string to_csv(const HeatmapGrid& grid) {
  std::ostringstream os;
  os << "du,dv,delta_norm\n";
  os.precision(17);
  for (Index i = 0; i < grid.resolution; ++i) {
    const Real du = -grid.range +
                    2.0 * grid.range * static_cast<Real>(i) / static_cast<Real>(grid.resolution - 1);
    for (Index j = 0; j < grid.resolution; ++j) {
      const Real dv = -grid.range + 2.0 * grid.range * static_cast<Real>(j) /
                                        static_cast<Real>(grid.resolution - 1);
      os << du << "," << dv << "," << grid.values(i, j) << "\n";
    }
  }
  return os.str();
}

NoiseRobustnessReport noise_robustness_check(const Vec& w, Real bound_b, const EmbedFn& f,
                                             Real lipschitz_estimate, const Conformation& conf,
                                             Real sigma, int trials, std::uint64_t seed) {
  validate(conf);
  if (trials < 1) throw std::invalid_argument("noise_robustness_check: trials must be >= 1");
  if (w.size() != f.output_dim)
    throw std::invalid_argument("noise_robustness_check: probe width mismatch");

  const Index n = conf.num_atoms();
  FlatFn flat{Shape::matrix(n, 3), f.build};
  const Real base = w.dot(Recording(flat, flatten_coords(conf.coords)).output());

  NoiseRobustnessReport report;
  report.trials = trials;
  Rng rng(seed);
  Real sum_delta = 0.0;
  for (int trial = 0; trial < trials; ++trial) {
    Vec eps = rng.gaussian_vec(3 * n, sigma);
    Recording rec(flat, flatten_coords(conf.coords) + eps);
    const Real delta = std::abs(w.dot(rec.output()) - base);
    const Real bound = bound_b * lipschitz_estimate * eps.norm();
    sum_delta += delta;
    report.max_delta = std::max(report.max_delta, delta);
    if (bound > 0.0) report.max_ratio = std::max(report.max_ratio, delta / bound);
    if (delta > bound) ++report.violations;
  }
  report.mean_delta = sum_delta / static_cast<Real>(trials);
  return report;
}

namespace {

// One live tape (replayed as parameters move) and one tape pinned at theta0
// for the parameter-space tangent sweeps of the linearized predictor.
struct NtkSample {
  Tape tape;
  BoundParams bound;
  Value pred;
  Tape tape0;
  BoundParams bound0;
  Value pred0;
  Real label = 0.0;
};

}  // namespace

LinearizationReport ntk_check(const Checkpoint& start, const Corpus& corpus,
                              const std::vector<std::size_t>& sample_idx, const NtkConfig& cfg) {
  validate(corpus);
  if (cfg.n_steps < 1) throw std::invalid_argument("ntk_check: n_steps must be >= 1");
  if (sample_idx.empty()) throw std::invalid_argument("ntk_check: no samples");
  if (!corpus.has_labels()) throw std::invalid_argument("ntk_check: corpus has no labels");

  // theta0: encoder blocks plus a fresh scalar head
  ParamSet params;
  for (const auto& [name, m] : start.params.blocks)
    if (name.rfind("rec.", 0) != 0 && name.rfind("head.", 0) != 0 && name.rfind("probe.", 0) != 0)
      params.add(name, m);
  add_scalar_head_params(params, start.encoder, cfg.head_seed);

  // standardized labels keep the quadratic loss well scaled
  Real mean = 0.0;
  for (std::size_t i : sample_idx) mean += corpus.labels[i];
  mean /= static_cast<Real>(sample_idx.size());
  Real var = 0.0;
  for (std::size_t i : sample_idx) {
    const Real d = corpus.labels[i] - mean;
    var += d * d;
  }
  Real scale = std::sqrt(var / static_cast<Real>(sample_idx.size()));
  if (scale < 1e-12) scale = 1.0;

  // one recorded tape per sample at theta0; replayed as parameters move
  std::vector<std::unique_ptr<NtkSample>> samples;
  for (std::size_t i : sample_idx) {
    auto s = std::make_unique<NtkSample>();
    const Conformation& mol = corpus.molecules[i];
    s->bound = bind_params(s->tape, params, true);
    Value coords = s->tape.leaf(Shape::matrix(mol.num_atoms(), 3),
                                ad::flatten_rowmajor(mol.coords), false);
    EncoderOut enc = encode(s->tape, coords, mol.atomic_numbers, s->bound, start.encoder);
    s->pred = scalar_head(s->tape, pool(s->tape, enc.scalars), s->bound);
    s->bound0 = bind_params(s->tape0, params, true);
    Value coords0 = s->tape0.leaf(Shape::matrix(mol.num_atoms(), 3),
                                  ad::flatten_rowmajor(mol.coords), false);
    EncoderOut enc0 = encode(s->tape0, coords0, mol.atomic_numbers, s->bound0, start.encoder);
    s->pred0 = scalar_head(s->tape0, pool(s->tape0, enc0.scalars), s->bound0);
    s->label = (corpus.labels[i] - mean) / scale;
    samples.push_back(std::move(s));
  }

  const std::size_t n = samples.size();
  Vec f0(n);
  for (std::size_t i = 0; i < n; ++i) f0[static_cast<Index>(i)] = samples[i]->pred.scalar();

  std::vector<Mat> theta = [&] {
    std::vector<Mat> t;
    for (const auto& [name, m] : params.blocks) t.push_back(m);
    return t;
  }();
  const std::vector<Mat> theta0 = theta;

  auto write_params = [&](NtkSample& s) {
    for (std::size_t k = 0; k < theta.size(); ++k)
      s.tape.set_value(s.bound.leaves[k], ad::flatten_rowmajor(theta[k]));
    s.tape.replay();
  };

  auto flatten_all = [](const std::vector<Mat>& blocks) {
    Index total = 0;
    for (const Mat& m : blocks) total += m.size();
    Vec out(total);
    Index at = 0;
    for (const Mat& m : blocks) {
      out.segment(at, m.size()) = ad::flatten_rowmajor(m);
      at += m.size();
    }
    return out;
  };

  LinearizationReport report;
  std::vector<Real> cosines;   // per step
  std::vector<Real> aligns;    // per step (from step 2 on)
  Vec prev_grad;

  for (Index step = 1; step <= cfg.n_steps; ++step) {
    // mean-squared-error gradient over the sample batch
    std::vector<Mat> grads;
    for (const auto& [name, m] : params.blocks) grads.push_back(Mat::Zero(m.rows(), m.cols()));
    Vec f_full(n);
    for (std::size_t i = 0; i < n; ++i) {
      NtkSample& s = *samples[i];
      const Real pred = s.pred.scalar();
      f_full[static_cast<Index>(i)] = pred;
      Vec cot(1);
      cot[0] = 2.0 * (pred - s.label) / static_cast<Real>(n);
      s.tape.backward_with_cotangent(s.pred, cot);
      for (std::size_t k = 0; k < grads.size(); ++k) {
        if (!s.tape.has_grad(s.bound.leaves[k])) continue;
        const Mat& block = params.blocks[k].second;
        grads[k] += ad::unflatten_rowmajor(s.tape.grad(s.bound.leaves[k]), block.rows(),
                                           block.cols());
      }
    }
    const Vec flat_grad = flatten_all(grads);
    if (!flat_grad.allFinite()) {
      report.diverged = true;
      break;
    }
    if (prev_grad.size() > 0) {
      const Real denom = flat_grad.norm() * prev_grad.norm();
      aligns.push_back(denom > 0.0 ? flat_grad.dot(prev_grad) / denom : 1.0);
    }
    prev_grad = flat_grad;

    for (std::size_t k = 0; k < theta.size(); ++k) theta[k] -= cfg.lr * grads[k];

    // full predictions at the new parameters (replay) and linearized
    // predictions via parameter-space tangent sweeps on the theta0 tape
    Vec f_new(n), f_lin(n);
    for (std::size_t i = 0; i < n; ++i) {
      NtkSample& s = *samples[i];
      write_params(s);
      f_new[static_cast<Index>(i)] = s.pred.scalar();
      std::vector<std::pair<Value, Vec>> seeds;
      for (std::size_t k = 0; k < theta.size(); ++k)
        seeds.emplace_back(s.bound0.leaves[k],
                           ad::flatten_rowmajor(Mat(theta[k] - theta0[k])));
      s.tape0.forward_tangent_multi(seeds);
      f_lin[static_cast<Index>(i)] =
          f0[static_cast<Index>(i)] + s.tape0.tangent(s.pred0)[0];
    }

    const Vec d_full = f_new - f0;
    const Vec d_lin = f_lin - f0;
    const Real denom = d_full.norm() * d_lin.norm();
    cosines.push_back(denom > 0.0 ? d_full.dot(d_lin) / denom : 1.0);
  }

  for (Index begin = 0; begin < static_cast<Index>(cosines.size()); begin += cfg.range_len) {
    const Index end = std::min<Index>(begin + cfg.range_len, static_cast<Index>(cosines.size()));
    LinearizationRow row;
    row.range_begin = begin;
    row.range_end = end;
    Real c = 0.0;
    for (Index s = begin; s < end; ++s) c += cosines[static_cast<std::size_t>(s)];
    row.pred_cosine = c / static_cast<Real>(end - begin);
    Real a = 0.0;
    Index a_count = 0;
    for (Index s = std::max<Index>(begin, 1); s < end; ++s) {
      a += aligns[static_cast<std::size_t>(s - 1)];
      ++a_count;
    }
    row.grad_alignment = a_count > 0 ? a / static_cast<Real>(a_count) : 1.0;
    report.rows.push_back(row);
  }
  return report;
}

std::string to_csv(const LinearizationReport& report) {
  std::ostringstream os;
  os << "step_range,pred_cosine,grad_alignment\n";
  os.precision(17);
  os << "0-0," << report.step0_cosine << ",1\n";
  for (const LinearizationRow& row : report.rows)
    os << row.range_begin << "-" << row.range_end << "," << row.pred_cosine << ","
       << row.grad_alignment << "\n";
  return os.str();
}

}  // namespace georecon
