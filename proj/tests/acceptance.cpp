// Acceptance suite: one pass/fail line per criterion. Exit code is the
// number of failed criteria. Usage: acceptance <path-to-cli> [workdir]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/SVD>

#include "georecon/checkpoint.hpp"
#include "georecon/io.hpp"
#include "georecon/probes.hpp"
#include "georecon/rng.hpp"
#include "georecon/training.hpp"
#include "oracles.hpp"

using namespace georecon;
using ad::Shape;
using ad::Tape;
using ad::Value;

namespace {

namespace fs = std::filesystem;

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing artifact " + path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream is(line);
    std::string cell;
    while (std::getline(is, cell, ',')) cells.push_back(cell);
    if (!cells.empty()) rows.push_back(std::move(cells));
  }
  return rows;
}

EncoderConfig desk_encoder() {
  EncoderConfig cfg;
  cfg.num_layers = 3;
  cfg.hidden_dim = 24;
  cfg.num_rbf = 12;
  cfg.max_z = 10;
  cfg.cutoff = 5.0;
  return cfg;
}

// ---------------------------------------------------------------------------

bool criterion_equivariance(std::ostream& os) {
  const auto t0 = std::chrono::steady_clock::now();
  Corpus corpus = synth_corpus(13, 50, 4, 10);
  EncoderConfig cfg = desk_encoder();
  ParamSet params = init_encoder_params(cfg, 41);

  Rng rng(4100);
  Real worst_g = 0.0, worst_eps = 0.0;
  for (const Conformation& conf : corpus.molecules) {
    Tape t;
    BoundParams bound = bind_params(t, params, false);
    Value coords = t.leaf(Shape::matrix(conf.num_atoms(), 3),
                          ad::flatten_rowmajor(conf.coords), false);
    EncoderOut enc = encode(t, coords, conf.atomic_numbers, bound, cfg);
    const Vec g0 = pool(t, enc.scalars).data();
    const Mat eps0 = ad::unflatten_rowmajor(denoise_head(t, enc, bound).data(),
                                            conf.num_atoms(), 3);
    for (int motion = 0; motion < 20; ++motion) {
      const Mat3 rot = oracles::random_rotation(rng);
      const Vec3 shift(rng.gaussian(), rng.gaussian(), rng.gaussian());
      Tape tm;
      BoundParams bm = bind_params(tm, params, false);
      Coords moved = (conf.coords * rot.transpose()).rowwise() + shift.transpose();
      Value mc = tm.leaf(Shape::matrix(conf.num_atoms(), 3), ad::flatten_rowmajor(moved), false);
      EncoderOut em = encode(tm, mc, conf.atomic_numbers, bm, cfg);
      const Vec g1 = pool(tm, em.scalars).data();
      const Mat eps1 = ad::unflatten_rowmajor(denoise_head(tm, em, bm).data(),
                                              conf.num_atoms(), 3);
      worst_g = std::max(worst_g, (g1 - g0).norm() / g0.norm());
      const Mat expected = eps0 * rot.transpose();
      worst_eps = std::max(worst_eps, (eps1 - expected).norm() / expected.norm());
    }
  }
  const double elapsed = seconds_since(t0);
  os << "worst g rel err " << worst_g << ", worst eps rel err " << worst_eps << ", " << elapsed
     << " s";
  return worst_g <= 1e-5 && worst_eps <= 1e-5 && elapsed < 30.0;
}

bool criterion_gradients(std::ostream& os) {
  Real worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    EncoderConfig cfg;
    cfg.num_layers = 2;
    cfg.hidden_dim = 16;
    cfg.num_rbf = 4;
    cfg.max_z = 10;
    DecoderConfig dec;
    dec.depth = 2;
    dec.width = 8;
    ParamSet params = init_encoder_params(cfg, seed);
    add_decoder_params(params, cfg, dec, seed);

    Rng rng(900 + seed);
    const Index n = 4 + static_cast<Index>(rng.uniform_int(3));  // N <= 6
    Conformation conf;
    conf.coords = oracles::random_coords(rng, n, 1.2);
    for (Index i = 0; i < n; ++i)
      conf.atomic_numbers.push_back(i % 3 == 0 ? 1 : (i % 3 == 1 ? 6 : 8));
    const NoiseTriple triple = sample_noise_triple(conf, 0.04, 1.5, 77 + seed);

    std::vector<ad::ParamSpec> specs;
    for (const auto& [name, m] : params.blocks)
      specs.push_back({name,
                       m.cols() == 1 && m.rows() != 1 ? Shape::vector(m.rows())
                                                      : Shape::matrix(m.rows(), m.cols()),
                       ad::flatten_rowmajor(m)});
    auto loss_fn = [&](Tape& t, const std::vector<Value>& leaves) {
      BoundParams bound{&params, leaves};
      Value cv = t.leaf(Shape::matrix(n, 3), ad::flatten_rowmajor(triple.clean), false);
      Value nv = t.leaf(Shape::matrix(n, 3), ad::flatten_rowmajor(triple.noised), false);
      Value rv = t.leaf(Shape::matrix(n, 3), ad::flatten_rowmajor(triple.rec), false);
      EncoderOut enc_n = encode(t, nv, conf.atomic_numbers, bound, cfg);
      EncoderOut enc_c = encode(t, cv, conf.atomic_numbers, bound, cfg);
      EncoderOut enc_r = encode(t, rv, conf.atomic_numbers, bound, cfg);
      Value g = pool(t, enc_c.scalars);
      Value total = loss_nsd(t, denoise_head(t, enc_n, bound), triple.epsilon);
      total = t.add(total, t.scale(loss_cln(t, denoise_head(t, enc_c, bound)), 0.1));
      total = t.add(
          total, t.scale(loss_rec(t, recon_decode(t, g, enc_r, bound, dec), triple.epsilon, 1.5),
                         0.45));
      return total;
    };
    const ad::GradCheckReport report = ad::check_gradients(loss_fn, specs, 1e-4);
    for (const auto& entry : report.entries) worst = std::max(worst, entry.max_rel_err);
    if (!report.pass) {
      os << "seed " << seed << " failed, worst block rel err " << worst;
      return false;
    }
  }
  os << "20 seeds, worst block rel err " << worst;
  return true;
}

bool criterion_procrustes(std::ostream& os) {
  Rng rng(333);
  Real worst_gap = 0.0;
  for (int pair = 0; pair < 20; ++pair) {
    const Index n = 4 + static_cast<Index>(rng.uniform_int(5));
    const Coords x = oracles::random_coords(rng, n);
    const Coords y = oracles::random_coords(rng, n);
    const Real kd = procrustes_distance(x, y);
    const Real brute = oracles::brute_force_min_distance(x, y, 10000, 5000 + pair);
    worst_gap = std::max(worst_gap, std::abs(kd - brute));
  }

  int violations = 0;
  const Coords base = oracles::random_coords(rng, 6);
  for (int trial = 0; trial < 1000; ++trial) {
    Coords eps(6, 3);
    for (Index i = 0; i < 6; ++i)
      for (int a = 0; a < 3; ++a) eps(i, a) = 0.3 * rng.gaussian();
    if (procrustes_distance(base, base + eps) > eps.norm()) ++violations;
  }
  os << "worst |kabsch - sampled min| " << worst_gap << ", contraction violations " << violations
     << "/1000";
  return worst_gap <= 1e-3 && violations == 0;
}

bool criterion_lipschitz_oracle(std::ostream& os) {
  Rng rng(444);
  Real worst = 0.0;
  bool monotonic = true;
  for (int trial = 0; trial < 50; ++trial) {
    Conformation conf;
    conf.atomic_numbers = {1, 6, 8, 6};
    conf.coords = oracles::random_coords(rng, 4);
    const RigidProjector proj = rigid_basis(conf);

    Mat a = rng.gaussian_mat(16, 12);
    {
      // a decisive top gap inside the non-rigid subspace keeps the power
      // method well within its budget; degenerate spectra are out of scope
      Eigen::JacobiSVD<Mat> svd(a);
      Vec u = rng.gaussian_vec(16);
      u.normalize();
      Vec v = project_nonrigid(proj, rng.gaussian_vec(12));
      v.normalize();
      a += 1.5 * svd.singularValues()[0] * u * v.transpose();
    }
    EmbedFn f;
    f.output_dim = 16;
    f.build = [&a](Tape& t, Value coords) {
      Value av = t.constant(Shape::matrix(16, 12), ad::flatten_rowmajor(a));
      return t.matmul(av, t.reshape(coords, Shape::vector(12)));
    };
    const std::vector<Real> traj = lipschitz_rayleigh_trajectory(f, conf, 25, 6000 + trial);
    for (std::size_t k = 1; k < traj.size(); ++k)
      if (traj[k] < traj[k - 1] * (1.0 - 1e-10)) monotonic = false;
    const Real estimate = std::sqrt(traj.back());

    const Mat p = Mat::Identity(12, 12) - proj.basis * proj.basis.transpose();
    Eigen::JacobiSVD<Mat> svd(Mat(a * p));
    const Real truth = svd.singularValues()[0];
    worst = std::max(worst, std::abs(estimate - truth) / truth);
  }
  os << "50 maps, worst rel err " << worst << ", rayleigh monotone " << (monotonic ? "yes" : "NO");
  return worst <= 1e-3 && monotonic;
}

bool criterion_score_matching(std::ostream& os) {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(77);
  ScoreOracle oracle;
  oracle.sigma = 0.25;
  for (int c = 0; c < 2; ++c) {
    Coords center(5, 3);
    for (Index i = 0; i < 5; ++i)
      for (int a = 0; a < 3; ++a) center(i, a) = 1.2 * rng.gaussian();
    oracle.centers.push_back(center);
  }
  ScoreEquivalenceConfig cfg;
  cfg.seed = 9;
  const ScoreEquivalenceResult res = run_score_equivalence(oracle, cfg);
  const double elapsed = seconds_since(t0);
  os << "mean cosine " << res.mean_cosine << " over " << res.per_sample_cosine.size()
     << " held-out draws, " << elapsed << " s";
  return res.mean_cosine >= 0.9 && elapsed < 300.0;
}

bool criterion_smoothness(std::ostream& os) {
  Corpus corpus = synth_corpus(7, 256, 7, 9, {6});
  for (std::size_t i = 0; i < corpus.size(); ++i)
    corpus.splits[i] = i < 192 ? Split::kTrain : Split::kVal;

  RunConfig cfg;
  cfg.seed = 5;
  cfg.batch_size = 8;
  cfg.total_steps = 2000;
  cfg.lambda = 1.0;
  cfg.encoder = desk_encoder();
  cfg.decoder.depth = 2;
  cfg.decoder.width = 24;
  cfg.schedule.peak_lr = 5e-3;
  cfg.schedule.warmup_steps = 100;
  cfg.schedule.cosine_length = 2000;

  PretrainResult geo = pretrain(cfg, corpus);  // weights (1, 0.45, 0.1)
  RunConfig coord_cfg = cfg;
  coord_cfg.weights = LossWeights{1.0, 0.0, 0.0};
  PretrainResult coord = pretrain(coord_cfg, corpus);

  Corpus eval_set;
  for (std::size_t i : corpus.indices(Split::kVal))
    eval_set.molecules.push_back(corpus.molecules[i]);

  Real medians[2] = {0.0, 0.0};
  int which = 0;
  for (const Checkpoint* ckpt : {&geo.checkpoint, &coord.checkpoint}) {
    EmbedFactory factory = [&](const std::vector<int>& z) {
      return pooled_embed_fn(ckpt->params, ckpt->encoder, z);
    };
    const LipschitzReport report = lipschitz_report(factory, eval_set, {5, 15, 25}, 42);
    medians[which++] = report.median[1];  // steps = 15
  }
  os << "median L at 15 steps: reconstruction-pretrained " << medians[0]
     << " vs denoise-only " << medians[1] << " (ratio " << medians[0] / medians[1]
     << "; full-scale reference medians 3.071e1 vs 2.539e4, not asserted)";
  return medians[0] <= medians[1];
}

bool criterion_linear_probe(std::ostream& os) {
  Corpus big = synth_corpus(7, 128, 7, 9, {6});
  Corpus probe_corpus = synth_corpus(99, 200, 7, 9, {6});

  RunConfig cfg;
  cfg.seed = 3;
  cfg.batch_size = 4;
  cfg.total_steps = 2500;
  cfg.lambda = 1.5;
  cfg.encoder = desk_encoder();
  cfg.decoder.depth = 2;
  cfg.decoder.width = 24;
  cfg.schedule.peak_lr = 5e-3;
  cfg.schedule.warmup_steps = 100;
  cfg.schedule.cosine_length = 2500;
  const PretrainResult geo = pretrain(cfg, big);

  bool all = true;
  std::ostringstream detail;
  for (std::uint64_t seed : {21ull, 22ull, 23ull}) {
    RunConfig pcfg = cfg;
    pcfg.seed = seed;
    pcfg.epochs = 40;
    pcfg.batch_size = 8;
    pcfg.schedule.peak_lr = 1e-2;
    pcfg.schedule.warmup_steps = 10;
    pcfg.schedule.cosine_length = 40 * 20;
    Checkpoint random_init;
    random_init.encoder = cfg.encoder;
    random_init.decoder = cfg.decoder;
    random_init.params = init_encoder_params(cfg.encoder, 3000 + seed);
    const LinearProbeResult from_random = linear_probe(pcfg, random_init, probe_corpus);
    const LinearProbeResult from_geo = linear_probe(pcfg, geo.checkpoint, probe_corpus);
    detail << " seed " << seed << ": " << from_geo.log.back().mae << " vs "
           << from_random.log.back().mae << ";";
    all = all && from_geo.log.back().mae < from_random.log.back().mae;
  }
  os << "pretrained vs random-init probe MAE --" << detail.str();
  return all;
}

bool criterion_ntk(std::ostream& os) {
  Corpus corpus = synth_corpus(31, 16, 4, 6);
  Checkpoint start;
  start.encoder.num_layers = 2;
  start.encoder.hidden_dim = 16;
  start.encoder.num_rbf = 8;
  start.encoder.max_z = 10;
  start.params = init_encoder_params(start.encoder, 21);

  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < corpus.size(); ++i) idx.push_back(i);
  NtkConfig cfg;
  cfg.n_steps = 100;
  cfg.lr = 1e-4;
  cfg.range_len = 100;
  cfg.head_seed = 5;
  const LinearizationReport report = ntk_check(start, corpus, idx, cfg);
  os << "step-0 cosine " << report.step0_cosine << ", range 0-100 cosine "
     << report.rows[0].pred_cosine
     << " (full-scale reference 0.98/0.90/0.87 with alignment 1.000/0.927/0.921, not asserted)";
  return report.step0_cosine == 1.0 && !report.rows.empty() &&
         report.rows[0].pred_cosine >= 0.85 && !report.diverged;
}

bool criterion_schedule(std::ostream& os) {
  ScheduleConfig sched;
  sched.peak_lr = 4e-4;
  sched.lr_min = 1e-7;
  sched.warmup_steps = 10000;
  sched.cosine_length = 100000;
  if (lr_at(sched.warmup_steps, sched) != 4e-4 || lr_at(sched.cosine_length, sched) != 1e-7) {
    os << "anchor mismatch";
    return false;
  }
  Rng rng(5);
  Real worst = 0.0;
  for (int draw = 0; draw < 1000; ++draw) {
    const Index step = static_cast<Index>(rng.uniform_int(140000));
    Real expected;
    if (step < sched.warmup_steps)
      expected = 1e-7 + (4e-4 - 1e-7) * static_cast<Real>(step) / 10000.0;
    else if (step <= sched.cosine_length)
      expected = 1e-7 + (4e-4 - 1e-7) * 0.5 *
                            (1.0 + std::cos(M_PI * static_cast<Real>(step - 10000) / 90000.0));
    else
      expected = 1e-7;
    worst = std::max(worst, std::abs(lr_at(step, sched) - expected));
  }
  os << "anchors exact, worst closed-form deviation " << worst;
  return worst <= 1e-12;
}

std::string g_cli_path;
fs::path g_workdir;

int run_cli(const std::string& args, const std::string& log_name) {
  const std::string log = (g_workdir / log_name).string();
  const std::string cmd = "\"" + g_cli_path + "\" " + args + " >> \"" + log + "\" 2>&1";
  return std::system(cmd.c_str());
}

bool criterion_smoke(std::ostream& os) {
  if (g_cli_path.empty()) {
    os << "cli path not provided";
    return false;
  }
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path dir = g_workdir / "smoke";
  fs::remove_all(dir);
  fs::create_directories(dir);

  const std::string cfg_path = (dir / "base.cfg").string();
  write_text_file(cfg_path,
                  "seed = 11\n"
                  "batch_size = 8\n"
                  "total_steps = 200\n"
                  "epochs = 8\n"
                  "position_noise_scale = 0.04\n"
                  "lambda = 1.0\n"
                  "loss_weight_nsd = 1\n"
                  "loss_weight_rec = 0.45\n"
                  "loss_weight_cln = 0.1\n"
                  "lr = 0.005\n"
                  "lr_min = 1e-7\n"
                  "lr_warmup_steps = 20\n"
                  "lr_cosine_length = 200\n"
                  "num_layers = 3\n"
                  "embedding_dimension = 24\n"
                  "num_rbf = 12\n"
                  "cutoff_upper = 5\n"
                  "max_z = 10\n"
                  "decoder_depth = 2\n"
                  "decoder_width = 24\n"
                  "dataset = " + (dir / "corpus.xyz").string() + "\n"
                  "target = energy\n");

  const std::string corpus = (dir / "corpus.xyz").string();
  if (run_cli("synth --seed 7 --out \"" + corpus + "\" --n 256 --min-atoms 4 --max-atoms 8",
              "smoke.log") != 0) {
    os << "synth failed";
    return false;
  }
  if (run_cli("pretrain --config \"" + cfg_path + "\" --out \"" + (dir / "run").string() + "\"",
              "smoke.log") != 0) {
    os << "pretrain failed";
    return false;
  }
  if (run_cli("probe-lipschitz --config \"" + cfg_path + "\" --checkpoint \"" +
                  (dir / "run/final.ckpt").string() + "\" --data \"" + corpus +
                  "\" --split val --steps 5,15,25 --out \"" + (dir / "lip").string() + "\"",
              "smoke.log") != 0) {
    os << "probe-lipschitz failed";
    return false;
  }
  if (run_cli("probe-heatmap --config \"" + cfg_path + "\" --checkpoint \"" +
                  (dir / "run/final.ckpt").string() + "\" --data \"" + corpus +
                  "\" --molecule 0 --atom 0 --resolution 21 --out \"" + (dir / "heat").string() +
                  "\"",
              "smoke.log") != 0) {
    os << "probe-heatmap failed";
    return false;
  }
  if (run_cli("finetune --config \"" + cfg_path + "\" --checkpoint \"" +
                  (dir / "run/final.ckpt").string() + "\" --out \"" + (dir / "ft").string() +
                  "\"",
              "smoke.log") != 0) {
    os << "finetune failed";
    return false;
  }

  // loss-descent property: mean of steps 190-200 <= 0.7 x mean of steps 1-10
  const auto loss = read_csv((dir / "run/loss.csv").string());
  if (loss.size() != 201) {
    os << "loss log has " << loss.size() - 1 << " rows, expected 200";
    return false;
  }
  Real early = 0.0, late = 0.0;
  for (int i = 1; i <= 10; ++i) early += std::stod(loss[static_cast<std::size_t>(i)][5]);
  for (int i = 191; i <= 200; ++i) late += std::stod(loss[static_cast<std::size_t>(i)][5]);
  early /= 10.0;
  late /= 10.0;

  // heatmap center cell exactly zero
  bool center_zero = false;
  for (const auto& row : read_csv((dir / "heat/heatmap.csv").string())) {
    if (row.size() != 3 || row[0] == "du") continue;
    if (std::stod(row[0]) == 0.0 && std::stod(row[1]) == 0.0)
      center_zero = std::stod(row[2]) == 0.0;
  }

  const bool artifacts = fs::exists(dir / "run/final.ckpt") && fs::exists(dir / "ft/mae.csv") &&
                         fs::exists(dir / "lip/lipschitz.csv");
  const double elapsed = seconds_since(t0);
  os << "descent " << late << " vs 0.7x" << early << ", heatmap center "
     << (center_zero ? "exactly zero" : "NONZERO") << ", " << elapsed << " s";
  return late <= 0.7 * early && center_zero && artifacts && elapsed < 600.0;
}

bool criterion_ablation(std::ostream& os) {
  Corpus corpus = synth_corpus(3, 32, 4, 6);
  RunConfig cfg;
  cfg.seed = 2;
  cfg.batch_size = 4;
  cfg.total_steps = 60;
  cfg.epochs = 2;
  cfg.encoder.num_layers = 2;
  cfg.encoder.hidden_dim = 16;
  cfg.encoder.num_rbf = 8;
  cfg.encoder.max_z = 10;
  cfg.decoder.depth = 3;
  cfg.decoder.width = 16;
  cfg.schedule.peak_lr = 5e-3;
  cfg.schedule.warmup_steps = 10;
  cfg.schedule.cosine_length = 60;

  AblationAxes depth_grid;
  depth_grid.lambdas = {1.0, 1.5};
  depth_grid.decoder_depths = {3, 4, 5};
  const std::vector<AblationCell> six = ablation_grid(cfg, depth_grid, corpus);

  AblationAxes rec_grid;
  rec_grid.rec_weights = {0.40, 0.45, 0.50};
  const std::vector<AblationCell> three = ablation_grid(cfg, rec_grid, corpus);

  AblationAxes rec_only;
  rec_only.cln_weights = {0.0};
  const std::vector<AblationCell> one = ablation_grid(cfg, rec_only, corpus);

  bool finite = true;
  std::ostringstream detail;
  detail << "lambda x depth MAEs:";
  for (const AblationCell& c : six) {
    finite = finite && std::isfinite(c.final_loss_total) && std::isfinite(c.finetune_mae);
    detail << " " << c.finetune_mae;
  }
  detail << " | w_rec MAEs:";
  for (const AblationCell& c : three) {
    finite = finite && std::isfinite(c.finetune_mae);
    detail << " " << c.finetune_mae;
  }
  detail << " | clean-off MAE: " << one[0].finetune_mae << " (orderings reported, not asserted)";
  os << detail.str();
  return six.size() == 6 && three.size() == 3 && one.size() == 1 && one[0].w_cln == 0.0 && finite;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc > 1) g_cli_path = argv[1];
  g_workdir = argc > 2 ? fs::path(argv[2]) : fs::temp_directory_path() / "georecon_acceptance";
  fs::create_directories(g_workdir);

  struct Criterion {
    int id;
    const char* title;
    std::function<bool(std::ostream&)> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "equivariance suite (invariant g, equivariant noise prediction)", criterion_equivariance},
      {2, "gradient oracle (full model vs central differences, 20 seeds)", criterion_gradients},
      {3, "procrustes oracle (sampled-rotation minimum, contraction bound)", criterion_procrustes},
      {4, "lipschitz estimator oracle (linear maps vs dense SVD)", criterion_lipschitz_oracle},
      {5, "score-matching equivalence (denoiser vs analytic mixture score)", criterion_score_matching},
      {6, "smoothness direction (reconstruction-pretrained vs denoise-only)", criterion_smoothness},
      {7, "linear probing direction (pretrained vs random-init, 3 seeds)", criterion_linear_probe},
      {8, "linearized-dynamics sanity (step-0 exact, early range >= 0.85)", criterion_ntk},
      {9, "schedule exactness (closed form and published anchors)", criterion_schedule},
      {10, "end-to-end smoke (synth, pretrain, probes, finetune via CLI)", criterion_smoke},
      {11, "ablation grid plumbing (lambda x depth, w_rec sweep, clean-off)", criterion_ablation},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    std::ostringstream detail;
    bool ok = false;
    try {
      ok = c.run(detail);
    } catch (const std::exception& e) {
      detail << "exception: " << e.what();
    }
    if (!ok) ++failures;
    std::printf("%s [%2d] %s -- %s\n", ok ? "PASS" : "FAIL", c.id, c.title, detail.str().c_str());
    std::fflush(stdout);
  }
  return failures;
}
