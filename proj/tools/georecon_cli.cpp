// Command-line driver for corpus synthesis, pretraining, finetuning, and the
// measurement probes. Artifacts are CSV/JSON files under --out.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "georecon/checkpoint.hpp"
#include "georecon/io.hpp"
#include "georecon/probes.hpp"
#include "georecon/rng.hpp"
#include "georecon/training.hpp"

namespace fs = std::filesystem;
using namespace georecon;

namespace {

Vec3 parse_axis(const std::string& text) {
  Vec3 axis;
  std::istringstream is(text);
  std::string tok;
  int i = 0;
  while (std::getline(is, tok, ',') && i < 3) axis[i++] = std::stod(tok);
  if (i != 3) throw std::invalid_argument("axis must be 'x,y,z', got '" + text + "'");
  return axis;
}

std::vector<int> parse_species(const std::string& text) {
  std::vector<int> out;
  std::istringstream is(text);
  std::string tok;
  while (std::getline(is, tok, ',')) out.push_back(atomic_number_of(tok));
  return out;
}

std::vector<int> parse_step_counts(const std::string& text) {
  std::vector<int> out;
  std::istringstream is(text);
  std::string tok;
  while (std::getline(is, tok, ',')) out.push_back(std::stoi(tok));
  return out;
}

// "lambda=1.0,1.5;depth=3,4,5;w_rec=0.4,0.45;w_cln=0"
AblationAxes parse_axes(const std::string& text) {
  AblationAxes axes;
  std::istringstream groups(text);
  std::string group;
  while (std::getline(groups, group, ';')) {
    const std::size_t eq = group.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("axes: expected 'name=v1,v2,...', got '" + group + "'");
    const std::string name = group.substr(0, eq);
    std::istringstream vals(group.substr(eq + 1));
    std::string v;
    while (std::getline(vals, v, ',')) {
      if (name == "lambda") axes.lambdas.push_back(std::stod(v));
      else if (name == "depth") axes.decoder_depths.push_back(std::stoi(v));
      else if (name == "w_rec") axes.rec_weights.push_back(std::stod(v));
      else if (name == "w_cln") axes.cln_weights.push_back(std::stod(v));
      else throw std::invalid_argument("axes: unknown axis '" + name + "'");
    }
  }
  return axes;
}

RunConfig load_run_config(const std::string& config_path, std::optional<std::uint64_t> seed) {
  RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
  for (const std::string& w : cfg.warnings) std::cerr << "config warning: " << w << "\n";
  if (seed.has_value()) cfg.seed = *seed;
  return cfg;
}

Corpus load_corpus(const RunConfig& cfg, const std::string& data_flag) {
  const std::string path = data_flag.empty() ? cfg.dataset : data_flag;
  if (path.empty())
    throw std::invalid_argument("no dataset: pass --data or set `dataset` in the config");
  Corpus corpus = corpus_from_xyz(read_text_file(path));
  if (corpus.has_labels() && !cfg.target.empty() && corpus.target_name != cfg.target)
    corpus = select_target(corpus, cfg.target);
  return corpus;
}

void write_manifest(const fs::path& out_dir, const std::string& command,
                    const nlohmann::json& details) {
  nlohmann::json manifest;
  manifest["command"] = command;
  manifest["outputs"] = details;
  write_text_file((out_dir / "run.json").string(), manifest.dump(2) + "\n");
}

Checkpoint checkpoint_or_random(const std::string& path, const RunConfig& cfg) {
  if (!path.empty()) return load_checkpoint(path);
  Checkpoint ckpt;
  ckpt.encoder = cfg.encoder;
  ckpt.decoder = cfg.decoder;
  ckpt.params = init_encoder_params(cfg.encoder, cfg.seed);
  return ckpt;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GeoRecon: graph-conditioned reconstruction pretraining for 3D molecules"};
  app.require_subcommand(1);

  std::string config_path, out_path, data_path, checkpoint_path;
  std::optional<std::uint64_t> seed;

  // synth
  auto* synth = app.add_subcommand("synth", "generate a relaxed toy-potential corpus");
  std::size_t synth_n = 256;
  Index atoms_min = 4, atoms_max = 8;
  std::string species = "H,C,O";
  synth->add_option("--seed", seed, "master seed");
  synth->add_option("--out", out_path, "output corpus (.xyz)")->required();
  synth->add_option("--n", synth_n, "number of molecules");
  synth->add_option("--min-atoms", atoms_min, "smallest molecule");
  synth->add_option("--max-atoms", atoms_max, "largest molecule");
  synth->add_option("--species", species, "comma-separated element symbols");

  // pretrain
  auto* pre = app.add_subcommand("pretrain", "multi-task pretraining run");
  pre->add_option("--config", config_path, "run configuration file")->required();
  pre->add_option("--seed", seed, "seed override");
  pre->add_option("--data", data_path, "corpus .xyz (overrides config dataset)");
  pre->add_option("--out", out_path, "output directory")->required();

  // finetune
  auto* fine = app.add_subcommand("finetune", "supervised finetuning from a checkpoint");
  fine->add_option("--config", config_path, "run configuration file")->required();
  fine->add_option("--checkpoint", checkpoint_path, "starting checkpoint")->required();
  fine->add_option("--seed", seed, "seed override");
  fine->add_option("--data", data_path, "corpus .xyz (overrides config dataset)");
  fine->add_option("--out", out_path, "output directory")->required();

  // probe-lipschitz
  auto* lip = app.add_subcommand("probe-lipschitz", "local Lipschitz constants of the embedding");
  std::string steps_text = "5,15,25";
  std::string split = "all";
  lip->add_option("--config", config_path, "run configuration file");
  lip->add_option("--checkpoint", checkpoint_path, "model checkpoint")->required();
  lip->add_option("--data", data_path, "corpus .xyz")->required();
  lip->add_option("--steps", steps_text, "power-iteration step counts, e.g. 5,15,25");
  lip->add_option("--split", split, "train|val|test|all");
  lip->add_option("--seed", seed, "start-vector seed");
  lip->add_option("--out", out_path, "output directory")->required();

  // probe-heatmap
  auto* heat = app.add_subcommand("probe-heatmap", "perturbation heatmap of one atom");
  Index molecule_idx = 0, atom_idx = 0, resolution = 41;
  Real range = 1.0;
  std::string axis_u = "1,0,0", axis_v = "0,1,0";
  heat->add_option("--config", config_path, "run configuration file");
  heat->add_option("--checkpoint", checkpoint_path, "model checkpoint")->required();
  heat->add_option("--data", data_path, "corpus .xyz")->required();
  heat->add_option("--molecule", molecule_idx, "molecule index in the corpus");
  heat->add_option("--atom", atom_idx, "atom index to displace");
  heat->add_option("--range", range, "displacement half-range in Angstrom");
  heat->add_option("--resolution", resolution, "grid points per axis");
  heat->add_option("--axis-u", axis_u, "first displacement axis 'x,y,z'");
  heat->add_option("--axis-v", axis_v, "second displacement axis 'x,y,z'");
  heat->add_option("--out", out_path, "output directory")->required();

  // probe-linear
  auto* probe = app.add_subcommand("probe-linear", "linear probe on frozen embeddings");
  probe->add_option("--config", config_path, "run configuration file")->required();
  probe->add_option("--checkpoint", checkpoint_path, "checkpoint (omit for random init)");
  probe->add_option("--seed", seed, "seed override");
  probe->add_option("--data", data_path, "corpus .xyz (overrides config dataset)");
  probe->add_option("--out", out_path, "output directory")->required();

  // probe-ntk
  auto* ntk = app.add_subcommand("probe-ntk", "linearized-dynamics sanity check");
  Index ntk_steps = 100, ntk_samples = 12, ntk_range = 100;
  Real ntk_lr = 1e-4;
  ntk->add_option("--config", config_path, "run configuration file");
  ntk->add_option("--checkpoint", checkpoint_path, "checkpoint (omit for random init)");
  ntk->add_option("--data", data_path, "corpus .xyz")->required();
  ntk->add_option("--steps", ntk_steps, "training steps");
  ntk->add_option("--lr", ntk_lr, "full-batch learning rate");
  ntk->add_option("--samples", ntk_samples, "molecules in the batch");
  ntk->add_option("--range-len", ntk_range, "steps per reporting range");
  ntk->add_option("--seed", seed, "head seed");
  ntk->add_option("--out", out_path, "output directory")->required();

  // verify-score
  auto* score = app.add_subcommand("verify-score",
                                   "denoiser vs analytic mixture score agreement");
  Index score_centers = 2, score_atoms = 5, score_steps = 1500;
  Real score_sigma = 0.25;
  score->add_option("--seed", seed, "seed");
  score->add_option("--centers", score_centers, "mixture centers (1..4)");
  score->add_option("--atoms", score_atoms, "atoms per center");
  score->add_option("--sigma", score_sigma, "mixture width");
  score->add_option("--steps", score_steps, "denoiser training steps");
  score->add_option("--out", out_path, "output directory")->required();

  // ablate
  auto* ablate = app.add_subcommand("ablate", "pretrain+finetune over a configuration grid");
  std::string axes_text;
  ablate->add_option("--config", config_path, "run configuration file")->required();
  ablate->add_option("--axes", axes_text, "grid, e.g. 'lambda=1.0,1.5;depth=3,4,5'");
  ablate->add_option("--seed", seed, "seed override");
  ablate->add_option("--data", data_path, "corpus .xyz (overrides config dataset)");
  ablate->add_option("--out", out_path, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << e.what() << "\n\n" << app.help() << std::flush;
    return 1;
  }

  try {
    if (*synth) {
      Corpus corpus = synth_corpus(seed.value_or(0), synth_n, atoms_min, atoms_max,
                                   parse_species(species));
      write_text_file(out_path, write_xyz(corpus));
      std::cout << "wrote " << corpus.size() << " molecules to " << out_path << "\n";
    } else if (*pre) {
      RunConfig cfg = load_run_config(config_path, seed);
      Corpus corpus = load_corpus(cfg, data_path);
      fs::create_directories(out_path);
      PretrainResult result = pretrain(cfg, corpus);
      write_text_file((fs::path(out_path) / "loss.csv").string(), to_csv(result.log));
      save_checkpoint((fs::path(out_path) / "final.ckpt").string(), result.checkpoint);
      write_manifest(out_path, "pretrain",
                     {{"loss", "loss.csv"},
                      {"checkpoint", "final.ckpt"},
                      {"diverged", result.diverged}});
      if (result.diverged) {
        std::cerr << "pretrain diverged at step " << result.divergence_step
                  << "; last good checkpoint written\n";
        return 2;
      }
      std::cout << "final loss_total " << result.log.back().total << "\n";
    } else if (*fine) {
      RunConfig cfg = load_run_config(config_path, seed);
      Corpus corpus = load_corpus(cfg, data_path);
      Checkpoint start = load_checkpoint(checkpoint_path);
      fs::create_directories(out_path);
      FinetuneResult result = finetune(cfg, start, corpus);
      write_text_file((fs::path(out_path) / "mae.csv").string(), to_csv(result.log));
      save_checkpoint((fs::path(out_path) / "final.ckpt").string(), result.checkpoint);
      write_manifest(out_path, "finetune", {{"mae", "mae.csv"}, {"checkpoint", "final.ckpt"}});
      std::cout << "final mae " << result.log.back().mae << "\n";
    } else if (*lip) {
      RunConfig cfg = load_run_config(config_path, seed);
      Corpus corpus = load_corpus(cfg, data_path);
      if (split != "all") {
        Corpus filtered;
        const Split want = split == "train" ? Split::kTrain
                         : split == "val"   ? Split::kVal
                                            : Split::kTest;
        for (std::size_t i : corpus.indices(want))
          filtered.molecules.push_back(corpus.molecules[i]);
        corpus = std::move(filtered);
      }
      Checkpoint ckpt = load_checkpoint(checkpoint_path);
      EmbedFactory factory = [&](const std::vector<int>& z) {
        return pooled_embed_fn(ckpt.params, ckpt.encoder, z);
      };
      LipschitzReport report =
          lipschitz_report(factory, corpus, parse_step_counts(steps_text), seed.value_or(0));
      fs::create_directories(out_path);
      write_text_file((fs::path(out_path) / "lipschitz.csv").string(), to_csv(report));
      write_manifest(out_path, "probe-lipschitz", {{"report", "lipschitz.csv"}});
      for (std::size_t s = 0; s < report.step_counts.size(); ++s)
        std::cout << "steps " << report.step_counts[s] << ": median " << report.median[s]
                  << " p95 " << report.p95[s] << "\n";
    } else if (*heat) {
      RunConfig cfg = load_run_config(config_path, seed);
      Corpus corpus = load_corpus(cfg, data_path);
      if (molecule_idx < 0 || molecule_idx >= static_cast<Index>(corpus.size()))
        throw std::invalid_argument("molecule index out of range");
      Checkpoint ckpt = load_checkpoint(checkpoint_path);
      const Conformation& conf = corpus.molecules[static_cast<std::size_t>(molecule_idx)];
      const EmbedFn f = pooled_embed_fn(ckpt.params, ckpt.encoder, conf.atomic_numbers);
      HeatmapGrid grid =
          heatmap(f, conf, atom_idx, parse_axis(axis_u), parse_axis(axis_v), range, resolution);
      fs::create_directories(out_path);
      write_text_file((fs::path(out_path) / "heatmap.csv").string(), to_csv(grid));
      write_manifest(out_path, "probe-heatmap", {{"grid", "heatmap.csv"}});
      std::cout << "max |delta h| " << grid.values.maxCoeff() << "\n";
    } else if (*probe) {
      RunConfig cfg = load_run_config(config_path, seed);
      Corpus corpus = load_corpus(cfg, data_path);
      Checkpoint start = checkpoint_or_random(checkpoint_path, cfg);
      fs::create_directories(out_path);
      LinearProbeResult result = linear_probe(cfg, start, corpus);
      write_text_file((fs::path(out_path) / "probe.csv").string(), to_csv(result.log));
      write_manifest(out_path, "probe-linear", {{"probe", "probe.csv"}});
      std::cout << "final mae " << result.log.back().mae << " |w| "
                << result.log.back().w_norm << "\n";
    } else if (*ntk) {
      RunConfig cfg = load_run_config(config_path, seed);
      Corpus corpus = load_corpus(cfg, data_path);
      Checkpoint start = checkpoint_or_random(checkpoint_path, cfg);
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < corpus.size() && i < static_cast<std::size_t>(ntk_samples); ++i)
        idx.push_back(i);
      NtkConfig ncfg;
      ncfg.n_steps = ntk_steps;
      ncfg.lr = ntk_lr;
      ncfg.range_len = ntk_range;
      ncfg.head_seed = seed.value_or(0);
      LinearizationReport report = ntk_check(start, corpus, idx, ncfg);
      fs::create_directories(out_path);
      write_text_file((fs::path(out_path) / "ntk.csv").string(), to_csv(report));
      write_manifest(out_path, "probe-ntk", {{"report", "ntk.csv"}});
      for (const LinearizationRow& row : report.rows)
        std::cout << "steps " << row.range_begin << "-" << row.range_end << ": pred cosine "
                  << row.pred_cosine << " grad alignment " << row.grad_alignment << "\n";
      if (report.diverged) {
        std::cerr << "training diverged\n";
        return 2;
      }
    } else if (*score) {
      if (score_centers < 1 || score_centers > 4)
        throw std::invalid_argument("verify-score: centers must be in 1..4");
      Rng rng(derive_seed(seed.value_or(0), 0xCE17E5));
      ScoreOracle oracle;
      oracle.sigma = score_sigma;
      for (Index c = 0; c < score_centers; ++c) {
        Coords center(score_atoms, 3);
        for (Index i = 0; i < score_atoms; ++i)
          for (int a = 0; a < 3; ++a) center(i, a) = 1.2 * rng.gaussian();
        oracle.centers.push_back(center);
      }
      ScoreEquivalenceConfig scfg;
      scfg.seed = seed.value_or(0);
      scfg.steps = score_steps;
      ScoreEquivalenceResult result = run_score_equivalence(oracle, scfg);
      fs::create_directories(out_path);
      std::ostringstream csv;
      csv << "sample,cosine\n";
      csv.precision(17);
      for (std::size_t i = 0; i < result.per_sample_cosine.size(); ++i)
        csv << i << "," << result.per_sample_cosine[i] << "\n";
      write_text_file((fs::path(out_path) / "score.csv").string(), csv.str());
      write_manifest(out_path, "verify-score",
                     {{"scores", "score.csv"}, {"mean_cosine", result.mean_cosine}});
      std::cout << "mean cosine " << result.mean_cosine << "\n";
    } else if (*ablate) {
      RunConfig cfg = load_run_config(config_path, seed);
      Corpus corpus = load_corpus(cfg, data_path);
      std::vector<AblationCell> cells =
          ablation_grid(cfg, axes_text.empty() ? AblationAxes{} : parse_axes(axes_text), corpus);
      fs::create_directories(out_path);
      write_text_file((fs::path(out_path) / "ablation.csv").string(), to_csv(cells));
      write_manifest(out_path, "ablate", {{"table", "ablation.csv"}, {"cells", cells.size()}});
      std::cout << "ran " << cells.size() << " cells\n";
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
