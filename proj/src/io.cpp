#include "georecon/io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "georecon/rng.hpp"

namespace georecon {

namespace {

const char* kSymbols[] = {"H",  "He", "Li", "Be", "B",  "C",  "N",  "O",  "F",  "Ne", "Na", "Mg",
                          "Al", "Si", "P",  "S",  "Cl", "Ar", "K",  "Ca", "Sc", "Ti", "V",  "Cr",
                          "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As", "Se", "Br", "Kr"};

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

std::string format_real(Real v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

int atomic_number_of(const std::string& symbol) {
  std::string norm = symbol;
  if (!norm.empty()) {
    norm[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(norm[0])));
    for (std::size_t i = 1; i < norm.size(); ++i)
      norm[i] = static_cast<char>(std::tolower(static_cast<unsigned char>(norm[i])));
  }
  for (std::size_t i = 0; i < std::size(kSymbols); ++i)
    if (norm == kSymbols[i]) return static_cast<int>(i) + 1;
  throw std::invalid_argument("unknown element symbol '" + symbol + "'");
}

std::string symbol_of(int z) {
  if (z < 1 || z > static_cast<int>(std::size(kSymbols)))
    throw std::invalid_argument("atomic number " + std::to_string(z) + " has no symbol entry");
  return kSymbols[z - 1];
}

Corpus select_target(const Corpus& corpus, const std::string& name) {
  if (name == corpus.target_name) return corpus;
  Corpus out = corpus;
  auto it = out.extra_labels.find(name);
  if (it == out.extra_labels.end())
    throw std::invalid_argument("corpus has no label column '" + name + "'");
  if (!out.target_name.empty()) out.extra_labels[out.target_name] = out.labels;
  out.labels = it->second;
  out.target_name = name;
  out.extra_labels.erase(name);
  return out;
}

void validate(const Corpus& corpus) {
  for (const Conformation& c : corpus.molecules) validate(c);
  if (!corpus.labels.empty() && corpus.labels.size() != corpus.size())
    throw std::invalid_argument("corpus: label count does not match molecule count");
  for (const auto& [name, col] : corpus.extra_labels)
    if (col.size() != corpus.size())
      throw std::invalid_argument("corpus: label column '" + name + "' has wrong length");
  if (!corpus.splits.empty() && corpus.splits.size() != corpus.size())
    throw std::invalid_argument("corpus: split count does not match molecule count");
}

std::vector<XyzFrame> parse_xyz_frames(const std::string& text) {
  std::vector<std::string> lines;
  {
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) lines.push_back(line);
  }

  std::vector<XyzFrame> frames;
  std::size_t i = 0;
  while (i < lines.size()) {
    if (trim(lines[i]).empty()) {  // stray blank lines between frames
      ++i;
      continue;
    }
    const std::size_t count_line = i + 1;  // 1-based for diagnostics
    long declared = 0;
    {
      const std::string tok = trim(lines[i]);
      std::size_t pos = 0;
      try {
        declared = std::stol(tok, &pos);
      } catch (const std::exception&) {
        pos = 0;
      }
      if (pos != tok.size() || declared < 1)
        throw std::invalid_argument("xyz: expected an atom count at line " +
                                    std::to_string(count_line) + ", got '" + tok + "'");
    }
    ++i;
    if (i >= lines.size())
      throw std::invalid_argument("xyz: missing comment line after line " +
                                  std::to_string(count_line));
    XyzFrame frame;
    frame.comment = trim(lines[i]);
    ++i;

    frame.conf.coords.resize(declared, 3);
    for (long a = 0; a < declared; ++a) {
      if (i >= lines.size() || trim(lines[i]).empty()) {
        const std::size_t last = i < lines.size() ? i + 1 : lines.size();
        throw std::invalid_argument("xyz: declared " + std::to_string(declared) +
                                    " atoms, found " + std::to_string(a) + ", at line " +
                                    std::to_string(last));
      }
      const std::size_t line_no = i + 1;
      const std::vector<std::string> tok = split_ws(lines[i]);
      if (tok.size() != 4)
        throw std::invalid_argument("xyz: expected 'Symbol x y z' at line " +
                                    std::to_string(line_no));
      int z;
      try {
        z = atomic_number_of(tok[0]);
      } catch (const std::invalid_argument& e) {
        throw std::invalid_argument("xyz: " + std::string(e.what()) + " at line " +
                                    std::to_string(line_no));
      }
      frame.conf.atomic_numbers.push_back(z);
      for (int c = 0; c < 3; ++c) {
        std::size_t pos = 0;
        Real v = 0.0;
        try {
          v = std::stod(tok[static_cast<std::size_t>(c) + 1], &pos);
        } catch (const std::exception&) {
          pos = 0;
        }
        if (pos != tok[static_cast<std::size_t>(c) + 1].size() || !std::isfinite(v))
          throw std::invalid_argument("xyz: malformed coordinate '" +
                                      tok[static_cast<std::size_t>(c) + 1] + "' at line " +
                                      std::to_string(line_no));
        frame.conf.coords(a, c) = v;
      }
      ++i;
    }
    frames.push_back(std::move(frame));
  }
  return frames;
}

std::vector<Conformation> parse_xyz(const std::string& text) {
  std::vector<Conformation> confs;
  for (XyzFrame& f : parse_xyz_frames(text)) confs.push_back(std::move(f.conf));
  return confs;
}

namespace {

std::string split_tag(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "train";
}

Split split_from_tag(const std::string& tag) {
  if (tag == "train") return Split::kTrain;
  if (tag == "val") return Split::kVal;
  if (tag == "test") return Split::kTest;
  throw std::invalid_argument("unknown split tag '" + tag + "'");
}

}  // namespace

std::string write_xyz(const Corpus& corpus) {
  validate(corpus);
  std::ostringstream os;
  for (std::size_t m = 0; m < corpus.size(); ++m) {
    const Conformation& conf = corpus.molecules[m];
    os << conf.num_atoms() << "\n";
    bool first = true;
    auto emit = [&](const std::string& key, const std::string& value) {
      if (!first) os << " ";
      os << key << "=" << value;
      first = false;
    };
    if (corpus.has_labels()) emit(corpus.target_name, format_real(corpus.labels[m]));
    for (const auto& [name, col] : corpus.extra_labels) emit(name, format_real(col[m]));
    if (!corpus.splits.empty()) emit("split", split_tag(corpus.splits[m]));
    os << "\n";
    for (Index a = 0; a < conf.num_atoms(); ++a) {
      char buf[96];
      std::snprintf(buf, sizeof(buf), "%s %.9f %.9f %.9f", symbol_of(conf.atomic_numbers[a]).c_str(),
                    conf.coords(a, 0), conf.coords(a, 1), conf.coords(a, 2));
      os << buf << "\n";
    }
  }
  return os.str();
}

Corpus corpus_from_xyz(const std::string& text) {
  Corpus corpus;
  std::map<std::string, std::vector<Real>> columns;
  std::vector<Split> splits;
  bool any_split = false;

  const std::vector<XyzFrame> frames = parse_xyz_frames(text);
  for (const XyzFrame& frame : frames) {
    corpus.molecules.push_back(frame.conf);
    splits.push_back(Split::kTrain);
    for (const std::string& tok : split_ws(frame.comment)) {
      const std::size_t eq = tok.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = tok.substr(0, eq);
      const std::string value = tok.substr(eq + 1);
      if (key == "split") {
        splits.back() = split_from_tag(value);
        any_split = true;
      } else {
        columns[key].push_back(std::stod(value));
      }
    }
  }
  for (auto& [name, col] : columns)
    if (col.size() != corpus.size())
      throw std::invalid_argument("xyz: label '" + name + "' missing on some frames");
  if (any_split) corpus.splits = std::move(splits);

  if (columns.count("energy")) {
    corpus.labels = columns.at("energy");
    corpus.target_name = "energy";
    columns.erase("energy");
  } else if (!columns.empty()) {
    corpus.labels = columns.begin()->second;
    corpus.target_name = columns.begin()->first;
    columns.erase(columns.begin());
  }
  corpus.extra_labels = std::move(columns);
  validate(corpus);
  return corpus;
}

ToyPotential ToyPotential::standard() {
  ToyPotential p;
  p.table[1] = {0.30, 0.80, +0.1};  // H
  p.table[6] = {0.60, 1.20, 0.0};   // C
  p.table[8] = {0.50, 1.10, -0.1};  // O
  return p;
}

const SpeciesParams& ToyPotential::of(int z) const {
  auto it = table.find(z);
  if (it == table.end())
    throw std::invalid_argument("toy potential has no parameters for z=" + std::to_string(z));
  if (it->second.well_depth <= 0.0 || it->second.radius <= 0.0)
    throw std::invalid_argument("toy potential: non-positive parameters for z=" +
                                std::to_string(z));
  return it->second;
}

Real ToyPotential::energy(const Conformation& conf) const {
  Real e = 0.0;
  const Index n = conf.num_atoms();
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) {
      const SpeciesParams& a = of(conf.atomic_numbers[static_cast<std::size_t>(i)]);
      const SpeciesParams& b = of(conf.atomic_numbers[static_cast<std::size_t>(j)]);
      const Real eps = std::sqrt(a.well_depth * b.well_depth);
      const Real sigma = 0.5 * (a.radius + b.radius);
      const Real r = (conf.coords.row(i) - conf.coords.row(j)).norm();
      const Real s6 = std::pow(sigma / r, 6);
      e += 4.0 * eps * (s6 * s6 - s6);
    }
  return e;
}

Coords ToyPotential::forces(const Conformation& conf) const {
  const Index n = conf.num_atoms();
  Coords f = Coords::Zero(n, 3);
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) {
      const SpeciesParams& a = of(conf.atomic_numbers[static_cast<std::size_t>(i)]);
      const SpeciesParams& b = of(conf.atomic_numbers[static_cast<std::size_t>(j)]);
      const Real eps = std::sqrt(a.well_depth * b.well_depth);
      const Real sigma = 0.5 * (a.radius + b.radius);
      const Eigen::RowVector3d diff = conf.coords.row(i) - conf.coords.row(j);
      const Real r2 = diff.squaredNorm();
      const Real s6 = std::pow(sigma * sigma / r2, 3);
      // -dE/dr_i = 24 eps (2 s12 - s6) / r^2 * (r_i - r_j)
      const Real scale = 24.0 * eps * (2.0 * s6 * s6 - s6) / r2;
      f.row(i) += scale * diff;
      f.row(j) -= scale * diff;
    }
  return f;
}

namespace {

// Backtracking gradient descent to a nearby local minimum. Returns true when
// the maximum force component drops below the threshold within the budget.
bool relax(const ToyPotential& pot, Conformation& conf, Real fmax_tol, int max_iters) {
  Real alpha = 0.05;
  Real energy = pot.energy(conf);
  for (int it = 0; it < max_iters; ++it) {
    const Coords f = pot.forces(conf);
    if (!f.allFinite()) return false;
    const Real fmax = f.cwiseAbs().maxCoeff();
    if (fmax < fmax_tol) return true;
    // cap the largest per-coordinate move at 0.2 A
    Real step = alpha;
    if (step * fmax > 0.2) step = 0.2 / fmax;
    Conformation trial = conf;
    trial.coords = conf.coords + step * f;
    const Real trial_energy = pot.energy(trial);
    if (std::isfinite(trial_energy) && trial_energy < energy) {
      conf = std::move(trial);
      energy = trial_energy;
      alpha = std::min(alpha * 1.2, 0.2);
    } else {
      alpha = std::max(alpha * 0.5, 1e-7);
    }
  }
  return false;
}

}  // namespace

Corpus synth_corpus(std::uint64_t seed, std::size_t n_molecules, Index atoms_min, Index atoms_max,
                    const std::vector<int>& species_set) {
  if (n_molecules < 1) throw std::invalid_argument("synth_corpus: need at least one molecule");
  if (atoms_min < 2 || atoms_max > 16 || atoms_min > atoms_max)
    throw std::invalid_argument("synth_corpus: atom range must lie within [2, 16]");
  if (species_set.empty()) throw std::invalid_argument("synth_corpus: empty species set");
  const ToyPotential pot = ToyPotential::standard();
  for (int z : species_set) pot.of(z);  // validate species upfront

  Corpus corpus;
  corpus.target_name = "energy";
  std::vector<Real> dipoles;

  for (std::size_t m = 0; m < n_molecules; ++m) {
    Conformation conf;
    bool ok = false;
    for (int attempt = 0; attempt < 32 && !ok; ++attempt) {
      Rng rng(derive_seed(seed, m * 64 + static_cast<std::size_t>(attempt)));
      const Index n =
          atoms_min + static_cast<Index>(rng.uniform_int(static_cast<std::int64_t>(atoms_max - atoms_min + 1)));
      conf.atomic_numbers.clear();
      for (Index i = 0; i < n; ++i)
        conf.atomic_numbers.push_back(
            species_set[static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(species_set.size())))]);
      // Grow a connected cluster: each atom lands near the pair minimum of a
      // randomly chosen anchor, so relaxation starts inside a bonding basin
      // instead of the flat long-range tail.
      conf.coords.resize(n, 3);
      conf.coords.row(0).setZero();
      for (Index i = 1; i < n; ++i) {
        bool placed = false;
        for (int tries = 0; tries < 200 && !placed; ++tries) {
          const Index anchor = static_cast<Index>(rng.uniform_int(i));
          Vec3 dir(rng.gaussian(), rng.gaussian(), rng.gaussian());
          if (dir.norm() < 1e-12) continue;
          dir.normalize();
          const Real sigma_ij =
              0.5 * (pot.of(conf.atomic_numbers[static_cast<std::size_t>(i)]).radius +
                     pot.of(conf.atomic_numbers[static_cast<std::size_t>(anchor)]).radius);
          const Real dist = std::pow(2.0, 1.0 / 6.0) * sigma_ij * rng.uniform(0.95, 1.25);
          conf.coords.row(i) = conf.coords.row(anchor) + dist * dir.transpose();
          placed = true;
          for (Index j = 0; j < i && placed; ++j) {
            const Real min_sep =
                0.8 * 0.5 *
                (pot.of(conf.atomic_numbers[static_cast<std::size_t>(i)]).radius +
                 pot.of(conf.atomic_numbers[static_cast<std::size_t>(j)]).radius);
            if ((conf.coords.row(i) - conf.coords.row(j)).norm() < min_sep) placed = false;
          }
        }
        if (!placed) break;
      }
      ok = relax(pot, conf, 1e-3, 5000);
    }
    if (!ok) throw std::runtime_error("synth_corpus: relaxation failed repeatedly");
    conf = center(conf);
    corpus.molecules.push_back(conf);
    corpus.labels.push_back(pot.energy(conf));
    Vec3 dipole = Vec3::Zero();
    for (Index i = 0; i < conf.num_atoms(); ++i)
      dipole += pot.of(conf.atomic_numbers[static_cast<std::size_t>(i)]).charge *
                conf.coords.row(i).transpose();
    dipoles.push_back(dipole.norm());
  }
  corpus.extra_labels["dipole"] = std::move(dipoles);

  // 80/10/10 split by seeded shuffle
  Rng split_rng(derive_seed(seed, 0x5117u));
  const std::vector<std::size_t> perm = split_rng.permutation(n_molecules);
  corpus.splits.assign(n_molecules, Split::kTrain);
  const std::size_t n_train = (n_molecules * 8) / 10;
  const std::size_t n_val = n_molecules / 10;
  for (std::size_t r = 0; r < n_molecules; ++r) {
    if (r < n_train)
      corpus.splits[perm[r]] = Split::kTrain;
    else if (r < n_train + n_val)
      corpus.splits[perm[r]] = Split::kVal;
    else
      corpus.splits[perm[r]] = Split::kTest;
  }
  validate(corpus);
  return corpus;
}

namespace {

int edit_distance(const std::string& a, const std::string& b) {
  std::vector<int> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = {
      // consumed
      "seed", "batch_size", "total_steps", "epochs", "position_noise_scale", "lambda",
      "loss_weight_nsd", "loss_weight_rec", "loss_weight_cln", "lr", "lr_min", "lr_warmup_steps",
      "lr_cosine_length", "lr_schedule", "num_layers", "embedding_dimension", "cutoff_upper",
      "num_rbf", "max_z", "decoder_depth", "decoder_width", "denoising_weight", "dataset", "mode",
      "target",
      // accepted for compatibility, unused at this scale
      "cutoff_lower", "ema_alpha_dy", "ema_alpha_y", "energy_weight", "force_weight",
      "inference_batch_size", "lr_patience", "max_num_neighbors", "num_heads", "num_nodes",
      "num_workers", "precision", "save_interval", "test_interval"};
  return keys;
}

[[noreturn]] void config_error(std::size_t line, const std::string& msg) {
  throw std::invalid_argument("config line " + std::to_string(line) + ": " + msg);
}

Real parse_real(const std::string& key, const std::string& value, std::size_t line) {
  std::size_t pos = 0;
  Real v = 0.0;
  try {
    v = std::stod(value, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != value.size()) config_error(line, "key '" + key + "' expects a number, got '" + value + "'");
  return v;
}

long long parse_int(const std::string& key, const std::string& value, std::size_t line) {
  std::size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(value, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != value.size())
    config_error(line, "key '" + key + "' expects an integer, got '" + value + "'");
  return v;
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::istringstream is(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(is, raw)) {
    ++line_no;
    std::string line = raw;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) config_error(line_no, "expected 'key = value', got '" + raw + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) config_error(line_no, "expected 'key = value', got '" + raw + "'");

    if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_int(key, value, line_no));
    else if (key == "batch_size") cfg.batch_size = parse_int(key, value, line_no);
    else if (key == "total_steps") cfg.total_steps = parse_int(key, value, line_no);
    else if (key == "epochs") cfg.epochs = parse_int(key, value, line_no);
    else if (key == "position_noise_scale") cfg.sigma = parse_real(key, value, line_no);
    else if (key == "lambda") cfg.lambda = parse_real(key, value, line_no);
    else if (key == "loss_weight_nsd") cfg.weights.nsd = parse_real(key, value, line_no);
    else if (key == "loss_weight_rec") cfg.weights.rec = parse_real(key, value, line_no);
    else if (key == "loss_weight_cln") cfg.weights.cln = parse_real(key, value, line_no);
    else if (key == "lr") cfg.schedule.peak_lr = parse_real(key, value, line_no);
    else if (key == "lr_min") cfg.schedule.lr_min = parse_real(key, value, line_no);
    else if (key == "lr_warmup_steps") cfg.schedule.warmup_steps = parse_int(key, value, line_no);
    else if (key == "lr_cosine_length") cfg.schedule.cosine_length = parse_int(key, value, line_no);
    else if (key == "lr_schedule") {
      if (value != "cosine_warmup" && value != "cosine")
        config_error(line_no, "unsupported lr_schedule '" + value + "'");
    } else if (key == "num_layers") cfg.encoder.num_layers = static_cast<int>(parse_int(key, value, line_no));
    else if (key == "embedding_dimension") cfg.encoder.hidden_dim = parse_int(key, value, line_no);
    else if (key == "cutoff_upper") cfg.encoder.cutoff = parse_real(key, value, line_no);
    else if (key == "num_rbf") cfg.encoder.num_rbf = parse_int(key, value, line_no);
    else if (key == "max_z") cfg.encoder.max_z = static_cast<int>(parse_int(key, value, line_no));
    else if (key == "decoder_depth") cfg.decoder.depth = static_cast<int>(parse_int(key, value, line_no));
    else if (key == "decoder_width") cfg.decoder.width = parse_int(key, value, line_no);
    else if (key == "denoising_weight") cfg.denoising_weight = parse_real(key, value, line_no);
    else if (key == "dataset") cfg.dataset = value;
    else if (key == "target") cfg.target = value;
    else if (key == "mode") {
      if (value != "pretrain" && value != "finetune" && value != "linear_probe")
        config_error(line_no, "mode must be pretrain, finetune, or linear_probe; got '" + value + "'");
      cfg.mode = value;
    } else if (key == "cutoff_lower") {
      if (parse_real(key, value, line_no) != 0.0)
        cfg.warnings.push_back("cutoff_lower != 0 is accepted but ignored (radial basis starts at 0)");
    } else if (key == "precision") {
      const long long bits = parse_int(key, value, line_no);
      if (bits != 64)
        cfg.warnings.push_back("precision " + value + " accepted; arithmetic always runs in 64-bit");
    } else {
      bool compat = false;
      for (const std::string& k : known_keys())
        if (k == key) compat = true;
      if (compat) {
        parse_real(key, value, line_no);  // still type-checked
        cfg.warnings.push_back("key '" + key + "' accepted but unused by this encoder");
      } else {
        int best_dist = 1 << 20;
        std::string best;
        for (const std::string& k : known_keys()) {
          const int dist = edit_distance(key, k);
          if (dist < best_dist) {
            best_dist = dist;
            best = k;
          }
        }
        config_error(line_no, "unknown key '" + key + "' (did you mean '" + best + "'?)");
      }
    }
  }
  return cfg;
}

RunConfig load_config(const std::string& path) { return parse_config(read_text_file(path)); }

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << content;
  if (!out) throw std::runtime_error("write failed for " + path);
}

std::string to_csv(const std::vector<LossRow>& log) {
  std::ostringstream os;
  os << "step,lr,loss_nsd,loss_rec,loss_cln,loss_total\n";
  for (const LossRow& r : log)
    os << r.step << "," << format_real(r.lr) << "," << format_real(r.nsd) << ","
       << format_real(r.rec) << "," << format_real(r.cln) << "," << format_real(r.total) << "\n";
  return os.str();
}

std::string to_csv(const std::vector<MaeRow>& log) {
  std::ostringstream os;
  os << "epoch,mae\n";
  for (const MaeRow& r : log) os << r.epoch << "," << format_real(r.mae) << "\n";
  return os.str();
}

std::string to_csv(const std::vector<ProbeRow>& log) {
  std::ostringstream os;
  os << "epoch,mae,w_norm\n";
  for (const ProbeRow& r : log)
    os << r.epoch << "," << format_real(r.mae) << "," << format_real(r.w_norm) << "\n";
  return os.str();
}

std::string to_csv(const std::vector<AblationCell>& cells) {
  std::ostringstream os;
  os << "lambda,decoder_depth,w_rec,w_cln,final_loss_total,finetune_mae\n";
  for (const AblationCell& c : cells)
    os << format_real(c.lambda) << "," << c.decoder_depth << "," << format_real(c.w_rec) << ","
       << format_real(c.w_cln) << "," << format_real(c.final_loss_total) << ","
       << format_real(c.finetune_mae) << "\n";
  return os.str();
}

}  // namespace georecon
