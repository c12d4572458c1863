#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "georecon/corpus.hpp"
#include "georecon/training.hpp"

namespace georecon {

/// Element symbol <-> atomic number for the common light elements.
/// Unknown symbols throw std::invalid_argument.
int atomic_number_of(const std::string& symbol);
std::string symbol_of(int z);

struct XyzFrame {
  Conformation conf;
  std::string comment;
};

/// Standard XYZ: count line, comment line, then "Symbol x y z" per atom;
/// multiple frames back to back. Malformed input throws with a line number.
std::vector<XyzFrame> parse_xyz_frames(const std::string& text);
std::vector<Conformation> parse_xyz(const std::string& text);

/// Fixed 9-decimal coordinates; labels and split tags ride in the comment
/// line as "key=value" pairs, so parse/write round-trips the whole corpus.
std::string write_xyz(const Corpus& corpus);
Corpus corpus_from_xyz(const std::string& text);

/// Pairwise Lennard-Jones ground truth with per-species parameters
/// (Lorentz-Berthelot mixing) and fixed partial charges for the dipole proxy.
struct SpeciesParams {
  Real well_depth;  // epsilon
  Real radius;      // sigma, Angstrom
  Real charge;
};

struct ToyPotential {
  std::map<int, SpeciesParams> table;  // keyed by atomic number

  static ToyPotential standard();  // H, C, O
  const SpeciesParams& of(int z) const;
  Real energy(const Conformation& conf) const;
  Coords forces(const Conformation& conf) const;  // negative gradient
};

/// Random species draws relaxed to a nearby local minimum of the toy
/// potential; labels are the relaxed energy (target) and a dipole proxy
/// ||sum q_i r_i||; splits 80/10/10 by seeded shuffle.
Corpus synth_corpus(std::uint64_t seed, std::size_t n_molecules, Index atoms_min, Index atoms_max,
                    const std::vector<int>& species_set = {1, 6, 8});

/// Line-based "key = value" run configuration. Unknown keys are rejected
/// with a nearest-key suggestion; keys accepted for compatibility but unused
/// at this scale are collected into RunConfig::warnings.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

// CSV renderings of the training logs (full round-trip precision).
std::string to_csv(const std::vector<LossRow>& log);
std::string to_csv(const std::vector<MaeRow>& log);
std::string to_csv(const std::vector<ProbeRow>& log);
std::string to_csv(const std::vector<AblationCell>& cells);

}  // namespace georecon
