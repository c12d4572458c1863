#pragma once

#include <map>
#include <string>
#include <vector>

#include "georecon/geometry.hpp"

namespace georecon {

enum class Split { kTrain, kVal, kTest };

/// A set of molecules with optional scalar labels and split assignments.
/// `labels` is the active target column; additional named columns (e.g. the
/// dipole proxy next to the energy) live in `extra_labels`.
struct Corpus {
  std::vector<Conformation> molecules;
  std::vector<Real> labels;
  std::string target_name;
  std::map<std::string, std::vector<Real>> extra_labels;
  std::vector<Split> splits;

  std::size_t size() const { return molecules.size(); }
  bool has_labels() const { return !labels.empty(); }

  std::vector<std::size_t> indices(Split s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < splits.size(); ++i)
      if (splits[i] == s) out.push_back(i);
    return out;
  }
};

/// Returns a copy with the named label column active.
Corpus select_target(const Corpus& corpus, const std::string& name);

/// Throws std::invalid_argument when label/split counts disagree with the
/// molecule count or any conformation is malformed.
void validate(const Corpus& corpus);

}  // namespace georecon
