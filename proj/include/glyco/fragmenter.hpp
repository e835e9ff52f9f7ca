#pragma once

// In-silico glycosidic fragmentation (B/C/Y/Z) of glycans and of fragments
// re-used as precursors at deeper MS levels.

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "glyco/glycan.hpp"

namespace glyco {

enum class FragmentType { B, C, Y, Z };

char to_char(FragmentType t);
FragmentType parse_fragment_type(char c);
/// B and C keep the non-reducing side; Y and Z keep the reducing side.
inline bool keeps_reducing_side(FragmentType t) { return t == FragmentType::Y || t == FragmentType::Z; }

/// A glycan or fragment that can be fragmented: a residue tree plus the
/// cleavage marks inherited from earlier fragmentation steps.
///
/// Marks change the mass relative to a free glycan of the same residues: a
/// B mark at the reducing end or a Z mark on a residue each remove one water.
/// Methylation sites are frozen from the original glycan, so a fragment
/// carries exactly the methyls its residues carried in the precursor.
class Candidate {
public:
  Candidate() = default;

  static Candidate from_glycan(const GlycanStructure& g, const DerivatizationState& deriv,
                               const MassModel& model);

  const std::string& id() const noexcept { return structure_.id(); }
  /// Glycan id this candidate descends from (text before the first '|').
  std::string root_glycan_id() const;
  bool is_fragment() const noexcept { return fragment_; }

  const GlycanStructure& structure() const noexcept { return structure_; }
  /// Empty for an intact reducing end; B or C when this is a non-reducing fragment.
  const std::optional<FragmentType>& reducing_end() const noexcept { return reducing_end_; }
  /// Y/Z marks left on each residue by removed children.
  const std::vector<std::vector<FragmentType>>& lower_marks() const noexcept { return lower_marks_; }
  const std::vector<int>& methyl_sites() const noexcept { return methyl_sites_; }
  bool permethylated() const noexcept { return permethylated_; }
  int missing_methyls() const noexcept { return missing_; }
  int methyl_count() const;

  double neutral_mass(const MassModel& model) const;

  /// Glycan-independent description of the substructure with its cleavage
  /// marks (linkage positions dropped). Identical fragments of different
  /// glycans share the key.
  std::string feature_key() const;

private:
  friend class FragmentBuilder;

  GlycanStructure structure_;
  std::optional<FragmentType> reducing_end_;
  std::vector<std::vector<FragmentType>> lower_marks_;
  std::vector<int> methyl_sites_;
  bool permethylated_ = false;
  int missing_ = 0;
  bool fragment_ = false;
};

struct Cleavage {
  int edge;           // preorder index of the child residue in the parent candidate
  bool reducing_side; // true when the fragment lies on the reducing side
  FragmentType type;
  friend bool operator==(const Cleavage&, const Cleavage&) = default;
};

struct FragmentIon {
  std::string parent_id;
  std::vector<Cleavage> cleavages;
  Candidate substructure;
  double neutral_mass = 0.0;
  std::string signature;   // <parentId>|<type><ordinal>[+...]|u<missing>
  std::string feature_key; // Candidate::feature_key of the substructure
};

struct LevelFragmentation {
  std::set<FragmentType> types{FragmentType::B, FragmentType::C, FragmentType::Y, FragmentType::Z};
  int max_cleavages = 2;
  std::vector<std::string> losses;
  int max_undermethylation = 0;
};

struct FragmentationSettings {
  std::map<int, LevelFragmentation> levels;

  /// Throws InputError when the level is undefined.
  const LevelFragmentation& at(int level) const;
};

class FragmentLimitExceeded : public std::runtime_error {
public:
  FragmentLimitExceeded(const std::string& id, std::size_t limit)
      : std::runtime_error("fragment enumeration of '" + id + "' exceeded " +
                           std::to_string(limit) + " fragments") {}
};

inline constexpr std::size_t kDefaultFragmentLimit = 10000;

/// All fragments with 1..max_cleavages glycosidic cleavages whose cut types
/// are allowed at `level`, expanded over undermethylation (0..min(level cap,
/// candidate missing methyls, fragment methyls)). Deduplicated by signature,
/// in deterministic order. Throws FragmentLimitExceeded past `limit`.
std::vector<FragmentIon> enumerate_fragments(const Candidate& candidate,
                                             const FragmentationSettings& settings, int level,
                                             const MassModel& model,
                                             std::size_t limit = kDefaultFragmentLimit);

std::vector<FragmentIon> enumerate_fragments(const GlycanStructure& g,
                                             const DerivatizationState& deriv,
                                             const FragmentationSettings& settings, int level,
                                             const MassModel& model,
                                             std::size_t limit = kDefaultFragmentLimit);

/// The fragment's substructure, marks preserved, ready to be fragmented at
/// the next MS level. Its id is the fragment signature.
Candidate fragment_as_precursor(const FragmentIon& f);

} // namespace glyco
