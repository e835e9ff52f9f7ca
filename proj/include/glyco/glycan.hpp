#pragma once

// Glycan structures, compositions and monoisotopic mass arithmetic.
//
// Residue masses are never literals: every residue is an elemental formula
// and every mass is derived from the element table.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace glyco {

/// Element symbol -> count. Counts may be negative for deltas but residue
/// formulas are validated non-negative.
class Formula {
public:
  Formula() = default;
  explicit Formula(std::map<std::string, int> counts);

  /// Parses "C6H10O5" style text. Element symbols are an uppercase letter
  /// followed by lowercase letters; counts default to 1.
  static Formula parse(std::string_view text);

  const std::map<std::string, int>& counts() const noexcept { return counts_; }
  int count(const std::string& element) const;

  Formula& operator+=(const Formula& other);
  Formula& operator-=(const Formula& other);
  friend Formula operator+(Formula a, const Formula& b) { return a += b; }
  friend Formula operator-(Formula a, const Formula& b) { return a -= b; }
  friend bool operator==(const Formula&, const Formula&) = default;

  std::string to_string() const;

private:
  std::map<std::string, int> counts_;
};

/// Immutable table of monoisotopic element masses plus the electron mass.
class ElementMassTable {
public:
  /// Reads `symbol = mass` lines; the key `e-` sets the electron mass.
  static ElementMassTable parse(std::istream& in);
  static ElementMassTable parse_text(std::string_view text);
  /// The shipped table (see config/elements.cfg).
  static const ElementMassTable& defaults();

  double mass(const std::string& element) const;
  double mass(const Formula& formula) const;
  double electron() const noexcept { return electron_; }
  bool contains(const std::string& element) const { return masses_.count(element) != 0; }
  const std::map<std::string, double>& entries() const noexcept { return masses_; }

  /// Derived constants used throughout.
  double water() const { return water_; }
  double methylene() const { return methylene_; }

private:
  ElementMassTable(std::map<std::string, double> masses, double electron);

  std::map<std::string, double> masses_;
  double electron_;
  double water_;
  double methylene_;
};

struct ResidueKind {
  std::string code;
  Formula base_composition;   // monosaccharide minus water
  int methylation_sites_free; // terminal, unsubstituted residue
};

/// Immutable registry of residue kinds keyed by code.
class ResidueRegistry {
public:
  /// Reads `Code = Formula, sites` lines.
  static ResidueRegistry parse(std::istream& in);
  static ResidueRegistry parse_text(std::string_view text);
  static const ResidueRegistry& defaults();

  const ResidueKind* find(std::string_view code) const;
  const ResidueKind& at(std::string_view code) const;
  const std::vector<ResidueKind>& kinds() const noexcept { return kinds_; }

private:
  std::vector<ResidueKind> kinds_;
};

/// Mass table plus residue registry: everything needed to turn structures
/// into masses.
struct MassModel {
  ElementMassTable elements;
  ResidueRegistry residues;

  static const MassModel& defaults();
};

/// Linkage position 1-9; 0 encodes an unknown ("?") position.
struct Linkage {
  std::string anomer = "?";
  int position = 0;

  friend bool operator==(const Linkage&, const Linkage&) = default;
};

/// Rooted residue tree. The root (node 0) is the reducing end. Nodes are
/// stored in canonical preorder: siblings ordered by (linkage position,
/// residue code, anomer, serialized subtree), unknown positions last.
class GlycanStructure {
public:
  struct Node {
    std::string code;
    Linkage link;       // linkage to the parent; unused for the root
    int parent = -1;
    std::vector<int> children;

    friend bool operator==(const Node&, const Node&) = default;
  };

  /// Mutable tree used to assemble a structure before canonicalization.
  struct Draft {
    std::string code;
    Linkage link;
    std::vector<Draft> children;
    int tag = -1; // caller payload, reported back in canonical order
  };

  GlycanStructure() = default;
  /// Canonicalizes `root`. When `tags` is given it receives each node's
  /// Draft::tag in the stored (canonical preorder) order.
  GlycanStructure(std::string id, const Draft& root, std::vector<int>* tags = nullptr);

  const std::string& id() const noexcept { return id_; }
  void set_id(std::string id) { id_ = std::move(id); }

  std::size_t size() const noexcept { return nodes_.size(); }
  bool empty() const noexcept { return nodes_.empty(); }
  const Node& node(std::size_t i) const { return nodes_.at(i); }
  const std::vector<Node>& nodes() const noexcept { return nodes_; }

  /// Number of nodes in the subtree rooted at `i`.
  int subtree_size(std::size_t i) const;

  /// Draft copy of the subtree rooted at `i`.
  Draft draft(std::size_t i = 0) const;

  /// Canonical linear encoding.
  std::string serialize() const;

  /// Structural equality ignoring the id.
  bool same_tree(const GlycanStructure& other) const { return nodes_ == other.nodes_; }

private:
  std::string id_;
  std::vector<Node> nodes_;
};

/// Parses the linear encoding:
///   tree := { "[" tree link "]" } residue | tree link { "[" tree link "]" } residue
///   link := "(" anomer "-" position ")"
/// Branches in square brackets precede their parent residue. Throws
/// ParseError with the byte offset; unknown residue codes are rejected.
GlycanStructure parse_structure(std::string_view text, const ResidueRegistry& registry,
                                std::string id = {});

std::string serialize_structure(const GlycanStructure& g);

/// Residue code -> count.
class Composition {
public:
  Composition() = default;
  explicit Composition(std::map<std::string, int> counts);

  const std::map<std::string, int>& counts() const noexcept { return counts_; }
  int count(const std::string& code) const;
  int total() const;
  bool empty() const { return total() == 0; }
  std::string to_string() const;

  friend bool operator==(const Composition&, const Composition&) = default;

private:
  std::map<std::string, int> counts_;
};

Composition composition_of(const GlycanStructure& g);

enum class Derivatization { native, permethylated };

struct DerivatizationState {
  Derivatization mode = Derivatization::native;
  int missing_methyls = 0;

  static DerivatizationState native() { return {}; }
  static DerivatizationState permethylated(int missing = 0) {
    return {Derivatization::permethylated, missing};
  }
  bool is_permethylated() const { return mode == Derivatization::permethylated; }
  friend bool operator==(const DerivatizationState&, const DerivatizationState&) = default;
};

std::string to_string(Derivatization d);
Derivatization parse_derivatization(std::string_view text);

/// Methylatable sites of every node under full permethylation: free sites
/// minus child count (floored at 0), plus one on the reducing-end root.
std::vector<int> methylation_sites(const GlycanStructure& g, const ResidueRegistry& registry);
int total_methylation_sites(const GlycanStructure& g, const ResidueRegistry& registry);
int total_methylation_sites(const Composition& c, const ResidueRegistry& registry);

/// Monoisotopic neutral mass: residue base masses + one water, plus
/// (sites - missing) methylene groups when permethylated.
double neutral_mass(const GlycanStructure& g, const DerivatizationState& deriv,
                    const MassModel& model);
double neutral_mass(const Composition& c, const DerivatizationState& deriv,
                    const MassModel& model);

struct UndermethylationVariant {
  DerivatizationState state;
  double mass_delta;
};

/// Permethylated variants with 0..max_missing missing methyls, truncated at
/// the structure's total site count, ordered by missing count.
std::vector<UndermethylationVariant> undermethylation_variants(const GlycanStructure& g,
                                                               int max_missing,
                                                               const MassModel& model);

/// One entry of a glycan database file.
struct GlycanRecord {
  GlycanStructure structure;
  std::string glycan_class;

  const std::string& id() const { return structure.id(); }
};

struct DatabaseIssue {
  std::size_t record_number; // 1-based data record number (comments excluded)
  std::size_t line;
  std::string message;
};

struct GlycanDatabase {
  std::vector<GlycanRecord> records;
  std::vector<DatabaseIssue> issues;
};

/// Reads `id<TAB>encoding<TAB>class` lines, `#` comments. Malformed records
/// are reported in `issues` and skipped; duplicate ids are malformed.
GlycanDatabase read_glycan_database(std::istream& in, const ResidueRegistry& registry);
void write_glycan_database(std::ostream& out, const std::vector<GlycanRecord>& records);

} // namespace glyco
