#include "glyco/glycan.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "glyco/defaults.hpp"
#include "glyco/errors.hpp"
#include "glyco/text.hpp"

namespace glyco {

// ---------------------------------------------------------------- Formula

Formula::Formula(std::map<std::string, int> counts) : counts_(std::move(counts)) {
  std::erase_if(counts_, [](const auto& kv) { return kv.second == 0; });
}

Formula Formula::parse(std::string_view text) {
  std::map<std::string, int> counts;
  std::size_t i = 0;
  text = text::trim(text);
  if (text.empty()) throw InputError("empty formula");
  while (i < text.size()) {
    if (!std::isupper(static_cast<unsigned char>(text[i])))
      throw InputError("invalid formula '" + std::string(text) + "'");
    std::size_t j = i + 1;
    while (j < text.size() && std::islower(static_cast<unsigned char>(text[j]))) ++j;
    std::string element(text.substr(i, j - i));
    std::size_t k = j;
    while (k < text.size() && std::isdigit(static_cast<unsigned char>(text[k]))) ++k;
    int n = k > j ? static_cast<int>(text::parse_int(text.substr(j, k - j), "element count")) : 1;
    counts[element] += n;
    i = k;
  }
  return Formula(std::move(counts));
}

int Formula::count(const std::string& element) const {
  auto it = counts_.find(element);
  return it == counts_.end() ? 0 : it->second;
}

Formula& Formula::operator+=(const Formula& other) {
  for (const auto& [e, n] : other.counts_) counts_[e] += n;
  std::erase_if(counts_, [](const auto& kv) { return kv.second == 0; });
  return *this;
}

Formula& Formula::operator-=(const Formula& other) {
  for (const auto& [e, n] : other.counts_) counts_[e] -= n;
  std::erase_if(counts_, [](const auto& kv) { return kv.second == 0; });
  return *this;
}

std::string Formula::to_string() const {
  // Hill order: C, H, then alphabetical.
  std::string out;
  auto emit = [&](const std::string& e, int n) {
    out += e;
    if (n != 1) out += std::to_string(n);
  };
  if (int c = count("C")) emit("C", c);
  if (int h = count("H")) emit("H", h);
  for (const auto& [e, n] : counts_)
    if (e != "C" && e != "H") emit(e, n);
  return out;
}

// ------------------------------------------------------ ElementMassTable

namespace {

template <class F>
void for_each_config_line(std::istream& in, F&& f) {
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    auto view = text::trim(line);
    if (view.empty() || view.front() == '#') continue;
    auto eq = view.find('=');
    if (eq == std::string_view::npos) throw LineError("expected 'key = value'", number);
    f(text::trim(view.substr(0, eq)), text::trim(view.substr(eq + 1)), number);
  }
}

} // namespace

ElementMassTable::ElementMassTable(std::map<std::string, double> masses, double electron)
    : masses_(std::move(masses)), electron_(electron) {
  for (const char* e : {"C", "H", "O"})
    if (!masses_.count(e)) throw InputError(std::string("element table lacks ") + e);
  water_ = mass(Formula::parse("H2O"));
  methylene_ = mass(Formula::parse("CH2"));
}

ElementMassTable ElementMassTable::parse(std::istream& in) {
  std::map<std::string, double> masses;
  double electron = 0.0;
  for_each_config_line(in, [&](std::string_view key, std::string_view value, std::size_t line) {
    double m = 0.0;
    try {
      m = text::parse_double(value, "mass");
    } catch (const InputError& e) {
      throw LineError(e.what(), line);
    }
    if (!(m > 0.0)) throw LineError("mass must be positive", line);
    if (key == "e-") {
      electron = m;
      return;
    }
    if (key.empty() || !std::isupper(static_cast<unsigned char>(key.front())))
      throw LineError("invalid element symbol '" + std::string(key) + "'", line);
    if (!masses.emplace(std::string(key), m).second)
      throw LineError("duplicate element '" + std::string(key) + "'", line);
  });
  if (!(electron > 0.0)) throw InputError("element table lacks the electron mass (e-)");
  return ElementMassTable(std::move(masses), electron);
}

ElementMassTable ElementMassTable::parse_text(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse(in);
}

const ElementMassTable& ElementMassTable::defaults() {
  static const ElementMassTable table = parse_text(defaults::element_table_text);
  return table;
}

double ElementMassTable::mass(const std::string& element) const {
  auto it = masses_.find(element);
  if (it == masses_.end()) throw InputError("unknown element '" + element + "'");
  return it->second;
}

double ElementMassTable::mass(const Formula& formula) const {
  double m = 0.0;
  for (const auto& [e, n] : formula.counts()) m += n * mass(e);
  return m;
}

// ------------------------------------------------------- ResidueRegistry

ResidueRegistry ResidueRegistry::parse(std::istream& in) {
  ResidueRegistry reg;
  for_each_config_line(in, [&](std::string_view key, std::string_view value, std::size_t line) {
    auto parts = text::split(value, ',');
    if (parts.size() != 2) throw LineError("expected '<code> = <formula>, <sites>'", line);
    ResidueKind kind;
    kind.code = std::string(key);
    if (kind.code.empty() || !std::isalpha(static_cast<unsigned char>(kind.code.front())))
      throw LineError("invalid residue code '" + kind.code + "'", line);
    try {
      kind.base_composition = Formula::parse(text::trim(parts[0]));
      kind.methylation_sites_free =
          static_cast<int>(text::parse_int(text::trim(parts[1]), "methylation sites"));
    } catch (const LineError&) {
      throw;
    } catch (const InputError& e) {
      throw LineError(e.what(), line);
    }
    for (const auto& [e, n] : kind.base_composition.counts())
      if (n < 0) throw LineError("negative element count in residue " + kind.code, line);
    if (kind.methylation_sites_free < 0) throw LineError("negative methylation sites", line);
    if (reg.find(kind.code)) throw LineError("duplicate residue '" + kind.code + "'", line);
    reg.kinds_.push_back(std::move(kind));
  });
  return reg;
}

ResidueRegistry ResidueRegistry::parse_text(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse(in);
}

const ResidueRegistry& ResidueRegistry::defaults() {
  static const ResidueRegistry reg = parse_text(defaults::residue_registry_text);
  return reg;
}

const ResidueKind* ResidueRegistry::find(std::string_view code) const {
  for (const auto& k : kinds_)
    if (k.code == code) return &k;
  return nullptr;
}

const ResidueKind& ResidueRegistry::at(std::string_view code) const {
  if (const auto* k = find(code)) return *k;
  throw InputError("unknown residue '" + std::string(code) + "'");
}

const MassModel& MassModel::defaults() {
  static const MassModel model{ElementMassTable::defaults(), ResidueRegistry::defaults()};
  return model;
}

// ------------------------------------------------------- GlycanStructure

namespace {

std::string link_text(const Linkage& l) {
  return "(" + l.anomer + "-" + (l.position ? std::to_string(l.position) : std::string("?")) + ")";
}

std::string draft_text(const GlycanStructure::Draft& d) {
  std::string s;
  for (std::size_t i = 0; i < d.children.size(); ++i) {
    const auto& c = d.children[i];
    if (i == 0)
      s += draft_text(c) + link_text(c.link);
    else
      s += "[" + draft_text(c) + link_text(c.link) + "]";
  }
  return s + d.code;
}

// Sorts siblings bottom-up; returns the canonical text of `d`.
std::string canonicalize(GlycanStructure::Draft& d) {
  std::vector<std::pair<std::string, GlycanStructure::Draft>> keyed;
  keyed.reserve(d.children.size());
  for (auto& c : d.children) {
    auto t = canonicalize(c);
    keyed.emplace_back(std::move(t), std::move(c));
  }
  std::stable_sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
    const auto& la = a.second.link;
    const auto& lb = b.second.link;
    int pa = la.position ? la.position : 10;
    int pb = lb.position ? lb.position : 10;
    return std::tie(pa, a.second.code, la.anomer, a.first) <
           std::tie(pb, b.second.code, lb.anomer, b.first);
  });
  d.children.clear();
  for (auto& [t, c] : keyed) d.children.push_back(std::move(c));
  return draft_text(d);
}

} // namespace

GlycanStructure::GlycanStructure(std::string id, const Draft& root, std::vector<int>* tags)
    : id_(std::move(id)) {
  Draft d = root;
  canonicalize(d);
  if (tags) tags->clear();
  std::function<void(const Draft&, int)> flatten = [&](const Draft& n, int parent) {
    int index = static_cast<int>(nodes_.size());
    nodes_.push_back(Node{n.code, n.link, parent, {}});
    if (tags) tags->push_back(n.tag);
    if (parent >= 0) nodes_[parent].children.push_back(index);
    for (const auto& c : n.children) flatten(c, index);
  };
  flatten(d, -1);
  nodes_[0].link = Linkage{};
}

int GlycanStructure::subtree_size(std::size_t i) const {
  int n = 1;
  for (int c : nodes_.at(i).children) n += subtree_size(c);
  return n;
}

GlycanStructure::Draft GlycanStructure::draft(std::size_t i) const {
  const auto& n = nodes_.at(i);
  Draft d{n.code, n.link, {}, static_cast<int>(i)};
  for (int c : n.children) d.children.push_back(draft(c));
  return d;
}

std::string GlycanStructure::serialize() const {
  if (nodes_.empty()) return {};
  return draft_text(draft(0));
}

std::string serialize_structure(const GlycanStructure& g) { return g.serialize(); }

namespace {

class StructureParser {
public:
  StructureParser(std::string_view text, const ResidueRegistry& registry)
      : text_(text), registry_(registry) {}

  GlycanStructure::Draft parse() {
    if (text_.empty()) throw ParseError("empty glycan encoding", 0);
    auto [root, link] = parse_tree(false);
    if (pos_ != text_.size()) throw ParseError("unexpected '" + std::string(1, text_[pos_]) + "'", pos_);
    return root;
  }

private:
  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

  void expect(char c) {
    if (peek() != c) {
      if (pos_ >= text_.size())
        throw ParseError(std::string("expected '") + c + "' but input ended", pos_);
      throw ParseError(std::string("expected '") + c + "'", pos_);
    }
    ++pos_;
  }

  std::pair<GlycanStructure::Draft, Linkage> parse_tree(bool bracketed) {
    std::vector<GlycanStructure::Draft> pending;
    for (;;) {
      if (peek() == '[') {
        ++pos_;
        auto [branch, link] = parse_tree(true);
        expect(']');
        branch.link = link;
        pending.push_back(std::move(branch));
        continue;
      }
      GlycanStructure::Draft node{parse_residue(), {}, std::move(pending), -1};
      pending.clear();
      if (peek() == '(') {
        Linkage link = parse_link();
        if (bracketed && peek() == ']') return {std::move(node), link};
        if (pos_ >= text_.size()) throw ParseError("linkage without a parent residue", pos_);
        node.link = link;
        pending.push_back(std::move(node));
        continue;
      }
      if (bracketed) throw ParseError("branch must end with a linkage", pos_);
      return {std::move(node), Linkage{}};
    }
  }

  std::string parse_residue() {
    std::size_t start = pos_;
    if (!std::isalpha(static_cast<unsigned char>(peek()))) {
      if (pos_ >= text_.size()) throw ParseError("expected residue but input ended", pos_);
      throw ParseError("expected residue", pos_);
    }
    while (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_') ++pos_;
    std::string code(text_.substr(start, pos_ - start));
    if (!registry_.find(code)) throw ParseError("unknown residue '" + code + "'", start);
    return code;
  }

  Linkage parse_link() {
    expect('(');
    std::size_t start = pos_;
    while (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '?') ++pos_;
    if (pos_ == start) throw ParseError("expected anomer", pos_);
    Linkage link;
    link.anomer = std::string(text_.substr(start, pos_ - start));
    expect('-');
    char p = peek();
    if (p == '?') {
      link.position = 0;
    } else if (p >= '1' && p <= '9') {
      link.position = p - '0';
    } else {
      throw ParseError("expected linkage position 1-9 or '?'", pos_);
    }
    ++pos_;
    expect(')');
    return link;
  }

  std::string_view text_;
  const ResidueRegistry& registry_;
  std::size_t pos_ = 0;
};

} // namespace

GlycanStructure parse_structure(std::string_view text, const ResidueRegistry& registry,
                                std::string id) {
  StructureParser parser(text, registry);
  return GlycanStructure(std::move(id), parser.parse());
}

// ----------------------------------------------------------- Composition

Composition::Composition(std::map<std::string, int> counts) : counts_(std::move(counts)) {
  for (const auto& [code, n] : counts_)
    if (n < 0) throw InputError("negative residue count for " + code);
  std::erase_if(counts_, [](const auto& kv) { return kv.second == 0; });
}

int Composition::count(const std::string& code) const {
  auto it = counts_.find(code);
  return it == counts_.end() ? 0 : it->second;
}

int Composition::total() const {
  int n = 0;
  for (const auto& [code, c] : counts_) n += c;
  return n;
}

std::string Composition::to_string() const {
  std::string out;
  for (const auto& [code, n] : counts_) out += code + std::to_string(n);
  return out;
}

Composition composition_of(const GlycanStructure& g) {
  std::map<std::string, int> counts;
  for (const auto& n : g.nodes()) ++counts[n.code];
  return Composition(std::move(counts));
}

// -------------------------------------------------------------- Masses

std::string to_string(Derivatization d) {
  return d == Derivatization::native ? "native" : "permethylated";
}

Derivatization parse_derivatization(std::string_view text) {
  if (text == "native") return Derivatization::native;
  if (text == "permethylated") return Derivatization::permethylated;
  throw InputError("unknown derivatization '" + std::string(text) + "'");
}

std::vector<int> methylation_sites(const GlycanStructure& g, const ResidueRegistry& registry) {
  std::vector<int> sites(g.size(), 0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto& n = g.node(i);
    int free = registry.at(n.code).methylation_sites_free;
    sites[i] = std::max(0, free - static_cast<int>(n.children.size())) + (i == 0 ? 1 : 0);
  }
  return sites;
}

int total_methylation_sites(const GlycanStructure& g, const ResidueRegistry& registry) {
  int total = 0;
  for (int s : methylation_sites(g, registry)) total += s;
  return total;
}

int total_methylation_sites(const Composition& c, const ResidueRegistry& registry) {
  // A tree of n residues has n - 1 linkages, each consuming one site on the
  // parent; the reducing end adds one.
  int total = 0;
  for (const auto& [code, n] : c.counts()) total += n * registry.at(code).methylation_sites_free;
  return std::max(0, total - (c.total() - 1) + 1);
}

namespace {

double permethylation_mass(int sites, const DerivatizationState& deriv, const MassModel& model) {
  if (!deriv.is_permethylated()) {
    if (deriv.missing_methyls != 0) throw InputError("missing methyls require permethylation");
    return 0.0;
  }
  if (deriv.missing_methyls < 0) throw InputError("negative missing methyl count");
  if (deriv.missing_methyls > sites)
    throw InputError("missing methyls (" + std::to_string(deriv.missing_methyls) +
                     ") exceed methylation sites (" + std::to_string(sites) + ")");
  return (sites - deriv.missing_methyls) * model.elements.methylene();
}

} // namespace

double neutral_mass(const GlycanStructure& g, const DerivatizationState& deriv,
                    const MassModel& model) {
  if (g.empty()) throw InputError("empty structure");
  double m = model.elements.water();
  for (const auto& n : g.nodes()) m += model.elements.mass(model.residues.at(n.code).base_composition);
  return m + permethylation_mass(total_methylation_sites(g, model.residues), deriv, model);
}

double neutral_mass(const Composition& c, const DerivatizationState& deriv,
                    const MassModel& model) {
  if (c.empty()) throw InputError("empty composition");
  double m = model.elements.water();
  for (const auto& [code, n] : c.counts())
    m += n * model.elements.mass(model.residues.at(code).base_composition);
  return m + permethylation_mass(total_methylation_sites(c, model.residues), deriv, model);
}

std::vector<UndermethylationVariant> undermethylation_variants(const GlycanStructure& g,
                                                               int max_missing,
                                                               const MassModel& model) {
  if (max_missing < 0) throw InputError("max_missing must be non-negative");
  int limit = std::min(max_missing, total_methylation_sites(g, model.residues));
  std::vector<UndermethylationVariant> out;
  for (int k = 0; k <= limit; ++k)
    out.push_back({DerivatizationState::permethylated(k), -k * model.elements.methylene()});
  return out;
}

// ------------------------------------------------------------- Database

namespace {

bool valid_glycan_id(std::string_view id) {
  if (!text::is_token(id)) return false;
  return id.find('|') == std::string_view::npos && id.find('@') == std::string_view::npos;
}

} // namespace

GlycanDatabase read_glycan_database(std::istream& in, const ResidueRegistry& registry) {
  GlycanDatabase db;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  std::size_t record_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto view = text::trim(line);
    if (view.empty() || view.front() == '#') continue;
    ++record_no;
    auto fields = text::split(line, '\t');
    if (fields.size() != 3) {
      db.issues.push_back({record_no, line_no, "expected 3 tab-separated fields"});
      continue;
    }
    std::string id(text::trim(fields[0]));
    if (!valid_glycan_id(id)) {
      db.issues.push_back({record_no, line_no, "invalid glycan id '" + id + "'"});
      continue;
    }
    if (seen.count(id)) {
      db.issues.push_back({record_no, line_no, "duplicate glycan id '" + id + "'"});
      continue;
    }
    try {
      auto g = parse_structure(text::trim(fields[1]), registry, id);
      db.records.push_back({std::move(g), std::string(text::trim(fields[2]))});
      seen.insert(id);
    } catch (const InputError& e) {
      db.issues.push_back({record_no, line_no, e.what()});
    }
  }
  return db;
}

void write_glycan_database(std::ostream& out, const std::vector<GlycanRecord>& records) {
  for (const auto& r : records)
    out << r.id() << '\t' << r.structure.serialize() << '\t' << r.glycan_class << '\n';
}

} // namespace glyco
