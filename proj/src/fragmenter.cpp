#include "glyco/fragmenter.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <set>

#include "glyco/errors.hpp"

namespace glyco {

char to_char(FragmentType t) {
  switch (t) {
  case FragmentType::B: return 'B';
  case FragmentType::C: return 'C';
  case FragmentType::Y: return 'Y';
  case FragmentType::Z: return 'Z';
  }
  return '?';
}

FragmentType parse_fragment_type(char c) {
  switch (c) {
  case 'B': return FragmentType::B;
  case 'C': return FragmentType::C;
  case 'Y': return FragmentType::Y;
  case 'Z': return FragmentType::Z;
  default: throw InputError(std::string("unknown fragment type '") + c + "'");
  }
}

const LevelFragmentation& FragmentationSettings::at(int level) const {
  auto it = levels.find(level);
  if (it == levels.end())
    throw InputError("no fragmentation settings for MS level " + std::to_string(level));
  return it->second;
}

Candidate Candidate::from_glycan(const GlycanStructure& g, const DerivatizationState& deriv,
                                 const MassModel& model) {
  if (g.empty()) throw InputError("empty glycan structure");
  Candidate c;
  c.structure_ = g;
  c.lower_marks_.assign(g.size(), {});
  c.methyl_sites_ = methylation_sites(g, model.residues);
  c.permethylated_ = deriv.is_permethylated();
  c.missing_ = c.permethylated_ ? deriv.missing_methyls : 0;
  if (c.missing_ < 0) throw InputError("negative missing methyl count");
  int sites = std::accumulate(c.methyl_sites_.begin(), c.methyl_sites_.end(), 0);
  if (c.missing_ > sites)
    throw InputError("glycan '" + g.id() + "' has only " + std::to_string(sites) +
                     " methylation sites");
  return c;
}

std::string Candidate::root_glycan_id() const {
  const auto& s = id();
  return s.substr(0, s.find('|'));
}

int Candidate::methyl_count() const {
  if (!permethylated_) return 0;
  return std::accumulate(methyl_sites_.begin(), methyl_sites_.end(), 0) - missing_;
}

double Candidate::neutral_mass(const MassModel& model) const {
  const auto& el = model.elements;
  double m = el.water();
  for (const auto& n : structure_.nodes()) m += el.mass(model.residues.at(n.code).base_composition);
  if (reducing_end_ == FragmentType::B) m -= el.water();
  for (const auto& marks : lower_marks_)
    for (auto t : marks)
      if (t == FragmentType::Z) m -= el.water();
  m += methyl_count() * el.methylene();
  return m;
}

std::string Candidate::feature_key() const {
  std::function<std::string(int)> expr = [&](int i) {
    const auto& n = structure_.node(i);
    std::string s = n.code;
    if (!lower_marks_[i].empty()) {
      std::string marks;
      for (auto t : lower_marks_[i]) marks += to_char(t);
      std::sort(marks.begin(), marks.end());
      s += "{" + marks + "}";
    }
    if (!n.children.empty()) {
      std::vector<std::string> parts;
      for (int c : n.children) parts.push_back(expr(c));
      std::sort(parts.begin(), parts.end());
      s += "(";
      for (std::size_t k = 0; k < parts.size(); ++k) s += (k ? "," : "") + parts[k];
      s += ")";
    }
    return s;
  };
  char end = reducing_end_ ? to_char(*reducing_end_) : 'R';
  return std::string(1, end) + ":" + expr(0) + "|u" + std::to_string(missing_);
}

class FragmentBuilder {
public:
  FragmentBuilder(const Candidate& parent, const MassModel& model)
      : p_(parent), g_(parent.structure()), model_(model), n_(static_cast<int>(g_.size())) {
    size_.resize(n_);
    for (int i = 0; i < n_; ++i) size_[i] = g_.subtree_size(i);
    // Edge labels: ordinal plus a disambiguating letter when ordinals repeat.
    std::map<int, std::vector<int>> by_size;
    for (int i = 1; i < n_; ++i) by_size[size_[i]].push_back(i);
    suffix_.assign(n_, "");
    for (const auto& [s, edges] : by_size)
      if (edges.size() > 1)
        for (std::size_t k = 0; k < edges.size(); ++k) suffix_[edges[k]] = std::string(1, char('a' + k));
  }

  std::string token(const Cleavage& c) const {
    int ordinal = c.reducing_side ? n_ - size_[c.edge] : size_[c.edge];
    return std::string(1, to_char(c.type)) + std::to_string(ordinal) + suffix_[c.edge];
  }

  // Substructure rooted at `top` with the subtrees below `cuts` removed.
  Candidate build(int top, const std::vector<Cleavage>& cuts, std::optional<FragmentType> upper,
                  int missing, const std::string& id) const {
    std::set<int> removed;
    std::map<int, std::vector<FragmentType>> new_marks;
    for (const auto& c : cuts)
      if (c.reducing_side) {
        removed.insert(c.edge);
        new_marks[g_.node(c.edge).parent].push_back(c.type);
      }
    std::function<GlycanStructure::Draft(int)> draft = [&](int i) {
      const auto& node = g_.node(i);
      GlycanStructure::Draft d{node.code, i == top ? Linkage{} : node.link, {}, i};
      for (int ch : node.children)
        if (!removed.count(ch)) d.children.push_back(draft(ch));
      return d;
    };
    std::vector<int> tags;
    Candidate c;
    c.structure_ = GlycanStructure(id, draft(top), &tags);
    c.reducing_end_ = top == 0 ? p_.reducing_end() : upper;
    c.permethylated_ = p_.permethylated();
    c.missing_ = missing;
    c.fragment_ = true;
    for (int orig : tags) {
      c.methyl_sites_.push_back(p_.methyl_sites()[orig]);
      auto marks = p_.lower_marks()[orig];
      if (auto it = new_marks.find(orig); it != new_marks.end())
        marks.insert(marks.end(), it->second.begin(), it->second.end());
      std::sort(marks.begin(), marks.end());
      c.lower_marks_.push_back(std::move(marks));
    }
    return c;
  }

  int methyl_sites_in(int top, const std::vector<int>& lower) const {
    int total = 0;
    int end = top + size_[top];
    for (int i = top; i < end;) {
      if (std::find(lower.begin(), lower.end(), i) != lower.end()) {
        i += size_[i];
        continue;
      }
      total += p_.methyl_sites()[i];
      ++i;
    }
    return total;
  }

  int size(int i) const { return size_[i]; }
  int count() const { return n_; }

private:
  const Candidate& p_;
  const GlycanStructure& g_;
  const MassModel& model_;
  int n_;
  std::vector<int> size_;
  std::vector<std::string> suffix_;
};

std::vector<FragmentIon> enumerate_fragments(const Candidate& candidate,
                                             const FragmentationSettings& settings, int level,
                                             const MassModel& model, std::size_t limit) {
  const auto& lv = settings.at(level);
  if (lv.max_cleavages < 1) return {};
  FragmentBuilder builder(candidate, model);
  const int n = builder.count();

  std::vector<FragmentType> upper_types, lower_types;
  for (auto t : lv.types) (keeps_reducing_side(t) ? lower_types : upper_types).push_back(t);

  std::vector<FragmentIon> out;
  std::set<std::string> seen;

  auto emit = [&](int top, const std::vector<int>& lower) {
    const bool has_upper = top != 0;
    if (has_upper && upper_types.empty()) return;
    if (!lower.empty() && lower_types.empty()) return;
    const int fragment_sites = candidate.permethylated() ? builder.methyl_sites_in(top, lower) : 0;
    const int max_u = std::min({std::max(lv.max_undermethylation, 0), candidate.missing_methyls(),
                                fragment_sites});

    const std::vector<std::optional<FragmentType>> uppers =
        has_upper ? std::vector<std::optional<FragmentType>>(upper_types.begin(), upper_types.end())
                  : std::vector<std::optional<FragmentType>>{std::nullopt};
    std::vector<std::size_t> choice(lower.size(), 0);
    for (const auto& up : uppers) {
      std::fill(choice.begin(), choice.end(), 0);
      for (;;) {
        std::vector<Cleavage> cuts;
        if (up) cuts.push_back({top, false, *up});
        for (std::size_t k = 0; k < lower.size(); ++k)
          cuts.push_back({lower[k], true, lower_types[choice[k]]});
        std::string tokens;
        for (const auto& c : cuts) tokens += (tokens.empty() ? "" : "+") + builder.token(c);
        for (int u = 0; u <= max_u; ++u) {
          std::string sig = candidate.id() + "|" + tokens + "|u" + std::to_string(u);
          if (!seen.insert(sig).second) continue;
          if (out.size() >= limit) throw FragmentLimitExceeded(candidate.id(), limit);
          FragmentIon f;
          f.parent_id = candidate.id();
          f.cleavages = cuts;
          f.substructure = builder.build(top, cuts, up, u, sig);
          f.neutral_mass = f.substructure.neutral_mass(model);
          f.signature = std::move(sig);
          f.feature_key = f.substructure.feature_key();
          out.push_back(std::move(f));
        }
        std::size_t k = 0;
        while (k < choice.size() && ++choice[k] == lower_types.size()) choice[k++] = 0;
        if (k == choice.size()) break;
      }
    }
  };

  for (int top = 0; top < n; ++top) {
    const int budget = lv.max_cleavages - (top != 0 ? 1 : 0);
    std::vector<int> lower;
    // Antichains of lower cuts inside subtree(top), in preorder.
    std::function<void(int)> rec = [&](int from) {
      const int total = static_cast<int>(lower.size()) + (top != 0 ? 1 : 0);
      if (total >= 1) emit(top, lower);
      if (static_cast<int>(lower.size()) >= budget) return;
      const int end = top + builder.size(top);
      for (int j = from; j < end; ++j) {
        lower.push_back(j);
        rec(j + builder.size(j));
        lower.pop_back();
      }
    };
    rec(top + 1);
  }
  return out;
}

std::vector<FragmentIon> enumerate_fragments(const GlycanStructure& g,
                                             const DerivatizationState& deriv,
                                             const FragmentationSettings& settings, int level,
                                             const MassModel& model, std::size_t limit) {
  return enumerate_fragments(Candidate::from_glycan(g, deriv, model), settings, level, model, limit);
}

Candidate fragment_as_precursor(const FragmentIon& f) { return f.substructure; }

} // namespace glyco
