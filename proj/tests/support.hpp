#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "glyco/glycan.hpp"
#include "glyco/sage.hpp"
#include "glyco/spectra.hpp"

namespace glyco::testing {

// Independent monoisotopic masses for oracles.
inline constexpr double kC = 12.0;
inline constexpr double kH = 1.00782503207;
inline constexpr double kN = 14.0030740048;
inline constexpr double kO = 15.99491461956;
inline constexpr double kNa = 22.9897692809;
inline constexpr double kElectron = 0.00054857990946;

inline double formula_mass(int c, int h, int n, int o) { return c * kC + h * kH + n * kN + o * kO; }

/// Random tree of `size` residues over `codes`, linkage positions unique per parent.
inline GlycanStructure random_tree(std::mt19937_64& rng, int size, const std::vector<std::string>& codes,
                                   std::string id = "T") {
  std::uniform_int_distribution<std::size_t> pick(0, codes.size() - 1);
  std::vector<GlycanStructure::Draft> nodes(static_cast<std::size_t>(size));
  std::vector<int> parent(static_cast<std::size_t>(size), -1);
  std::vector<std::vector<int>> used(static_cast<std::size_t>(size));
  for (int k = 0; k < size; ++k) {
    nodes[k].code = codes[pick(rng)];
    if (k == 0) continue;
    for (;;) {
      int p = std::uniform_int_distribution<int>(0, k - 1)(rng);
      int pos = std::uniform_int_distribution<int>(2, 6)(rng);
      bool taken = false;
      for (int u : used[p]) taken = taken || u == pos;
      if (taken) continue;
      used[p].push_back(pos);
      parent[k] = p;
      nodes[k].link = Linkage{"b1", pos};
      break;
    }
  }
  for (int k = size - 1; k > 0; --k) nodes[parent[k]].children.push_back(nodes[k]);
  return GlycanStructure(std::move(id), nodes[0]);
}

inline GlycanStructure linear_chain(int n, const std::string& code = "Hex") {
  GlycanStructure::Draft d{code, {}, {}};
  for (int i = 1; i < n; ++i) {
    GlycanStructure::Draft up{code, {}, {}};
    d.link = Linkage{"b1", 4};
    up.children.push_back(d);
    d = up;
  }
  return GlycanStructure("chain" + std::to_string(n), d);
}

/// The two-glycan graph of the worked example: G1 and G2 share one bucket.
inline SageGraph example_graph(double precursor_mz = 1000.0) {
  SageGraph g;
  const auto g1 = g.root_label("G1", precursor_mz);
  const auto g2 = g.root_label("G2", precursor_mz);
  g.add_node(0, g1, 50);
  g.add_node(0, g2, 40);
  g.add_node(1, "F1", 50);
  g.add_node(1, "F3", 60);
  g.add_node(1, "F4", 15);
  g.add_node(2, "F7", 25);
  g.add_edge(0, g1, "F1", 50);
  g.add_edge(0, g1, "F3", 20);
  g.add_edge(0, g2, "F3", 40);
  g.add_edge(0, g2, "F4", 15);
  g.add_edge(1, "F3", "F7", 10);
  g.add_edge(1, "F4", "F7", 15);
  return g;
}

inline ScanFeatures example_features(double precursor_mz = 1000.0) {
  return {precursor_mz, {{"F1", "F3"}, {"F7"}}};
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string text_of_first_line(const std::string& text) { return text.substr(0, text.find('\n')); }

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("glyco_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }

private:
  std::filesystem::path path_;
};

} // namespace glyco::testing
