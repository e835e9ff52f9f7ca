#pragma once

// Run settings: tolerances, ion calculus, per-level fragmentation and the
// classifier's smoothing, read from a key = value text file.

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "glyco/fragmenter.hpp"
#include "glyco/glycan.hpp"
#include "glyco/ion.hpp"

namespace glyco {

/// Absent-edge handling for the classifier: a fixed floor, or the m-estimate
/// (edge + m*p) / (childTotal + m).
struct SmoothingConfig {
  enum class Kind { floor, m_estimate };
  Kind kind = Kind::floor;
  double floor = 0.1;
  double m = 1.0;
  double p = 0.1;

  static SmoothingConfig fixed_floor(double value);
  static SmoothingConfig m_estimate(double m, double p);
  /// "floor 0.1" or "m-estimate m=2 p=0.05".
  static SmoothingConfig parse(std::string_view text);
  std::string to_string() const;
};

struct RunSettings {
  MzTolerance ms1_tolerance{10.0, ToleranceUnit::ppm, MsScope::MS1};
  MzTolerance msn_tolerance{0.5, ToleranceUnit::Da, MsScope::MSn};
  int max_charge = 3;
  int max_exchanges = 3;
  std::vector<ChargeCarrier> carriers;
  std::vector<ExchangeSpecies> exchanges;
  std::vector<NeutralLoss> losses;
  Derivatization derivatization = Derivatization::permethylated;
  int max_undermethylation = 1;
  int max_ms_level = 3;
  std::optional<int> top_k = 1;
  int threads = 1;
  SmoothingConfig smoothing;
  FragmentationSettings fragmentation;

  /// Throws LineError for malformed lines, InputError for invalid values.
  static RunSettings parse(std::istream& in, const MassModel& model = MassModel::defaults());
  static RunSettings parse_text(std::string_view text, const MassModel& model = MassModel::defaults());
  /// The shipped settings (config/run.cfg).
  static const RunSettings& defaults();

  /// Canonical text; parse(to_text()) reproduces these settings.
  std::string to_text() const;

  /// Losses usable at `level` given the derivatization.
  std::vector<NeutralLoss> level_losses(int level) const;
  /// Configurations for precursor matching: carriers and exchanges, no losses.
  IonSettings precursor_ion_settings() const;
  /// Configurations for fragment peaks at `level`, charges up to `max_charge`.
  IonSettings fragment_ion_settings(int level, int max_charge) const;

  void validate() const;
};

} // namespace glyco
