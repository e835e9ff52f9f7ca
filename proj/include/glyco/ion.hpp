#pragma once

// Ion calculus: charge carriers, neutral exchanges and neutral losses that map
// a neutral mass onto an observed m/z, plus tolerance matching.

#include <string>
#include <string_view>
#include <vector>

#include "glyco/glycan.hpp"

namespace glyco {

struct ChargeCarrier {
  std::string name;
  double mass_delta = 0.0; // ion mass added per carrier (Da, signed)
  int charge = 1;

  /// Carrier mass from an atomic formula: formula mass - charge * electron.
  static ChargeCarrier from_formula(std::string name, int charge, const Formula& formula,
                                    const ElementMassTable& elements);
  friend bool operator==(const ChargeCarrier&, const ChargeCarrier&) = default;
};

struct Species {
  std::string name;
  double mass = 0.0;
  friend bool operator==(const Species&, const Species&) = default;
};

/// Replacement of `out` by `in` with no net charge change (e.g. H by Na).
struct ExchangeSpecies {
  std::string name;
  Species out;
  Species in;

  double delta() const { return in.mass - out.mass; }
  friend bool operator==(const ExchangeSpecies&, const ExchangeSpecies&) = default;
};

struct NeutralExchange {
  ExchangeSpecies species;
  int count = 0;
};

struct NeutralLoss {
  std::string name;
  double mass = 0.0;
  int max_count = 1;
  bool permethylated_only = false;
  friend bool operator==(const NeutralLoss&, const NeutralLoss&) = default;
};

/// Carriers, exchanges and losses attached to one neutral molecule.
class IonConfiguration {
public:
  struct CarrierCount {
    ChargeCarrier carrier;
    int count;
  };
  struct LossCount {
    NeutralLoss loss;
    int count;
  };

  IonConfiguration() = default;
  /// Validates: at least one carrier, one polarity, non-zero total charge.
  IonConfiguration(std::vector<CarrierCount> carriers, std::vector<NeutralExchange> exchanges,
                   std::vector<LossCount> losses);

  const std::vector<CarrierCount>& carriers() const noexcept { return carriers_; }
  const std::vector<NeutralExchange>& exchanges() const noexcept { return exchanges_; }
  const std::vector<LossCount>& losses() const noexcept { return losses_; }

  /// Signed total charge.
  int charge() const noexcept { return charge_; }
  int abs_charge() const noexcept { return charge_ < 0 ? -charge_ : charge_; }
  int exchange_count() const;
  int loss_count() const;

  /// Mass added to the neutral before dividing by |z|.
  double mass_shift() const;

  /// Whitespace-free canonical text, e.g. "z=2:Na+*2;x:H>Na*1;l:H2O*1".
  std::string signature() const;

private:
  std::vector<CarrierCount> carriers_;
  std::vector<NeutralExchange> exchanges_;
  std::vector<LossCount> losses_;
  int charge_ = 0;
};

enum class ToleranceUnit { Da, ppm };
enum class MsScope { MS1, MSn };

struct MzTolerance {
  double value = 0.0;
  ToleranceUnit unit = ToleranceUnit::Da;
  MsScope applies_to = MsScope::MSn;

  /// Parses "0.5 Da" or "10 ppm".
  static MzTolerance parse(std::string_view text, MsScope scope);
  std::string to_string() const;

  /// Half-width in Da of the window anchored on `theoretical`.
  double window(double theoretical) const;
};

/// (neutral + shift) / |z|. Throws InputError for a zero-charge configuration.
double mz(double neutral_mass, const IonConfiguration& config);

/// Da: |obs - theo| <= value. ppm: |obs - theo| <= theo * value * 1e-6
/// (window anchored on the theoretical value).
bool matches(double observed, double theoretical, const MzTolerance& tol);

struct IonSettings {
  int max_charge = 1;
  std::vector<ChargeCarrier> carriers;
  std::vector<ExchangeSpecies> exchanges;
  int max_exchanges = 0;
  std::vector<NeutralLoss> losses;
};

/// Every carrier multiset of size 1..max_charge with |z| <= max_charge, times
/// exchange multisets of total size 0..max_exchanges, times loss counts
/// 0..max_count. Ordered by ascending |z|, carrier multiset, exchanges,
/// losses; duplicate-free.
std::vector<IonConfiguration> enumerate_ion_configurations(const IonSettings& settings);

} // namespace glyco
