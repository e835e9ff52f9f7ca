#include "glyco/ion.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>

#include "glyco/errors.hpp"
#include "glyco/text.hpp"

namespace glyco {

ChargeCarrier ChargeCarrier::from_formula(std::string name, int charge, const Formula& formula,
                                          const ElementMassTable& elements) {
  if (charge == 0) throw InputError("carrier '" + name + "' has zero charge");
  return ChargeCarrier{std::move(name), elements.mass(formula) - charge * elements.electron(),
                       charge};
}

IonConfiguration::IonConfiguration(std::vector<CarrierCount> carriers,
                                   std::vector<NeutralExchange> exchanges,
                                   std::vector<LossCount> losses)
    : carriers_(std::move(carriers)), exchanges_(std::move(exchanges)), losses_(std::move(losses)) {
  int sign = 0;
  for (const auto& c : carriers_) {
    if (c.count <= 0) throw InputError("carrier count must be positive");
    if (c.carrier.charge == 0) throw InputError("carrier '" + c.carrier.name + "' has zero charge");
    int s = c.carrier.charge > 0 ? 1 : -1;
    if (sign != 0 && s != sign) throw InputError("mixed-polarity carriers in one ion");
    sign = s;
    charge_ += c.count * c.carrier.charge;
  }
  if (charge_ == 0) throw InputError("ion configuration has zero total charge");
  for (const auto& e : exchanges_)
    if (e.count < 0) throw InputError("negative exchange count");
  for (const auto& l : losses_) {
    if (l.count < 0) throw InputError("negative loss count");
    if (!(l.loss.mass > 0.0)) throw InputError("neutral loss mass must be positive");
  }
}

int IonConfiguration::exchange_count() const {
  int n = 0;
  for (const auto& e : exchanges_) n += e.count;
  return n;
}

int IonConfiguration::loss_count() const {
  int n = 0;
  for (const auto& l : losses_) n += l.count;
  return n;
}

double IonConfiguration::mass_shift() const {
  double shift = 0.0;
  for (const auto& c : carriers_) shift += c.count * c.carrier.mass_delta;
  for (const auto& e : exchanges_) shift += e.count * e.species.delta();
  for (const auto& l : losses_) shift -= l.count * l.loss.mass;
  return shift;
}

std::string IonConfiguration::signature() const {
  std::string s = "z=" + std::to_string(charge_) + ":";
  bool first = true;
  for (const auto& c : carriers_) {
    if (!first) s += ',';
    s += c.carrier.name + "*" + std::to_string(c.count);
    first = false;
  }
  first = true;
  for (const auto& e : exchanges_) {
    if (e.count == 0) continue;
    s += first ? ";x:" : ",";
    s += e.species.name + "*" + std::to_string(e.count);
    first = false;
  }
  first = true;
  for (const auto& l : losses_) {
    if (l.count == 0) continue;
    s += first ? ";l:" : ",";
    s += l.loss.name + "*" + std::to_string(l.count);
    first = false;
  }
  return s;
}

MzTolerance MzTolerance::parse(std::string_view text, MsScope scope) {
  auto parts = text::split_ws(text);
  if (parts.size() != 2) throw InputError("tolerance must be '<value> Da|ppm'");
  MzTolerance tol;
  tol.value = text::parse_double(parts[0], "tolerance");
  if (parts[1] == "Da")
    tol.unit = ToleranceUnit::Da;
  else if (parts[1] == "ppm")
    tol.unit = ToleranceUnit::ppm;
  else
    throw InputError("unknown tolerance unit '" + std::string(parts[1]) + "'");
  if (!(tol.value > 0.0)) throw InputError("tolerance must be positive");
  tol.applies_to = scope;
  return tol;
}

std::string MzTolerance::to_string() const {
  return text::format_double(value) + (unit == ToleranceUnit::Da ? " Da" : " ppm");
}

double MzTolerance::window(double theoretical) const {
  return unit == ToleranceUnit::Da ? value : std::abs(theoretical) * value * 1e-6;
}

double mz(double neutral_mass, const IonConfiguration& config) {
  if (config.charge() == 0) throw InputError("ion configuration has zero total charge");
  return (neutral_mass + config.mass_shift()) / config.abs_charge();
}

bool matches(double observed, double theoretical, const MzTolerance& tol) {
  return std::abs(observed - theoretical) <= tol.window(theoretical);
}

namespace {

// Multisets of `size` drawn from `n` kinds, as non-decreasing index vectors,
// in lexicographic order.
void multisets(int n, int size, std::vector<std::vector<int>>& out) {
  std::vector<int> current;
  std::function<void(int)> rec = [&](int start) {
    if (static_cast<int>(current.size()) == size) {
      out.push_back(current);
      return;
    }
    for (int i = start; i < n; ++i) {
      current.push_back(i);
      rec(i);
      current.pop_back();
    }
  };
  rec(0);
}

std::vector<int> counts_of(const std::vector<int>& multiset, int n) {
  std::vector<int> counts(n, 0);
  for (int i : multiset) ++counts[i];
  return counts;
}

} // namespace

std::vector<IonConfiguration> enumerate_ion_configurations(const IonSettings& settings) {
  if (settings.max_charge < 1) throw InputError("max_charge must be at least 1");
  if (settings.carriers.empty()) throw InputError("no charge carriers defined");
  if (settings.max_exchanges < 0) throw InputError("max_exchanges must be non-negative");
  int sign = 0;
  for (const auto& c : settings.carriers) {
    if (c.charge == 0) throw InputError("carrier '" + c.name + "' has zero charge");
    int s = c.charge > 0 ? 1 : -1;
    if (sign != 0 && s != sign) throw InputError("mixed-polarity carrier set");
    sign = s;
  }

  // Distinct carriers only; repeated definitions collapse.
  std::vector<ChargeCarrier> carriers;
  for (const auto& c : settings.carriers)
    if (std::find(carriers.begin(), carriers.end(), c) == carriers.end()) carriers.push_back(c);
  std::vector<ExchangeSpecies> exchanges;
  for (const auto& e : settings.exchanges)
    if (std::find(exchanges.begin(), exchanges.end(), e) == exchanges.end()) exchanges.push_back(e);
  const int nc = static_cast<int>(carriers.size());
  const int nx = static_cast<int>(exchanges.size());

  std::vector<std::vector<int>> carrier_sets;
  for (int size = 1; size <= settings.max_charge; ++size) multisets(nc, size, carrier_sets);

  std::vector<std::vector<int>> exchange_sets;
  if (nx > 0)
    for (int size = 0; size <= settings.max_exchanges; ++size) multisets(nx, size, exchange_sets);
  else
    exchange_sets.push_back({});

  std::vector<std::vector<int>> loss_vectors{{}};
  for (const auto& loss : settings.losses) {
    if (!(loss.mass > 0.0)) throw InputError("neutral loss '" + loss.name + "' mass must be positive");
    std::vector<std::vector<int>> next;
    for (const auto& v : loss_vectors)
      for (int k = 0; k <= loss.max_count; ++k) {
        auto w = v;
        w.push_back(k);
        next.push_back(std::move(w));
      }
    loss_vectors = std::move(next);
  }

  struct Entry {
    int abs_z;
    std::size_t carrier_rank;
    std::size_t exchange_rank;
    std::size_t loss_rank;
    IonConfiguration config;
  };
  std::vector<Entry> entries;
  for (std::size_t ci = 0; ci < carrier_sets.size(); ++ci) {
    auto ccounts = counts_of(carrier_sets[ci], nc);
    std::vector<IonConfiguration::CarrierCount> cc;
    int z = 0;
    for (int i = 0; i < nc; ++i)
      if (ccounts[i] > 0) {
        cc.push_back({carriers[i], ccounts[i]});
        z += ccounts[i] * carriers[i].charge;
      }
    if (std::abs(z) > settings.max_charge || z == 0) continue;
    for (std::size_t xi = 0; xi < exchange_sets.size(); ++xi) {
      auto xcounts = counts_of(exchange_sets[xi], nx);
      std::vector<NeutralExchange> xs;
      for (int i = 0; i < nx; ++i)
        if (xcounts[i] > 0) xs.push_back({exchanges[i], xcounts[i]});
      for (std::size_t li = 0; li < loss_vectors.size(); ++li) {
        std::vector<IonConfiguration::LossCount> ls;
        for (std::size_t i = 0; i < settings.losses.size(); ++i)
          if (loss_vectors[li][i] > 0) ls.push_back({settings.losses[i], loss_vectors[li][i]});
        entries.push_back({std::abs(z), ci, xi, li, IonConfiguration(cc, xs, ls)});
      }
    }
  }
  std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return std::tie(a.abs_z, a.carrier_rank, a.exchange_rank, a.loss_rank) <
           std::tie(b.abs_z, b.carrier_rank, b.exchange_rank, b.loss_rank);
  });

  std::vector<IonConfiguration> out;
  std::set<std::string> seen;
  for (auto& e : entries)
    if (seen.insert(e.config.signature()).second) out.push_back(std::move(e.config));
  return out;
}

} // namespace glyco
