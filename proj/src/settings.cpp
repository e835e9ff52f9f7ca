#include "glyco/settings.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <set>
#include <sstream>

#include "glyco/defaults.hpp"
#include "glyco/errors.hpp"
#include "glyco/text.hpp"

namespace glyco {

SmoothingConfig SmoothingConfig::fixed_floor(double value) {
  if (!(value > 0.0 && value < 1.0)) throw InputError("smoothing floor must be in (0,1)");
  SmoothingConfig s;
  s.kind = Kind::floor;
  s.floor = value;
  return s;
}

SmoothingConfig SmoothingConfig::m_estimate(double m, double p) {
  if (!(m > 0.0)) throw InputError("m-estimate m must be positive");
  if (!(p > 0.0 && p <= 1.0)) throw InputError("m-estimate prior must be in (0,1]");
  SmoothingConfig s;
  s.kind = Kind::m_estimate;
  s.m = m;
  s.p = p;
  return s;
}

SmoothingConfig SmoothingConfig::parse(std::string_view text) {
  auto f = text::split_ws(text);
  if (f.size() == 2 && f[0] == "floor") return fixed_floor(text::parse_double(f[1], "smoothing floor"));
  if (f.size() == 3 && f[0] == "m-estimate" && text::starts_with(f[1], "m=") &&
      text::starts_with(f[2], "p="))
    return m_estimate(text::parse_double(f[1].substr(2), "m"), text::parse_double(f[2].substr(2), "p"));
  throw InputError("smoothing must be 'floor <p>' or 'm-estimate m=<m> p=<p>'");
}

std::string SmoothingConfig::to_string() const {
  if (kind == Kind::floor) return "floor " + text::format_double(floor);
  return "m-estimate m=" + text::format_double(m) + " p=" + text::format_double(p);
}

namespace {

// name=value options following a directive's positional fields.
std::map<std::string, std::string> options(const std::vector<std::string_view>& f, std::size_t from) {
  std::map<std::string, std::string> out;
  for (std::size_t i = from; i < f.size(); ++i) {
    auto eq = f[i].find('=');
    if (eq == std::string_view::npos || eq == 0) throw InputError("expected name=value, got '" + std::string(f[i]) + "'");
    if (!out.emplace(std::string(f[i].substr(0, eq)), std::string(f[i].substr(eq + 1))).second)
      throw InputError("repeated option '" + std::string(f[i].substr(0, eq)) + "'");
  }
  return out;
}

std::string take(std::map<std::string, std::string>& opts, const std::string& key) {
  auto it = opts.find(key);
  if (it == opts.end()) return {};
  auto v = it->second;
  opts.erase(it);
  return v;
}

void reject_extra(const std::map<std::string, std::string>& opts) {
  if (!opts.empty()) throw InputError("unknown option '" + opts.begin()->first + "'");
}

double mass_option(std::map<std::string, std::string>& opts, const ElementMassTable& elements) {
  auto mass = take(opts, "mass");
  auto formula = take(opts, "formula");
  if (mass.empty() == formula.empty()) throw InputError("give exactly one of mass= or formula=");
  return mass.empty() ? elements.mass(Formula::parse(formula)) : text::parse_double(mass, "mass");
}

int int_value(std::string_view v, const char* what) { return static_cast<int>(text::parse_int(v, what)); }

} // namespace

RunSettings RunSettings::parse(std::istream& in, const MassModel& model) {
  RunSettings s;
  std::set<std::string> seen;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    auto t = text::trim(line);
    if (t.empty() || t.front() == '#') continue;
    try {
      auto eq = t.find('=');
      auto f = text::split_ws(t);
      if (f[0] == "carrier") {
        if (f.size() < 2) throw InputError("carrier needs a name");
        auto opts = options(f, 2);
        auto charge = take(opts, "charge");
        if (charge.empty()) throw InputError("carrier needs charge=");
        int z = int_value(charge, "charge");
        if (z == 0) throw InputError("carrier charge cannot be 0");
        ChargeCarrier c;
        if (opts.count("formula")) {
          c = ChargeCarrier::from_formula(std::string(f[1]), z, Formula::parse(take(opts, "formula")),
                                          model.elements);
        } else {
          auto mass = take(opts, "mass");
          if (mass.empty()) throw InputError("carrier needs mass= or formula=");
          c = ChargeCarrier{std::string(f[1]), text::parse_double(mass, "mass"), z};
        }
        reject_extra(opts);
        s.carriers.push_back(c);
      } else if (f[0] == "exchange") {
        if (f.size() < 2) throw InputError("exchange needs a name");
        auto opts = options(f, 2);
        auto out_text = take(opts, "out"), in_text = take(opts, "in");
        ExchangeSpecies x{std::string(f[1]), {}, {}};
        auto species = [&](const std::string& v, const char* what) -> Species {
          if (v.empty()) throw InputError(std::string("exchange needs ") + what + "=");
          auto colon = v.find(':');
          if (colon != std::string::npos) return {v.substr(0, colon), text::parse_double(v.substr(colon + 1), what)};
          return {v, model.elements.mass(Formula::parse(v))};
        };
        x.out = species(out_text, "out");
        x.in = species(in_text, "in");
        reject_extra(opts);
        s.exchanges.push_back(x);
      } else if (f[0] == "loss") {
        if (f.size() < 2) throw InputError("loss needs a name");
        auto opts = options(f, 2);
        NeutralLoss l;
        l.name = std::string(f[1]);
        auto max = take(opts, "max");
        l.max_count = max.empty() ? 1 : int_value(max, "max");
        auto when = take(opts, "when");
        if (!when.empty() && when != "permethylated") throw InputError("when= must be 'permethylated'");
        l.permethylated_only = !when.empty();
        l.mass = mass_option(opts, model.elements);
        reject_extra(opts);
        if (!(l.mass > 0.0)) throw InputError("loss mass must be positive");
        if (l.max_count < 0) throw InputError("loss max must be non-negative");
        s.losses.push_back(l);
      } else if (f[0] == "level") {
        if (f.size() < 2) throw InputError("level needs a number");
        int level = int_value(f[1], "level");
        if (level < 2) throw InputError("fragmentation levels start at 2");
        auto opts = options(f, 2);
        LevelFragmentation lv;
        lv.types.clear();
        if (auto types = take(opts, "types"); !types.empty() && types != "-")
          for (auto tok : text::split(types, ',')) {
            if (tok.size() != 1) throw InputError("fragment type must be one of B,C,Y,Z");
            lv.types.insert(parse_fragment_type(tok[0]));
          }
        if (auto mc = take(opts, "max_cleavages"); !mc.empty()) lv.max_cleavages = int_value(mc, "max_cleavages");
        if (auto ls = take(opts, "losses"); !ls.empty() && ls != "-")
          for (auto tok : text::split(ls, ',')) lv.losses.emplace_back(tok);
        if (auto mu = take(opts, "max_undermethylation"); !mu.empty())
          lv.max_undermethylation = int_value(mu, "max_undermethylation");
        reject_extra(opts);
        if (lv.max_cleavages < 1) throw InputError("max_cleavages must be at least 1");
        if (!s.fragmentation.levels.emplace(level, lv).second)
          throw InputError("level " + std::to_string(level) + " defined twice");
      } else if (eq != std::string_view::npos) {
        std::string key(text::trim(t.substr(0, eq)));
        auto value = text::trim(t.substr(eq + 1));
        if (!seen.insert(key).second) throw InputError("key '" + key + "' set twice");
        if (key == "ms1_tolerance") s.ms1_tolerance = MzTolerance::parse(value, MsScope::MS1);
        else if (key == "msn_tolerance") s.msn_tolerance = MzTolerance::parse(value, MsScope::MSn);
        else if (key == "max_charge") s.max_charge = int_value(value, "max_charge");
        else if (key == "max_exchanges") s.max_exchanges = int_value(value, "max_exchanges");
        else if (key == "derivatization") s.derivatization = parse_derivatization(value);
        else if (key == "max_undermethylation") s.max_undermethylation = int_value(value, "max_undermethylation");
        else if (key == "max_ms_level") s.max_ms_level = int_value(value, "max_ms_level");
        else if (key == "top_k") s.top_k = value == "all" ? std::nullopt : std::optional<int>(int_value(value, "top_k"));
        else if (key == "threads") s.threads = int_value(value, "threads");
        else if (key == "smoothing") s.smoothing = SmoothingConfig::parse(value);
        else throw InputError("unknown key '" + key + "'");
      } else {
        throw InputError("unrecognised line");
      }
    } catch (const LineError&) {
      throw;
    } catch (const InputError& e) {
      throw LineError(e.what(), n);
    }
  }
  s.validate();
  return s;
}

RunSettings RunSettings::parse_text(std::string_view text, const MassModel& model) {
  std::istringstream in{std::string(text)};
  return parse(in, model);
}

const RunSettings& RunSettings::defaults() {
  static const RunSettings s = parse_text(defaults::run_settings_text);
  return s;
}

void RunSettings::validate() const {
  if (max_charge < 1) throw InputError("max_charge must be at least 1");
  if (max_exchanges < 0) throw InputError("max_exchanges must be non-negative");
  if (max_undermethylation < 0) throw InputError("max_undermethylation must be non-negative");
  if (max_ms_level < 1) throw InputError("max_ms_level must be at least 1");
  if (top_k && *top_k < 1) throw InputError("top_k must be at least 1");
  if (threads < 1) throw InputError("threads must be at least 1");
  if (carriers.empty()) throw InputError("no charge carriers defined");
  int sign = 0;
  for (const auto& c : carriers) {
    int sg = c.charge > 0 ? 1 : -1;
    if (sign && sg != sign) throw InputError("mixed-polarity carrier set");
    sign = sg;
  }
  for (int level = 2; level <= max_ms_level; ++level) {
    const auto& lv = fragmentation.at(level);
    for (const auto& name : lv.losses)
      if (std::none_of(losses.begin(), losses.end(), [&](const NeutralLoss& l) { return l.name == name; }))
        throw InputError("level " + std::to_string(level) + " references unknown loss '" + name + "'");
  }
}

std::string RunSettings::to_text() const {
  std::ostringstream o;
  o << "ms1_tolerance = " << ms1_tolerance.to_string() << '\n'
    << "msn_tolerance = " << msn_tolerance.to_string() << '\n'
    << "max_charge = " << max_charge << '\n'
    << "max_exchanges = " << max_exchanges << '\n'
    << "derivatization = " << glyco::to_string(derivatization) << '\n'
    << "max_undermethylation = " << max_undermethylation << '\n'
    << "max_ms_level = " << max_ms_level << '\n'
    << "top_k = " << (top_k ? std::to_string(*top_k) : "all") << '\n'
    << "threads = " << threads << '\n'
    << "smoothing = " << smoothing.to_string() << '\n';
  for (const auto& c : carriers)
    o << "carrier " << c.name << " charge=" << c.charge << " mass=" << text::format_double(c.mass_delta) << '\n';
  for (const auto& x : exchanges)
    o << "exchange " << x.name << " out=" << x.out.name << ':' << text::format_double(x.out.mass)
      << " in=" << x.in.name << ':' << text::format_double(x.in.mass) << '\n';
  for (const auto& l : losses)
    o << "loss " << l.name << " mass=" << text::format_double(l.mass) << " max=" << l.max_count
      << (l.permethylated_only ? " when=permethylated" : "") << '\n';
  for (const auto& [level, lv] : fragmentation.levels) {
    std::string types, losses_text;
    for (auto t : lv.types) types += std::string(types.empty() ? "" : ",") + to_char(t);
    for (const auto& l : lv.losses) losses_text += (losses_text.empty() ? "" : ",") + l;
    o << "level " << level << " types=" << (types.empty() ? "-" : types)
      << " max_cleavages=" << lv.max_cleavages << " losses=" << (losses_text.empty() ? "-" : losses_text)
      << " max_undermethylation=" << lv.max_undermethylation << '\n';
  }
  return o.str();
}

std::vector<NeutralLoss> RunSettings::level_losses(int level) const {
  std::vector<NeutralLoss> out;
  for (const auto& name : fragmentation.at(level).losses)
    for (const auto& l : losses)
      if (l.name == name && (!l.permethylated_only || derivatization == Derivatization::permethylated))
        out.push_back(l);
  return out;
}

IonSettings RunSettings::precursor_ion_settings() const {
  return IonSettings{max_charge, carriers, exchanges, max_exchanges, {}};
}

IonSettings RunSettings::fragment_ion_settings(int level, int charge) const {
  return IonSettings{std::max(1, std::min(charge, max_charge)), carriers, exchanges, max_exchanges,
                     level_losses(level)};
}

} // namespace glyco
