#include "metalink/harness/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <sstream>

#include "config_json.hpp"
#include "metalink/errors.hpp"

namespace metalink::harness {

namespace {

[[noreturn]] void bad(std::string_view key, const std::string& why) {
  throw ConfigError(std::string(key) + ": " + why, std::string(key));
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> out;
  if (trim(s).empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto comma = s.find(',', start);
    out.push_back(trim(s.substr(start, comma == std::string_view::npos ? s.npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <class T>
T parse_number(std::string_view key, std::string_view v) {
  T out{};
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc{} || ptr != end || v.empty()) {
    bad(key, "cannot parse '" + std::string(v) + "' as a number");
  }
  return out;
}

std::string number_text(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

template <class T>
struct Codec;

template <class T>
  requires std::is_arithmetic_v<T> && (!std::is_same_v<T, bool>)
struct Codec<T> {
  static T parse(std::string_view key, std::string_view v) {
    if constexpr (std::is_unsigned_v<T>) {
      if (!v.empty() && v.front() == '-') bad(key, "must be non-negative");
    }
    return parse_number<T>(key, v);
  }
  static std::string text(T v) {
    if constexpr (std::is_floating_point_v<T>) {
      return number_text(v);
    } else {
      return std::to_string(v);
    }
  }
  static nlohmann::json json(T v) { return v; }
};

template <>
struct Codec<bool> {
  static bool parse(std::string_view key, std::string_view v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    bad(key, "expected true or false, got '" + std::string(v) + "'");
  }
  static std::string text(bool v) { return v ? "true" : "false"; }
  static nlohmann::json json(bool v) { return v; }
};

template <>
struct Codec<std::optional<double>> {
  static std::optional<double> parse(std::string_view key, std::string_view v) {
    if (v.empty() || v == "none") return std::nullopt;
    return parse_number<double>(key, v);
  }
  static std::string text(const std::optional<double>& v) {
    return v ? number_text(*v) : "none";
  }
  static nlohmann::json json(const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  }
};

template <class T>
struct Codec<std::vector<T>> {
  static std::vector<T> parse(std::string_view key, std::string_view v) {
    std::vector<T> out;
    for (auto item : split_list(v)) out.push_back(Codec<T>::parse(key, item));
    return out;
  }
  static std::string text(const std::vector<T>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) out += ", ";
      out += Codec<T>::text(v[i]);
    }
    return out;
  }
  static nlohmann::json json(const std::vector<T>& v) {
    auto arr = nlohmann::json::array();
    for (const auto& x : v) arr.push_back(Codec<T>::json(x));
    return arr;
  }
};

template <>
struct Codec<Scheme> {
  static Scheme parse(std::string_view key, std::string_view v) {
    if (auto s = parse_scheme(v)) return *s;
    bad(key, "unknown scheme '" + std::string(v) + "'");
  }
  static std::string text(Scheme s) { return std::string(scheme_name(s)); }
  static nlohmann::json json(Scheme s) { return text(s); }
};

// Enums spelled as a fixed list of names.
template <class E, std::size_t N>
struct NamedEnum {
  std::array<std::pair<E, std::string_view>, N> names;

  E parse(std::string_view key, std::string_view v) const {
    for (const auto& [e, name] : names) {
      if (name == v) return e;
    }
    std::string allowed;
    for (const auto& [e, name] : names) allowed += (allowed.empty() ? "" : ", ") + std::string(name);
    bad(key, "expected one of " + allowed + ", got '" + std::string(v) + "'");
  }
  std::string_view text(E e) const {
    for (const auto& [x, name] : names) {
      if (x == e) return name;
    }
    return "unknown";
  }
};

constexpr NamedEnum<SweepAxis, 3> kAxes{{{{SweepAxis::Pilots, "P"},
                                           {SweepAxis::TrainFrames, "train_frames"},
                                           {SweepAxis::Rho, "rho"}}}};
constexpr NamedEnum<Fading, 2> kFading{{{{Fading::Rayleigh, "rayleigh"}, {Fading::Unit, "unit"}}}};
constexpr NamedEnum<Csi, 2> kCsi{{{{Csi::Estimated, "mmse"}, {Csi::Perfect, "perfect"}}}};

template <class E, std::size_t N, const NamedEnum<E, N>& Table>
struct EnumCodec {
  static E parse(std::string_view key, std::string_view v) { return Table.parse(key, v); }
  static std::string text(E e) { return std::string(Table.text(e)); }
  static nlohmann::json json(E e) { return text(e); }
};

template <>
struct Codec<SweepAxis> : EnumCodec<SweepAxis, 3, kAxes> {};
template <>
struct Codec<Fading> : EnumCodec<Fading, 2, kFading> {};
template <>
struct Codec<Csi> : EnumCodec<Csi, 2, kCsi> {};

struct Key {
  std::string_view name;
  std::function<void(ExperimentConfig&, std::string_view)> set;
  std::function<std::string(const ExperimentConfig&)> text;
  std::function<nlohmann::json(const ExperimentConfig&)> json;
};

template <class Access>
Key field(std::string_view name, Access access) {
  using T = std::remove_reference_t<decltype(access(std::declval<ExperimentConfig&>()))>;
  auto get = [access](const ExperimentConfig& c) -> const T& {
    return access(const_cast<ExperimentConfig&>(c));
  };
  return Key{name,
             [access, name](ExperimentConfig& c, std::string_view v) {
               access(c) = Codec<T>::parse(name, v);
             },
             [get](const ExperimentConfig& c) { return Codec<T>::text(get(c)); },
             [get](const ExperimentConfig& c) { return Codec<T>::json(get(c)); }};
}

#define METALINK_KEY(name, expr) field(name, [](ExperimentConfig& c) -> auto& { return expr; })

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      METALINK_KEY("schemes", c.schemes),
      METALINK_KEY("k", c.train.k),
      METALINK_KEY("n", c.train.n),
      METALINK_KEY("L", c.train.taps),
      METALINK_KEY("hidden", c.train.hidden),
      METALINK_KEY("es", c.train.es),
      METALINK_KEY("es_n0_db", c.train.es_n0_db),
      METALINK_KEY("rho", c.train.rho),
      METALINK_KEY("T", c.train.frame_len),
      METALINK_KEY("T_U", c.train.pilots),
      METALINK_KEY("frames", c.train.frames),
      METALINK_KEY("kappa", c.train.kappa),
      METALINK_KEY("kappa_tx", c.train.kappa_tx),
      METALINK_KEY("eta", c.train.eta),
      METALINK_KEY("adapt_steps", c.train.adapt_steps),
      METALINK_KEY("sigma", c.train.sigma),
      METALINK_KEY("first_order", c.train.first_order),
      METALINK_KEY("normalize_by_pilots", c.train.normalize_by_pilots),
      METALINK_KEY("seed", c.train.seed),
      METALINK_KEY("axis", c.axis),
      METALINK_KEY("P", c.test_pilots),
      METALINK_KEY("rho_values", c.rho_values),
      METALINK_KEY("frame_values", c.frame_values),
      METALINK_KEY("payload_blocks", c.payload_blocks),
      METALINK_KEY("test_frames", c.test_frames),
      METALINK_KEY("test_eta_meta", c.test_eta_meta),
      METALINK_KEY("test_eta_other", c.test_eta_other),
      METALINK_KEY("test_adapt_steps", c.test_adapt_steps),
      METALINK_KEY("scratch_eta", c.scratch_eta),
      METALINK_KEY("scratch_steps", c.scratch_steps),
      METALINK_KEY("test_fading", c.test_fading),
      METALINK_KEY("csi", c.csi),
      METALINK_KEY("select_every", c.select_every),
      METALINK_KEY("select_pilots", c.select_pilots),
      METALINK_KEY("select_blocks", c.select_blocks),
      METALINK_KEY("select_frames", c.select_frames),
      METALINK_KEY("runs", c.runs),
      METALINK_KEY("threads", c.threads),
  };
  return table;
}

#undef METALINK_KEY

const Key& find_key(std::string_view name) {
  for (const auto& k : keys()) {
    if (k.name == name) return k;
  }
  bad(name, "unknown configuration key");
}

bool requires_pilots(Scheme s, Csi csi) { return !(s == Scheme::BpskMlMmse && csi == Csi::Perfect); }

}  // namespace

std::string_view axis_name(SweepAxis a) { return kAxes.text(a); }

void ExperimentConfig::validate() const {
  if (schemes.empty()) bad("schemes", "at least one scheme is required");
  {
    std::set<Scheme> seen(schemes.begin(), schemes.end());
    if (seen.size() != schemes.size()) bad("schemes", "schemes repeat");
  }
  train.validate();
  for (Scheme s : schemes) {
    train_for(s).validate();
    if (transmitter_of(s) == training::Transmitter::Bpsk && train.k != train.n) {
      bad("n", "BPSK schemes need n == k");
    }
  }

  const std::size_t space = std::size_t{1} << train.k;
  if (test_pilots.empty()) bad("P", "at least one test pilot count is required");
  for (auto p : test_pilots) {
    if (p > space) bad("P", "P = " + std::to_string(p) + " exceeds the 2^k distinct messages");
    if (p == 0) {
      for (Scheme s : schemes) {
        if (requires_pilots(s, csi)) {
          bad("P", "P = 0 is not allowed for " + std::string(scheme_name(s)));
        }
      }
    }
  }

  if (axis == SweepAxis::Rho) {
    if (rho_values.empty()) bad("rho_values", "axis rho needs rho_values");
    for (double r : rho_values) {
      if (!(r >= 0.0 && r <= 1.0)) bad("rho_values", "values must lie in [0, 1]");
    }
  }
  if (axis == SweepAxis::TrainFrames) {
    if (frame_values.empty()) bad("frame_values", "axis train_frames needs frame_values");
    for (auto f : frame_values) {
      if (f > train.frames) bad("frame_values", "values must not exceed frames");
    }
  }

  if (payload_blocks < 1) bad("payload_blocks", "must be at least 1");
  if (test_frames < 1) bad("test_frames", "must be at least 1");
  if (!(test_eta_meta >= 0.0)) bad("test_eta_meta", "must be non-negative");
  if (!(test_eta_other >= 0.0)) bad("test_eta_other", "must be non-negative");
  if (test_adapt_steps < 0) bad("test_adapt_steps", "must be non-negative");
  if (!(scratch_eta >= 0.0)) bad("scratch_eta", "must be non-negative");
  if (scratch_steps < 0) bad("scratch_steps", "must be non-negative");
  if (select_pilots > space) bad("select_pilots", "exceeds the 2^k distinct messages");
  if (select_every > 0) {
    if (select_pilots == 0 && train.pilots > space) {
      bad("select_pilots", "T_U exceeds the 2^k distinct messages; set select_pilots");
    }
    if (select_blocks < 1) bad("select_blocks", "must be at least 1");
    if (select_frames < 1) bad("select_frames", "must be at least 1");
  }
  if (runs < 1) bad("runs", "must be at least 1");
  if (threads < 1) bad("threads", "must be at least 1");
}

LinkSetup ExperimentConfig::link() const {
  return LinkSetup{train.k, train.n, train.taps, train.es, train.es_n0_db};
}

std::vector<std::uint64_t> ExperimentConfig::run_seeds() const {
  std::vector<std::uint64_t> out(runs);
  for (std::size_t r = 0; r < runs; ++r) out[r] = train.seed + r;
  return out;
}

training::TrainConfig ExperimentConfig::train_for(Scheme s) const {
  training::TrainConfig t = train;
  t.transmitter = transmitter_of(s);
  return t;
}

void set_key(ExperimentConfig& cfg, std::string_view key, std::string_view value) {
  find_key(key).set(cfg, trim(value));
}

ExperimentConfig parse_config(std::string_view text, std::string_view origin) {
  ExperimentConfig cfg;
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = std::string(origin) + ":" + std::to_string(line_no);
    if (eq == std::string_view::npos) {
      throw ConfigError(where + ": expected 'key = value'", std::string(line));
    }
    const std::string_view key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(where + ": missing key", "");
    if (!seen.insert(std::string(key)).second) {
      throw ConfigError(where + ": key '" + std::string(key) + "' given twice", std::string(key));
    }
    try {
      set_key(cfg, key, line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(where + ": " + e.what(), e.key());
    }
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  std::ostringstream body;
  body << in.rdbuf();
  return parse_config(body.str(), path);
}

std::vector<std::pair<std::string, std::string>> config_entries(const ExperimentConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& k : keys()) out.emplace_back(std::string(k.name), k.text(cfg));
  return out;
}

std::string format_config(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& [key, value] : config_entries(cfg)) out += key + " = " + value + "\n";
  return out;
}

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& k : keys()) j[std::string(k.name)] = k.json(cfg);
  return j;
}

}  // namespace metalink::harness
