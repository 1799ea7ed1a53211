#include "kprox/casefile.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <limits>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include <json.hpp>

#include "kprox/errors.hpp"

namespace kprox {

using nlohmann::json;

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::MissingMatrix: return "MissingMatrix";
    case Errc::MalformedRow: return "MalformedRow";
    case Errc::DanglingBranch: return "DanglingBranch";
    case Errc::ZeroReactance: return "ZeroReactance";
    case Errc::Unsupported: return "Unsupported";
    case Errc::MissingGenerator: return "MissingGenerator";
    case Errc::NonPositive: return "NonPositive";
    case Errc::InvalidCase: return "InvalidCase";
    case Errc::SingularBranch: return "SingularBranch";
    case Errc::SingularInterior: return "SingularInterior";
    case Errc::DegeneratePhase: return "DegeneratePhase";
    case Errc::UnknownBranch: return "UnknownBranch";
    case Errc::AlreadyOut: return "AlreadyOut";
    case Errc::DisconnectedNetwork: return "DisconnectedNetwork";
    case Errc::NonFinite: return "NonFinite";
    case Errc::NonConvergence: return "NonConvergence";
    case Errc::NumericalUnderflow: return "NumericalUnderflow";
    case Errc::DegenerateWeights: return "DegenerateWeights";
    case Errc::NotPSD: return "NotPSD";
    case Errc::WeightMismatch: return "WeightMismatch";
    case Errc::UnstableStep: return "UnstableStep";
    case Errc::MassLeak: return "MassLeak";
    case Errc::Config: return "Config";
  }
  return "Unknown";
}

const Bus& UnreducedCase::bus(int id) const { return buses.at(bus_position(id)); }

std::size_t UnreducedCase::bus_position(int id) const {
  for (std::size_t i = 0; i < buses.size(); ++i) {
    if (buses[i].id == id) return i;
  }
  throw Error(Errc::InvalidCase, "no bus with id " + std::to_string(id));
}

void validate(const UnreducedCase& c) {
  if (!(c.base_mva > 0.0)) throw Error(Errc::InvalidCase, "baseMVA must be positive");
  std::set<int> ids;
  for (const Bus& b : c.buses) {
    if (!ids.insert(b.id).second) {
      throw Error(Errc::InvalidCase, "duplicate bus id " + std::to_string(b.id));
    }
    if (!(b.v_mag > 0.0)) {
      throw Error(Errc::InvalidCase, "bus " + std::to_string(b.id) + " has non-positive |V|");
    }
  }
  for (const Branch& br : c.branches) {
    if (!ids.contains(br.from) || !ids.contains(br.to)) {
      throw Error(Errc::DanglingBranch,
                  "branch " + std::to_string(br.from) + "-" + std::to_string(br.to));
    }
    if (br.status != 0 && br.x == 0.0) {
      throw Error(Errc::ZeroReactance, "branch " + std::to_string(br.branch_index));
    }
  }
  if (c.gens.empty()) throw Error(Errc::InvalidCase, "case has no generators");
  std::set<int> gen_buses;
  for (const Generator& g : c.gens) {
    if (!ids.contains(g.bus)) {
      throw Error(Errc::InvalidCase, "generator at unknown bus " + std::to_string(g.bus));
    }
    if (!gen_buses.insert(g.bus).second) {
      throw Error(Errc::Unsupported, "several generators at bus " + std::to_string(g.bus));
    }
  }
}

namespace {

struct Row {
  int line = 0;
  std::vector<double> values;
};

std::string strip_comments(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool in_comment = false;
  for (char ch : text) {
    if (ch == '\n') {
      in_comment = false;
      out.push_back(ch);
    } else if (ch == '%') {
      in_comment = true;
    } else if (!in_comment) {
      out.push_back(ch);
    }
  }
  return out;
}

int line_of(const std::string& text, std::size_t pos) {
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(pos), '\n'));
}

// Locates `mpc.<name>` followed by `=`; returns npos when absent.
std::size_t find_assignment(const std::string& text, std::string_view name) {
  const std::string key = "mpc." + std::string(name);
  std::size_t pos = 0;
  while ((pos = text.find(key, pos)) != std::string::npos) {
    std::size_t p = pos + key.size();
    const bool boundary = p >= text.size() || !(std::isalnum(static_cast<unsigned char>(text[p])) ||
                                                text[p] == '_');
    while (p < text.size() && std::isspace(static_cast<unsigned char>(text[p]))) ++p;
    if (boundary && p < text.size() && text[p] == '=') return p + 1;
    pos += key.size();
  }
  return std::string::npos;
}

std::optional<double> parse_number(std::string_view tok) {
  if (tok == "Inf" || tok == "inf") return std::numeric_limits<double>::infinity();
  if (tok == "-Inf" || tok == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size()) return std::nullopt;
  return v;
}

std::vector<Row> parse_matrix(const std::string& text, std::string_view name) {
  const std::size_t eq = find_assignment(text, name);
  if (eq == std::string::npos) throw Error(Errc::MissingMatrix, std::string(name));
  const std::size_t open = text.find('[', eq);
  const std::size_t close = open == std::string::npos ? open : text.find(']', open);
  if (open == std::string::npos || close == std::string::npos) {
    throw Error(Errc::MissingMatrix, std::string(name) + " (unterminated block)");
  }

  std::vector<Row> rows;
  Row current;
  std::string token;
  int line = line_of(text, open);
  int row_line = line;
  auto flush_token = [&] {
    if (token.empty()) return;
    const auto v = parse_number(token);
    if (!v) {
      throw Error(Errc::MalformedRow, std::string(name) + " line " + std::to_string(row_line) +
                                          ": bad token '" + token + "'");
    }
    if (current.values.empty()) current.line = row_line;
    current.values.push_back(*v);
    token.clear();
  };
  auto flush_row = [&] {
    flush_token();
    if (!current.values.empty()) rows.push_back(std::move(current));
    current = Row{};
  };
  for (std::size_t p = open + 1; p < close; ++p) {
    const char ch = text[p];
    if (ch == ';' || ch == '\n') {
      flush_row();
      if (ch == '\n') ++line;
      row_line = line;
    } else if (std::isspace(static_cast<unsigned char>(ch)) || ch == ',') {
      flush_token();
    } else {
      if (token.empty() && current.values.empty()) row_line = line;
      token.push_back(ch);
    }
  }
  flush_row();
  return rows;
}

void require_columns(const Row& r, std::size_t n, std::string_view name) {
  if (r.values.size() < n) {
    throw Error(Errc::MalformedRow, std::string(name) + " line " + std::to_string(r.line) +
                                        ": expected at least " + std::to_string(n) + " columns");
  }
}

int as_int(double v, const Row& r, std::string_view name) {
  if (v != std::floor(v) || !std::isfinite(v)) {
    throw Error(Errc::MalformedRow,
                std::string(name) + " line " + std::to_string(r.line) + ": expected an integer");
  }
  return static_cast<int>(v);
}

std::string bus_type_name(BusType t) {
  switch (t) {
    case BusType::PQ: return "PQ";
    case BusType::PV: return "PV";
    case BusType::Slack: return "slack";
  }
  return "PQ";
}

BusType bus_type_from_name(const std::string& s) {
  if (s == "PQ") return BusType::PQ;
  if (s == "PV") return BusType::PV;
  if (s == "slack") return BusType::Slack;
  throw Error(Errc::InvalidCase, "unknown bus type '" + s + "'");
}

}  // namespace

UnreducedCase parse_matpower_case(std::string_view raw) {
  const std::string text = strip_comments(raw);
  UnreducedCase c;

  const std::size_t base = find_assignment(text, "baseMVA");
  if (base == std::string::npos) throw Error(Errc::MissingMatrix, "baseMVA");
  {
    const std::size_t semi = text.find(';', base);
    std::string tok = text.substr(base, semi == std::string::npos ? std::string::npos : semi - base);
    tok.erase(std::remove_if(tok.begin(), tok.end(), [](unsigned char ch) { return std::isspace(ch); }),
              tok.end());
    const auto v = parse_number(tok);
    if (!v) throw Error(Errc::MalformedRow, "baseMVA line " + std::to_string(line_of(text, base)));
    c.base_mva = *v;
  }

  for (const Row& r : parse_matrix(text, "bus")) {
    require_columns(r, 9, "bus");
    Bus b;
    b.id = as_int(r.values[0], r, "bus");
    const int type = as_int(r.values[1], r, "bus");
    if (type < 1 || type > 3) {
      throw Error(Errc::Unsupported, "bus line " + std::to_string(r.line) + ": bus type " +
                                         std::to_string(type));
    }
    b.type = static_cast<BusType>(type);
    b.p_load = r.values[2];
    b.q_load = r.values[3];
    b.g_shunt = r.values[4];
    b.b_shunt = r.values[5];
    b.v_mag = r.values[7];
    b.v_angle = r.values[8];
    c.buses.push_back(b);
  }

  int index = 0;
  for (const Row& r : parse_matrix(text, "branch")) {
    require_columns(r, 11, "branch");
    Branch br;
    br.branch_index = ++index;
    br.from = as_int(r.values[0], r, "branch");
    br.to = as_int(r.values[1], r, "branch");
    br.r = r.values[2];
    br.x = r.values[3];
    br.b_charging = r.values[4];
    br.tap = r.values[8];
    if (r.values[9] != 0.0) {
      throw Error(Errc::Unsupported, "branch line " + std::to_string(r.line) +
                                         ": phase-shifting transformers are not supported");
    }
    if (br.tap < 0.0) {
      throw Error(Errc::Unsupported, "branch line " + std::to_string(r.line) + ": negative tap");
    }
    br.status = as_int(r.values[10], r, "branch") != 0 ? 1 : 0;
    c.branches.push_back(br);
  }

  for (const Row& r : parse_matrix(text, "gen")) {
    require_columns(r, 2, "gen");
    if (r.values.size() >= 8 && r.values[7] == 0.0) continue;  // out of service
    Generator g;
    g.bus = as_int(r.values[0], r, "gen");
    g.p_mech = r.values[1];
    g.q_gen = r.values.size() >= 3 ? r.values[2] : 0.0;
    c.gens.push_back(g);
  }

  validate(c);
  return c;
}

std::string to_network_json(const UnreducedCase& c) {
  json j;
  j["format"] = "kprox-network";
  j["version"] = 1;
  j["base_mva"] = c.base_mva;
  j["buses"] = json::array();
  for (const Bus& b : c.buses) {
    j["buses"].push_back({{"id", b.id},
                          {"type", bus_type_name(b.type)},
                          {"p_load", b.p_load},
                          {"q_load", b.q_load},
                          {"g_shunt", b.g_shunt},
                          {"b_shunt", b.b_shunt},
                          {"v_mag", b.v_mag},
                          {"v_angle_deg", b.v_angle}});
  }
  j["branches"] = json::array();
  for (const Branch& br : c.branches) {
    j["branches"].push_back({{"from", br.from},
                             {"to", br.to},
                             {"r", br.r},
                             {"x", br.x},
                             {"b_charging", br.b_charging},
                             {"tap", br.tap},
                             {"status", br.status},
                             {"branch_index", br.branch_index}});
  }
  j["gens"] = json::array();
  for (const Generator& g : c.gens) {
    json e = {{"bus", g.bus}, {"p_mech", g.p_mech}, {"q_gen", g.q_gen}};
    if (g.e_internal_mag) e["e_internal_mag"] = *g.e_internal_mag;
    j["gens"].push_back(e);
  }
  return j.dump(2);
}

UnreducedCase parse_network_json(std::string_view text) {
  UnreducedCase c;
  try {
    const json j = json::parse(text);
    c.base_mva = j.at("base_mva").get<double>();
    for (const json& b : j.at("buses")) {
      Bus bus;
      bus.id = b.at("id").get<int>();
      bus.type = bus_type_from_name(b.at("type").get<std::string>());
      bus.p_load = b.value("p_load", 0.0);
      bus.q_load = b.value("q_load", 0.0);
      bus.g_shunt = b.value("g_shunt", 0.0);
      bus.b_shunt = b.value("b_shunt", 0.0);
      bus.v_mag = b.value("v_mag", 1.0);
      bus.v_angle = b.value("v_angle_deg", 0.0);
      c.buses.push_back(bus);
    }
    int index = 0;
    for (const json& b : j.at("branches")) {
      Branch br;
      ++index;
      br.from = b.at("from").get<int>();
      br.to = b.at("to").get<int>();
      br.r = b.value("r", 0.0);
      br.x = b.at("x").get<double>();
      br.b_charging = b.value("b_charging", 0.0);
      br.tap = b.value("tap", 0.0);
      br.status = b.value("status", 1);
      br.branch_index = b.value("branch_index", index);
      c.branches.push_back(br);
    }
    for (const json& g : j.at("gens")) {
      Generator gen;
      gen.bus = g.at("bus").get<int>();
      gen.p_mech = g.value("p_mech", 0.0);
      gen.q_gen = g.value("q_gen", 0.0);
      if (g.contains("e_internal_mag")) gen.e_internal_mag = g.at("e_internal_mag").get<double>();
      c.gens.push_back(gen);
    }
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidCase, std::string("network.json: ") + e.what());
  }
  validate(c);
  return c;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Config, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

UnreducedCase load_case_file(const std::string& path) {
  const std::string text = read_text_file(path);
  try {
    if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") return parse_network_json(text);
    return parse_matpower_case(text);
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

namespace {

GeneratorDynamics parse_generator_entry(const json& g) {
  GeneratorDynamics d;
  d.bus = g.at("bus").get<int>();
  d.m = g.at("m").get<double>();
  d.gamma = g.at("gamma").get<double>();
  d.sigma = g.at("sigma").get<double>();
  d.x_d_prime = g.at("x_d_prime").get<double>();
  const std::pair<const char*, double> fields[] = {
      {"m", d.m}, {"gamma", d.gamma}, {"sigma", d.sigma}, {"x_d_prime", d.x_d_prime}};
  for (const auto& [name, value] : fields) {
    if (!(value > 0.0)) {
      throw Error(Errc::NonPositive, std::string(name) + " at bus " + std::to_string(d.bus));
    }
  }
  return d;
}

std::vector<GeneratorDynamics> parse_generator_array(std::string_view text) {
  std::vector<GeneratorDynamics> out;
  try {
    const json j = json::parse(text);
    for (const json& g : j.at("generators")) out.push_back(parse_generator_entry(g));
  } catch (const json::exception& e) {
    throw Error(Errc::Config, std::string("dynamics.json: ") + e.what());
  }
  return out;
}

}  // namespace

DynamicParams parse_dynamic_params(std::string_view text) {
  return DynamicParams{parse_generator_array(text)};
}

DynamicParams parse_dynamic_params(std::string_view text, const UnreducedCase& c) {
  const std::vector<GeneratorDynamics> entries = parse_generator_array(text);
  std::map<int, GeneratorDynamics> by_bus;
  for (const GeneratorDynamics& e : entries) by_bus[e.bus] = e;
  DynamicParams out;
  for (const Generator& g : c.gens) {
    const auto it = by_bus.find(g.bus);
    if (it == by_bus.end()) throw Error(Errc::MissingGenerator, "bus " + std::to_string(g.bus));
    out.gens.push_back(it->second);
  }
  return out;
}

std::string to_dynamics_json(const DynamicParams& d) {
  json j;
  j["generators"] = json::array();
  for (const GeneratorDynamics& g : d.gens) {
    j["generators"].push_back({{"bus", g.bus},
                               {"m", g.m},
                               {"gamma", g.gamma},
                               {"sigma", g.sigma},
                               {"x_d_prime", g.x_d_prime}});
  }
  return j.dump(2);
}

Table1Draw sample_table1_params(int n, std::uint64_t seed) {
  if (n < 1) throw Error(Errc::Config, "table1 sampler needs n >= 1");
  const double w0 = 2.0 * std::numbers::pi * kNominalFrequencyHz;
  CounterRng rng(seed, StreamPurpose::Table1);
  Table1Draw t;
  t.n = n;
  const auto un = static_cast<std::size_t>(n);
  t.m.resize(un);
  t.gamma.resize(un);
  t.sigma.resize(un);
  t.p.resize(un);
  t.phi.assign(un * un, 0.0);
  t.k.assign(un * un, 0.0);
  for (std::size_t i = 0; i < un; ++i) {
    t.m[i] = rng.uniform(2.0, 12.0) / w0;
    t.gamma[i] = rng.uniform(20.0, 30.0) / w0;
    t.sigma[i] = rng.uniform(1.0, 5.0);
    t.p[i] = rng.uniform(0.0, 10.0);
  }
  for (std::size_t i = 0; i < un; ++i) {
    for (std::size_t j = i + 1; j < un; ++j) {
      const double phi = std::atan(rng.uniform(0.0, 0.25));
      const double k = rng.uniform(0.7, 1.2);
      t.phi[i * un + j] = t.phi[j * un + i] = phi;
      t.k[i * un + j] = t.k[j * un + i] = k;
    }
  }
  return t;
}

}  // namespace kprox
