#pragma once

// Network description files: MATPOWER-subset case files and the native
// JSON formats (network.json, dynamics.json).

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kprox/rng.hpp"

namespace kprox {

enum class BusType { PQ = 1, PV = 2, Slack = 3 };

struct Bus {
  int id = 0;
  BusType type = BusType::PQ;
  double p_load = 0.0;   // MW
  double q_load = 0.0;   // MVAr
  double g_shunt = 0.0;  // MW at 1 p.u.
  double b_shunt = 0.0;  // MVAr at 1 p.u.
  double v_mag = 1.0;    // p.u.
  double v_angle = 0.0;  // degrees (file convention)
  bool operator==(const Bus&) const = default;
};

struct Branch {
  int from = 0;
  int to = 0;
  double r = 0.0;
  double x = 0.0;
  double b_charging = 0.0;
  double tap = 0.0;  // 0 means nominal (1.0)
  int status = 1;
  int branch_index = 0;  // 1-based position in the source file
  bool operator==(const Branch&) const = default;
};

struct Generator {
  int bus = 0;
  double p_mech = 0.0;  // MW
  double q_gen = 0.0;   // MVAr, used only to initialise |E| behind x'_d
  std::optional<double> e_internal_mag;  // p.u., takes precedence when present
  bool operator==(const Generator&) const = default;
};

struct UnreducedCase {
  double base_mva = 100.0;
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<Generator> gens;

  const Bus& bus(int id) const;
  std::size_t bus_position(int id) const;
  bool operator==(const UnreducedCase&) const = default;
};

/// Throws Error{InvalidCase, DanglingBranch, ZeroReactance} on the first violated invariant.
void validate(const UnreducedCase& c);

/// Parses `mpc.baseMVA`, `mpc.bus`, `mpc.branch` and `mpc.gen`. Other blocks are skipped.
UnreducedCase parse_matpower_case(std::string_view text);

std::string to_network_json(const UnreducedCase& c);
UnreducedCase parse_network_json(std::string_view text);

/// Loads either format, chosen by extension (.m or .json).
UnreducedCase load_case_file(const std::string& path);

struct GeneratorDynamics {
  int bus = 0;
  double m = 0.0;
  double gamma = 0.0;
  double sigma = 0.0;
  double x_d_prime = 0.0;
  bool operator==(const GeneratorDynamics&) const = default;
};

/// One entry per generator, ordered like UnreducedCase::gens.
struct DynamicParams {
  std::vector<GeneratorDynamics> gens;
  bool operator==(const DynamicParams&) const = default;
};

/// Aligns the `generators` array to the case's gens table. Entries for buses
/// without a generator are ignored.
DynamicParams parse_dynamic_params(std::string_view text, const UnreducedCase& c);
/// Alignment-free parse (order as in the file); used when no case is at hand.
DynamicParams parse_dynamic_params(std::string_view text);
std::string to_dynamics_json(const DynamicParams& d);

/// Draws from the synthetic-network parameter table. Coupling and phase
/// matrices are row-major n x n with zero diagonals.
struct Table1Draw {
  int n = 0;
  std::vector<double> m, gamma, sigma, p;
  std::vector<double> phi;  // radians; tan(phi) ~ U[0, 0.25]
  std::vector<double> k;
};

inline constexpr double kNominalFrequencyHz = 60.0;

Table1Draw sample_table1_params(int n, std::uint64_t seed);

std::string read_text_file(const std::string& path);

}  // namespace kprox
