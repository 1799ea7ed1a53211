#include <cmath>
#include <numbers>
#include <string>

#include "doctest.h"
#include "kprox/casefile.hpp"
#include "test_support.hpp"

using namespace kprox;
using kprox::test::error_code_of;

namespace {

// Reduced header of the IEEE 14-bus case: two buses, one line.
const char* kTwoBus = R"(function mpc = two_bus
mpc.baseMVA = 100;
mpc.bus = [
  1 3 0    0    0 0 1 1.06 0     0 1 1.06 0.94;
  2 1 21.7 12.7 0 0 1 1.04 -4.98 0 1 1.06 0.94;
];
mpc.gen = [
  1 232.4 -16.9 10 0 1.06 100 1 332.4 0;
];
mpc.branch = [
  1 2 0.01938 0.05917 0.0528 0 0 0 0 0 1 -360 360;
];
)";

std::string replace(std::string s, const std::string& from, const std::string& to) {
  s.replace(s.find(from), from.size(), to);
  return s;
}

}  // namespace

TEST_SUITE("casefile") {

TEST_CASE("two-bus fixture parses into tables") {
  const UnreducedCase c = parse_matpower_case(kTwoBus);
  CHECK(c.base_mva == 100.0);
  REQUIRE(c.buses.size() == 2);
  REQUIRE(c.branches.size() == 1);
  REQUIRE(c.gens.size() == 1);
  CHECK(c.buses[0].type == BusType::Slack);
  CHECK(c.buses[1].p_load == 21.7);
  CHECK(c.buses[1].q_load == 12.7);
  CHECK(c.buses[1].v_mag == 1.04);
  CHECK(c.buses[1].v_angle == -4.98);
  CHECK(c.branches[0].r == 0.01938);
  CHECK(c.branches[0].x == 0.05917);
  CHECK(c.branches[0].b_charging == 0.0528);
  CHECK(c.branches[0].status == 1);
  CHECK(c.branches[0].branch_index == 1);
  CHECK(c.gens[0].p_mech == 232.4);
}

TEST_CASE("missing branch block") {
  const std::string text = replace(kTwoBus, "mpc.branch", "mpc.other");
  CHECK(error_code_of([&] { parse_matpower_case(text); }) == Errc::MissingMatrix);
  try {
    parse_matpower_case(text);
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("branch") != std::string::npos);
  }
}

TEST_CASE("non-numeric token reports its 1-based line") {
  const std::string text = replace(kTwoBus, "21.7", "x21");
  try {
    parse_matpower_case(text);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::MalformedRow);
    CHECK(std::string(e.what()).find("line 5") != std::string::npos);
  }
}

TEST_CASE("comments are ignored") {
  const std::string text = replace(kTwoBus, "mpc.gen = [", "% mpc.branch = [9 9];\nmpc.gen = [ % gens\n");
  CHECK(parse_matpower_case(text).gens.size() == 1);
}

TEST_CASE("dangling branch and zero reactance") {
  CHECK(error_code_of([&] { parse_matpower_case(replace(kTwoBus, "1 2 0.01938", "1 7 0.01938")); }) ==
        Errc::DanglingBranch);
  CHECK(error_code_of([&] { parse_matpower_case(replace(kTwoBus, "0.05917", "0")); }) ==
        Errc::ZeroReactance);
}

TEST_CASE("phase-shifting transformer is rejected") {
  const std::string text = replace(kTwoBus, "0 0 0 0 0 1 -360", "0 0 0 0 5 1 -360");
  CHECK(error_code_of([&] { parse_matpower_case(text); }) == Errc::Unsupported);
}

TEST_CASE("off-nominal tap is kept") {
  const std::string text = replace(kTwoBus, "0 0 0 0 0 1 -360", "0 0 0 0.978 0 1 -360");
  CHECK(parse_matpower_case(text).branches[0].tap == 0.978);
}

TEST_CASE("IEEE 14-bus fixture") {
  const UnreducedCase c = test::case14();
  CHECK(c.buses.size() == 14);
  CHECK(c.branches.size() == 20);
  REQUIRE(c.gens.size() == 5);
  const int gen_buses[] = {1, 2, 3, 6, 8};
  for (int i = 0; i < 5; ++i) CHECK(c.gens[static_cast<std::size_t>(i)].bus == gen_buses[i]);
  CHECK(c.bus(9).b_shunt == 19.0);
}

TEST_CASE("network.json round trip") {
  const UnreducedCase c = test::case14();
  CHECK(parse_network_json(to_network_json(c)) == c);
}

TEST_CASE("dynamics: single entry") {
  const DynamicParams d = parse_dynamic_params(
      R"({"generators":[{"bus":1,"m":0.0265,"gamma":0.053,"sigma":2.4628,"x_d_prime":0.25}]})");
  REQUIRE(d.gens.size() == 1);
  CHECK(d.gens[0].sigma == 2.4628);
  CHECK(d.gens[0].bus == 1);
}

TEST_CASE("dynamics: non-positive field and missing generator") {
  try {
    parse_dynamic_params(R"({"generators":[{"bus":3,"m":1,"gamma":0,"sigma":1,"x_d_prime":0.2}]})");
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::NonPositive);
    CHECK(std::string(e.what()).find("gamma at bus 3") != std::string::npos);
  }
  const UnreducedCase c = parse_matpower_case(kTwoBus);
  CHECK(error_code_of([&] {
          parse_dynamic_params(R"({"generators":[{"bus":2,"m":1,"gamma":1,"sigma":1,"x_d_prime":0.2}]})", c);
        }) == Errc::MissingGenerator);
}

TEST_CASE("dynamics: aligned to the gens table and round-tripped") {
  const UnreducedCase c = test::case14();
  const DynamicParams d = test::case14_dynamics(c);
  REQUIRE(d.gens.size() == c.gens.size());
  for (std::size_t i = 0; i < d.gens.size(); ++i) CHECK(d.gens[i].bus == c.gens[i].bus);
  const double sigmas[] = {2.4628, 4.9266, 4.8724, 1.4215, 3.8681};
  for (std::size_t i = 0; i < 5; ++i) CHECK(d.gens[i].sigma == sigmas[i]);
  CHECK(parse_dynamic_params(to_dynamics_json(d), c) == d);
}

TEST_CASE("table1 draws stay in range") {
  const double w0 = 2.0 * std::numbers::pi * 60.0;
  const Table1Draw t = sample_table1_params(50, 11);
  for (int i = 0; i < 50; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    CHECK(t.m[ui] >= 2.0 / w0);
    CHECK(t.m[ui] <= 12.0 / w0);
    CHECK(t.gamma[ui] >= 20.0 / w0);
    CHECK(t.gamma[ui] <= 30.0 / w0);
    CHECK(t.sigma[ui] >= 1.0);
    CHECK(t.sigma[ui] <= 5.0);
    CHECK(t.p[ui] >= 0.0);
    CHECK(t.p[ui] <= 10.0);
    for (int j = 0; j < 50; ++j) {
      const auto ij = ui * 50 + static_cast<std::size_t>(j);
      const auto ji = static_cast<std::size_t>(j) * 50 + ui;
      if (i == j) {
        CHECK(t.k[ij] == 0.0);
        CHECK(t.phi[ij] == 0.0);
        continue;
      }
      CHECK(t.k[ij] == t.k[ji]);
      CHECK(t.phi[ij] == t.phi[ji]);
      CHECK(t.k[ij] >= 0.7);
      CHECK(t.k[ij] <= 1.2);
      CHECK(std::tan(t.phi[ij]) >= 0.0);
      CHECK(std::tan(t.phi[ij]) <= 0.25 + 1e-15);
    }
  }
}

TEST_CASE("table1 is deterministic and n=1 has empty diagonals") {
  const Table1Draw a = sample_table1_params(7, 3);
  const Table1Draw b = sample_table1_params(7, 3);
  CHECK(a.m == b.m);
  CHECK(a.k == b.k);
  CHECK(a.phi == b.phi);
  CHECK(a.p == b.p);
  const Table1Draw one = sample_table1_params(1, 3);
  CHECK(one.k[0] == 0.0);
  CHECK(one.phi[0] == 0.0);
  CHECK(error_code_of([] { sample_table1_params(0, 1); }) == Errc::Config);
}

}  // TEST_SUITE
