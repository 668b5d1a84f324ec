#include <doctest.h>

#include <sstream>

#include "sidgff/error.hpp"
#include "sidgff/field_io.hpp"

using namespace sidgff;

TEST_CASE("format_double round-trips") {
  for (double x : {0.1, -1.0 / 3.0, 1e-300, 12345.678901234567, 0.0}) {
    CHECK(std::stod(format_double(x)) == x);
  }
  CHECK(format_double(0.5) == "0.5");
}

TEST_CASE("profile json") {
  const StepProfile p = named_profile("three-scale");
  const StepProfile back = profile_from_json(profile_to_json(p));
  CHECK(back.sigmas() == p.sigmas());
  CHECK(back.lambdas() == p.lambdas());
  CHECK(profile_from_json("convex2") == named_profile("convex2"));
  const StepProfile v = profile_from_json({{"variances", {0.5, 1.5}}, {"lambdas", {0.5, 1.0}}});
  CHECK(v.sigma2(0.7) == doctest::Approx(1.5));
  CHECK_THROWS_AS(profile_from_json({{"sigmas", {1.0}}}), ValidationError);
  CHECK_THROWS_AS(profile_from_json({{"sigmas", {2.0}}, {"lambdas", {1.0}}, {"normalization", "strict"}}),
                  ValidationError);
  CHECK_THROWS_AS(profile_from_json(3), ValidationError);
}

TEST_CASE("field dumps round-trip") {
  FieldSample s = MibrwSampler(named_profile("convex2"), GridSize(3), 1).sample(77);
  for (bool binary : {false, true}) {
    std::stringstream io;
    if (binary) {
      write_field_binary(io, s, {{"note", "x"}});
    } else {
      write_field_csv(io, s, {{"note", "x"}});
    }
    const FieldSample r = binary ? read_field_binary(io) : read_field_csv(io);
    CHECK(r.kind == s.kind);
    CHECK(r.grid == s.grid);
    CHECK(r.seed == 77);
    CHECK(r.k0 == 1);
    CHECK(r.values == s.values);
    REQUIRE(r.profile.has_value());
    CHECK(*r.profile == *s.profile);
  }
  std::stringstream bad("SIDGFF0\n");
  CHECK_THROWS_AS(read_field_binary(bad), ValidationError);
  std::stringstream short_csv("# {\"kind\":\"dgff\",\"n\":1,\"seed\":1}\n0,0\n");
  CHECK_THROWS_AS(read_field_csv(short_csv), ValidationError);
}
