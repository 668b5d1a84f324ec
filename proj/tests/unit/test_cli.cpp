#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "../../tools/cli/cli.hpp"

using namespace sidgff;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("sidgff_unit_" + name);
}

}  // namespace

TEST_CASE("profile command") {
  const Result r = invoke({"profile", "--profile", "homogeneous", "--n", "10"});
  REQUIRE(r.code == cli::kExitOk);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["result"]["m"] == 1);
  CHECK(j["result"]["centring"][0]["m_N"].get<double>() == doctest::Approx(12.136004791453372));
  CHECK(j["config"]["profile"]["sigmas"] == nlohmann::json::array({1.0}));
  const Result inline_profile =
      invoke({"profile", "--profile", R"({"sigmas":[1,2],"lambdas":[0.5,1]})", "--n", "8"});
  CHECK(inline_profile.code == cli::kExitOk);
  const Result listed = invoke({"profile", "--sigmas", "1,2", "--lambdas", "0.5,1", "--n", "8"});
  CHECK(listed.code == cli::kExitOk);
}

TEST_CASE("validation errors exit with 1") {
  CHECK(invoke({"profile", "--profile", "nonsense"}).code == cli::kExitValidation);
  CHECK(invoke({"sample", "--n", "3"}).code == cli::kExitValidation);
  const Result r = invoke({"sample", "--n", "3"});
  CHECK(r.err.find("--seed is required") != std::string::npos);
  CHECK(invoke({"sample", "--seed", "1", "--kind", "coupled"}).code == cli::kExitValidation);
  CHECK(invoke({"sample", "--seed", "1", "--kind", "dgff", "--n", "9"}).code == cli::kExitValidation);
  CHECK(invoke({"frobnicate"}).code == cli::kExitValidation);
  CHECK(invoke({"profile", "--no-such-flag", "1"}).code == cli::kExitValidation);
  CHECK(invoke({"--help"}).code == cli::kExitOk);
}

TEST_CASE("config files layer under flags") {
  const auto cfg = temp_path("config.json");
  {
    std::ofstream f(cfg);
    f << R"({"n": 3, "seed": 5, "kind": "mibrw"})";
  }
  const Result a = invoke({"sample", "--config", cfg.string()});
  REQUIRE(a.code == cli::kExitOk);
  CHECK(a.out.find("\"n\":3") != std::string::npos);
  const Result b = invoke({"sample", "--config", cfg.string(), "--n", "2"});
  REQUIRE(b.code == cli::kExitOk);
  CHECK(b.out.find("\"n\":2") != std::string::npos);
  {
    std::ofstream f(cfg);
    f << R"({"n": 3, "seed": 5, "colour": "red"})";
  }
  CHECK(invoke({"sample", "--config", cfg.string()}).code == cli::kExitValidation);
  std::filesystem::remove(cfg);
}

TEST_CASE("sample output parses back") {
  const auto path = temp_path("field.bin");
  const Result r = invoke({"sample", "--seed", "3", "--kind", "psi", "--n", "3", "--profile", "convex2",
                           "--format", "binary", "--output", path.string()});
  REQUIRE(r.code == cli::kExitOk);
  std::ifstream in(path, std::ios::binary);
  std::string magic(8, '\0');
  in.read(magic.data(), 8);
  CHECK(magic == "SIDGFF1\n");
  std::filesystem::remove(path);
}

TEST_CASE("runs are byte-identical") {
  const std::vector<std::vector<std::string>> runs{
      {"sample", "--seed", "11", "--kind", "mibrw", "--n", "4"},
      {"tails", "--seed", "2", "--kind", "mibrw", "--n", "4", "--replicates", "300"},
      {"second-moment", "--seed", "2", "--n", "4", "--replicates", "200", "--cf", "2",
       "--profile", "convex2"},
      {"compare", "--seed", "2", "--direction", "lower", "--n", "4", "--replicates", "200"},
  };
  for (const auto& args : runs) {
    const Result a = invoke(args);
    const Result b = invoke(args);
    CHECK(a.code == b.code);
    CHECK(a.out == b.out);
    CHECK_FALSE(a.out.empty());
  }
}

TEST_CASE("cov-check resumes from a checkpoint") {
  const auto ck = temp_path("checkpoint.json");
  std::filesystem::remove(ck);
  const std::vector<std::string> args{"cov-check", "--n", "3", "--items", "i,ii", "--checkpoint",
                                      ck.string(), "--profile", "convex2", "--seed", "1"};
  const Result a = invoke(args);
  REQUIRE(std::filesystem::exists(ck));
  const Result b = invoke(args);
  CHECK(a.out == b.out);
  CHECK(a.code == b.code);
  std::filesystem::remove(ck);
}
