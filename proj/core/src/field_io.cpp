#include "sidgff/field_io.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "sidgff/error.hpp"

namespace sidgff {
namespace {

constexpr char kMagic[] = "SIDGFF1\n";
constexpr int kFormatVersion = 1;

std::vector<double> number_list(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw ValidationError(std::string("profile is missing '") + key + "'");
  const nlohmann::json& v = j.at(key);
  if (!v.is_array()) throw ValidationError(std::string("profile '") + key + "' must be an array");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) {
      throw ValidationError(std::string("profile '") + key + "' must contain numbers only");
    }
    out.push_back(x.get<double>());
  }
  return out;
}

FieldSample from_header(const nlohmann::json& h) {
  FieldSample s;
  try {
    s.kind = parse_field_kind(h.at("kind").get<std::string>());
    s.grid = GridSize(h.at("n").get<int>());
    s.seed = h.at("seed").get<std::uint64_t>();
    s.k0 = h.value("k0", 0);
    if (h.contains("profile")) s.profile = profile_from_json(h.at("profile"));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed field header: ") + e.what());
  }
  return s;
}

}  // namespace

const char* library_version() { return SIDGFF_VERSION_STRING; }

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

nlohmann::json profile_to_json(const StepProfile& p) {
  return {{"sigmas", p.sigmas()}, {"lambdas", p.lambdas()}};
}

StepProfile profile_from_json(const nlohmann::json& j) {
  if (j.is_string()) return named_profile(j.get<std::string>());
  if (!j.is_object()) throw ValidationError("profile must be a JSON object or a profile name");
  Normalization mode = Normalization::rescale;
  if (j.contains("normalization")) {
    const std::string m = j.at("normalization").get<std::string>();
    if (m == "strict") {
      mode = Normalization::strict;
    } else if (m != "rescale") {
      throw ValidationError("profile 'normalization' must be 'rescale' or 'strict'");
    }
  }
  const std::vector<double> lambdas = number_list(j, "lambdas");
  if (j.contains("variances")) {
    return StepProfile::from_variances(number_list(j, "variances"), lambdas, mode);
  }
  return StepProfile(number_list(j, "sigmas"), lambdas, mode);
}

StepProfile load_profile_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open profile file '" + path + "'");
  try {
    return profile_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("profile file '" + path + "' is not valid JSON: " + e.what());
  }
}

nlohmann::json field_header(const FieldSample& s) {
  nlohmann::json h = {{"format", kFormatVersion},
                      {"kind", to_string(s.kind)},
                      {"n", s.grid.n},
                      {"seed", s.seed},
                      {"k0", s.k0}};
  if (s.profile) h["profile"] = profile_to_json(*s.profile);
  return h;
}

void write_field_csv(std::ostream& os, const FieldSample& s, const nlohmann::json& extra) {
  const int N = s.grid.side();
  nlohmann::json h = field_header(s);
  if (extra.is_object()) h.update(extra);
  os << "# " << h.dump() << '\n';
  for (int y = 0; y < N; ++y) {
    for (int x = 0; x < N; ++x) {
      if (x) os << ',';
      os << format_double(s.values[static_cast<std::size_t>(y) * N + x]);
    }
    os << '\n';
  }
}

FieldSample read_field_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("# ", 0) != 0) {
    throw ValidationError("field CSV must start with a '# {json}' header line");
  }
  FieldSample s = from_header(nlohmann::json::parse(line.substr(2)));
  const int N = s.grid.side();
  s.values.reserve(static_cast<std::size_t>(s.grid.volume()));
  for (int y = 0; y < N; ++y) {
    if (!std::getline(is, line)) throw ValidationError("field CSV has fewer than N rows");
    std::stringstream row(line);
    std::string cell;
    int count = 0;
    while (std::getline(row, cell, ',')) {
      double v = 0.0;
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc()) throw ValidationError("field CSV has a non-numeric cell");
      s.values.push_back(v);
      ++count;
    }
    if (count != N) throw ValidationError("field CSV row " + std::to_string(y) + " has wrong length");
  }
  return s;
}

void write_field_binary(std::ostream& os, const FieldSample& s, const nlohmann::json& extra) {
  static_assert(std::endian::native == std::endian::little, "binary dumps assume little endian");
  nlohmann::json h = field_header(s);
  if (extra.is_object()) h.update(extra);
  const std::string header = h.dump();
  const std::uint64_t len = header.size();
  os.write(kMagic, sizeof(kMagic) - 1);
  os.write(reinterpret_cast<const char*>(&len), sizeof(len));
  os.write(header.data(), static_cast<std::streamsize>(header.size()));
  os.write(reinterpret_cast<const char*>(s.values.data()),
           static_cast<std::streamsize>(s.values.size() * sizeof(double)));
}

FieldSample read_field_binary(std::istream& is) {
  char magic[sizeof(kMagic) - 1];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
    throw ValidationError("not a binary field dump (bad magic)");
  }
  std::uint64_t len = 0;
  if (!is.read(reinterpret_cast<char*>(&len), sizeof(len)) || len > (1u << 20)) {
    throw ValidationError("binary field dump has a corrupt header length");
  }
  std::string header(len, '\0');
  if (!is.read(header.data(), static_cast<std::streamsize>(len))) {
    throw ValidationError("binary field dump is truncated in the header");
  }
  FieldSample s = from_header(nlohmann::json::parse(header));
  s.values.resize(static_cast<std::size_t>(s.grid.volume()));
  if (!is.read(reinterpret_cast<char*>(s.values.data()),
               static_cast<std::streamsize>(s.values.size() * sizeof(double)))) {
    throw ValidationError("binary field dump is truncated in the values");
  }
  return s;
}

}  // namespace sidgff
