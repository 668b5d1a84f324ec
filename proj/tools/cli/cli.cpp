#include "cli.hpp"

#include <CLI11.hpp>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>

#include "sidgff/comparison.hpp"
#include "sidgff/covariance.hpp"
#include "sidgff/error.hpp"
#include "sidgff/extremes.hpp"
#include "sidgff/field_io.hpp"
#include "sidgff/profile.hpp"
#include "sidgff/samplers.hpp"
#include "sidgff/second_moment.hpp"

namespace sidgff::cli {
namespace {

using json = nlohmann::json;

// Largest grid exponent accepted for field kinds that need dense solves.
constexpr int kMaxDenseN = 6;
constexpr int kMaxN = 12;

// ---------------------------------------------------------------------------
// Option values and the flags > config file > defaults resolution.

struct Knob {
  std::string raw;
  bool flag_set = false;
  bool is_flag = false;
  CLI::Option* opt = nullptr;
};

class Command {
 public:
  Command(CLI::App& app, const std::string& name, const std::string& help)
      : name_(name), app_(app.add_subcommand(name, help)) {
    option("config", "JSON config file (flags override its values)", json());
    option("profile", "profile name, JSON file or inline JSON object", "homogeneous");
    option("sigmas", "inline profile sigmas, comma separated", json());
    option("lambdas", "inline profile breakpoints, comma separated", json());
    option("seed", "random seed (required for stochastic runs)", json());
    option("threads", "worker threads (0 = hardware concurrency)", 1);
    option("output", "output file (default stdout)", json());
  }

  const std::string& name() const { return name_; }
  CLI::App* app() const { return app_; }

  void option(const std::string& key, const std::string& help, json def) {
    auto k = std::make_unique<Knob>();
    k->opt = app_->add_option("--" + key, k->raw, help);
    defaults_[key] = std::move(def);
    knobs_[key] = std::move(k);
  }

  void flag(const std::string& key, const std::string& help) {
    auto k = std::make_unique<Knob>();
    k->is_flag = true;
    k->opt = app_->add_flag("--" + key, k->flag_set, help);
    defaults_[key] = false;
    knobs_[key] = std::move(k);
  }

  bool parsed() const { return app_->parsed(); }

  json resolve() const {
    json r = defaults_;
    const Knob& cfg = *knobs_.at("config");
    if (cfg.opt->count() > 0) {
      std::ifstream in(cfg.raw);
      if (!in) throw ValidationError("cannot open config file '" + cfg.raw + "'");
      json file;
      try {
        file = json::parse(in);
      } catch (const json::parse_error& e) {
        throw ValidationError("config file '" + cfg.raw + "' is not valid JSON: " + e.what());
      }
      if (!file.is_object()) throw ValidationError("config file must hold a JSON object");
      for (auto it = file.begin(); it != file.end(); ++it) {
        if (!defaults_.contains(it.key()) || it.key() == "config") {
          throw ValidationError("unknown key '" + it.key() + "' in config file for '" + name_ + "'");
        }
        r[it.key()] = it.value();
      }
    }
    for (const auto& [key, k] : knobs_) {
      if (key == "config" || k->opt->count() == 0) continue;
      r[key] = k->is_flag ? json(k->flag_set) : json(k->raw);
    }
    r.erase("config");
    return r;
  }

 private:
  std::string name_;
  CLI::App* app_;
  json defaults_ = json::object();
  std::map<std::string, std::unique_ptr<Knob>> knobs_;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

template <class T>
T parse_number(const std::string& text, const std::string& key) {
  T v{};
  const std::string s = trim(text);
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ValidationError("--" + key + ": '" + text + "' is not a valid number");
  }
  return v;
}

template <class T>
T get_number(const json& r, const std::string& key) {
  const json& v = r.at(key);
  if (v.is_number()) {
    if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer() && !v.is_number_unsigned()) {
        throw ValidationError("--" + key + " expects an integer");
      }
    }
    return v.get<T>();
  }
  if (v.is_string()) return parse_number<T>(v.get<std::string>(), key);
  throw ValidationError("--" + key + " is missing or not a number");
}

std::string get_string(const json& r, const std::string& key) {
  const json& v = r.at(key);
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number()) return v.dump();
  throw ValidationError("--" + key + " expects a string");
}

bool get_bool(const json& r, const std::string& key) {
  const json& v = r.at(key);
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
  }
  throw ValidationError("--" + key + " expects true or false");
}

// "a..b", "a,b,c", a number or a JSON array.
std::vector<int> get_int_list(const json& r, const std::string& key) {
  const json& v = r.at(key);
  std::vector<int> out;
  if (v.is_array()) {
    for (const auto& x : v) {
      if (!x.is_number_integer()) throw ValidationError("--" + key + " must list integers");
      out.push_back(x.get<int>());
    }
  } else if (v.is_number_integer()) {
    out.push_back(v.get<int>());
  } else if (v.is_string()) {
    const std::string s = v.get<std::string>();
    const auto dots = s.find("..");
    if (dots != std::string::npos) {
      const int lo = parse_number<int>(s.substr(0, dots), key);
      const int hi = parse_number<int>(s.substr(dots + 2), key);
      if (hi < lo) throw ValidationError("--" + key + ": empty range '" + s + "'");
      for (int i = lo; i <= hi; ++i) out.push_back(i);
    } else {
      for (const auto& part : split(s, ',')) out.push_back(parse_number<int>(part, key));
    }
  } else {
    throw ValidationError("--" + key + " expects an integer, a list or a range a..b");
  }
  if (out.empty()) throw ValidationError("--" + key + " is empty");
  return out;
}

// "a,b,c", "lo:hi:step", a number or a JSON array.
std::vector<double> get_double_list(const json& r, const std::string& key) {
  const json& v = r.at(key);
  std::vector<double> out;
  if (v.is_array()) {
    for (const auto& x : v) {
      if (!x.is_number()) throw ValidationError("--" + key + " must list numbers");
      out.push_back(x.get<double>());
    }
  } else if (v.is_number()) {
    out.push_back(v.get<double>());
  } else if (v.is_string()) {
    const std::string s = v.get<std::string>();
    const std::vector<std::string> parts = split(s, ':');
    if (parts.size() == 3) {
      const double lo = parse_number<double>(parts[0], key);
      const double hi = parse_number<double>(parts[1], key);
      const double step = parse_number<double>(parts[2], key);
      if (!(step > 0.0) || hi < lo) throw ValidationError("--" + key + ": bad range '" + s + "'");
      for (int i = 0; lo + i * step <= hi + 1e-12; ++i) out.push_back(lo + i * step);
    } else {
      for (const auto& part : split(s, ',')) out.push_back(parse_number<double>(part, key));
    }
  } else {
    throw ValidationError("--" + key + " expects a number, a list or lo:hi:step");
  }
  if (out.empty()) throw ValidationError("--" + key + " is empty");
  return out;
}

std::uint64_t require_seed(json& r) {
  if (r.at("seed").is_null()) {
    throw ValidationError("--seed is required (runs are never seeded from the clock)");
  }
  const auto seed = get_number<std::uint64_t>(r, "seed");
  r["seed"] = seed;
  return seed;
}

int resolve_threads(json& r) {
  const int t = get_number<int>(r, "threads");
  if (t < 0) throw ValidationError("--threads must be >= 0");
  r["threads"] = t;
  return t == 0 ? default_threads() : t;
}

std::int64_t resolve_replicates(json& r) {
  const auto reps = get_number<std::int64_t>(r, "replicates");
  if (reps < 2) throw ValidationError("--replicates must be at least 2");
  r["replicates"] = reps;
  return reps;
}

int resolve_n(json& r, int lo, int hi, const std::string& key = "n") {
  const int n = get_number<int>(r, key);
  if (n < lo || n > hi) {
    throw ValidationError("--" + key + " must lie in [" + std::to_string(lo) + ", " +
                          std::to_string(hi) + "], got " + std::to_string(n));
  }
  r[key] = n;
  return n;
}

// Profile from --sigmas/--lambdas, or --profile as a name, file or object.
// The resolved values replace the source in the echoed config.
StepProfile resolve_profile(json& r) {
  std::optional<StepProfile> p;
  const bool inline_s = !r.at("sigmas").is_null();
  const bool inline_l = !r.at("lambdas").is_null();
  if (inline_s != inline_l) throw ValidationError("--sigmas and --lambdas must be given together");
  if (inline_s) {
    p = StepProfile(get_double_list(r, "sigmas"), get_double_list(r, "lambdas"));
  } else {
    const json& src = r.at("profile");
    if (src.is_object()) {
      p = profile_from_json(src);
    } else if (src.is_string()) {
      const std::string s = src.get<std::string>();
      const auto names = named_profile_list();
      if (std::find(names.begin(), names.end(), s) != names.end() || s == "flat") {
        p = named_profile(s);
      } else if (!s.empty() && s.front() == '{') {
        try {
          p = profile_from_json(json::parse(s));
        } catch (const json::parse_error& e) {
          throw ValidationError(std::string("--profile: invalid inline JSON: ") + e.what());
        }
      } else if (std::filesystem::exists(s)) {
        p = load_profile_file(s);
      } else {
        throw ValidationError("--profile: '" + s + "' is neither a built-in profile (" +
                              "homogeneous, convex2, decreasing2, three-scale) nor a file");
      }
    } else {
      throw ValidationError("--profile must be a name, a file path or a JSON object");
    }
  }
  r["profile"] = profile_to_json(*p);
  r.erase("sigmas");
  r.erase("lambdas");
  return *p;
}

std::string resolve_format(json& r, std::initializer_list<const char*> allowed) {
  const std::string f = get_string(r, "format");
  for (const char* a : allowed) {
    if (f == a) return f;
  }
  std::string list;
  for (const char* a : allowed) list += (list.empty() ? "" : ", ") + std::string(a);
  throw ValidationError("--format '" + f + "' is not supported here (expected " + list + ")");
}

// ---------------------------------------------------------------------------
// Output.

class Sink {
 public:
  Sink(const json& r, std::ostream& fallback, bool binary) {
    if (r.at("output").is_string()) {
      const std::string path = r.at("output").get<std::string>();
      file_.open(path, binary ? std::ios::binary | std::ios::out : std::ios::out);
      if (!file_) throw ValidationError("cannot open output file '" + path + "'");
      os_ = &file_;
    } else {
      os_ = &fallback;
    }
  }
  std::ostream& stream() { return *os_; }
  void finish() {
    os_->flush();
    if (!*os_) throw Error("failed to write output");
  }

 private:
  std::ofstream file_;
  std::ostream* os_ = nullptr;
};

// Where results are written is not part of the experiment.
json provenance(const std::string& command, const json& r) {
  json config = r;
  config.erase("output");
  config.erase("checkpoint");
  return {{"version", library_version()}, {"command", command}, {"config", config}};
}

void emit_json(const std::string& command, const json& r, const json& result, std::ostream& out) {
  Sink sink(r, out, false);
  json doc = provenance(command, r);
  doc["result"] = result;
  sink.stream() << doc.dump(2) << '\n';
  sink.finish();
}

// CSV with a "# {provenance}" first line.
class CsvWriter {
 public:
  CsvWriter(const std::string& command, const json& r, std::ostream& out,
            const std::vector<std::string>& columns)
      : sink_(r, out, false) {
    sink_.stream() << "# " << provenance(command, r).dump() << '\n';
    for (std::size_t i = 0; i < columns.size(); ++i) sink_.stream() << (i ? "," : "") << columns[i];
    sink_.stream() << '\n';
  }
  CsvWriter& cell(double x) { return raw(format_double(x)); }
  CsvWriter& cell(std::int64_t x) { return raw(std::to_string(x)); }
  CsvWriter& cell(int x) { return raw(std::to_string(x)); }
  CsvWriter& cell(bool x) { return raw(x ? "true" : "false"); }
  CsvWriter& cell(const std::string& s) { return raw(s); }
  void end_row() {
    sink_.stream() << '\n';
    first_ = true;
  }
  void finish() { sink_.finish(); }

 private:
  CsvWriter& raw(const std::string& s) {
    sink_.stream() << (first_ ? "" : ",") << s;
    first_ = false;
    return *this;
  }
  Sink sink_;
  bool first_ = true;
};

json to_json(const RateFit& f) {
  return {{"rate", f.rate},   {"se", f.se},         {"ci_lo", f.ci_lo},
          {"ci_hi", f.ci_hi}, {"target", f.target}, {"contains_target", f.contains(f.target)},
          {"prefactor", f.prefactor}, {"points_used", f.points_used}};
}

json to_json(const std::vector<TailPoint>& t) {
  json a = json::array();
  for (const auto& p : t) {
    a.push_back({{"x", p.x}, {"count", p.count}, {"phat", p.phat}, {"ci_lo", p.ci_lo}, {"ci_hi", p.ci_hi}});
  }
  return a;
}

json to_json(const SudakovFerniqueReport& s) {
  return {{"gamma", s.gamma}, {"bound", s.bound}, {"one_sided", s.one_sided},
          {"worst_excess", s.worst_excess}};
}

json to_json(const SlepianReport& s) {
  json v = json::array();
  for (const auto& [i, j] : s.violations) v.push_back({i, j});
  return {{"equal_diagonals", s.equal_diagonals}, {"ordered", s.ordered},
          {"max_diagonal_gap", s.max_diagonal_gap}, {"min_margin", s.min_margin},
          {"violations", v}, {"passes", s.passes()}};
}

json to_json(const DeviationSeries& s) {
  json dev = json::object();
  for (const auto& [n, d] : s.deviation) dev[std::to_string(n)] = d;
  return {{"item", s.item}, {"deviation", dev}, {"slope", s.slope},
          {"threshold", s.threshold}, {"bounded", s.bounded}};
}

// ---------------------------------------------------------------------------
// Subcommands.

using Handler = std::function<int(json&, std::ostream&, std::ostream&)>;

int cmd_profile(json& r, std::ostream& out, std::ostream&) {
  const StepProfile p = resolve_profile(r);
  const std::string format = resolve_format(r, {"json", "csv"});
  const std::vector<int> ns = get_int_list(r, "n");
  r["n"] = ns;
  const EffectiveProfile e = effective_profile(p);
  json centring = json::array();
  for (int n : ns) {
    if (n < 1) throw ValidationError("--n values must be >= 1");
    json row = {{"n", n}, {"m_N", nullptr}, {"M_star", nullptr}};
    try {
      row["m_N"] = expected_max(e, n);
      row["M_star"] = mibrw_centring(e, n, n);
    } catch (const DomainError&) {
      // Some effective scale spans at most one level: centring undefined.
    }
    centring.push_back(row);
  }
  if (format == "csv") {
    CsvWriter csv("profile", r, out, {"n", "m_N", "M_star"});
    for (const auto& row : centring) {
      csv.cell(row["n"].get<int>());
      csv.cell(row["m_N"].is_null() ? std::string("nan") : format_double(row["m_N"].get<double>()));
      csv.cell(row["M_star"].is_null() ? std::string("nan") : format_double(row["M_star"].get<double>()));
      csv.end_row();
    }
    csv.finish();
    return kExitOk;
  }
  json hull = json::array();
  for (const auto& v : concave_hull(p)) hull.push_back({v.lambda, v.value});
  const json result = {{"profile", profile_to_json(p)},
                       {"m", e.m()},
                       {"effective",
                        {{"bar_sigmas", e.bar_sigmas},
                         {"bar_lambdas", e.bar_lambdas},
                         {"weights", e.weights}}},
                       {"hull", hull},
                       {"centring", centring}};
  emit_json("profile", r, result, out);
  return kExitOk;
}

int cmd_sample(json& r, std::ostream& out, std::ostream&) {
  const StepProfile p = resolve_profile(r);
  const std::uint64_t seed = require_seed(r);
  resolve_threads(r);
  const std::string format = resolve_format(r, {"csv", "binary"});
  const FieldKind kind = parse_field_kind(get_string(r, "kind"));
  const bool dense = kind == FieldKind::dgff || kind == FieldKind::psi;
  const int n = resolve_n(r, 1, dense ? kMaxDenseN : kMaxN);
  const int k0 = get_number<int>(r, "k0");
  if (k0 < 0 || k0 > n) throw ValidationError("--k0 must lie in [0, n]");
  r["k0"] = k0;
  const DgffMethod method = parse_dgff_method(get_string(r, "method"));
  const GridSize g(n);
  FieldSample s;
  switch (kind) {
    case FieldKind::dgff: s = DgffSampler(g, method).sample(seed); break;
    case FieldKind::psi: s = PsiSampler(p, g, method).sample(seed); break;
    case FieldKind::ibrw: s = IbrwSampler(p, g).sample(seed); break;
    case FieldKind::mibrw:
    case FieldKind::tmibrw: s = MibrwSampler(p, g, k0).sample(seed); break;
    case FieldKind::coupled:
      throw ValidationError("kind 'coupled' is produced by the compare subcommand, not sample");
  }
  Sink sink(r, out, format == "binary");
  if (format == "binary") {
    write_field_binary(sink.stream(), s, provenance("sample", r));
  } else {
    write_field_csv(sink.stream(), s, provenance("sample", r));
  }
  sink.finish();
  return kExitOk;
}

// Checkpoint file: {"config": ..., "results": {item: {n: value}}}.
class Checkpoint {
 public:
  Checkpoint(const json& r, std::ostream& err) {
    if (!r.at("checkpoint").is_string()) return;
    path_ = r.at("checkpoint").get<std::string>();
    config_ = r;
    config_.erase("checkpoint");
    config_.erase("output");
    config_.erase("threads");
    std::ifstream in(*path_);
    if (!in) return;
    try {
      const json saved = json::parse(in);
      if (saved.at("config") == config_) {
        results_ = saved.at("results");
        err << "# resuming from checkpoint " << *path_ << '\n';
      } else {
        err << "# checkpoint " << *path_ << " belongs to a different config; starting fresh\n";
      }
    } catch (const json::exception&) {
      err << "# checkpoint " << *path_ << " is unreadable; starting fresh\n";
    }
  }

  std::map<std::string, std::map<int, double>> values() const {
    std::map<std::string, std::map<int, double>> out;
    for (auto it = results_.begin(); it != results_.end(); ++it) {
      for (auto jt = it.value().begin(); jt != it.value().end(); ++jt) {
        out[it.key()][std::stoi(jt.key())] = jt.value().get<double>();
      }
    }
    return out;
  }

  void record(const std::string& item, int n, double value) {
    if (!path_) return;
    results_[item][std::to_string(n)] = value;
    const std::string tmp = *path_ + ".tmp";
    {
      std::ofstream o(tmp);
      o << json{{"config", config_}, {"results", results_}}.dump(2) << '\n';
      if (!o) throw Error("cannot write checkpoint '" + tmp + "'");
    }
    std::filesystem::rename(tmp, *path_);
  }

 private:
  std::optional<std::string> path_;
  json config_;
  json results_ = json::object();
};

int cmd_cov_check(json& r, std::ostream& out, std::ostream& err) {
  const StepProfile p = resolve_profile(r);
  const std::uint64_t seed = require_seed(r);
  resolve_threads(r);
  const std::string format = resolve_format(r, {"json", "csv"});
  const std::string lemma = get_string(r, "lemma");
  const std::vector<int> ns = get_int_list(r, "n");
  r["n"] = ns;
  const double rel = get_number<double>(r, "rel-threshold");
  if (!(rel > 0.0)) throw ValidationError("--rel-threshold must be positive");
  r["rel-threshold"] = rel;
  Checkpoint ckpt(r, err);

  CovarianceReport report;
  json details = json::object();
  if (lemma == "cov_comp") {
    CovCompOptions opt;
    opt.ns = ns;
    opt.iv_ns = get_int_list(r, "iv-n");
    r["iv-n"] = opt.iv_ns;
    opt.sources = get_number<int>(r, "sources");
    if (opt.sources < 0) throw ValidationError("--sources must be >= 0");
    r["sources"] = opt.sources;
    opt.items = split(get_string(r, "items"), ',');
    for (const auto& it : opt.items) {
      if (it != "i" && it != "ii" && it != "iii" && it != "iv") {
        throw ValidationError("--items entries must be among i, ii, iii, iv");
      }
    }
    for (int n : ns) {
      if (n < 2 || n > 7) throw ValidationError("cov_comp --n values must lie in [2, 7]");
    }
    for (int n : opt.iv_ns) {
      if (n < 2 || n > 4) throw ValidationError("cov_comp --iv-n values must lie in [2, 4]");
    }
    opt.seed = seed;
    opt.rel_threshold = rel;
    opt.resume = ckpt.values();
    opt.on_result = [&](const std::string& item, int n, double v) { ckpt.record(item, n, v); };
    report = verify_cov_comp(p, opt);
  } else if (lemma == "increment") {
    const double delta = get_number<double>(r, "delta");
    if (!(delta > 0.0 && delta < 0.5)) throw ValidationError("--delta must lie in (0, 1/2)");
    r["delta"] = delta;
    const int max_pairs = get_number<int>(r, "max-pairs");
    if (max_pairs < 1) throw ValidationError("--max-pairs must be >= 1");
    r["max-pairs"] = max_pairs;
    for (int n : ns) {
      if (n < 2 || n > 8) throw ValidationError("increment --n values must lie in [2, 8]");
    }
    const auto resume = ckpt.values();
    DeviationSeries s;
    s.item = "increment";
    for (int n : ns) {
      const auto it = resume.find("increment");
      if (it != resume.end() && it->second.count(n)) {
        s.deviation[n] = it->second.at(n);
        continue;
      }
      const IncrementLemmaResult res =
          verify_increment_lemma(p, GridSize(n), delta, static_cast<std::size_t>(max_pairs), seed);
      s.deviation[n] = res.sup_deviation;
      details[std::to_string(n)] = {{"eligible_pairs", res.eligible_pairs},
                                    {"checked_pairs", res.checked_pairs},
                                    {"same_vertex_cross", res.same_vertex_cross}};
      ckpt.record("increment", n, res.sup_deviation);
    }
    finalize_series(s, rel);
    report.lemma = "increment";
    report.items.push_back(s);
  } else {
    throw ValidationError("--lemma must be cov_comp or increment");
  }

  if (format == "csv") {
    CsvWriter csv("cov-check", r, out, {"item", "n", "deviation", "slope", "threshold", "bounded"});
    for (const auto& s : report.items) {
      for (const auto& [n, d] : s.deviation) {
        csv.cell(s.item).cell(n).cell(d).cell(s.slope).cell(s.threshold).cell(s.bounded);
        csv.end_row();
      }
    }
    csv.finish();
  } else {
    json items = json::array();
    for (const auto& s : report.items) items.push_back(to_json(s));
    json result = {{"lemma", report.lemma}, {"items", items}, {"bounded", report.bounded()}};
    if (!details.empty()) result["details"] = details;
    emit_json("cov-check", r, result, out);
  }
  return report.bounded() ? kExitOk : kExitVerdict;
}

int cmd_compare(json& r, std::ostream& out, std::ostream&) {
  const StepProfile p = resolve_profile(r);
  const std::uint64_t seed = require_seed(r);
  const int threads = resolve_threads(r);
  const std::string format = resolve_format(r, {"json", "csv"});
  const CouplingDirection dir = parse_coupling_direction(get_string(r, "direction"));
  const int n = resolve_n(r, 2, kMaxDenseN);
  const double conf = get_number<double>(r, "conf");
  if (!(conf > 0.5 && conf < 1.0)) throw ValidationError("--conf must lie in (0.5, 1)");
  r["conf"] = conf;

  if (dir == CouplingDirection::mean_upper || dir == CouplingDirection::mean_lower) {
    if (format == "csv") throw ValidationError("mean couplings report JSON only");
    json result;
    bool ok = false;
    if (dir == CouplingDirection::mean_upper) {
      const MeanUpperReport m = mean_upper_noise(p, n);
      result = {{"c1", m.c1}, {"before", to_json(m.before)}, {"after", to_json(m.after)}};
      ok = m.after.one_sided;
    } else {
      const MeanLowerReport m = mean_lower_truncation(p, n);
      result = {{"k0", m.k0}, {"holds", m.holds}, {"report", to_json(m.report)}};
      ok = m.report.one_sided;
    }
    result["holds"] = ok;
    emit_json("compare", r, result, out);
    return ok ? kExitOk : kExitVerdict;
  }

  const std::int64_t reps = resolve_replicates(r);
  const std::string kappa = get_string(r, "kappa");
  CouplingSpec spec;
  const bool upper = dir == CouplingDirection::upper;
  if (kappa == "auto") {
    spec = upper ? auto_upper_coupling(p, n) : auto_lower_coupling(p, n);
  } else {
    const int k = parse_number<int>(kappa, "kappa");
    spec = upper ? build_upper_coupling(p, n, k) : build_lower_coupling(p, n, k);
  }
  r["kappa_resolved"] = spec.kappa;
  std::vector<double> levels;
  if (r.at("levels").is_null()) {
    levels = default_levels(spec);
  } else {
    levels = get_double_list(r, "levels");
  }
  r["levels"] = levels;
  std::optional<InequalityCheck> check;
  if (spec.slepian.passes()) check = coupling_inequality(spec, levels, reps, seed, threads, conf);
  const bool ok = spec.slepian.passes() && check->holds();

  if (format == "csv") {
    CsvWriter csv("compare", r, out,
                  {"lambda", "lhs_hits", "rhs_hits", "lhs", "rhs", "lhs_lower", "rhs_upper", "holds"});
    if (check) {
      for (const auto& row : check->rows) {
        csv.cell(row.lambda).cell(row.lhs_hits).cell(row.rhs_hits).cell(row.lhs).cell(row.rhs);
        csv.cell(row.lhs_lower).cell(row.rhs_upper).cell(row.holds);
        csv.end_row();
      }
    }
    csv.finish();
  } else {
    json rows = json::array();
    if (check) {
      for (const auto& row : check->rows) {
        rows.push_back({{"lambda", row.lambda}, {"lhs_hits", row.lhs_hits},
                        {"rhs_hits", row.rhs_hits}, {"lhs", row.lhs}, {"rhs", row.rhs},
                        {"lhs_lower", row.lhs_lower}, {"rhs_upper", row.rhs_upper},
                        {"holds", row.holds}});
      }
    }
    json result = {{"direction", to_string(dir)}, {"kappa", spec.kappa},
                   {"points", spec.points.size()}, {"slepian", to_json(spec.slepian)},
                   {"rows", rows}, {"holds", ok}};
    if (spec.tilde) result["sigma_tilde"] = profile_to_json(spec.tilde->sigma_tilde);
    emit_json("compare", r, result, out);
  }
  return ok ? kExitOk : kExitVerdict;
}

int cmd_tails(json& r, std::ostream& out, std::ostream&) {
  MaxParams params;
  params.profile = resolve_profile(r);
  const std::uint64_t seed = require_seed(r);
  const int threads = resolve_threads(r);
  const std::string format = resolve_format(r, {"csv", "json"});
  params.kind = parse_field_kind(get_string(r, "kind"));
  if (params.kind == FieldKind::coupled) throw ValidationError("tails does not support kind 'coupled'");
  const bool dense = params.kind == FieldKind::dgff || params.kind == FieldKind::psi;
  params.n = resolve_n(r, 2, dense ? kMaxDenseN : kMaxN);
  params.k0 = get_number<int>(r, "k0");
  if (params.k0 < 0 || params.k0 > params.n) throw ValidationError("--k0 must lie in [0, n]");
  r["k0"] = params.k0;
  if (params.kind == FieldKind::tmibrw && params.k0 == 0) {
    throw ValidationError("kind 'tmibrw' needs --k0 >= 1");
  }
  params.method = parse_dgff_method(get_string(r, "method"));
  const std::int64_t reps = resolve_replicates(r);
  TailOptions opt;
  if (!r.at("x-grid").is_null()) {
    opt.right_grid = get_double_list(r, "x-grid");
    r["x-grid"] = opt.right_grid;
  }
  if (!r.at("left-grid").is_null()) {
    opt.left_grid = get_double_list(r, "left-grid");
    r["left-grid"] = opt.left_grid;
  }
  opt.recentre = get_bool(r, "recentre");
  r["recentre"] = opt.recentre;
  opt.fit.seed = seed;

  const std::vector<double> maxima = mc_max(params, reps, seed, threads);
  const TailReport rep = right_tail_rate(params, maxima, opt);

  if (format == "csv") {
    CsvWriter csv("tails", r, out, {"side", "x", "count", "phat", "ci_lo", "ci_hi"});
    for (const auto* table : {&rep.right, &rep.left}) {
      const std::string side = table == &rep.right ? "right" : "left";
      for (const auto& t : *table) {
        csv.cell(side).cell(t.x).cell(t.count).cell(t.phat).cell(t.ci_lo).cell(t.ci_hi);
        csv.end_row();
      }
    }
    csv.finish();
    return kExitOk;
  }
  const MaxSummary& s = rep.summary;
  json result = {{"kind", to_string(rep.kind)},
                 {"n", rep.n},
                 {"replicates", rep.replicates},
                 {"centring", rep.centring},
                 {"summary",
                  {{"mean", s.mean}, {"variance", s.variance}, {"q05", s.q05}, {"q25", s.q25},
                   {"q50", s.q50}, {"q75", s.q75}, {"q95", s.q95}}},
                 {"right", to_json(rep.right)},
                 {"right_fit", rep.right_fit ? to_json(*rep.right_fit) : json()},
                 {"left", to_json(rep.left)},
                 {"left_fit", rep.left_fit ? to_json(*rep.left_fit) : json()}};
  emit_json("tails", r, result, out);
  return kExitOk;
}

int cmd_second_moment(json& r, std::ostream& out, std::ostream&) {
  const StepProfile p = resolve_profile(r);
  const std::uint64_t seed = require_seed(r);
  const int threads = resolve_threads(r);
  const std::string format = resolve_format(r, {"csv", "json"});
  const int n = resolve_n(r, 2, 9);
  const std::int64_t reps = resolve_replicates(r);
  const std::vector<double> ys = get_double_list(r, "y-grid");
  for (double y : ys) {
    if (!(y >= 0.0)) throw ValidationError("--y-grid values must be >= 0");
  }
  r["y-grid"] = ys;
  const double cf = r.at("cf").is_null() ? default_cf(p) : get_number<double>(r, "cf");
  if (!(cf > 0.0)) throw ValidationError("--cf must be positive");
  r["cf"] = cf;
  const MomentMethod method = parse_moment_method(get_string(r, "method"));
  r["method"] = to_string(method);
  const double conf = get_number<double>(r, "conf");
  if (!(conf > 0.5 && conf < 1.0)) throw ValidationError("--conf must lie in (0.5, 1)");
  r["conf"] = conf;
  // Validates the spec (scales, n) before any sampling.
  const PathEventSpec probe = PathEventSpec::make(p, n, ys.front(), cf);
  if (method == MomentMethod::semi_analytic && probe.m() != 1) {
    throw ValidationError("--method semi-analytic needs a single effective scale");
  }

  const MomentOptions mopt{reps, seed, threads};
  const MomentMethod sampling =
      method == MomentMethod::brute_force ? MomentMethod::brute_force : MomentMethod::monte_carlo;
  std::vector<SecondMomentEstimate> est = moment_sweep(p, n, cf, ys, mopt, sampling);
  std::vector<PaleyZygmund> pz;
  for (auto& e : est) {
    if (method == MomentMethod::semi_analytic) {
      e.first = first_moment(PathEventSpec::make(p, n, e.y, cf), method, mopt);
      e.cov_first_second = 0.0;  // independent draws
    }
    pz.push_back(e.first.value > 0.0 ? paley_zygmund_bound(e, conf) : PaleyZygmund{});
  }

  if (format == "csv") {
    CsvWriter csv("second-moment", r, out,
                  {"y", "eh", "eh_se", "eh_method", "eh2", "eh2_se", "c_tilde", "pz_bound", "pz_se",
                   "direct_tail", "direct_lo", "direct_hi"});
    for (std::size_t i = 0; i < est.size(); ++i) {
      const auto& e = est[i];
      csv.cell(e.y).cell(e.first.value).cell(e.first.se).cell(to_string(e.first.method));
      csv.cell(e.second.value).cell(e.second.se).cell(e.c_tilde());
      csv.cell(pz[i].bound).cell(pz[i].se).cell(pz[i].direct);
      csv.cell(pz[i].direct_ci.lo).cell(pz[i].direct_ci.hi);
      csv.end_row();
    }
    csv.finish();
    return kExitOk;
  }
  json rows = json::array();
  for (std::size_t i = 0; i < est.size(); ++i) {
    const auto& e = est[i];
    rows.push_back({{"y", e.y},
                    {"eh", e.first.value},
                    {"eh_se", e.first.se},
                    {"eh_method", to_string(e.first.method)},
                    {"eh2", e.second.value},
                    {"eh2_se", e.second.se},
                    {"c_tilde", e.c_tilde()},
                    {"by_r", e.by_r},
                    {"by_r_se", e.by_r_se},
                    {"pz_bound", pz[i].bound},
                    {"pz_se", pz[i].se},
                    {"direct_tail", pz[i].direct},
                    {"direct_ci", {pz[i].direct_ci.lo, pz[i].direct_ci.hi}},
                    {"pz_below_direct", pz[i].holds}});
  }
  emit_json("second-moment", r, {{"n", n}, {"cf", cf}, {"rows", rows}}, out);
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Scale-inhomogeneous discrete Gaussian free field experiments", "sidgff"};
  app.set_version_flag("--version", std::string(library_version()));
  app.require_subcommand(1);

  std::vector<std::pair<std::unique_ptr<Command>, Handler>> commands;
  auto add = [&](const std::string& name, const std::string& help, Handler h) -> Command& {
    commands.emplace_back(std::make_unique<Command>(app, name, help), std::move(h));
    return *commands.back().first;
  };

  Command& profile = add("profile", "effective profile, weights and centring as JSON", cmd_profile);
  profile.option("n", "grid exponents (list or range a..b)", "6..12");
  profile.option("format", "json or csv", "json");

  Command& sample = add("sample", "draw one field and dump it", cmd_sample);
  sample.option("kind", "dgff, psi, ibrw, mibrw or tmibrw", "dgff");
  sample.option("n", "grid exponent", 5);
  sample.option("k0", "MIBRW truncation level", 0);
  sample.option("method", "DGFF sampler: cholesky or precision", "cholesky");
  sample.option("format", "csv or binary", "csv");

  Command& cov = add("cov-check", "covariance comparison sweeps with bounded verdicts", cmd_cov_check);
  cov.option("lemma", "cov_comp or increment", "cov_comp");
  cov.option("n", "grid exponents (list or range a..b)", "3..6");
  cov.option("iv-n", "grid exponents for item iv", "3,4");
  cov.option("items", "cov_comp items, comma separated", "i,ii,iii,iv");
  cov.option("sources", "extra source vertices for item iii", 64);
  cov.option("delta", "bulk parameter for the increment check", 0.3);
  cov.option("max-pairs", "pairs checked per n in the increment check", 300);
  cov.option("rel-threshold", "relative slope threshold of the verdict", 0.05);
  cov.option("checkpoint", "JSON file storing per-n results for resuming", json());
  cov.option("format", "json or csv", "json");

  Command& cmp = add("compare", "Gaussian comparison couplings", cmd_compare);
  cmp.option("direction", "upper, lower, mean-upper or mean-lower", "upper");
  cmp.option("n", "grid exponent", 4);
  cmp.option("kappa", "coupling depth or 'auto'", "auto");
  cmp.option("replicates", "Monte Carlo replicates", 20000);
  cmp.option("levels", "probability levels lambda (list or lo:hi:step)", json());
  cmp.option("conf", "one-sided confidence level", 0.95);
  cmp.option("format", "json or csv", "json");

  Command& tails = add("tails", "tail tables and rate fits of the maximum", cmd_tails);
  tails.option("kind", "dgff, psi, ibrw, mibrw or tmibrw", "psi");
  tails.option("n", "grid exponent", 6);
  tails.option("k0", "MIBRW truncation level", 0);
  tails.option("method", "DGFF sampler: cholesky or precision", "precision");
  tails.option("replicates", "Monte Carlo replicates", 20000);
  tails.option("x-grid", "right-tail grid (list or lo:hi:step)", json());
  tails.option("left-grid", "left-tail grid (list or lo:hi:step)", json());
  tails.flag("recentre", "centre at the empirical median");
  tails.option("format", "csv or json", "csv");

  Command& sm = add("second-moment", "moments of the path-event counter h_N(y)", cmd_second_moment);
  sm.option("n", "grid exponent", 6);
  sm.option("y-grid", "values of y (list or lo:hi:step)", "0,1,2");
  sm.option("cf", "tube constant C_f (default: calibrated)", json());
  sm.option("method", "monte-carlo, semi-analytic or brute-force", "monte-carlo");
  sm.option("replicates", "Monte Carlo replicates", 20000);
  sm.option("conf", "one-sided confidence level", 0.95);
  sm.option("format", "csv or json", "csv");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  for (auto& [cmd, handler] : commands) {
    if (!cmd->parsed()) continue;
    try {
      json r = cmd->resolve();
      const int code = handler(r, out, err);
      err << "# resolved config: " << r.dump() << '\n';
      return code;
    } catch (const Error& e) {
      err << "sidgff " << cmd->name() << ": error: " << e.what() << '\n';
      return kExitValidation;
    } catch (const std::exception& e) {
      err << "sidgff " << cmd->name() << ": internal error: " << e.what() << '\n';
      return kExitValidation;
    }
  }
  return kExitValidation;
}

}  // namespace sidgff::cli
