#include "bayesvpr/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "bayesvpr/error.hpp"
#include "bayesvpr/evaluation.hpp"

namespace bayesvpr {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  return out;
}

template <typename T>
T parse_number(const std::string& raw) {
  const std::string s = trim(raw);
  T v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::invalid_argument("expected a number, got '" + s + "'");
  }
  return v;
}

double parse_real(const std::string& s) {
  const double v = parse_number<double>(s);
  if (!std::isfinite(v)) throw std::invalid_argument("expected a finite number");
  return v;
}

bool parse_bool(const std::string& raw) {
  const std::string s = trim(raw);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw std::invalid_argument("expected true or false, got '" + s + "'");
}

Vector6d parse_vec6(const std::string& s) {
  const std::vector<std::string> parts = split(s, ',');
  if (parts.size() != 6) throw std::invalid_argument("expected 6 comma-separated values");
  Vector6d v;
  for (int i = 0; i < 6; ++i) v(i) = parse_real(parts[static_cast<std::size_t>(i)]);
  return v;
}

std::string format_vec6(const Vector6d& v) {
  std::string out;
  for (int i = 0; i < 6; ++i) out += (i ? "," : "") + format_double(v(i));
  return out;
}

std::optional<double> parse_auto(const std::string& s) {
  if (trim(s) == "auto") return std::nullopt;
  return parse_real(s);
}

std::string format_auto(const std::optional<double>& v) { return v ? format_double(*v) : "auto"; }

// "src_start:src_end:dst_start; ..."
std::vector<AliasSegment> parse_aliasing(const std::string& s) {
  std::vector<AliasSegment> out;
  for (const std::string& item : split(s, ';')) {
    if (item.empty()) continue;
    const std::vector<std::string> f = split(item, ':');
    if (f.size() != 3) throw std::invalid_argument("expected src_start:src_end:dst_start");
    out.push_back({parse_real(f[0]), parse_real(f[1]), parse_real(f[2])});
  }
  return out;
}

std::string format_aliasing(const std::vector<AliasSegment>& segs) {
  std::string out;
  for (std::size_t i = 0; i < segs.size(); ++i) {
    out += (i ? ";" : "") + format_double(segs[i].src_start) + ":" + format_double(segs[i].src_end) +
           ":" + format_double(segs[i].dst_start);
  }
  return out;
}

OdometrySource parse_odometry_source(const std::string& s) {
  if (trim(s) == "sensor") return OdometrySource::kSensor;
  if (trim(s) == "ground_truth") return OdometrySource::kGroundTruth;
  throw std::invalid_argument("expected sensor or ground_truth");
}

struct Field {
  const char* section;
  const char* key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define BV_REAL(sec, key, member)                                              \
  Field{sec, key, [](RunConfig& c, const std::string& v) { c.member = parse_real(v); }, \
        [](const RunConfig& c) { return format_double(c.member); }}
#define BV_SIZE(sec, key, member)                                                         \
  Field{sec, key,                                                                         \
        [](RunConfig& c, const std::string& v) { c.member = parse_number<std::size_t>(v); }, \
        [](const RunConfig& c) { return std::to_string(c.member); }}
#define BV_INT(sec, key, member)                                                  \
  Field{sec, key, [](RunConfig& c, const std::string& v) { c.member = parse_number<int>(v); }, \
        [](const RunConfig& c) { return std::to_string(c.member); }}
#define BV_BOOL(sec, key, member)                                              \
  Field{sec, key, [](RunConfig& c, const std::string& v) { c.member = parse_bool(v); }, \
        [](const RunConfig& c) { return std::string(c.member ? "true" : "false"); }}
#define BV_PATH(sec, key, member)                                                 \
  Field{sec, key, [](RunConfig& c, const std::string& v) { c.member = trim(v); }, \
        [](const RunConfig& c) { return c.member.string(); }}
#define BV_VEC6(sec, key, member)                                              \
  Field{sec, key, [](RunConfig& c, const std::string& v) { c.member = parse_vec6(v); }, \
        [](const RunConfig& c) { return format_vec6(c.member); }}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      Field{"run", "method", [](RunConfig& c, const std::string& v) { c.method = parse_method(trim(v)); },
            [](const RunConfig& c) { return method_name(c.method); }},
      BV_SIZE("run", "trials", num_trials),
      BV_SIZE("run", "query_len", query_len),
      Field{"run", "seed",
            [](RunConfig& c, const std::string& v) { c.seed = parse_number<std::uint64_t>(v); },
            [](const RunConfig& c) { return std::to_string(c.seed); }},
      BV_SIZE("run", "jobs", jobs),
      Field{"run", "tolerance",
            [](RunConfig& c, const std::string& v) {
              c.tolerance = trim(v);
              ErrorTolerance::parse(c.tolerance);
            },
            [](const RunConfig& c) { return c.tolerance; }},
      Field{"run", "embedding", [](RunConfig& c, const std::string& v) { c.embedding = trim(v); },
            [](const RunConfig& c) { return c.embedding; }},
      Field{"run", "odometry",
            [](RunConfig& c, const std::string& v) { c.odometry = parse_odometry_source(v); },
            [](const RunConfig& c) {
              return std::string(c.odometry == OdometrySource::kSensor ? "sensor" : "ground_truth");
            }},
      BV_PATH("run", "out", out_dir),

      Field{"data", "source",
            [](RunConfig& c, const std::string& v) {
              if (trim(v) == "synthetic") {
                c.synthetic = true;
              } else if (trim(v) == "files") {
                c.synthetic = false;
              } else {
                throw std::invalid_argument("expected synthetic or files");
              }
            },
            [](const RunConfig& c) { return std::string(c.synthetic ? "synthetic" : "files"); }},
      BV_PATH("data", "map", map_prefix),
      BV_PATH("data", "query", query_prefix),
      BV_PATH("data", "odometry", odom_path),
      BV_PATH("data", "trials", trials_path),
      BV_SIZE("data", "traverse", traverse),

      BV_REAL("world", "route_length", world.route_length),
      BV_REAL("world", "ref_spacing", world.ref_spacing),
      BV_REAL("world", "query_spacing", world.query_spacing),
      BV_REAL("world", "query_spacing_jitter", world.query_spacing_jitter),
      BV_SIZE("world", "embed_dim", world.embed_dim),
      BV_REAL("world", "appearance_noise_sigma", world.appearance_noise_sigma),
      BV_REAL("world", "noise_variation", world.noise_variation),
      BV_REAL("world", "noise_variation_length", world.noise_variation_length),
      BV_REAL("world", "appearance_length_scale", world.appearance_length_scale),
      Field{"world", "aliasing_segments",
            [](RunConfig& c, const std::string& v) { c.world.aliasing_segments = parse_aliasing(v); },
            [](const RunConfig& c) { return format_aliasing(c.world.aliasing_segments); }},
      BV_SIZE("world", "random_alias_pairs", world.random_alias_pairs),
      BV_REAL("world", "random_alias_length", world.random_alias_length),
      BV_VEC6("world", "odom_noise_sigma", world.odom_noise_sigma),
      BV_SIZE("world", "num_query_traverses", world.num_query_traverses),
      BV_REAL("world", "query_lateral_offset", world.query_lateral_offset),
      Field{"world", "seed",
            [](RunConfig& c, const std::string& v) { c.world.rng_seed = parse_number<std::uint64_t>(v); },
            [](const RunConfig& c) { return std::to_string(c.world.rng_seed); }},

      BV_REAL("measurement", "delta", localizer.delta),
      Field{"measurement", "lambda1",
            [](RunConfig& c, const std::string& v) { c.localizer.fixed_lambda1 = parse_auto(v); },
            [](const RunConfig& c) { return format_auto(c.localizer.fixed_lambda1); }},

      BV_INT("topological", "w_lower", localizer.topo.w_lower),
      BV_INT("topological", "w_upper", localizer.topo.w_upper),
      BV_INT("topological", "window", localizer.topo.window),
      BV_REAL("topological", "tau_threshold", localizer.topo.tau_threshold),
      BV_BOOL("topological", "loop_closure", localizer.topo.loop_closure),

      BV_SIZE("mcl", "num_particles", localizer.mcl.num_particles),
      BV_VEC6("mcl", "sigma_init", localizer.mcl.sigma_init),
      BV_VEC6("mcl", "sigma_odom", localizer.mcl.sigma_odom),
      BV_REAL("mcl", "lambda2", localizer.mcl.lambda2),
      BV_SIZE("mcl", "k_neighbors", localizer.mcl.k_neighbors),
      BV_REAL("mcl", "alpha", localizer.mcl.alpha),
      BV_REAL("mcl", "radius", localizer.mcl.radius),
      BV_REAL("mcl", "ess_threshold", localizer.mcl.ess_threshold),
      BV_REAL("mcl", "tau_threshold", localizer.mcl.tau_threshold),

      BV_SIZE("seqmatch", "seq_length", localizer.seq.seq_length),
      BV_REAL("seqmatch", "v_min", seq_v_min),
      BV_REAL("seqmatch", "v_max", seq_v_max),
      BV_SIZE("seqmatch", "num_slopes", localizer.seq.num_slopes),
      Field{"seqmatch", "nominal_slope",
            [](RunConfig& c, const std::string& v) { c.nominal_slope = parse_auto(v); },
            [](const RunConfig& c) { return format_auto(c.nominal_slope); }},

      BV_REAL("baseline", "score_threshold", baseline_threshold),

      BV_SIZE("bench", "repetitions", bench_repetitions),
      BV_SIZE("bench", "trials", bench_trials),
      Field{"bench", "methods",
            [](RunConfig& c, const std::string& v) {
              c.bench_methods.clear();
              for (const std::string& m : split(v, ',')) {
                if (!m.empty()) c.bench_methods.push_back(parse_method(m));
              }
            },
            [](const RunConfig& c) {
              std::string out;
              for (std::size_t i = 0; i < c.bench_methods.size(); ++i) {
                out += (i ? "," : "") + method_name(c.bench_methods[i]);
              }
              return out;
            }},
  };
  return table;
}

[[noreturn]] void invalid(const std::string& field, const std::string& why) {
  throw Error(ErrorCode::kConfigInvalid, field + ": " + why);
}

}  // namespace

RunConfig parse_config(std::istream& in) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw Error(ErrorCode::kConfigInvalid,
                "line " + std::to_string(e.line()) + ": " + e.message());
  }
  RunConfig cfg;
  for (const auto& [section, body] : tree) {
    if (!body.data().empty()) invalid(section, "key outside of any section");
    for (const auto& [key, value] : body) {
      const std::string name = section + "." + key;
      const auto& table = fields();
      const auto it = std::find_if(table.begin(), table.end(), [&](const Field& f) {
        return section == f.section && key == f.key;
      });
      if (it == table.end()) invalid(name, "unknown key");
      try {
        it->set(cfg, value.data());
      } catch (const Error& e) {
        invalid(name, e.detail());
      } catch (const std::exception& e) {
        invalid(name, e.what());
      }
    }
  }
  cfg.world.query_len = cfg.query_len;
  validate(cfg);
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kParseError, path.string() + ": cannot open config file");
  return parse_config(in);
}

void validate(const RunConfig& cfg) {
  if (cfg.num_trials < 1) invalid("run.trials", "must be >= 1");
  if (cfg.query_len < 1) invalid("run.query_len", "must be >= 1");
  ErrorTolerance::parse(cfg.tolerance);
  if (cfg.embedding.find_first_of(",\n") != std::string::npos) {
    invalid("run.embedding", "must not contain commas");
  }
  if (!cfg.synthetic && (cfg.map_prefix.empty() || cfg.query_prefix.empty() || cfg.odom_path.empty())) {
    invalid("data", "source = files needs map, query and odometry");
  }
  if (cfg.synthetic) {
    validate(cfg.world);
    if (cfg.traverse >= cfg.world.num_query_traverses) {
      invalid("data.traverse", "exceeds world.num_query_traverses");
    }
  }
  if (!(cfg.seq_v_min > 0.0 && cfg.seq_v_min <= cfg.seq_v_max)) {
    invalid("seqmatch.v_min", "need 0 < v_min <= v_max");
  }
  if (cfg.nominal_slope && !(*cfg.nominal_slope > 0.0)) invalid("seqmatch.nominal_slope", "must be > 0");
  if (cfg.bench_repetitions < 1) invalid("bench.repetitions", "must be >= 1");
  if (cfg.bench_trials < 1) invalid("bench.trials", "must be >= 1");
  for (Method m : {Method::kTopological, Method::kMcl, Method::kSingle, Method::kSeqMatch}) {
    LocalizerConfig lc = cfg.localizer;
    lc.method = m;
    validate(lc);
  }
}

void dump_config(std::ostream& out, const RunConfig& cfg) {
  std::string section;
  for (const Field& f : fields()) {
    if (section != f.section) {
      if (!section.empty()) out << '\n';
      section = f.section;
      out << '[' << section << "]\n";
    }
    out << f.key << " = " << f.get(cfg) << '\n';
  }
}

}  // namespace bayesvpr
