#include "mmot/io.hpp"

#include <openssl/evp.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <regex>
#include <sstream>

namespace mmot::io {

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

std::string index(const std::string& path, std::size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

const Json& require(const Json& object, const std::string& key, const std::string& path) {
  if (!object.is_object()) throw ConfigError(path.empty() ? "<root>" : path, "expected an object");
  const auto it = object.find(key);
  if (it == object.end()) throw ConfigError(join(path, key), "missing required field");
  return *it;
}

double number(const Json& value, const std::string& path) {
  if (!value.is_number()) throw ConfigError(path, "expected a number");
  const double v = value.get<double>();
  if (!std::isfinite(v)) throw ConfigError(path, "expected a finite number");
  return v;
}

long long integer(const Json& value, const std::string& path) {
  if (!value.is_number_integer()) throw ConfigError(path, "expected an integer");
  if (value.is_number_unsigned() &&
      value.get<std::uint64_t>() > static_cast<std::uint64_t>(std::numeric_limits<long long>::max()))
    throw ConfigError(path, "integer out of range");
  return value.get<long long>();
}

std::uint64_t unsigned64(const Json& value, const std::string& path) {
  if (value.is_number_unsigned()) return value.get<std::uint64_t>();
  if (value.is_number_integer()) throw ConfigError(path, "expected a nonnegative integer");
  if (value.is_string()) {
    const std::string s = value.get<std::string>();
    std::uint64_t out = 0;
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec == std::errc() && end == s.data() + s.size() && !s.empty()) return out;
  }
  throw ConfigError(path, "expected a 64-bit unsigned integer");
}

std::string text(const Json& value, const std::string& path) {
  if (!value.is_string()) throw ConfigError(path, "expected a string");
  return value.get<std::string>();
}

Vector point(const Json& value, const std::string& path) {
  if (value.is_number()) return Vector::Constant(1, number(value, path));
  if (!value.is_array() || value.empty()) throw ConfigError(path, "expected a non-empty array of numbers");
  Vector p(static_cast<Index>(value.size()));
  for (std::size_t i = 0; i < value.size(); ++i) p[static_cast<Index>(i)] = number(value[i], index(path, i));
  return p;
}

namespace {

int positive_int(const Json& value, const std::string& path) {
  const long long v = integer(value, path);
  if (v < 1 || v > std::numeric_limits<int>::max()) throw ConfigError(path, "expected a positive integer");
  return static_cast<int>(v);
}

Measure inline_measure(const Json& spec, const std::string& path) {
  const auto d = positive_int(require(spec, "d", path), join(path, "d"));
  const Json& pts = require(spec, "points", path);
  const Json& ws = require(spec, "weights", path);
  const std::string ppath = join(path, "points"), wpath = join(path, "weights");
  if (!pts.is_array() || pts.empty()) throw ConfigError(ppath, "expected a non-empty array of points");
  if (!ws.is_array()) throw ConfigError(wpath, "expected an array of weights");
  if (ws.size() != pts.size())
    throw ConfigError(wpath, std::to_string(ws.size()) + " weights for " + std::to_string(pts.size()) + " points");
  Matrix p(d, static_cast<Index>(pts.size()));
  Vector w(static_cast<Index>(ws.size()));
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Vector x = point(pts[i], index(ppath, i));
    if (x.size() != d)
      throw ConfigError(index(ppath, i), "point has dimension " + std::to_string(x.size()) + ", expected " + std::to_string(d));
    p.col(static_cast<Index>(i)) = x;
    w[static_cast<Index>(i)] = number(ws[i], index(wpath, i));
  }
  try {
    return Measure(p, w);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path, e.what());
  }
}

}  // namespace

Measure build_grid(const Json& spec, const std::string& path, std::uint64_t seed) {
  const Json& box = require(spec, "box", path);
  const std::string bpath = join(path, "box");
  if (!box.is_array() || box.empty()) throw ConfigError(bpath, "expected [[lo, hi], ...]");
  const auto d = static_cast<Index>(box.size());
  Vector lo(d), hi(d);
  for (std::size_t k = 0; k < box.size(); ++k) {
    const std::string kp = index(bpath, k);
    if (!box[k].is_array() || box[k].size() != 2) throw ConfigError(kp, "expected [lo, hi]");
    lo[static_cast<Index>(k)] = number(box[k][0], index(kp, 0));
    hi[static_cast<Index>(k)] = number(box[k][1], index(kp, 1));
    if (!(hi[static_cast<Index>(k)] > lo[static_cast<Index>(k)])) throw ConfigError(kp, "need lo < hi");
  }

  const Json& nj = require(spec, "n", path);
  const std::string npath = join(path, "n");
  std::vector<Index> counts;
  if (nj.is_array()) {
    if (nj.size() != box.size()) throw ConfigError(npath, "needs one count per box dimension");
    for (std::size_t k = 0; k < nj.size(); ++k) counts.push_back(positive_int(nj[k], index(npath, k)));
  } else {
    counts.assign(static_cast<std::size_t>(d), positive_int(nj, npath));
  }
  Index total = 1;
  for (Index c : counts) {
    total *= c;
    if (total > 100'000) throw ConfigError(npath, "grid has too many atoms");
  }

  const std::string density = spec.contains("density") ? text(spec["density"], join(path, "density")) : "uniform";
  double jitter = 0.0;
  if (spec.contains("jitter")) {
    jitter = number(spec["jitter"], join(path, "jitter"));
    if (jitter < 0.0 || jitter > 1.0) throw ConfigError(join(path, "jitter"), "expected a fraction in [0, 1]");
  }
  double sigma = 0.0;
  static const std::regex gaussian(R"(gaussian\(\s*([0-9.eE+-]+)\s*\))");
  std::smatch match;
  if (std::regex_match(density, match, gaussian)) {
    try {
      sigma = std::stod(match[1].str());
    } catch (const std::exception&) {
      sigma = 0.0;
    }
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError(join(path, "density"), "gaussian sigma must be positive");
  } else if (density != "uniform" && density != "atoms") {
    throw ConfigError(join(path, "density"), "expected \"uniform\", \"gaussian(sigma)\" or \"atoms\"");
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  Matrix p(d, total);
  if (density == "atoms") {
    for (Index i = 0; i < total; ++i)
      for (Index k = 0; k < d; ++k) p(k, i) = lo[k] + (hi[k] - lo[k]) * 0.5 * (unit(rng) + 1.0);
  } else {
    IndexTuple t(static_cast<std::size_t>(d), 0);
    for (Index i = 0; i < total; ++i) {
      for (Index k = 0; k < d; ++k) {
        const double cell = (hi[k] - lo[k]) / static_cast<double>(counts[static_cast<std::size_t>(k)]);
        p(k, i) = lo[k] + (static_cast<double>(t[static_cast<std::size_t>(k)]) + 0.5) * cell +
                  jitter * 0.5 * cell * unit(rng);
      }
      for (std::size_t k = t.size(); k-- > 0;) {
        if (++t[k] < counts[k]) break;
        t[k] = 0;
      }
    }
  }
  Vector w = Vector::Ones(total);
  if (sigma > 0.0) {
    const Vector centre = (lo + hi) / 2.0;
    for (Index i = 0; i < total; ++i)
      w[i] = std::exp(-(p.col(i) - centre).squaredNorm() / (2.0 * sigma * sigma));
  }
  try {
    return Measure::normalized(p, w);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path, e.what());
  }
}

Measure parse_measure(const Json& spec, const std::string& path,
                      const std::filesystem::path& base_dir, std::uint64_t seed) {
  if (!spec.is_object()) throw ConfigError(path, "expected a measure object");
  if (spec.contains("grid")) return build_grid(spec["grid"], join(path, "grid"), seed);
  if (spec.contains("file")) {
    const std::string fpath = join(path, "file");
    const std::filesystem::path file = base_dir / text(spec["file"], fpath);
    std::ifstream in(file);
    if (!in) throw ConfigError(fpath, "cannot open " + file.string());
    Json loaded;
    try {
      loaded = Json::parse(in);
    } catch (const Json::parse_error& e) {
      throw ConfigError(fpath, std::string("invalid JSON in ") + file.string() + ": " + e.what());
    }
    return inline_measure(loaded, fpath);
  }
  return inline_measure(spec, path);
}

CostSpec parse_cost(const Json& spec, const std::string& path) {
  CostSpec c;
  const std::string fpath = join(path, "family");
  try {
    c.family = parse_cost_family(text(require(spec, "family", path), fpath));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(fpath, e.what());
  }
  const bool plain = c.family == CostFamily::coulomb;
  c.n_alpha = positive_int(require(spec, "Na", path), join(path, "Na"));
  if (spec.contains("Nb")) {
    const long long nb = integer(spec["Nb"], join(path, "Nb"));
    if (nb < (plain ? 0 : 1)) throw ConfigError(join(path, "Nb"), plain ? "expected >= 0" : "expected >= 1");
    c.n_beta = static_cast<int>(nb);
  } else if (plain) {
    c.n_beta = 0;
  } else {
    throw ConfigError(join(path, "Nb"), "missing required field");
  }
  c.d = positive_int(require(spec, "d", path), join(path, "d"));
  if (c.family == CostFamily::coulomb_eta) {
    c.eta = number(require(spec, "eta", path), join(path, "eta"));
    if (!(c.eta > 0.0)) throw ConfigError(join(path, "eta"), "expected a positive number");
  } else if (spec.contains("eta")) {
    c.eta = number(spec["eta"], join(path, "eta"));
  }
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path, e.what());
  }
  return c;
}

SolverConfig parse_solver(const Json& spec, const std::string& path, std::uint64_t seed) {
  SolverConfig s;
  s.probe.seed = seed;
  if (spec.is_null()) return s;
  if (!spec.is_object()) throw ConfigError(path, "expected an object");
  if (spec.contains("pivot_limit")) {
    const long long v = integer(spec["pivot_limit"], join(path, "pivot_limit"));
    if (v < 1) throw ConfigError(join(path, "pivot_limit"), "expected a positive integer");
    s.lp.pivot_limit = v;
  }
  if (spec.contains("mass_tol")) {
    s.mass_tol = number(spec["mass_tol"], join(path, "mass_tol"));
    if (s.mass_tol < 0.0) throw ConfigError(join(path, "mass_tol"), "expected >= 0");
  }
  s.probe.mass_tol = s.mass_tol;
  if (spec.contains("probe")) {
    const Json& p = spec["probe"];
    const std::string pp = join(path, "probe");
    if (!p.is_object()) throw ConfigError(pp, "expected an object");
    if (p.contains("trials")) {
      s.probe.trials = positive_int(p["trials"], join(pp, "trials"));
      if (s.probe.trials < 2) throw ConfigError(join(pp, "trials"), "expected >= 2");
    }
    if (p.contains("delta")) {
      s.probe.delta = number(p["delta"], join(pp, "delta"));
      if (s.probe.delta < 0.0) throw ConfigError(join(pp, "delta"), "expected >= 0");
    }
    if (p.contains("seed")) s.probe.seed = unsigned64(p["seed"], join(pp, "seed"));
  }
  s.probe.lp = s.lp;
  return s;
}

EntropicConfig parse_entropic(const Json& spec, const std::string& path) {
  EntropicConfig e;
  if (spec.is_null()) return e;
  if (!spec.is_object()) throw ConfigError(path, "expected an object");
  if (spec.contains("epsilon")) {
    const Json& eps = spec["epsilon"];
    const std::string ep = join(path, "epsilon");
    if (eps.is_array()) {
      if (eps.empty()) throw ConfigError(ep, "epsilon schedule is empty");
      for (std::size_t i = 0; i < eps.size(); ++i) e.epsilons.push_back(number(eps[i], index(ep, i)));
    } else {
      e.epsilons.push_back(number(eps, ep));
    }
    for (std::size_t i = 0; i < e.epsilons.size(); ++i) {
      if (!(e.epsilons[i] > 0.0)) throw ConfigError(ep, "epsilon values must be positive");
      if (i > 0 && !(e.epsilons[i] < e.epsilons[i - 1]))
        throw ConfigError(ep, "epsilon schedule must be strictly decreasing");
    }
  }
  if (spec.contains("relative_epsilon")) {
    const Json& rel = spec["relative_epsilon"];
    const std::string rp = join(path, "relative_epsilon");
    e.relative_epsilons.clear();
    if (rel.is_array()) {
      if (rel.empty()) throw ConfigError(rp, "epsilon schedule is empty");
      for (std::size_t i = 0; i < rel.size(); ++i) e.relative_epsilons.push_back(number(rel[i], index(rp, i)));
    } else {
      e.relative_epsilons.push_back(number(rel, rp));
    }
    for (std::size_t i = 0; i < e.relative_epsilons.size(); ++i) {
      if (!(e.relative_epsilons[i] > 0.0)) throw ConfigError(rp, "epsilon values must be positive");
      if (i > 0 && !(e.relative_epsilons[i] < e.relative_epsilons[i - 1]))
        throw ConfigError(rp, "epsilon schedule must be strictly decreasing");
    }
  }
  if (spec.contains("tol")) {
    e.options.tol = number(spec["tol"], join(path, "tol"));
    if (!(e.options.tol > 0.0)) throw ConfigError(join(path, "tol"), "expected a positive number");
  }
  if (spec.contains("max_iter")) e.options.max_iter = positive_int(spec["max_iter"], join(path, "max_iter"));
  return e;
}

OrderedJson to_json(const Measure& m) {
  OrderedJson points = OrderedJson::array();
  for (Index i = 0; i < m.size(); ++i) {
    OrderedJson p = OrderedJson::array();
    for (Index k = 0; k < m.dim(); ++k) p.push_back(m.point(i)[k]);
    points.push_back(std::move(p));
  }
  OrderedJson weights = OrderedJson::array();
  for (Index i = 0; i < m.size(); ++i) weights.push_back(m.weight(i));
  return OrderedJson{{"d", m.dim()}, {"points", std::move(points)}, {"weights", std::move(weights)}};
}

namespace {

OrderedJson finite_or_null(double v) { return std::isfinite(v) ? OrderedJson(v) : OrderedJson(nullptr); }

}  // namespace

OrderedJson to_json(const DissociationReport& report) {
  OrderedJson rows = OrderedJson::array();
  for (const auto& r : report.rows)
    rows.push_back(OrderedJson{{"eta", r.eta},
                               {"sce_alpha", finite_or_null(r.sce_alpha)},
                               {"sce_beta", finite_or_null(r.sce_beta)},
                               {"interaction_exact", finite_or_null(r.interaction_exact)},
                               {"u_int", finite_or_null(r.u_int)},
                               {"eta3_term", finite_or_null(r.eta3_term)},
                               {"residual_order2", finite_or_null(r.residual_order2)},
                               {"residual_order3", finite_or_null(r.residual_order3)},
                               {"total", finite_or_null(r.total)},
                               {"backend", to_string(r.backend)},
                               {"solve_status", r.solve_status}});
  OrderedJson out{{"schema_version", kSchemaVersion},
                  {"kind", "dissociation"},
                  {"n_alpha", report.n_alpha},
                  {"n_beta", report.n_beta},
                  {"d", report.d},
                  {"seed", report.seed},
                  {"rho_alpha", to_json(report.rho_alpha)},
                  {"rho_beta", to_json(report.rho_beta)},
                  {"order3_threshold", report.order3_threshold ? OrderedJson(*report.order3_threshold)
                                                               : OrderedJson(nullptr)},
                  {"rows", std::move(rows)}};
  return out;
}

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, end);
}

std::string dissociation_csv(const DissociationReport& report) {
  std::ostringstream out;
  out << "# schema_version=" << kSchemaVersion << "\n";
  out << "eta,sce_alpha,sce_beta,interaction_exact,u_int,eta3_term,residual_order2,residual_order3,"
         "backend,solve_status\n";
  for (const auto& r : report.rows)
    out << format_number(r.eta) << ',' << format_number(r.sce_alpha) << ','
        << format_number(r.sce_beta) << ',' << format_number(r.interaction_exact) << ','
        << format_number(r.u_int) << ',' << format_number(r.eta3_term) << ','
        << format_number(r.residual_order2) << ',' << format_number(r.residual_order3) << ','
        << to_string(r.backend) << ',' << r.solve_status << '\n';
  return out.str();
}

std::string plot_table(const DissociationReport& report) {
  if (report.rows.empty()) throw std::invalid_argument("plot data: report has no rows");
  std::ostringstream out;
  out << "# eta R total log10_eta log10_residual_order2 log10_residual_order3\n";
  for (const auto& r : report.rows)
    out << format_number(r.eta) << ' ' << format_number(1.0 / r.eta) << ' ' << format_number(r.total)
        << ' ' << format_number(std::log10(r.eta)) << ' ' << format_number(std::log10(r.residual_order2))
        << ' ' << format_number(std::log10(r.residual_order3)) << '\n';
  return out.str();
}

void emit_plot_data(const DissociationReport& report, const std::filesystem::path& path) {
  const std::string table = plot_table(report);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << table;
  if (!out) throw std::runtime_error("error while writing " + path.string());
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

void write_file(const std::filesystem::path& dir, const std::string& name, const std::string& content) {
  const auto path = dir / name;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out) throw std::runtime_error("error while writing " + path.string());
}

}  // namespace mmot::io
