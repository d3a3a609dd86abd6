#include "mmot/cli.hpp"

#include "mmot/io.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <array>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

namespace mmot::cli {

namespace {

using io::ConfigError;
using io::Json;
using io::OrderedJson;

struct Artifact {
  std::string name;
  std::string content;
};

struct Context {
  Invocation inv;
  Json config;
  std::string config_bytes;
  std::filesystem::path base_dir;
  std::uint64_t seed = 0;
  Backend backend = Backend::lp;
  io::SolverConfig solver;
  io::EntropicConfig entropic;
};

std::string dump(const OrderedJson& j) { return j.dump(2) + "\n"; }

// Independent stream per measure so two jittered grids never share noise.
std::uint64_t derive_seed(std::uint64_t seed, std::uint32_t ordinal) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), ordinal};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

const Json& optional_section(const Json& config, const std::string& key) {
  static const Json null_json;
  const auto it = config.find(key);
  return it == config.end() ? null_json : *it;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("--config", "cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Context load(const Invocation& inv) {
  Context ctx;
  ctx.inv = inv;
  if (std::find(kCommands.begin(), kCommands.end(), inv.command) == kCommands.end())
    throw ConfigError("command", "unknown command \"" + inv.command + "\"");
  ctx.config_bytes = read_file(inv.config);
  try {
    ctx.config = Json::parse(ctx.config_bytes);
  } catch (const Json::parse_error& e) {
    throw ConfigError("<root>", std::string("invalid JSON: ") + e.what());
  }
  if (!ctx.config.is_object()) throw ConfigError("<root>", "expected an object");
  ctx.base_dir = inv.config.parent_path();

  const long long version = io::integer(io::require(ctx.config, "schema_version", ""), "schema_version");
  if (version != io::kSchemaVersion)
    throw ConfigError("schema_version", "unsupported version " + std::to_string(version) + ", expected " +
                                            std::to_string(io::kSchemaVersion));
  if (ctx.config.contains("command")) {
    const std::string declared = io::text(ctx.config["command"], "command");
    if (declared != inv.command)
      throw ConfigError("command", "config is for \"" + declared + "\", invoked as \"" + inv.command + "\"");
  }

  if (inv.seed) ctx.seed = *inv.seed;
  else if (ctx.config.contains("seed")) ctx.seed = io::unsigned64(ctx.config["seed"], "seed");

  std::string backend = "lp";
  if (inv.backend) backend = *inv.backend;
  else if (ctx.config.contains("backend")) backend = io::text(ctx.config["backend"], "backend");
  try {
    ctx.backend = parse_backend(backend);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("backend", e.what());
  }

  ctx.solver = io::parse_solver(optional_section(ctx.config, "solver"), "solver", ctx.seed);
  ctx.entropic = io::parse_entropic(optional_section(ctx.config, "entropic"), "entropic");
  return ctx;
}

OrderedJson header(const Context& ctx) {
  return OrderedJson{{"schema_version", io::kSchemaVersion},
                     {"command", ctx.inv.command},
                     {"backend", to_string(ctx.backend)},
                     {"seed", ctx.seed}};
}

OrderedJson to_json(const CostSpec& c) {
  OrderedJson j{{"family", to_string(c.family)}, {"Na", c.n_alpha}, {"Nb", c.n_beta}, {"d", c.d}};
  if (c.family == CostFamily::coulomb_eta) j["eta"] = c.eta;
  return j;
}

OrderedJson tuple_json(const IndexTuple& t) {
  OrderedJson j = OrderedJson::array();
  for (Index i : t) j.push_back(i);
  return j;
}

OrderedJson to_json(const SplittingCertificate& s) {
  return OrderedJson{{"valid", s.valid},
                     {"max_feasibility_violation", s.max_feasibility_violation},
                     {"max_equality_violation", s.max_equality_violation},
                     {"value_gap", s.value_gap}};
}

struct Problem {
  CostSpec cost;
  std::vector<Measure> marginals;
  CostTensor tensor;
};

Problem load_problem(const Context& ctx) {
  Problem p;
  p.cost = io::parse_cost(io::require(ctx.config, "cost", ""), "cost");
  const Json& ms = io::require(ctx.config, "marginals", "");
  if (!ms.is_array()) throw ConfigError("marginals", "expected an array of measures");
  if (static_cast<int>(ms.size()) != p.cost.order())
    throw ConfigError("marginals", std::to_string(ms.size()) + " marginals for a cost of order " +
                                       std::to_string(p.cost.order()));
  for (std::size_t i = 0; i < ms.size(); ++i) {
    const std::string path = io::index("marginals", i);
    p.marginals.push_back(io::parse_measure(ms[i], path, ctx.base_dir, derive_seed(ctx.seed, static_cast<std::uint32_t>(i))));
    if (p.marginals.back().dim() != p.cost.d)
      throw ConfigError(path, "dimension " + std::to_string(p.marginals.back().dim()) + " but cost.d is " +
                                  std::to_string(p.cost.d));
  }
  try {
    p.tensor = cost_tensor(p.cost, p.marginals);
  } catch (const std::length_error& e) {
    throw ConfigError("marginals", e.what());
  }
  return p;
}

SolveReport solve_exact(const Context& ctx, const Problem& p) {
  SolveReport r = solve_lp(p.tensor, p.marginals, ctx.solver.lp);
  if (!r.optimal())
    throw SolverFailure("lp solve failed with status " + to_string(r.status) +
                        (r.message.empty() ? "" : ": " + r.message));
  return r;
}

OrderedJson lp_json(const SolveReport& r, const CostTensor& tensor, double mass_tol) {
  OrderedJson support = OrderedJson::array();
  for (const auto& e : r.coupling->entries())
    if (e.mass > mass_tol) support.push_back(OrderedJson{{"tuple", tuple_json(e.tuple)}, {"mass", e.mass}});
  OrderedJson potentials = OrderedJson::array();
  for (const auto& table : r.potentials.tables) {
    OrderedJson t = OrderedJson::array();
    for (Index i = 0; i < table.size(); ++i) t.push_back(table[i]);
    potentials.push_back(std::move(t));
  }
  return OrderedJson{{"status", to_string(r.status)},
                     {"value", r.value},
                     {"dual_value", r.dual_value},
                     {"duality_gap", r.duality_gap()},
                     {"pivots", r.pivots},
                     {"phase_one_pivots", r.phase_one_pivots},
                     {"splitting", to_json(verify_splitting(r, tensor))},
                     {"support", std::move(support)},
                     {"potentials", std::move(potentials)}};
}

std::vector<double> absolute_epsilons(const io::EntropicConfig& cfg, const CostTensor& tensor) {
  if (!cfg.epsilons.empty()) return cfg.epsilons;
  double range = tensor.max_finite() - tensor.min_finite();
  if (!(range > 0.0)) range = std::max(1.0, std::abs(tensor.max_finite()));
  std::vector<double> eps;
  for (double r : cfg.relative_epsilons) eps.push_back(r * range);
  return eps;
}

std::vector<Artifact> cmd_solve(const Context& ctx, std::ostream& out) {
  const Problem p = load_problem(ctx);
  OrderedJson report = header(ctx);
  report["cost"] = to_json(p.cost);
  if (ctx.backend == Backend::lp) {
    const SolveReport r = solve_exact(ctx, p);
    const OrderedJson body = lp_json(r, p.tensor, ctx.solver.mass_tol);
    for (const auto& [k, v] : body.items()) report[k] = v;
    out << "solve: value " << io::format_number(r.value) << " (" << to_string(r.status) << ")\n";
  } else {
    if (p.tensor.finite_count() == 0) throw SolverFailure("entropic solve failed with status infeasible");
    const std::vector<double> eps = absolute_epsilons(ctx.entropic, p.tensor);
    const ScheduleResult s = epsilon_schedule_solve(p.tensor, p.marginals, eps, ctx.entropic.options);
    if (s.final.status == EntropicStatus::infeasible)
      throw SolverFailure("entropic solve failed with status infeasible");
    OrderedJson stages = OrderedJson::array();
    for (std::size_t i = 0; i < s.epsilons.size(); ++i)
      stages.push_back(OrderedJson{{"epsilon", s.epsilons[i]}, {"value", s.values[i]},
                                   {"status", to_string(s.statuses[i])}});
    report["status"] = to_string(s.final.status);
    report["value"] = s.final.value;
    report["marginal_error"] = s.final.marginal_error;
    report["iterations"] = s.final.state.iterations;
    report["epsilon_min"] = s.epsilons.back();
    report["support_size"] = p.tensor.size();
    report["stages"] = std::move(stages);
    out << "solve: value " << io::format_number(s.final.value) << " (" << to_string(s.final.status) << ")\n";
  }
  return {{"report.json", dump(report)}};
}

std::vector<Artifact> cmd_monge(const Context& ctx, std::ostream& out) {
  if (ctx.backend != Backend::lp) throw ConfigError("backend", "monge-check needs the lp backend");
  const Problem p = load_problem(ctx);
  const SolveReport r = solve_exact(ctx, p);
  const MongeDiagnostics m = monge_diagnostics(*r.coupling, ctx.solver.mass_tol);
  const ProbeReport probe = uniqueness_probe(p.tensor, p.marginals, ctx.solver.probe);

  OrderedJson maps = OrderedJson::array();
  for (const auto& map : m.maps) {
    OrderedJson j = OrderedJson::array();
    for (const auto& target : map) j.push_back(target ? OrderedJson(*target) : OrderedJson(nullptr));
    maps.push_back(std::move(j));
  }
  OrderedJson report = header(ctx);
  report["cost"] = to_json(p.cost);
  report["status"] = to_string(r.status);
  report["value"] = r.value;
  report["duality_gap"] = r.duality_gap();
  report["splitting"] = to_json(verify_splitting(r, p.tensor));
  report["graphical_fraction"] = m.graphical_fraction;
  report["graphical"] = m.graphical;
  report["max_partners"] = m.max_partners;
  report["maps"] = std::move(maps);
  OrderedJson supports = OrderedJson::array();
  for (const auto& s : probe.supports) {
    OrderedJson j = OrderedJson::array();
    for (const auto& t : s) j.push_back(tuple_json(t));
    supports.push_back(std::move(j));
  }
  report["probe"] = OrderedJson{{"trials", ctx.solver.probe.trials},
                                {"unique", probe.unique},
                                {"supports_identical", probe.supports_identical},
                                {"value_spread", probe.value_spread},
                                {"perturbation", probe.perturbation},
                                {"max_duality_gap", probe.max_duality_gap},
                                {"all_certified", probe.all_certified},
                                {"supports", std::move(supports)}};
  out << "monge-check: graphical fraction " << io::format_number(m.graphical_fraction)
      << ", probe " << (probe.unique ? "unique" : "not unique") << "\n";
  return {{"monge.json", dump(report)}};
}

std::vector<double> parse_etas(const Json& spec, const std::string& path) {
  if (spec.is_array()) {
    if (spec.empty()) throw ConfigError(path, "expected at least one eta");
    std::vector<double> etas;
    for (std::size_t i = 0; i < spec.size(); ++i) etas.push_back(io::number(spec[i], io::index(path, i)));
    return etas;
  }
  if (!spec.is_object()) throw ConfigError(path, "expected a list of etas or {\"lo\", \"hi\", \"count\"}");
  const double lo = io::number(io::require(spec, "lo", path), io::join(path, "lo"));
  const double hi = io::number(io::require(spec, "hi", path), io::join(path, "hi"));
  const long long count = io::integer(io::require(spec, "count", path), io::join(path, "count"));
  if (count < 1 || count > 100'000) throw ConfigError(io::join(path, "count"), "expected 1..100000");
  try {
    return geometric_grid(lo, hi, static_cast<int>(count));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path, e.what());
  }
}

DissociationReport run_dissociation(const Context& ctx, bool taylor_defaults) {
  const Json& d = io::require(ctx.config, "dissociation", "");
  const Measure alpha = io::parse_measure(io::require(d, "rho_alpha", "dissociation"), "dissociation.rho_alpha",
                                          ctx.base_dir, derive_seed(ctx.seed, 0));
  const Measure beta = io::parse_measure(io::require(d, "rho_beta", "dissociation"), "dissociation.rho_beta",
                                         ctx.base_dir, derive_seed(ctx.seed, 1));
  auto count = [&](const char* key) {
    const std::string path = io::join("dissociation", key);
    const long long v = io::integer(io::require(d, key, "dissociation"), path);
    if (v < 1 || v > 64) throw ConfigError(path, "expected 1..64");
    return static_cast<int>(v);
  };
  const int na = count("Na"), nb = count("Nb");

  std::vector<double> etas;
  if (d.contains("eta")) {
    etas = parse_etas(d["eta"], "dissociation.eta");
  } else if (taylor_defaults) {
    const Json& t = optional_section(ctx.config, "taylor");
    double lo = 1e-3, hi = 1e-2;
    long long n = 8;
    if (t.is_object()) {
      if (t.contains("eta_lo")) lo = io::number(t["eta_lo"], "taylor.eta_lo");
      if (t.contains("eta_hi")) hi = io::number(t["eta_hi"], "taylor.eta_hi");
      if (t.contains("count")) n = io::integer(t["count"], "taylor.count");
    }
    if (n < 4 || n > 100'000) throw ConfigError("taylor.count", "expected 4..100000");
    try {
      etas = geometric_grid(lo, hi, static_cast<int>(n));
    } catch (const std::invalid_argument& e) {
      throw ConfigError("taylor", e.what());
    }
  } else {
    throw ConfigError("dissociation.eta", "missing required field");
  }

  if (ctx.backend == Backend::entropic && !ctx.entropic.epsilons.empty())
    throw ConfigError("entropic.epsilon", "dissociation schedules are relative; use entropic.relative_epsilon");
  BackendOptions options;
  options.lp = ctx.solver.lp;
  options.entropic = ctx.entropic.options;
  options.relative_epsilons = ctx.entropic.relative_epsilons;

  DissociationReport report;
  try {
    report = dissociation_curve(alpha, beta, na, nb, etas, ctx.backend, options);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("dissociation", e.what());
  } catch (const std::length_error& e) {
    throw ConfigError("dissociation", e.what());
  }
  report.seed = ctx.seed;
  return report;
}

OrderedJson report_json(const Context& ctx, const DissociationReport& report) {
  OrderedJson j = header(ctx);
  const OrderedJson body = io::to_json(report);
  for (const auto& [k, v] : body.items())
    if (k != "schema_version") j[k] = v;
  return j;
}

std::vector<Artifact> cmd_dissociate(const Context& ctx, std::ostream& out) {
  const DissociationReport report = run_dissociation(ctx, false);
  out << "dissociate: " << report.rows.size() << " rows\n";
  return {{"dissociation.csv", io::dissociation_csv(report)},
          {"dissociation.json", dump(report_json(ctx, report))},
          {"dissociation_plot.dat", io::plot_table(report)}};
}

OrderedJson optional_number(const std::optional<double>& v) {
  return v ? OrderedJson(*v) : OrderedJson(nullptr);
}

std::vector<Artifact> cmd_taylor(const Context& ctx, std::ostream& out) {
  const DissociationReport report = run_dissociation(ctx, true);
  const Json& t = optional_section(ctx.config, "taylor");
  double lo = 1e-3, hi = 1e-2;
  if (t.is_object()) {
    if (t.contains("eta_lo")) lo = io::number(t["eta_lo"], "taylor.eta_lo");
    if (t.contains("eta_hi")) hi = io::number(t["eta_hi"], "taylor.eta_hi");
  }
  SlopeCheck check;
  try {
    check = taylor_slope_check(report, lo, hi);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("taylor", e.what());
  }
  auto in = [](const std::optional<double>& s, double a, double b) { return s && *s >= a && *s <= b; };
  OrderedJson j = header(ctx);
  j["eta_lo"] = lo;
  j["eta_hi"] = hi;
  j["rows_used"] = check.rows_used;
  j["slope_order2"] = optional_number(check.slope2);
  j["status_order2"] = check.status2;
  j["slope_order2_in_range"] = in(check.slope2, 2.8, 3.2);
  j["slope_order3"] = optional_number(check.slope3);
  j["status_order3"] = check.status3;
  j["slope_order3_in_range"] = in(check.slope3, 3.7, 4.3);
  j["order3_threshold"] = optional_number(report.order3_threshold);
  out << "taylor-check: slopes " << (check.slope2 ? io::format_number(*check.slope2) : check.status2) << ", "
      << (check.slope3 ? io::format_number(*check.slope3) : check.status3) << "\n";
  return {{"taylor.json", dump(j)}, {"taylor.csv", io::dissociation_csv(report)}};
}

std::vector<Artifact> cmd_dirac(const Context& ctx, std::ostream& out) {
  const Json& d = io::require(ctx.config, "dirac_demo", "");
  const Json& xs = io::require(d, "x_marginals", "dirac_demo");
  if (!xs.is_array() || xs.empty()) throw ConfigError("dirac_demo.x_marginals", "expected a non-empty array");
  std::vector<Measure> x;
  for (std::size_t i = 0; i < xs.size(); ++i)
    x.push_back(io::parse_measure(xs[i], io::index("dirac_demo.x_marginals", i), ctx.base_dir,
                                  derive_seed(ctx.seed, static_cast<std::uint32_t>(i))));
  const Json& ys = io::require(d, "y_hats", "dirac_demo");
  if (!ys.is_array() || ys.empty()) throw ConfigError("dirac_demo.y_hats", "expected a non-empty array");
  std::vector<Vector> y;
  for (std::size_t i = 0; i < ys.size(); ++i) y.push_back(io::point(ys[i], io::index("dirac_demo.y_hats", i)));
  int plans = 20;
  if (d.contains("plans")) {
    const long long v = io::integer(d["plans"], "dirac_demo.plans");
    if (v < 0 || v > 100'000) throw ConfigError("dirac_demo.plans", "expected 0..100000");
    plans = static_cast<int>(v);
  }
  DiracDemoReport r;
  try {
    r = dirac_degeneracy_demo(x, y, plans, ctx.seed, ctx.solver.lp);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("dirac_demo", e.what());
  } catch (const std::length_error& e) {
    throw ConfigError("dirac_demo", e.what());
  }
  if (r.lp_status != SolveStatus::optimal)
    throw SolverFailure("lp solve failed with status " + to_string(r.lp_status));

  OrderedJson values = OrderedJson::array();
  for (double v : r.plan_values) values.push_back(v);
  OrderedJson j = header(ctx);
  j["lp_status"] = to_string(r.lp_status);
  j["lp_value"] = r.lp_value;
  j["lp_duality_gap"] = r.lp_duality_gap;
  j["lp_certified"] = r.lp_certified;
  j["product_value"] = r.product_value;
  j["plan_values"] = std::move(values);
  j["max_spread"] = r.max_spread;
  j["tolerance"] = kDegeneracyTolerance;
  j["all_plans_optimal"] = r.all_equal;
  j["product_graphical_fraction"] = r.product_graphical_fraction;
  j["product_non_graphical"] = r.product_non_graphical;
  out << "dirac-demo: " << (r.all_equal ? "all plans optimal" : "plans differ") << ", spread "
      << io::format_number(r.max_spread) << "\n";
  return {{"dirac_demo.json", dump(j)}};
}

std::string manifest(const Context& ctx, std::vector<Artifact> files) {
  std::sort(files.begin(), files.end(), [](const Artifact& a, const Artifact& b) { return a.name < b.name; });
  OrderedJson list = OrderedJson::array();
  for (const auto& f : files)
    list.push_back(OrderedJson{{"name", f.name}, {"sha256", io::sha256_hex(f.content)}, {"bytes", f.content.size()}});
  OrderedJson j = header(ctx);
  j["config_sha256"] = io::sha256_hex(ctx.config_bytes);
  j["files"] = std::move(list);
  return dump(j);
}

}  // namespace

int run(const Invocation& inv, std::ostream& out, std::ostream& err) {
  Context ctx;
  std::vector<Artifact> files;
  try {
    ctx = load(inv);
    if (inv.command == "solve") files = cmd_solve(ctx, out);
    else if (inv.command == "monge-check") files = cmd_monge(ctx, out);
    else if (inv.command == "dissociate") files = cmd_dissociate(ctx, out);
    else if (inv.command == "taylor-check") files = cmd_taylor(ctx, out);
    else files = cmd_dirac(ctx, out);
  } catch (const ConfigError& e) {
    err << "mmot: invalid config: " << e.what() << "\n";
    return kValidationError;
  } catch (const SolverFailure& e) {
    err << "mmot: solver failure: " << e.what() << "\n";
    return kSolverFailure;
  } catch (const std::exception& e) {
    err << "mmot: " << e.what() << "\n";
    return kIoError;
  }

  try {
    std::filesystem::create_directories(inv.out);
    const std::string m = manifest(ctx, files);
    for (const auto& f : files) io::write_file(inv.out, f.name, f.content);
    io::write_file(inv.out, "manifest.json", m);
  } catch (const std::exception& e) {
    err << "mmot: " << e.what() << "\n";
    return kIoError;
  }
  return kOk;
}

int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-marginal optimal transport toolkit"};
  app.require_subcommand(1);
  Invocation inv;
  std::string seed;
  std::string backend;
  for (const auto& name : kCommands) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", inv.config, "JSON config")->required();
    sub->add_option("--out", inv.out, "output directory");
    sub->add_option("--seed", seed, "64-bit unsigned seed");
    sub->add_option("--backend", backend, "lp or entropic");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "mmot: " << e.what() << "\n";
    return kValidationError;
  }
  inv.command = app.get_subcommands().front()->get_name();
  if (!seed.empty()) {
    try {
      inv.seed = io::unsigned64(Json(seed), "--seed");
    } catch (const ConfigError& e) {
      err << "mmot: invalid config: " << e.what() << "\n";
      return kValidationError;
    }
  }
  if (!backend.empty()) inv.backend = backend;
  return run(inv, out, err);
}

}  // namespace mmot::cli
