#pragma once

#include "mmot/dissociation.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmot::io {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

/// Invalid configuration; `path` is the offending JSON path, e.g. "cost.family".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

/// Child path helpers: join("cost", "family") == "cost.family", index("marginals", 2) == "marginals[2]".
std::string join(const std::string& path, const std::string& key);
std::string index(const std::string& path, std::size_t i);

const Json& require(const Json& object, const std::string& key, const std::string& path);
double number(const Json& value, const std::string& path);
long long integer(const Json& value, const std::string& path);
std::uint64_t unsigned64(const Json& value, const std::string& path);
std::string text(const Json& value, const std::string& path);
Vector point(const Json& value, const std::string& path);

/// Grid builder: {"box": [[lo, hi], ...], "n": int | [int, ...], "density": "uniform" |
/// "gaussian(sigma)" | "atoms", "jitter": real}. Jitter moves every coordinate by a
/// uniform fraction of half a cell; "atoms" draws the points uniformly in the box.
Measure build_grid(const Json& spec, const std::string& path, std::uint64_t seed);

/// A measure given inline ({"d", "points", "weights"}), as {"file": path} relative to
/// `base_dir`, or as {"grid": {...}}. `seed` drives grid jitter.
Measure parse_measure(const Json& spec, const std::string& path,
                      const std::filesystem::path& base_dir, std::uint64_t seed);

CostSpec parse_cost(const Json& spec, const std::string& path);

/// {"pivot_limit", "mass_tol", "probe": {"trials", "delta", "seed"}}; absent keys keep defaults.
struct SolverConfig {
  LpOptions lp;
  double mass_tol = kDefaultMassTolerance;
  ProbeOptions probe;
};
SolverConfig parse_solver(const Json& spec, const std::string& path, std::uint64_t seed);

/// {"epsilon": real | [real, ...], "relative_epsilon": real | [real, ...], "tol", "max_iter"}.
/// Without "epsilon" the schedule is "relative_epsilon" times the finite cost range.
struct EntropicConfig {
  EntropicOptions options;
  std::vector<double> epsilons;
  std::vector<double> relative_epsilons{1e-1, 1e-2, 1e-3};
};
EntropicConfig parse_entropic(const Json& spec, const std::string& path);

/// Measure as {"d", "points", "weights"}.
OrderedJson to_json(const Measure& m);

OrderedJson to_json(const DissociationReport& report);

/// One row per eta in the documented column order, preceded by a schema comment line.
std::string dissociation_csv(const DissociationReport& report);

/// Plot-ready table: '#' header, then one line per row (eta descending) with
/// eta, R = 1/eta, total energy, and log10 of eta and both residuals.
std::string plot_table(const DissociationReport& report);

/// Writes plot_table(report) to `path`; throws on an empty report or I/O failure.
void emit_plot_data(const DissociationReport& report, const std::filesystem::path& path);

/// Shortest round-trip decimal form; "nan", "inf", "-inf" for non-finite values.
std::string format_number(double value);

std::string sha256_hex(const std::string& bytes);

/// Writes `content` to `dir / name`, throwing std::runtime_error naming the path on failure.
void write_file(const std::filesystem::path& dir, const std::string& name, const std::string& content);

}  // namespace mmot::io
