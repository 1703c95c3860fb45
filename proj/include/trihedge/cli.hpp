#ifndef TRIHEDGE_CLI_HPP
#define TRIHEDGE_CLI_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "trihedge/model.hpp"

namespace trihedge::cli {

inline constexpr const char* kArtifactVersion = "0.1.0";

struct PdeGridConfig {
    double dy = 0.005;
    double half_width = 0.0; // 0 = default 6*sigma_bar around log(s0)
    int t_steps = 0;         // 0 = derive from the CFL bound
    bool cover_lattice = false;
    bool have_y_range = false;
    double y_min = 0.0, y_max = 0.0;
    int export_t_points = 11;
    int export_y_points = 41;
    bool mollify = true;
};

struct McConfig {
    std::size_t paths = 0; // 0 disables Monte Carlo stages
    int time_steps = 100;
    int bootstrap = 200;
    int bins = 32;
};

struct PhiPolicyConfig {
    std::string type; // "" | "constant" | "qstar"
    double value = 0.0;
};

struct AlphaPolicyConfig {
    std::string type; // "" | "constant" | "piecewise"
    double value = 0.0;
    std::vector<double> times, values;
};

struct RunConfig {
    int version = 1;
    ModelParams model;
    Payoff payoff = Payoff::constant(0.0);
    std::vector<int> n_list;
    PdeGridConfig pde;
    McConfig mc;
    PhiPolicyConfig phi_policy;
    AlphaPolicyConfig alpha_policy;
    std::uint64_t seed = 0;
    std::string out_dir = "out";
    int threads = 0; // 0 = available parallelism
    std::string format = "csv";
    int lattice_cap = 600;
    int table_export_max_n = 200;
    int enum_max_n = 9;
    nlohmann::json echo; // original document, kept for the run record
};

/// Parses and fully validates a config document; unknown keys anywhere are
/// rejected, and every model/payoff/grid precondition is checked here, before
/// any computation. Throws ConfigError or InputError.
RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config(const std::filesystem::path& path);

/// Payoff (de)serialization; field names {kind, name, params, growth:{C,r}}.
Payoff payoff_from_json(const nlohmann::json& j);
nlohmann::json payoff_to_json(const Payoff& payoff);

struct Check {
    std::string name;
    bool pass = false;
    double value = 0.0;
    double tol = 0.0;
};

struct RunRecord {
    std::string command;
    std::string artifact_version = kArtifactVersion;
    nlohmann::json config_echo;
    std::vector<std::pair<std::string, double>> timings_ms;
    std::vector<std::pair<std::string, double>> outputs;
    std::vector<Check> checks;
    std::vector<std::string> files;
    std::vector<std::string> warnings;

    bool checks_pass() const;
    nlohmann::json to_json() const;
};

RunRecord cmd_price(const RunConfig& config);
RunRecord cmd_pde(const RunConfig& config);
RunRecord cmd_converge(const RunConfig& config);
RunRecord cmd_hedge(const RunConfig& config);
RunRecord cmd_dual_bound(const RunConfig& config);

/// Full front end: subcommand + flag parsing, thread setup, dispatch, record
/// emission. Exit codes: 0 success, 2 config validation error, 3 numerical
/// failure, 4 tolerance-check failure.
int run_cli(int argc, const char* const* argv);

} // namespace trihedge::cli

#endif // TRIHEDGE_CLI_HPP
