#include "trihedge/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>

#include <CLI11.hpp>

#include "trihedge/errors.hpp"
#include "trihedge/hedge.hpp"
#include "trihedge/io.hpp"
#include "trihedge/lattice.hpp"
#include "trihedge/limits.hpp"
#include "trihedge/parallel.hpp"
#include "trihedge/pde.hpp"

namespace trihedge::cli {

using nlohmann::json;

namespace {

void check_keys(const json& obj, const std::set<std::string>& allowed,
                const std::string& context) {
    if (!obj.is_object()) throw ConfigError("config: '" + context + "' must be an object");
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key()))
            throw ConfigError("config: unknown key '" + it.key() + "' in " + context);
}

double require_number(const json& obj, const std::string& key, const std::string& context) {
    if (!obj.contains(key))
        throw ConfigError("config: missing key '" + key + "' in " + context);
    if (!obj.at(key).is_number())
        throw ConfigError("config: '" + key + "' in " + context + " must be a number");
    return obj.at(key).get<double>();
}

double number_or(const json& obj, const std::string& key, double fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj.at(key).is_number())
        throw ConfigError("config: '" + key + "' must be a number");
    return obj.at(key).get<double>();
}

class StageTimer {
public:
    explicit StageTimer(RunRecord& record) : record_(record) {}

    template <typename Fn>
    auto run(const std::string& stage, Fn&& fn) {
        const auto start = std::chrono::steady_clock::now();
        if constexpr (std::is_void_v<decltype(fn())>) {
            fn();
            record_.timings_ms.emplace_back(stage, elapsed_ms(start));
        } else {
            auto result = fn();
            record_.timings_ms.emplace_back(stage, elapsed_ms(start));
            return result;
        }
    }

private:
    static double elapsed_ms(std::chrono::steady_clock::time_point start) {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                         start)
            .count();
    }
    RunRecord& record_;
};

} // namespace

Payoff payoff_from_json(const json& j) {
    check_keys(j, {"kind", "name", "params", "growth"}, "payoff");
    const std::string kind = j.value("kind", "markovian");
    if (kind != "markovian" && kind != "path")
        throw ConfigError("config: payoff.kind must be 'markovian' or 'path'");
    if (!j.contains("name") || !j.at("name").is_string())
        throw ConfigError("config: payoff.name is required");
    const std::string name = j.at("name").get<std::string>();
    const json params = j.value("params", json::object());
    if (!params.is_object()) throw ConfigError("config: payoff.params must be an object");

    Payoff payoff = Payoff::constant(0.0);
    if (kind == "markovian") {
        if (name == "constant") {
            check_keys(params, {"c"}, "payoff.params");
            payoff = Payoff::constant(require_number(params, "c", "payoff.params"));
        } else if (name == "linear") {
            check_keys(params, {"a", "b"}, "payoff.params");
            payoff = Payoff::linear(require_number(params, "a", "payoff.params"),
                                    require_number(params, "b", "payoff.params"));
        } else if (name == "log_affine") {
            check_keys(params, {"alpha", "beta"}, "payoff.params");
            payoff = Payoff::log_affine(require_number(params, "alpha", "payoff.params"),
                                        require_number(params, "beta", "payoff.params"));
        } else if (name == "power") {
            check_keys(params, {"exponent"}, "payoff.params");
            payoff = Payoff::power(require_number(params, "exponent", "payoff.params"));
        } else if (name == "call") {
            check_keys(params, {"strike"}, "payoff.params");
            payoff = Payoff::call(require_number(params, "strike", "payoff.params"));
        } else if (name == "put") {
            check_keys(params, {"strike"}, "payoff.params");
            payoff = Payoff::put(require_number(params, "strike", "payoff.params"));
        } else if (name == "smoothed_call") {
            check_keys(params, {"strike", "width"}, "payoff.params");
            payoff = Payoff::smoothed_call(require_number(params, "strike", "payoff.params"),
                                           require_number(params, "width", "payoff.params"));
        } else {
            throw ConfigError("config: unknown Markovian payoff '" + name + "'");
        }
    } else {
        if (name == "lookback_max") {
            check_keys(params, {}, "payoff.params");
            payoff = Payoff::lookback_max();
        } else if (name == "asian_average") {
            check_keys(params, {}, "payoff.params");
            payoff = Payoff::asian_average();
        } else {
            throw ConfigError("config: unknown path payoff '" + name + "'");
        }
    }

    if (j.contains("growth")) {
        const json& g = j.at("growth");
        check_keys(g, {"C", "r"}, "payoff.growth");
        GrowthBound gb{require_number(g, "C", "payoff.growth"),
                       require_number(g, "r", "payoff.growth")};
        if (!(gb.C > 0.0) || !(gb.r > 0.0))
            throw ConfigError("config: payoff.growth C and r must be positive");
        payoff = payoff.with_growth(gb);
    }
    return payoff;
}

json payoff_to_json(const Payoff& payoff) {
    json j;
    j["kind"] = payoff.markovian() ? "markovian" : "path";
    j["name"] = payoff.name();
    j["params"] = json::object();
    for (const auto& [key, value] : payoff.params()) j["params"][key] = value;
    j["growth"] = {{"C", payoff.growth().C}, {"r", payoff.growth().r}};
    return j;
}

RunConfig parse_config(const json& doc) {
    check_keys(doc,
               {"version", "model", "payoff", "n_list", "pde", "mc", "policy", "seed",
                "out", "threads", "format", "lattice"},
               "top level");
    RunConfig config;
    config.echo = doc;
    config.version = static_cast<int>(number_or(doc, "version", 1));
    if (config.version != 1) throw ConfigError("config: unsupported schema version");

    if (!doc.contains("model")) throw ConfigError("config: 'model' block is required");
    const json& m = doc.at("model");
    check_keys(m, {"p", "sigma_bar", "s0", "ell", "n"}, "model");
    config.model.p = require_number(m, "p", "model");
    config.model.sigma_bar = require_number(m, "sigma_bar", "model");
    config.model.s0 = require_number(m, "s0", "model");
    config.model.ell = require_number(m, "ell", "model");
    config.model.n = static_cast<int>(require_number(m, "n", "model"));
    config.model.validate();

    if (!doc.contains("payoff")) throw ConfigError("config: 'payoff' block is required");
    config.payoff = payoff_from_json(doc.at("payoff"));

    if (doc.contains("n_list")) {
        if (!doc.at("n_list").is_array())
            throw ConfigError("config: n_list must be an array of integers");
        for (const auto& v : doc.at("n_list")) {
            if (!v.is_number()) throw ConfigError("config: n_list entries must be numbers");
            config.n_list.push_back(v.get<int>());
        }
    }

    if (doc.contains("lattice")) {
        const json& l = doc.at("lattice");
        check_keys(l, {"cap_n", "table_export_max_n", "enum_max_n"}, "lattice");
        config.lattice_cap = static_cast<int>(number_or(l, "cap_n", config.lattice_cap));
        config.table_export_max_n =
            static_cast<int>(number_or(l, "table_export_max_n", config.table_export_max_n));
        config.enum_max_n = static_cast<int>(number_or(l, "enum_max_n", config.enum_max_n));
        if (config.lattice_cap < 1 || config.enum_max_n < 1)
            throw ConfigError("config: lattice caps must be positive");
    }

    if (doc.contains("pde")) {
        const json& g = doc.at("pde");
        check_keys(g,
                   {"dy", "half_width", "t_steps", "cover_lattice", "y_min", "y_max",
                    "export_t_points", "export_y_points", "mollify"},
                   "pde");
        config.pde.dy = number_or(g, "dy", config.pde.dy);
        config.pde.half_width = number_or(g, "half_width", 0.0);
        config.pde.t_steps = static_cast<int>(number_or(g, "t_steps", 0.0));
        if (g.contains("cover_lattice")) {
            if (!g.at("cover_lattice").is_boolean())
                throw ConfigError("config: pde.cover_lattice must be a boolean");
            config.pde.cover_lattice = g.at("cover_lattice").get<bool>();
        }
        if (g.contains("mollify")) {
            if (!g.at("mollify").is_boolean())
                throw ConfigError("config: pde.mollify must be a boolean");
            config.pde.mollify = g.at("mollify").get<bool>();
        }
        if (g.contains("y_min") != g.contains("y_max"))
            throw ConfigError("config: pde.y_min and pde.y_max must be given together");
        if (g.contains("y_min")) {
            config.pde.have_y_range = true;
            config.pde.y_min = require_number(g, "y_min", "pde");
            config.pde.y_max = require_number(g, "y_max", "pde");
            if (!(config.pde.y_min < config.pde.y_max))
                throw ConfigError("config: pde.y_min must be below pde.y_max");
        }
        config.pde.export_t_points =
            static_cast<int>(number_or(g, "export_t_points", config.pde.export_t_points));
        config.pde.export_y_points =
            static_cast<int>(number_or(g, "export_y_points", config.pde.export_y_points));
        if (!(config.pde.dy > 0.0)) throw ConfigError("config: pde.dy must be positive");
        if (config.pde.half_width < 0.0)
            throw ConfigError("config: pde.half_width must be nonnegative");
        if (config.pde.t_steps < 0) throw ConfigError("config: pde.t_steps must be >= 0");
        if (config.pde.export_t_points < 2 || config.pde.export_y_points < 2)
            throw ConfigError("config: pde export point counts must be >= 2");
    }

    if (doc.contains("mc")) {
        const json& mc = doc.at("mc");
        check_keys(mc, {"paths", "time_steps", "bootstrap", "bins"}, "mc");
        const double paths = number_or(mc, "paths", 0.0);
        if (paths < 0.0) throw ConfigError("config: mc.paths must be nonnegative");
        config.mc.paths = static_cast<std::size_t>(paths);
        config.mc.time_steps = static_cast<int>(number_or(mc, "time_steps", 100.0));
        config.mc.bootstrap = static_cast<int>(number_or(mc, "bootstrap", 200.0));
        config.mc.bins = static_cast<int>(number_or(mc, "bins", 32.0));
        if (config.mc.time_steps < 1 || config.mc.bootstrap < 1 || config.mc.bins < 1)
            throw ConfigError("config: mc.time_steps, mc.bootstrap and mc.bins must be >= 1");
    }

    if (doc.contains("policy")) {
        const json& pol = doc.at("policy");
        check_keys(pol, {"phi", "alpha"}, "policy");
        if (pol.contains("phi")) {
            const json& phi = pol.at("phi");
            check_keys(phi, {"type", "value"}, "policy.phi");
            config.phi_policy.type = phi.value("type", "");
            if (config.phi_policy.type == "constant") {
                config.phi_policy.value = require_number(phi, "value", "policy.phi");
                if (!(config.phi_policy.value >= 0.0 && config.phi_policy.value <= 1.0))
                    throw ConfigError("config: policy.phi.value must lie in [0,1]");
            } else if (config.phi_policy.type == "qstar") {
                if (!config.payoff.markovian())
                    throw ConfigError("config: policy.phi.type 'qstar' needs a Markovian payoff");
            } else {
                throw ConfigError("config: policy.phi.type must be 'constant' or 'qstar'");
            }
        }
        if (pol.contains("alpha")) {
            const json& alpha = pol.at("alpha");
            check_keys(alpha, {"type", "value", "times", "values"}, "policy.alpha");
            config.alpha_policy.type = alpha.value("type", "");
            if (config.alpha_policy.type == "constant") {
                config.alpha_policy.value = require_number(alpha, "value", "policy.alpha");
                if (!(config.alpha_policy.value >= 0.0 &&
                      config.alpha_policy.value <= config.model.sigma_bar))
                    throw ConfigError("config: policy.alpha.value must lie in [0, sigma_bar]");
            } else if (config.alpha_policy.type == "piecewise") {
                if (!alpha.contains("times") || !alpha.contains("values"))
                    throw ConfigError("config: piecewise alpha policy needs times and values");
                for (const auto& v : alpha.at("times"))
                    config.alpha_policy.times.push_back(v.get<double>());
                for (const auto& v : alpha.at("values")) {
                    const double a = v.get<double>();
                    if (!(a >= 0.0 && a <= config.model.sigma_bar))
                        throw ConfigError(
                            "config: policy.alpha.values must lie in [0, sigma_bar]");
                    config.alpha_policy.values.push_back(a);
                }
                // Shape errors surface now rather than at run time.
                limits::AlphaPolicy::piecewise(config.alpha_policy.times,
                                               config.alpha_policy.values);
            } else {
                throw ConfigError("config: policy.alpha.type must be 'constant' or 'piecewise'");
            }
        }
    }

    if (doc.contains("seed")) {
        if (!doc.at("seed").is_number_unsigned() && !doc.at("seed").is_number_integer())
            throw ConfigError("config: seed must be an unsigned integer");
        config.seed = doc.at("seed").get<std::uint64_t>();
    }
    if (doc.contains("out")) {
        if (!doc.at("out").is_string()) throw ConfigError("config: out must be a string");
        config.out_dir = doc.at("out").get<std::string>();
    }
    if (doc.contains("threads"))
        config.threads = static_cast<int>(number_or(doc, "threads", 0.0));
    if (doc.contains("format")) {
        if (!doc.at("format").is_string()) throw ConfigError("config: format must be a string");
        config.format = doc.at("format").get<std::string>();
    }
    if (config.format != "csv" && config.format != "json")
        throw ConfigError("config: format must be 'csv' or 'json'");
    if (config.threads < 0) throw ConfigError("config: threads must be nonnegative");
    return config;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::parse_error& e) {
        throw ConfigError("config parse error in " + path.string() + ": " + e.what());
    }
    return parse_config(doc);
}

bool RunRecord::checks_pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

json RunRecord::to_json() const {
    json j;
    j["command"] = command;
    j["artifact_version"] = artifact_version;
    j["config"] = config_echo;
    json timings = json::object();
    for (const auto& [stage, ms] : timings_ms) timings[stage] = ms;
    j["timings_ms"] = timings;
    json out = json::object();
    for (const auto& [key, value] : outputs) out[key] = value;
    j["outputs"] = out;
    j["checks"] = json::array();
    for (const auto& c : checks)
        j["checks"].push_back(
            {{"name", c.name}, {"pass", c.pass}, {"value", c.value}, {"tol", c.tol}});
    j["files"] = files;
    j["warnings"] = warnings;
    return j;
}

namespace {

std::filesystem::path ensure_out_dir(const RunConfig& config) {
    std::filesystem::path dir(config.out_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory " + dir.string());
    return dir;
}

void write_summary(RunRecord& record, const RunConfig& config,
                   const std::filesystem::path& dir) {
    if (config.format == "json") {
        json j = json::object();
        for (const auto& [key, value] : record.outputs) j[key] = value;
        std::ofstream out(dir / "summary.json", std::ios::binary);
        out << j.dump(2) << '\n';
        record.files.push_back("summary.json");
    } else {
        std::vector<std::vector<std::string>> rows;
        for (const auto& [key, value] : record.outputs)
            rows.push_back({key, io::format_double(value)});
        io::write_csv(dir / "summary.csv", {"key", "value"}, rows);
        record.files.push_back("summary.csv");
    }
}

void export_node_table(const std::filesystem::path& path, const lattice::NodeTable& table,
                       const ModelParams& params) {
    const double u = params.step_jump();
    std::vector<std::vector<std::string>> rows;
    for (int k = 0; k < table.n; ++k)
        for (int a = 0; a <= k; ++a)
            for (int b = 0; b + a <= k; ++b) {
                const double spot =
                    params.s0 * std::pow(1.0 + u, a) * std::pow(1.0 - u, b);
                rows.push_back({std::to_string(k), std::to_string(a), std::to_string(b),
                                io::format_double(spot), io::format_double(table.at(k, a, b))});
            }
    io::write_csv(path, {"k", "a", "b", "spot", "value"}, rows);
}

pde::LogGrid build_grid(const RunConfig& config, int cover_n) {
    const ModelParams& mp = config.model;
    if (config.pde.have_y_range) {
        pde::LogGrid g;
        g.y_min = config.pde.y_min;
        g.y_max = config.pde.y_max;
        g.m = std::max(3, static_cast<int>(std::ceil((g.y_max - g.y_min) / config.pde.dy)) + 1);
        g.t_steps = config.pde.t_steps;
        return g;
    }
    const double hw = config.pde.half_width > 0.0 ? config.pde.half_width
                                                  : 6.0 * mp.sigma_bar;
    pde::LogGrid g = pde::LogGrid::centered(mp, hw, config.pde.dy, config.pde.t_steps);
    if (cover_n > 0) {
        ModelParams cover = mp;
        cover.n = cover_n;
        const pde::LogGrid lat =
            pde::LogGrid::covering_lattice(cover, config.pde.dy, config.pde.t_steps);
        g.y_min = std::min(g.y_min, lat.y_min);
        g.y_max = std::max(g.y_max, lat.y_max);
        g.m = std::max(3, static_cast<int>(std::ceil((g.y_max - g.y_min) / config.pde.dy)) + 1);
    }
    return g;
}

void require_lattice_cap(const RunConfig& config, int n) {
    if (n > config.lattice_cap)
        throw ConfigError("config: n=" + std::to_string(n) + " exceeds the lattice cap " +
                          std::to_string(config.lattice_cap));
}

RunRecord make_record(const char* command, const RunConfig& config) {
    RunRecord record;
    record.command = command;
    record.config_echo = config.echo;
    return record;
}

void finish_record(RunRecord& record, const RunConfig& config,
                   const std::filesystem::path& dir) {
    write_summary(record, config, dir);
    record.files.push_back("run_record.json");
    std::ofstream out(dir / "run_record.json", std::ios::binary);
    out << record.to_json().dump(2) << '\n';
}

} // namespace

RunRecord cmd_price(const RunConfig& config) {
    if (!config.payoff.markovian())
        throw ConfigError("price: payoff must be Markovian (use dual-bound for path payoffs)");
    require_lattice_cap(config, config.model.n);
    RunRecord record = make_record("price", config);
    StageTimer timer(record);
    const auto dir = ensure_out_dir(config);

    const bool tables = config.model.n <= config.table_export_max_n;
    const auto primal =
        timer.run("primal", [&] { return lattice::primal_ce(config.model, config.payoff, tables); });
    const auto dual =
        timer.run("dual", [&] { return lattice::dual_ce(config.model, config.payoff, tables); });
    const double residual = std::abs(primal.ce - dual.ce) /
                            std::max({1.0, std::abs(primal.ce), std::abs(dual.ce)});

    record.outputs = {{"ce_primal", primal.ce}, {"ce_dual", dual.ce},
                      {"duality_residual", residual}};
    record.checks.push_back({"duality_identity", residual <= 1e-12, residual, 1e-12});

    if (tables) {
        timer.run("export", [&] {
            export_node_table(dir / "gamma.csv", primal.delta, config.model);
            export_node_table(dir / "qstar.csv", dual.qstar, config.model);
        });
        record.files.push_back("gamma.csv");
        record.files.push_back("qstar.csv");
    } else {
        record.warnings.push_back("per-node tables skipped: n exceeds table_export_max_n");
    }
    finish_record(record, config, dir);
    return record;
}

RunRecord cmd_pde(const RunConfig& config) {
    if (!config.payoff.markovian())
        throw ConfigError("pde: payoff must be Markovian");
    RunRecord record = make_record("pde", config);
    StageTimer timer(record);
    const auto dir = ensure_out_dir(config);

    const pde::LogGrid grid = build_grid(config, config.pde.cover_lattice ? config.model.n : 0);
    const auto sol = timer.run("solve", [&] {
        return pde::solve_hjb(config.model, config.payoff, grid, config.pde.mollify);
    });
    const auto report = timer.run("check", [&] { return pde::check_solution_properties(sol); });
    for (const auto& w : sol.warnings()) record.warnings.push_back(w);

    record.outputs = {{"v0", sol.value(0.0, config.model.s0)},
                      {"m0", sol.m0()},
                      {"M0", sol.M0()},
                      {"K_m0", report.k_m0},
                      {"K_M0", report.k_M0},
                      {"band_violation", report.band_violation},
                      {"slope_violation", report.slope_violation},
                      {"lipschitz_ut", report.lipschitz_ut},
                      {"lipschitz_w", report.lipschitz_w},
                      {"dy", sol.grid().dy()},
                      {"dt", sol.grid().dt()}};
    record.checks.push_back(
        {"band_property", report.band_pass, report.band_violation, report.tolerance});
    record.checks.push_back(
        {"time_slope_bounds", report.slope_pass, report.slope_violation, report.tolerance});

    timer.run("export", [&] {
        const auto& g = sol.grid();
        std::vector<std::vector<std::string>> vrows, drows;
        for (int jt = 0; jt < config.pde.export_t_points; ++jt) {
            const int j = static_cast<int>(std::lround(
                static_cast<double>(jt) * g.t_steps / (config.pde.export_t_points - 1)));
            for (int iy = 0; iy < config.pde.export_y_points; ++iy) {
                const int i = static_cast<int>(std::lround(
                    static_cast<double>(iy) * (g.m - 1) / (config.pde.export_y_points - 1)));
                vrows.push_back({io::format_double(sol.t(j)), io::format_double(sol.y(i)),
                                 io::format_double(sol.u_bar(j, i))});
                if (i >= 1 && i + 1 < g.m) {
                    // backward-time coordinates: v(t,x) at t = 1 - t_grid
                    const double t_back = 1.0 - sol.t(j);
                    const double x = std::exp(sol.y(i));
                    drows.push_back({io::format_double(t_back), io::format_double(x),
                                     io::format_double(sol.delta(t_back, x))});
                }
            }
        }
        io::write_csv(dir / "value.csv", {"t", "y", "u_bar"}, vrows);
        io::write_csv(dir / "delta.csv", {"t", "x", "v_x"}, drows);
    });
    record.files.push_back("value.csv");
    record.files.push_back("delta.csv");
    finish_record(record, config, dir);
    return record;
}

RunRecord cmd_converge(const RunConfig& config) {
    if (!config.payoff.markovian())
        throw ConfigError("converge: payoff must be Markovian");
    if (config.n_list.empty())
        throw ConfigError("converge: n_list is required");
    for (int n : config.n_list) {
        if (n < 1) throw ConfigError("converge: n_list entries must be >= 1");
        require_lattice_cap(config, n);
    }
    RunRecord record = make_record("converge", config);
    StageTimer timer(record);
    const auto dir = ensure_out_dir(config);
    if (!config.payoff.smooth())
        record.warnings.push_back(
            "payoff is not twice differentiable: the gap study is exploratory only");

    const int max_n = *std::max_element(config.n_list.begin(), config.n_list.end());
    const pde::LogGrid grid = build_grid(config, max_n);
    const auto table = timer.run("study", [&] {
        return limits::convergence_study(config.model, config.payoff, config.n_list, grid);
    });

    bool trend = true;
    for (std::size_t i = 1; i < table.rows.size(); ++i)
        if (table.rows[i].abs_error > 1.1 * table.rows[i - 1].abs_error + 1e-15) trend = false;
    const double first_err = table.rows.front().abs_error;
    const double last_err = table.rows.back().abs_error;
    record.outputs = {{"pde_value", table.rows.front().pde_value},
                      {"first_abs_error", first_err},
                      {"last_abs_error", last_err}};
    record.checks.push_back({"abs_error_non_increasing_10pct", trend, last_err, first_err});

    timer.run("export", [&] {
        std::vector<std::vector<std::string>> rows;
        for (const auto& r : table.rows)
            rows.push_back({std::to_string(r.n), io::format_double(r.c_n),
                            io::format_double(r.c_tilde_n), io::format_double(r.gap),
                            io::format_double(r.pde_value), io::format_double(r.abs_error)});
        io::write_csv(dir / "table.csv",
                      {"n", "c_n", "c_tilde_n", "gap", "pde_value", "abs_error"}, rows);
        io::PlotSeries err_series{"abs error", {}, {}}, gap_series{"gap", {}, {}};
        for (const auto& r : table.rows) {
            err_series.x.push_back(r.n);
            err_series.y.push_back(std::max(r.abs_error, 1e-16));
            gap_series.x.push_back(r.n);
            gap_series.y.push_back(std::max(r.gap, 1e-16));
        }
        std::ofstream svg(dir / "plot.svg", std::ios::binary);
        svg << io::svg_line_plot("lattice vs limit", "n", "error",
                                 {err_series, gap_series}, true, true);
    });
    record.files.push_back("table.csv");
    record.files.push_back("plot.svg");
    finish_record(record, config, dir);
    return record;
}

RunRecord cmd_hedge(const RunConfig& config) {
    if (!config.payoff.markovian())
        throw ConfigError("hedge: payoff must be Markovian");
    require_lattice_cap(config, config.model.n);
    RunRecord record = make_record("hedge", config);
    StageTimer timer(record);
    const auto dir = ensure_out_dir(config);
    if (!config.payoff.smooth())
        record.warnings.push_back(
            "payoff is not twice differentiable: the gap study is exploratory only");

    const pde::LogGrid grid = build_grid(config, config.model.n);
    const auto sol = std::make_shared<pde::PdeSolution>(timer.run("solve", [&] {
        return pde::solve_hjb(config.model, config.payoff, grid, config.pde.mollify);
    }));
    for (const auto& w : sol->warnings()) record.warnings.push_back(w);
    const auto strategy = hedge::build_delta_strategy(sol, config.model.n);
    const auto eval = timer.run(
        "evaluate", [&] { return hedge::evaluate_hedge(config.model, config.payoff, strategy); });

    record.outputs = {{"ce_tilde", eval.ce_tilde},
                      {"ce_primal", eval.ce_primal},
                      {"gap", eval.gap}};
    record.checks.push_back({"gap_nonnegative", eval.gap >= -1e-10, eval.gap, 1e-10});

    timer.run("export_strategy", [&] {
        std::vector<std::vector<std::string>> rows;
        const auto& g = sol->grid();
        const int n = config.model.n;
        const int step_stride = std::max(1, n / (config.pde.export_t_points - 1));
        for (int i = 0; i < n; i += step_stride)
            for (int iy = 0; iy < config.pde.export_y_points; ++iy) {
                const double y = g.y_min + g.dy() +
                                 (g.y_max - g.y_min - 2.0 * g.dy()) * iy /
                                     (config.pde.export_y_points - 1);
                const double spot = std::exp(y);
                rows.push_back({std::to_string(i), io::format_double(spot),
                                io::format_double(strategy.at(i, spot))});
            }
        io::write_csv(dir / "strategy.csv", {"i", "spot", "gamma"}, rows);
    });
    record.files.push_back("strategy.csv");

    if (config.mc.paths > 0) {
        const auto pnl = timer.run("simulate", [&] {
            hedge::PnlOptions opt;
            opt.bootstrap_resamples = config.mc.bootstrap;
            opt.histogram_bins = config.mc.bins;
            return hedge::simulate_pnl(config.model, config.payoff, strategy, config.mc.paths,
                                       config.seed, opt);
        });
        record.outputs.emplace_back("mc_mean", pnl.mean);
        record.outputs.emplace_back("mc_stddev", pnl.stddev);
        record.outputs.emplace_back("mc_ce_estimate", pnl.ce_estimate);
        record.outputs.emplace_back("mc_ce_ci_lo", pnl.ce_ci_lo);
        record.outputs.emplace_back("mc_ce_ci_hi", pnl.ce_ci_hi);
        record.outputs.emplace_back("mc_heavy_tail", pnl.heavy_tail ? 1.0 : 0.0);
        if (pnl.heavy_tail)
            record.warnings.push_back(
                "exponential-CE estimate is tail-dominated; trust the exact lattice value");
        timer.run("export_pnl", [&] {
            json pj;
            pj["paths"] = pnl.paths;
            pj["mean"] = pnl.mean;
            pj["stddev"] = pnl.stddev;
            pj["ce_estimate"] = pnl.ce_estimate;
            pj["ce_ci_lo"] = pnl.ce_ci_lo;
            pj["ce_ci_hi"] = pnl.ce_ci_hi;
            pj["heavy_tail"] = pnl.heavy_tail;
            pj["bin_edges"] = pnl.bin_edges;
            pj["bin_counts"] = pnl.bin_counts;
            std::ofstream out(dir / "pnl.json", std::ios::binary);
            out << pj.dump(2) << '\n';
            std::vector<std::vector<std::string>> rows;
            for (std::size_t i = 0; i < pnl.bin_counts.size(); ++i)
                rows.push_back({io::format_double(pnl.bin_edges[i]),
                                io::format_double(pnl.bin_edges[i + 1]),
                                std::to_string(pnl.bin_counts[i])});
            io::write_csv(dir / "histogram.csv", {"bin_lo", "bin_hi", "count"}, rows);
        });
        record.files.push_back("pnl.json");
        record.files.push_back("histogram.csv");
    }
    finish_record(record, config, dir);
    return record;
}

RunRecord cmd_dual_bound(const RunConfig& config) {
    if (config.phi_policy.type.empty() && config.alpha_policy.type.empty())
        throw ConfigError("dual-bound: configure policy.phi and/or policy.alpha");
    RunRecord record = make_record("dual-bound", config);
    StageTimer timer(record);
    const auto dir = ensure_out_dir(config);

    // Reference value C_n, exactly when computable.
    bool have_ref = false;
    double ref = 0.0;
    if (config.payoff.markovian()) {
        require_lattice_cap(config, config.model.n);
        ref = timer.run("primal",
                        [&] { return lattice::primal_ce(config.model, config.payoff).ce; });
        have_ref = true;
    } else if (config.model.n <= config.enum_max_n) {
        ref = timer.run("enumerate", [&] {
            return lattice::enumerate_ce(config.model, config.payoff, config.enum_max_n);
        });
        have_ref = true;
    } else {
        record.warnings.push_back(
            "path-dependent payoff beyond the enumeration cap: only the dual lower bound "
            "is reported; the gap to the optimum is unknown");
    }
    if (have_ref) record.outputs.emplace_back("ce_reference", ref);

    if (!config.phi_policy.type.empty()) {
        lattice::VolFractionPolicy policy = lattice::VolFractionPolicy::constant(config.model.p);
        if (config.phi_policy.type == "constant") {
            policy = lattice::VolFractionPolicy::constant(config.phi_policy.value);
        } else { // qstar
            auto dual = lattice::dual_ce(config.model, config.payoff, true);
            policy = lattice::VolFractionPolicy::from_table(std::move(dual.qstar));
        }
        const double bound = timer.run("dual_bound", [&] {
            return lattice::dual_policy_bound(config.model, config.payoff, policy,
                                              config.enum_max_n);
        });
        record.outputs.emplace_back("dual_policy_bound", bound);
        if (have_ref)
            record.checks.push_back(
                {"weak_duality", bound <= ref + 1e-10, bound - ref, 1e-10});
    }

    if (!config.alpha_policy.type.empty()) {
        limits::AlphaPolicy policy =
            config.alpha_policy.type == "constant"
                ? limits::AlphaPolicy::constant(config.alpha_policy.value)
                : limits::AlphaPolicy::piecewise(config.alpha_policy.times,
                                                 config.alpha_policy.values);
        const std::size_t paths = config.mc.paths > 0 ? config.mc.paths : 20000;
        const auto est = timer.run("mc_control", [&] {
            return limits::mc_control_value(config.model, config.payoff, policy, paths,
                                            config.mc.time_steps, config.seed);
        });
        record.outputs.emplace_back("mc_control_estimate", est.estimate);
        record.outputs.emplace_back("mc_control_std_error", est.std_error);
        if (config.payoff.markovian()) {
            const pde::LogGrid grid = build_grid(config, 0);
            const auto sol = timer.run("pde_reference", [&] {
                return pde::solve_hjb(config.model, config.payoff, grid, config.pde.mollify);
            });
            const double v0 = sol.value(0.0, config.model.s0);
            record.outputs.emplace_back("pde_value", v0);
            record.checks.push_back({"mc_lower_bound",
                                     est.estimate <= v0 + 3.0 * est.std_error + 1e-10,
                                     est.estimate - v0, 3.0 * est.std_error});
        }
    }
    finish_record(record, config, dir);
    return record;
}

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"trihedge: exponential-utility certainty equivalents in scaled "
                 "trinomial markets, the limiting volatility-control PDE, and "
                 "delta-hedge diagnostics"};
    app.require_subcommand(1);

    struct Flags {
        std::string config;
        std::string out;
        std::string format;
        std::uint64_t seed = 0;
        int threads = -1;
        bool have_seed = false;
    } flags;

    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", flags.config, "path to the JSON run configuration")
            ->required();
        sub->add_option("--out", flags.out, "output directory (overrides config)");
        sub->add_option("--seed", flags.seed, "RNG seed (overrides config)")
            ->each([&](const std::string&) { flags.have_seed = true; });
        sub->add_option("--threads", flags.threads, "worker threads (0 = all cores)");
        sub->add_option("--format", flags.format, "summary format: csv or json")
            ->check(CLI::IsMember({"csv", "json"}));
    };
    CLI::App* price = app.add_subcommand("price", "lattice primal + dual certainty equivalent");
    CLI::App* pdec = app.add_subcommand("pde", "solve the limiting HJB equation");
    CLI::App* converge = app.add_subcommand("converge", "lattice-to-PDE convergence table");
    CLI::App* hedgec = app.add_subcommand("hedge", "delta-hedge gap and Monte Carlo P&L");
    CLI::App* dualb = app.add_subcommand("dual-bound", "dual policy bounds and control values");
    for (CLI::App* sub : {price, pdec, converge, hedgec, dualb}) add_common(sub);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        RunConfig config = load_config(flags.config);
        if (!flags.out.empty()) config.out_dir = flags.out;
        if (flags.have_seed) config.seed = flags.seed;
        if (flags.threads >= 0) config.threads = flags.threads;
        if (!flags.format.empty()) config.format = flags.format;
        if (const char* env = std::getenv("TRIHEDGE_THREADS")) config.threads = std::atoi(env);
        set_thread_count(config.threads);

        RunRecord record;
        if (app.got_subcommand(price)) record = cmd_price(config);
        else if (app.got_subcommand(pdec)) record = cmd_pde(config);
        else if (app.got_subcommand(converge)) record = cmd_converge(config);
        else if (app.got_subcommand(hedgec)) record = cmd_hedge(config);
        else record = cmd_dual_bound(config);

        for (const auto& [key, value] : record.outputs)
            std::cout << key << " = " << io::format_double(value) << '\n';
        for (const auto& check : record.checks)
            std::cout << (check.pass ? "[PASS] " : "[FAIL] ") << check.name
                      << " (value=" << io::format_double(check.value)
                      << ", tol=" << io::format_double(check.tol) << ")\n";
        for (const auto& warning : record.warnings) std::cerr << "warning: " << warning << '\n';
        return record.checks_pass() ? 0 : 4;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const InputError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
}

} // namespace trihedge::cli
