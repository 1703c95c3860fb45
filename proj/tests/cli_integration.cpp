// End-to-end checks of the installed CLI: exit codes, emitted files, and
// byte-level reproducibility. Takes the binary path as argv[1].
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

int g_failures = 0;

#define REQUIRE(cond, msg)                                                        \
    do {                                                                          \
        if (!(cond)) {                                                            \
            std::cerr << "[FAIL] " << __FILE__ << ":" << __LINE__ << " " << (msg) \
                      << "\n";                                                    \
            ++g_failures;                                                         \
        }                                                                         \
    } while (0)

std::string g_cli;
fs::path g_work;

int run(const std::string& args) {
    const std::string cmd = "\"" + g_cli + "\" " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    if (status < 0) return -1;
    return WEXITSTATUS(status);
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string base_config(const std::string& extra, const std::string& out_dir) {
    return std::string("{\n"
                       "  \"model\": {\"p\": 0.5, \"sigma_bar\": 0.2, \"s0\": 1.0, "
                       "\"ell\": 1.0, \"n\": 12},\n"
                       "  \"payoff\": {\"kind\": \"markovian\", \"name\": \"linear\", "
                       "\"params\": {\"a\": 0.0, \"b\": 1.0}},\n"
                       "  \"out\": \"") +
           out_dir + "\"" + extra + "\n}\n";
}

void test_price_linear() {
    const fs::path dir = g_work / "price_linear";
    const fs::path cfg = g_work / "price_linear.json";
    write_file(cfg, base_config("", dir.string()));
    REQUIRE(run("price --config " + cfg.string()) == 0, "price exit code");
    REQUIRE(fs::exists(dir / "summary.csv"), "summary.csv emitted");
    REQUIRE(fs::exists(dir / "gamma.csv"), "gamma.csv emitted");
    REQUIRE(fs::exists(dir / "qstar.csv"), "qstar.csv emitted");
    REQUIRE(fs::exists(dir / "run_record.json"), "run_record.json emitted");
    const std::string summary = read_file(dir / "summary.csv");
    REQUIRE(summary.rfind("key,value\n", 0) == 0, "summary.csv header");
    const auto pos = summary.find("ce_primal,");
    REQUIRE(pos != std::string::npos, "ce_primal row present");
    if (pos != std::string::npos) {
        const double ce = std::strtod(summary.c_str() + pos + 10, nullptr);
        REQUIRE(std::abs(ce - 1.0) <= 1e-12, "linear payoff prices to s0");
    }
    const std::string gamma = read_file(dir / "gamma.csv");
    REQUIRE(gamma.rfind("k,a,b,spot,value\n", 0) == 0, "gamma.csv header");
    REQUIRE(!gamma.empty() && gamma.back() == '\n', "newline-terminated CSV");
}

void test_exit_codes() {
    // unknown key -> 2
    const fs::path cfg_bad = g_work / "bad_key.json";
    write_file(cfg_bad, "{\"model\": {\"p\": 0.5, \"sigma_bar\": 0.2, \"s0\": 1, \"ell\": 1, "
                        "\"n\": 5}, \"payoff\": {\"kind\": \"markovian\", \"name\": "
                        "\"constant\", \"params\": {\"c\": 1}}, \"oops\": 1}");
    REQUIRE(run("price --config " + cfg_bad.string()) == 2, "unknown key exits 2");

    // CFL violation -> 2 (configuration error)
    const fs::path dir = g_work / "cfl";
    const fs::path cfg_cfl = g_work / "cfl.json";
    write_file(cfg_cfl,
               base_config(",\n  \"pde\": {\"dy\": 0.01, \"t_steps\": 5}", dir.string()));
    REQUIRE(run("pde --config " + cfg_cfl.string()) == 2, "CFL violation exits 2");

    // payoff overflow at the terminal layer -> 3 (numerical failure)
    const fs::path dir3 = g_work / "blowup";
    const fs::path cfg3 = g_work / "blowup.json";
    write_file(cfg3, "{\"model\": {\"p\": 0.5, \"sigma_bar\": 0.9, \"s0\": 1.0, \"ell\": 1.0, "
                     "\"n\": 50}, \"payoff\": {\"kind\": \"markovian\", \"name\": \"power\", "
                     "\"params\": {\"exponent\": 400}}, \"out\": \"" +
                         dir3.string() + "\"}");
    REQUIRE(run("price --config " + cfg3.string()) == 3, "payoff overflow exits 3");

    // missing config file -> 2
    REQUIRE(run("price --config " + (g_work / "nope.json").string()) == 2,
            "missing config exits 2");
    // bad flags -> 2
    REQUIRE(run("price") == 2, "missing --config exits 2");
    REQUIRE(run("frobnicate --config x") == 2, "unknown subcommand exits 2");
}

void test_converge_outputs() {
    const fs::path dir = g_work / "converge";
    const fs::path cfg = g_work / "converge.json";
    write_file(cfg, "{\"model\": {\"p\": 0.5, \"sigma_bar\": 0.2, \"s0\": 1.0, \"ell\": 1.0, "
                    "\"n\": 16}, \"payoff\": {\"kind\": \"markovian\", \"name\": "
                    "\"log_affine\", \"params\": {\"alpha\": 0.0, \"beta\": 1.0}}, "
                    "\"n_list\": [4, 8, 16], \"pde\": {\"dy\": 0.01}, \"out\": \"" +
                        dir.string() + "\"}");
    REQUIRE(run("converge --config " + cfg.string()) == 0, "converge exit code");
    REQUIRE(fs::exists(dir / "table.csv"), "table.csv emitted");
    REQUIRE(fs::exists(dir / "plot.svg"), "plot.svg emitted");
    const std::string table = read_file(dir / "table.csv");
    REQUIRE(table.rfind("n,c_n,c_tilde_n,gap,pde_value,abs_error\n", 0) == 0,
            "table.csv header");
    const std::string svg = read_file(dir / "plot.svg");
    REQUIRE(svg.find("<svg") != std::string::npos, "plot.svg is an SVG document");
    REQUIRE(svg.find("polyline") != std::string::npos, "plot.svg has a polyline");
}

void test_pde_and_dual_bound() {
    const fs::path dir = g_work / "pde";
    const fs::path cfg = g_work / "pde.json";
    write_file(cfg, "{\"model\": {\"p\": 0.5, \"sigma_bar\": 0.2, \"s0\": 1.0, \"ell\": 1.0, "
                    "\"n\": 10}, \"payoff\": {\"kind\": \"markovian\", \"name\": "
                    "\"log_affine\", \"params\": {\"alpha\": 0.0, \"beta\": 1.0}}, "
                    "\"pde\": {\"dy\": 0.01}, \"out\": \"" +
                        dir.string() + "\"}");
    REQUIRE(run("pde --config " + cfg.string()) == 0, "pde exit code");
    REQUIRE(fs::exists(dir / "value.csv"), "value.csv emitted");
    REQUIRE(fs::exists(dir / "delta.csv"), "delta.csv emitted");

    const fs::path dir2 = g_work / "dual";
    const fs::path cfg2 = g_work / "dual.json";
    write_file(cfg2, "{\"model\": {\"p\": 0.5, \"sigma_bar\": 0.2, \"s0\": 1.0, \"ell\": 1.0, "
                     "\"n\": 10}, \"payoff\": {\"kind\": \"markovian\", \"name\": \"power\", "
                     "\"params\": {\"exponent\": 2}}, \"policy\": {\"phi\": {\"type\": "
                     "\"qstar\"}, \"alpha\": {\"type\": \"constant\", \"value\": 0.15}}, "
                     "\"mc\": {\"paths\": 4000, \"time_steps\": 10}, \"pde\": {\"dy\": 0.01}, "
                     "\"seed\": 7, \"out\": \"" +
                         dir2.string() + "\"}");
    REQUIRE(run("dual-bound --config " + cfg2.string()) == 0, "dual-bound exit code");
    const std::string summary = read_file(dir2 / "summary.csv");
    REQUIRE(summary.find("dual_policy_bound") != std::string::npos, "bound reported");
    REQUIRE(summary.find("mc_control_estimate") != std::string::npos, "mc estimate reported");
}

void test_hedge_reproducibility() {
    const std::string model = "{\"model\": {\"p\": 0.5, \"sigma_bar\": 0.2, \"s0\": 1.0, "
                              "\"ell\": 1.0, \"n\": 25}, \"payoff\": {\"kind\": "
                              "\"markovian\", \"name\": \"log_affine\", \"params\": "
                              "{\"alpha\": 0.0, \"beta\": 1.0}}, \"mc\": {\"paths\": 8000}, "
                              "\"pde\": {\"dy\": 0.01}, \"seed\": 321, \"out\": \"";
    const fs::path dir_a = g_work / "hedge_a";
    const fs::path dir_b = g_work / "hedge_b";
    const fs::path cfg_a = g_work / "hedge_a.json";
    const fs::path cfg_b = g_work / "hedge_b.json";
    write_file(cfg_a, model + dir_a.string() + "\"}");
    write_file(cfg_b, model + dir_b.string() + "\"}");
    REQUIRE(run("hedge --config " + cfg_a.string() + " --threads 2") == 0, "hedge run A");
    REQUIRE(run("hedge --config " + cfg_b.string() + " --threads 2") == 0, "hedge run B");
    for (const char* name : {"summary.csv", "strategy.csv", "histogram.csv"}) {
        const std::string a = read_file(dir_a / name);
        const std::string b = read_file(dir_b / name);
        REQUIRE(!a.empty(), std::string(name) + " emitted");
        REQUIRE(a == b, std::string(name) + " byte-identical across reruns");
    }
    // a different seed changes the Monte Carlo outputs
    const fs::path dir_c = g_work / "hedge_c";
    const fs::path cfg_c = g_work / "hedge_c.json";
    write_file(cfg_c, model + dir_c.string() + "\", \"threads\": 2}");
    REQUIRE(run("hedge --config " + cfg_c.string() + " --seed 99") == 0, "hedge run C");
    REQUIRE(read_file(dir_c / "histogram.csv") != read_file(dir_a / "histogram.csv"),
            "different seed changes the histogram");

    // thread count comes from the environment and does not change the bytes
    const fs::path dir_d = g_work / "hedge_d";
    const fs::path cfg_d = g_work / "hedge_d.json";
    write_file(cfg_d, model + dir_d.string() + "\"}");
    {
        const std::string cmd = "TRIHEDGE_THREADS=3 \"" + g_cli + "\" hedge --config " +
                                cfg_d.string() + " --threads 1 >/dev/null 2>&1";
        REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 0, "hedge run via env threads");
    }
    for (const char* name : {"summary.csv", "strategy.csv", "histogram.csv"})
        REQUIRE(read_file(dir_d / name) == read_file(dir_a / name),
                std::string(name) + " identical across thread counts");
}

void test_dual_bound_path_payoff() {
    const fs::path dir = g_work / "dual_path";
    const fs::path cfg = g_work / "dual_path.json";
    write_file(cfg, "{\"model\": {\"p\": 0.5, \"sigma_bar\": 0.3, \"s0\": 1.0, \"ell\": 1.0, "
                    "\"n\": 6}, \"payoff\": {\"kind\": \"path\", \"name\": \"lookback_max\"}, "
                    "\"policy\": {\"phi\": {\"type\": \"constant\", \"value\": 0.5}}, "
                    "\"out\": \"" +
                        dir.string() + "\"}");
    REQUIRE(run("dual-bound --config " + cfg.string()) == 0, "path dual-bound exit code");
    const std::string summary = read_file(dir / "summary.csv");
    REQUIRE(summary.find("ce_reference") != std::string::npos,
            "enumeration reference reported for small path payoffs");
    REQUIRE(summary.find("dual_policy_bound") != std::string::npos, "bound reported");
}

void test_json_format() {
    const fs::path dir = g_work / "json_fmt";
    const fs::path cfg = g_work / "json_fmt.json";
    write_file(cfg, base_config("", dir.string()));
    REQUIRE(run("price --config " + cfg.string() + " --format json") == 0,
            "price --format json");
    REQUIRE(fs::exists(dir / "summary.json"), "summary.json emitted");
    REQUIRE(!fs::exists(dir / "summary.csv"), "csv summary suppressed in json mode");
}

} // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: cli_integration <path-to-trihedge-binary>\n";
        return 1;
    }
    g_cli = argv[1];
    g_work = fs::temp_directory_path() / "trihedge_cli_integration";
    fs::remove_all(g_work);
    fs::create_directories(g_work);

    test_price_linear();
    test_exit_codes();
    test_converge_outputs();
    test_pde_and_dual_bound();
    test_dual_bound_path_payoff();
    test_hedge_reproducibility();
    test_json_format();

    if (g_failures == 0) {
        std::cout << "cli_integration: all checks passed\n";
        return 0;
    }
    std::cerr << "cli_integration: " << g_failures << " check(s) failed\n";
    return 1;
}
