// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Criterion 10 drives the CLI binary given as argv[1].
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "trihedge/hedge.hpp"
#include "trihedge/lattice.hpp"
#include "trihedge/limits.hpp"
#include "trihedge/model.hpp"
#include "trihedge/pde.hpp"

using namespace trihedge;
namespace fs = std::filesystem;

namespace {

std::string g_cli;

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool cond, const std::string& what) {
        if (!cond) {
            pass = false;
            if (detail.tellp() > 0) detail << "; ";
            detail << what;
        }
    }
};

double rel_gap(double a, double b) {
    return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

Payoff pick_payoff(int which, double s0) {
    switch (which % 3) {
        case 0: return Payoff::log_affine(0.2, 1.0);
        case 1: return Payoff::power(2.0);
        default: return Payoff::smoothed_call(s0, 0.25);
    }
}

// --- criterion 1: primal/dual agreement on 100 randomized instances --------
Outcome criterion_duality() {
    Outcome out;
    std::mt19937_64 gen(1001);
    std::uniform_real_distribution<double> pu(0.05, 0.95);
    std::uniform_real_distribution<double> su(0.1, 1.0);
    std::uniform_real_distribution<double> s0u(0.6, 1.6);
    std::uniform_real_distribution<double> lu(0.25, 4.0);
    std::uniform_int_distribution<int> nu(1, 50);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        ModelParams params{pu(gen), su(gen), s0u(gen), lu(gen), nu(gen)};
        const Payoff payoff = pick_payoff(trial, params.s0);
        const double primal = lattice::primal_ce(params, payoff).ce;
        const double dual = lattice::dual_ce(params, payoff).ce;
        worst = std::max(worst, rel_gap(primal, dual));
    }
    out.require(worst <= 1e-12, "max residual " + std::to_string(worst));
    out.detail << "max relative residual " << worst << " over 100 instances";
    return out;
}

// --- criterion 2: enumeration oracle + numeric inner minimizer --------------
Outcome criterion_enumeration() {
    Outcome out;
    std::mt19937_64 gen(1002);
    std::uniform_real_distribution<double> pu(0.05, 0.95);
    std::uniform_real_distribution<double> su(0.1, 1.0);
    std::uniform_real_distribution<double> s0u(0.6, 1.6);
    std::uniform_real_distribution<double> lu(0.25, 4.0);
    std::uniform_int_distribution<int> nu(1, 8);
    double worst = 0.0;
    for (int trial = 0; trial < 60; ++trial) {
        ModelParams params{pu(gen), su(gen), s0u(gen), lu(gen), nu(gen)};
        const Payoff payoff = pick_payoff(trial, params.s0);
        const double primal = lattice::primal_ce(params, payoff).ce;
        const double tree = lattice::enumerate_ce(params, payoff, 8);
        worst = std::max(worst, rel_gap(primal, tree));
    }
    out.require(worst <= 1e-12, "max enumeration residual " + std::to_string(worst));

    std::uniform_real_distribution<double> uu(-8.0, 8.0);
    std::uniform_real_distribution<double> cu(0.05, 5.0);
    double worst_value = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const double u_up = uu(gen), u_mid = uu(gen), u_down = uu(gen);
        const double p = pu(gen), c = cu(gen);
        const auto closed = lattice::inner_minimum_closed(u_up, u_mid, u_down, p, c);
        const auto numeric = lattice::inner_minimum_numeric(u_up, u_mid, u_down, p, c, 1e-8);
        worst_value = std::max(worst_value, std::abs(closed.value - numeric.value));
    }
    out.require(worst_value <= 1e-9,
                "max inner-minimum deviation " + std::to_string(worst_value));
    out.detail << "enum residual " << worst << ", inner-min deviation " << worst_value;
    return out;
}

// --- criterion 3: monotonicity in p and sigma_bar for convex payoffs --------
Outcome criterion_monotonicity() {
    Outcome out;
    const std::vector<Payoff> payoffs = {Payoff::power(2.0), Payoff::smoothed_call(1.0, 0.25),
                                         Payoff::call(1.0)};
    const std::vector<double> ps = {0.1, 0.3, 0.5, 0.7, 0.9};
    const std::vector<double> sigmas = {0.15, 0.3, 0.45, 0.6, 0.75};
    double worst = 0.0;
    for (const Payoff& payoff : payoffs)
        for (int n : {1, 4, 16}) {
            for (double sigma : sigmas) {
                double prev = -1e300;
                for (double p : ps) {
                    const double ce =
                        lattice::primal_ce(ModelParams{p, sigma, 1.0, 1.0, n}, payoff).ce;
                    worst = std::max(worst, prev - ce);
                    prev = ce;
                }
            }
            for (double p : ps) {
                double prev = -1e300;
                for (double sigma : sigmas) {
                    const double ce =
                        lattice::primal_ce(ModelParams{p, sigma, 1.0, 1.0, n}, payoff).ce;
                    worst = std::max(worst, prev - ce);
                    prev = ce;
                }
            }
        }
    out.require(worst <= 1e-12, "monotonicity violated by " + std::to_string(worst));
    out.detail << "largest violation " << worst;
    return out;
}

// --- criterion 4: PDE reproduces the explicit log-payoff value --------------
Outcome criterion_example() {
    Outcome out;
    ModelParams params{0.5, 0.2, 1.0, 1.0, 100};
    const auto grid = pde::LogGrid::centered(params, 6.0 * params.sigma_bar, 0.005);
    const auto sol = pde::solve_hjb(params, Payoff::log_affine(0.0, 1.0), grid);
    const double v0 = sol.value(0.0, 1.0);
    // independent extended-precision evaluation of the explicit solution
    const long double exact_l =
        std::log((1.0L - 0.5L) + 0.5L * std::exp(-0.5L * 1.0L * 0.04L * 1.0L));
    const double exact = static_cast<double>(exact_l);
    const double budget =
        5.0 * sol.grid().dy() * sol.grid().dy() + 5.0 * sol.grid().dt();
    out.require(std::abs(exact - (-0.00995)) <= 1e-5, "closed form sanity");
    out.require(std::abs(v0 - exact) <= budget,
                "PDE deviates " + std::to_string(std::abs(v0 - exact)));
    out.detail << "v(0,s0) = " << v0 << ", explicit " << exact << ", |diff| "
               << std::abs(v0 - exact) << " <= budget " << budget;
    return out;
}

// --- criterion 5: lattice values converge to the limit (log payoff) ---------
Outcome criterion_convergence() {
    Outcome out;
    ModelParams base{0.5, 0.2, 1.0, 1.0, 400};
    const Payoff payoff = Payoff::log_affine(0.0, 1.0);
    const double limit = pde::closed_form_log_payoff(0.0, 1.0, 0.0, 1.0, base);
    std::vector<double> errors;
    for (int n : {25, 50, 100, 200, 400}) {
        ModelParams params = base;
        params.n = n;
        errors.push_back(std::abs(lattice::primal_ce(params, payoff).ce - limit));
    }
    for (std::size_t i = 1; i < errors.size(); ++i)
        out.require(errors[i] <= 1.1 * errors[i - 1] + 1e-15,
                    "error increased at step " + std::to_string(i));
    out.require(errors.back() <= 0.5 * errors.front(),
                "final error not halved: " + std::to_string(errors.back()) + " vs " +
                    std::to_string(errors.front()));
    out.detail << "|C_n - v|: ";
    for (double e : errors) out.detail << e << " ";
    return out;
}

// --- criterion 6: delta-hedging is asymptotically optimal -------------------
Outcome criterion_hedge_gap() {
    Outcome out;
    ModelParams base{0.5, 0.2, 1.0, 1.0, 400};
    const Payoff payoff = Payoff::log_affine(0.0, 1.0);
    const auto grid = pde::LogGrid::covering_lattice(base, 0.005);
    const auto sol = std::make_shared<pde::PdeSolution>(pde::solve_hjb(base, payoff, grid));
    std::vector<double> gaps;
    for (int n : {25, 50, 100, 200, 400}) {
        ModelParams params = base;
        params.n = n;
        const auto strategy = hedge::build_delta_strategy(sol, n);
        const auto ev = hedge::evaluate_hedge(params, payoff, strategy);
        out.require(ev.gap >= -1e-10, "negative gap at n=" + std::to_string(n));
        gaps.push_back(ev.gap);
    }
    out.require(gaps.back() <= 0.5 * gaps.front(),
                "gap not halved: " + std::to_string(gaps.back()) + " vs " +
                    std::to_string(gaps.front()));
    out.detail << "gaps: ";
    for (double g : gaps) out.detail << g << " ";
    return out;
}

// --- criterion 7: weak duality for 50 random policies, q* attains -----------
Outcome criterion_weak_duality() {
    Outcome out;
    ModelParams params{0.45, 0.4, 1.0, 1.0, 20};
    const Payoff payoff = Payoff::power(2.0);
    const double primal = lattice::primal_ce(params, payoff).ce;
    std::mt19937_64 gen(1007);
    double worst = -1e300;
    for (int trial = 0; trial < 50; ++trial) {
        const std::uint64_t salt = gen();
        const auto policy =
            lattice::VolFractionPolicy::from_rule([salt](int k, int a, int b, double) {
                std::uint64_t h = salt ^ (static_cast<std::uint64_t>(k) << 40) ^
                                  (static_cast<std::uint64_t>(a) << 20) ^
                                  static_cast<std::uint64_t>(b);
                h ^= h >> 33;
                h *= 0xff51afd7ed558ccdULL;
                h ^= h >> 33;
                return static_cast<double>(h >> 11) * 0x1.0p-53;
            });
        const double bound = lattice::dual_policy_bound(params, payoff, policy, 9);
        worst = std::max(worst, bound - primal);
    }
    out.require(worst <= 1e-10, "bound exceeded primal by " + std::to_string(worst));

    auto dual = lattice::dual_ce(params, payoff, true);
    const double attained = lattice::dual_policy_bound(
        params, payoff, lattice::VolFractionPolicy::from_table(std::move(dual.qstar)), 9);
    out.require(std::abs(attained - primal) <= 1e-10,
                "q* policy off by " + std::to_string(std::abs(attained - primal)));
    out.detail << "max bound excess " << worst << ", q* deviation "
               << std::abs(attained - primal);
    return out;
}

// --- criterion 8: K' and K'' bounds and finite-difference agreement ---------
Outcome criterion_k_bounds() {
    Outcome out;
    std::mt19937_64 gen(1008);
    std::uniform_real_distribution<double> pu(0.05, 0.95);
    std::uniform_real_distribution<double> su(0.1, 1.0);
    std::uniform_real_distribution<double> lu(0.2, 5.0);
    int points = 0;
    double worst_excess = -1e300;
    for (int rep = 0; rep < 10; ++rep) {
        ModelParams params{pu(gen), su(gen), 1.0, lu(gen), 5};
        const double lambda = params.sigma_bar * params.sigma_bar;
        for (int i = 0; i < 1000; ++i) {
            const double w = -50.0 + 100.0 * i / 999.0;
            const auto [kp, kpp] = model::nonlinearity_K_derivatives(w, params);
            ++points;
            out.require(kp > 0.0 && kp < 0.5 * lambda, "K' bound violated");
            out.require(kpp > 0.0 && kpp < params.ell * lambda * lambda / 16.0,
                        "K'' bound violated");
            // FD agreement to 1e-6 relative, plus the unavoidable roundoff
            // of the quotient itself (eps*|K|/h per evaluation)
            const double h = 1e-5 / (params.ell * lambda);
            const double k0 = model::nonlinearity_K(w, params);
            const double fd = (model::nonlinearity_K(w + h, params) -
                               model::nonlinearity_K(w - h, params)) /
                              (2.0 * h);
            const double noise =
                8.0 * std::numeric_limits<double>::epsilon() * std::abs(k0) / h;
            const double allowed = 1e-6 * std::max(std::abs(kp), std::abs(fd)) + noise;
            worst_excess = std::max(worst_excess, std::abs(kp - fd) - allowed);
        }
    }
    out.require(worst_excess <= 0.0,
                "FD mismatch beyond tolerance by " + std::to_string(worst_excess));
    out.detail << "bounds held and FD agreed at all " << points
               << " points (worst excess over tolerance " << worst_excess << ")";
    return out;
}

// --- criterion 9: small/large risk-aversion limits ---------------------------
Outcome criterion_limits() {
    Outcome out;
    {
        ModelParams params{0.5, 0.2, 1.0, 1e-4, 100};
        const auto grid = pde::LogGrid::centered(params, 6.0 * params.sigma_bar, 0.005);
        const auto sol = pde::solve_hjb(params, Payoff::log_affine(0.0, 1.0), grid);
        const double bs = model::bs_price(Payoff::log_affine(0.0, 1.0),
                                          std::sqrt(params.p) * params.sigma_bar, 1.0);
        const double diff = std::abs(sol.value(0.0, 1.0) - bs);
        out.require(diff <= 1e-3, "small-ell deviation " + std::to_string(diff));
        out.detail << "small-ell |v - bs| = " << diff;
    }
    {
        ModelParams params{0.5, 0.2, 1.0, 1e3, 100};
        const auto grid = pde::LogGrid::centered(params, 6.0 * params.sigma_bar, 0.005);
        const auto sol = pde::solve_hjb(params, Payoff::power(2.0), grid);
        const double bs = model::bs_price(Payoff::power(2.0), params.sigma_bar, 1.0);
        const double diff = std::abs(sol.value(0.0, 1.0) - bs);
        out.require(diff <= 1e-2, "large-ell deviation " + std::to_string(diff));
        out.detail << ", large-ell |v - bs| = " << diff;
    }
    return out;
}

// --- criterion 10: CLI reproducibility with Monte Carlo enabled -------------
Outcome criterion_reproducibility() {
    Outcome out;
    if (g_cli.empty()) {
        out.require(false, "CLI binary path not provided");
        return out;
    }
    const fs::path work = fs::temp_directory_path() / "trihedge_acceptance";
    fs::remove_all(work);
    fs::create_directories(work);
    auto config_for = [&](const std::string& tag) {
        const fs::path dir = work / tag;
        const fs::path cfg = work / (tag + ".json");
        std::ofstream(cfg) << "{\"model\": {\"p\": 0.5, \"sigma_bar\": 0.2, \"s0\": 1.0, "
                              "\"ell\": 1.0, \"n\": 50}, \"payoff\": {\"kind\": "
                              "\"markovian\", \"name\": \"log_affine\", \"params\": "
                              "{\"alpha\": 0.0, \"beta\": 1.0}}, \"mc\": {\"paths\": 40000}, "
                              "\"pde\": {\"dy\": 0.005}, \"seed\": 20260810, \"out\": \""
                           << dir.string() << "\"}";
        return std::make_pair(cfg, dir);
    };
    const auto [cfg_a, dir_a] = config_for("rep_a");
    const auto [cfg_b, dir_b] = config_for("rep_b");
    auto run = [&](const fs::path& cfg) {
        const std::string cmd =
            "\"" + g_cli + "\" hedge --config " + cfg.string() + " --threads 2 >/dev/null 2>&1";
        return WEXITSTATUS(std::system(cmd.c_str()));
    };
    out.require(run(cfg_a) == 0, "first run failed");
    out.require(run(cfg_b) == 0, "second run failed");
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    for (const char* name : {"summary.csv", "strategy.csv", "histogram.csv"}) {
        const std::string a = slurp(dir_a / name);
        out.require(!a.empty(), std::string(name) + " missing");
        out.require(a == slurp(dir_b / name), std::string(name) + " differs between runs");
    }
    out.detail << "summary/strategy/histogram CSVs byte-identical across two seeded runs";
    return out;
}

} // namespace

int main(int argc, char** argv) {
    if (argc > 1) g_cli = argv[1];
    struct Entry {
        int id;
        const char* name;
        double budget_s;
        std::function<Outcome()> run;
    };
    const std::vector<Entry> entries = {
        {1, "duality identity", 10.0, criterion_duality},
        {2, "enumeration oracle + inner minimizer", 30.0, criterion_enumeration},
        {3, "monotonicity in p and sigma_bar", 5.0, criterion_monotonicity},
        {4, "explicit log-payoff reproduction", 60.0, criterion_example},
        {5, "lattice-to-limit convergence", 120.0, criterion_convergence},
        {6, "delta-hedge asymptotic optimality", 120.0, criterion_hedge_gap},
        {7, "weak duality of policy bounds", 30.0, criterion_weak_duality},
        {8, "K derivative bounds and FD agreement", 5.0, criterion_k_bounds},
        {9, "risk-aversion limit sandwich", 120.0, criterion_limits},
        {10, "CLI Monte Carlo reproducibility", 60.0, criterion_reproducibility},
    };
    int failures = 0;
    for (const auto& entry : entries) {
        const auto start = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = entry.run();
        } catch (const std::exception& e) {
            out.pass = false;
            out.detail << "exception: " << e.what();
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        out.require(secs <= entry.budget_s,
                    "runtime " + std::to_string(secs) + "s over budget " +
                        std::to_string(entry.budget_s) + "s");
        std::cout << (out.pass ? "[PASS]" : "[FAIL]") << " criterion " << entry.id << ": "
                  << entry.name << " (" << out.detail.str() << ") [" << secs << "s / budget "
                  << entry.budget_s << "s]\n";
        if (!out.pass) ++failures;
    }
    if (failures > 0) std::cout << failures << " criterion(s) failed\n";
    return failures;
}
