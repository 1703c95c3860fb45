#include "trihedge/limits.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "trihedge/errors.hpp"
#include "trihedge/hedge.hpp"
#include "trihedge/lattice.hpp"
#include "trihedge/parallel.hpp"
#include "trihedge/rng.hpp"

namespace trihedge::limits {

AlphaPolicy AlphaPolicy::constant(double alpha) {
    return piecewise({0.0, 1.0}, {alpha});
}

AlphaPolicy AlphaPolicy::piecewise(std::vector<double> times, std::vector<double> values) {
    if (times.size() < 2 || values.size() + 1 != times.size())
        throw InputError("AlphaPolicy::piecewise: need J+1 times for J values");
    if (times.front() != 0.0 || times.back() != 1.0)
        throw InputError("AlphaPolicy::piecewise: partition must run from 0 to 1");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1]))
            throw InputError("AlphaPolicy::piecewise: partition times must increase");
    for (double v : values)
        if (!(v >= 0.0) || !std::isfinite(v))
            throw InputError("AlphaPolicy::piecewise: alpha values must be nonnegative");
    AlphaPolicy p;
    p.times_ = std::move(times);
    p.values_ = std::move(values);
    return p;
}

AlphaPolicy AlphaPolicy::feedback(std::function<double(double, double)> rule) {
    AlphaPolicy p;
    p.feedback_ = std::move(rule);
    return p;
}

double AlphaPolicy::value(double t, double x) const {
    if (feedback_) return feedback_(t, x);
    // Piece index: last j with times[j] <= t.
    const auto it = std::upper_bound(times_.begin(), times_.end(), t);
    std::size_t j = static_cast<std::size_t>(it - times_.begin());
    j = j == 0 ? 0 : j - 1;
    if (j >= values_.size()) j = values_.size() - 1; // t == 1 uses the last piece
    return values_[j];
}

namespace {

constexpr std::size_t kBlock = 8192;

double checked_alpha(double alpha, double sigma_bar, double t) {
    if (!(alpha >= 0.0 && alpha <= sigma_bar)) {
        std::ostringstream oss;
        oss << "mc_control_value: alpha=" << alpha << " at t=" << t
            << " outside [0, " << sigma_bar << "]";
        throw InputError(oss.str());
    }
    return alpha;
}

} // namespace

McEstimate mc_control_value(const ModelParams& params, const Payoff& payoff,
                            const AlphaPolicy& policy, std::size_t paths,
                            int time_steps, std::uint64_t seed) {
    params.validate();
    if (paths < 1) throw InputError("mc_control_value: paths must be >= 1");
    if (time_steps < 1) throw InputError("mc_control_value: time_steps must be >= 1");
    const double h = 1.0 / time_steps;
    const double sig2 = params.sigma_bar * params.sigma_bar;

    // Piecewise-constant policies: partition points must sit on the step grid
    // so the penalty integral is exact; precompute per-step values.
    std::vector<double> step_alpha, step_penalty;
    double penalty_const = 0.0;
    if (policy.piecewise_constant()) {
        for (double t : policy.times()) {
            const double steps = t * time_steps;
            if (std::abs(steps - std::lround(steps)) > 1e-9)
                throw InputError("mc_control_value: partition point " + std::to_string(t) +
                                 " does not lie on the time-step grid");
        }
        step_alpha.resize(time_steps);
        for (int i = 0; i < time_steps; ++i) {
            const double a = checked_alpha(policy.value(i * h, 0.0), params.sigma_bar, i * h);
            step_alpha[i] = a;
            penalty_const += h * model::entropy_penalty(a * a / sig2, params.p);
        }
    }

    std::vector<double> sample(paths);
    const std::size_t blocks = (paths + kBlock - 1) / kBlock;
    parallel_for(0, blocks, [&](std::size_t blk) {
        std::uint64_t sm = seed + 0x2545f4914f6cdd1dULL * (blk + 1);
        Rng rng(splitmix64(sm));
        std::vector<double> nodes(static_cast<std::size_t>(time_steps) + 1);
        const std::size_t lo = blk * kBlock;
        const std::size_t hi = std::min(paths, lo + kBlock);
        for (std::size_t path = lo; path < hi; ++path) {
            nodes[0] = params.s0;
            double penalty = penalty_const;
            for (int i = 0; i < time_steps; ++i) {
                const double t = i * h;
                const double spot = nodes[i];
                double a;
                if (policy.piecewise_constant()) {
                    a = step_alpha[i];
                } else {
                    a = checked_alpha(policy.value(t, spot), params.sigma_bar, t);
                    const double am = checked_alpha(policy.value(t + 0.5 * h, spot),
                                                    params.sigma_bar, t + 0.5 * h);
                    penalty += h * model::entropy_penalty(am * am / sig2, params.p);
                }
                const double z = rng.normal();
                nodes[i + 1] = spot * std::exp(a * std::sqrt(h) * z - 0.5 * a * a * h);
            }
            sample[path] = payoff.on_path(nodes) - penalty / params.ell;
        }
    });

    McEstimate est;
    double acc = 0.0;
    for (double x : sample) acc += x;
    est.estimate = acc / static_cast<double>(paths);
    if (paths > 1) {
        double ss = 0.0;
        for (double x : sample) ss += (x - est.estimate) * (x - est.estimate);
        est.std_error = std::sqrt(ss / (static_cast<double>(paths) - 1.0)) /
                        std::sqrt(static_cast<double>(paths));
    }
    return est;
}

LimitReferences limit_references(const ModelParams& params, const Payoff& payoff) {
    params.validate();
    if (!payoff.markovian()) throw InputError("limit_references: payoff must be Markovian");
    LimitReferences refs;
    refs.small_ell = model::bs_price(payoff, std::sqrt(params.p) * params.sigma_bar, params.s0);
    if (payoff.convex())
        refs.large_ell_convex = model::bs_price(payoff, params.sigma_bar, params.s0);
    return refs;
}

ConvergenceTable convergence_study(const ModelParams& base, const Payoff& payoff,
                                   std::vector<int> n_list, const pde::LogGrid& grid) {
    base.validate();
    if (!payoff.markovian()) throw InputError("convergence_study: payoff must be Markovian");
    if (n_list.empty()) throw InputError("convergence_study: empty n list");
    std::sort(n_list.begin(), n_list.end());

    ConvergenceTable table;
    table.base_params = base;
    table.payoff_name = payoff.name();
    table.grid = grid;

    auto sol = std::make_shared<pde::PdeSolution>(pde::solve_hjb(base, payoff, grid));
    const double pde_value = sol->value(0.0, base.s0);

    for (int n : n_list) {
        ModelParams params = base;
        params.n = n;
        params.validate();
        ConvergenceRow row;
        row.n = n;
        row.c_n = lattice::primal_ce(params, payoff).ce;
        const auto strategy = hedge::build_delta_strategy(sol, n);
        row.c_tilde_n = lattice::hedged_ce(params, payoff, strategy.node_rule());
        row.gap = row.c_tilde_n - row.c_n;
        row.pde_value = pde_value;
        row.abs_error = std::abs(row.c_n - pde_value);
        if (!std::isfinite(row.c_n) || !std::isfinite(row.c_tilde_n) ||
            !std::isfinite(row.pde_value))
            throw NumericalError("convergence_study: non-finite entry at n=" +
                                 std::to_string(n));
        table.rows.push_back(row);
    }
    return table;
}

} // namespace trihedge::limits
