#include "trihedge/hedge.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "trihedge/errors.hpp"
#include "trihedge/parallel.hpp"
#include "trihedge/rng.hpp"

namespace trihedge::hedge {

const char* HedgeStrategy::provenance_name() const {
    switch (provenance_) {
        case Provenance::PdeDelta: return "pde-delta";
        case Provenance::LatticeOptimal: return "lattice-optimal";
        case Provenance::Constant: return "constant";
        case Provenance::User: return "user";
    }
    return "user";
}

HedgeStrategy HedgeStrategy::pde_delta(std::shared_ptr<const pde::PdeSolution> sol, int n) {
    if (!sol) throw InputError("pde_delta: null solution");
    if (n < 1) throw InputError("pde_delta: n must be >= 1");
    const ModelParams& mp = sol->params();
    const double u = mp.sigma_bar / std::sqrt(static_cast<double>(n));
    const double y0 = std::log(mp.s0);
    const double lo = y0 + n * std::log1p(-u);
    const double hi = y0 + n * std::log1p(u);
    const auto& g = sol->grid();
    if (lo < g.y_min + g.dy() || hi > g.y_max - g.dy()) {
        std::ostringstream oss;
        oss << "pde_delta: n=" << n << " lattice reaches log-spots [" << lo << ", " << hi
            << "] but the solution grid only covers [" << g.y_min + g.dy() << ", "
            << g.y_max - g.dy() << "]";
        throw CoverageError(oss.str());
    }
    HedgeStrategy s;
    s.n_ = n;
    s.provenance_ = Provenance::PdeDelta;
    const double nd = static_cast<double>(n);
    s.rule_ = [sol, nd](int step, double spot) {
        return sol->delta((step + 1) / nd, spot);
    };
    return s;
}

HedgeStrategy HedgeStrategy::lattice_optimal(const ModelParams& params,
                                             lattice::NodeTable gamma) {
    params.validate();
    if (gamma.n != params.n)
        throw InputError("lattice_optimal: table step count does not match params.n");
    HedgeStrategy s;
    s.n_ = params.n;
    s.provenance_ = Provenance::LatticeOptimal;
    s.table_ = std::make_shared<lattice::NodeTable>(std::move(gamma));
    s.table_s0_ = params.s0;
    s.table_jump_ = params.step_jump();
    return s;
}

HedgeStrategy HedgeStrategy::constant(int n, double shares) {
    if (n < 1) throw InputError("HedgeStrategy::constant: n must be >= 1");
    HedgeStrategy s;
    s.n_ = n;
    s.provenance_ = Provenance::Constant;
    s.rule_ = [shares](int, double) { return shares; };
    return s;
}

HedgeStrategy HedgeStrategy::user(int n, std::function<double(int, double)> rule) {
    if (n < 1) throw InputError("HedgeStrategy::user: n must be >= 1");
    HedgeStrategy s;
    s.n_ = n;
    s.provenance_ = Provenance::User;
    s.rule_ = std::move(rule);
    return s;
}

double HedgeStrategy::at(int step, double spot) const {
    if (step < 0 || step >= n_) throw InputError("HedgeStrategy::at: step out of range");
    if (!(spot > 0.0)) throw InputError("HedgeStrategy::at: spot must be positive");
    if (!table_) return rule_(step, spot);
    // Snap to the nearest layer node in log space.
    const double target = std::log(spot / table_s0_);
    const double lu = std::log1p(table_jump_);
    const double ld = std::log1p(-table_jump_);
    double best = 1e300, value = 0.0;
    for (int a = 0; a <= step; ++a)
        for (int b = 0; b + a <= step; ++b) {
            const double diff = std::abs(a * lu + b * ld - target);
            if (diff < best) {
                best = diff;
                value = table_->at(step, a, b);
            }
        }
    return value;
}

lattice::NodeHedgeRule HedgeStrategy::node_rule() const {
    if (table_) {
        auto table = table_;
        return [table](int step, int a, int b, double) { return table->at(step, a, b); };
    }
    auto rule = rule_;
    return [rule](int step, int, int, double spot) { return rule(step, spot); };
}

HedgeStrategy build_delta_strategy(std::shared_ptr<const pde::PdeSolution> sol, int n) {
    return HedgeStrategy::pde_delta(std::move(sol), n);
}

HedgeEvaluation evaluate_hedge(const ModelParams& params, const Payoff& payoff,
                               const HedgeStrategy& strategy) {
    params.validate();
    if (strategy.n() != params.n)
        throw InputError("evaluate_hedge: strategy step count does not match params.n");
    HedgeEvaluation ev;
    ev.ce_tilde = lattice::hedged_ce(params, payoff, strategy.node_rule());
    ev.ce_primal = lattice::primal_ce(params, payoff).ce;
    ev.gap = ev.ce_tilde - ev.ce_primal;
    return ev;
}

namespace {

constexpr std::size_t kBlock = 8192;

struct SampleStats {
    double mean = 0.0;
    double stddev = 0.0;
};

SampleStats stats_of(const std::vector<double>& xs) {
    SampleStats s;
    const double n = static_cast<double>(xs.size());
    double acc = 0.0;
    for (double x : xs) acc += x;
    s.mean = acc / n;
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - s.mean) * (x - s.mean);
        s.stddev = std::sqrt(ss / (n - 1.0));
    }
    return s;
}

} // namespace

PnlReport simulate_pnl(const ModelParams& params, const Payoff& payoff,
                       const HedgeStrategy& strategy, std::size_t paths,
                       std::uint64_t seed, const PnlOptions& options) {
    params.validate();
    if (paths < 1) throw InputError("simulate_pnl: paths must be >= 1");
    if (strategy.n() != params.n)
        throw InputError("simulate_pnl: strategy step count does not match params.n");
    const int n = params.n;
    const double u = params.step_jump();
    const double nl = params.ell * static_cast<double>(n);
    const auto gamma = strategy.node_rule();

    std::vector<double> pnl(paths);
    const std::size_t blocks = (paths + kBlock - 1) / kBlock;
    parallel_for(0, blocks, [&](std::size_t blk) {
        std::uint64_t sm = seed + 0x51ed2701a3c5e491ULL * (blk + 1);
        Rng rng(splitmix64(sm));
        std::vector<double> nodes(static_cast<std::size_t>(n) + 1);
        const std::size_t lo = blk * kBlock;
        const std::size_t hi = std::min(paths, lo + kBlock);
        for (std::size_t path = lo; path < hi; ++path) {
            nodes[0] = params.s0;
            double gains = 0.0;
            int a = 0, b = 0;
            for (int i = 0; i < n; ++i) {
                const int move = ternary_move(rng, params.p);
                const double spot = nodes[i];
                const double next = spot * (1.0 + u * move);
                gains += gamma(i, a, b, spot) * (next - spot);
                if (move > 0) ++a;
                if (move < 0) ++b;
                nodes[i + 1] = next;
            }
            pnl[path] = payoff.on_path(nodes) - gains;
        }
    });

    PnlReport rep;
    rep.paths = paths;
    const SampleStats st = stats_of(pnl);
    rep.mean = st.mean;
    rep.stddev = st.stddev;

    // Exponential certainty equivalent, max-shifted over all paths.
    double shift = -1e300;
    for (double x : pnl) shift = std::max(shift, nl * x);
    std::vector<double> weights(paths);
    double wsum = 0.0;
    for (std::size_t i = 0; i < paths; ++i) {
        weights[i] = std::exp(nl * pnl[i] - shift);
        wsum += weights[i];
    }
    rep.ce_estimate = (shift + std::log(wsum / static_cast<double>(paths))) / nl;

    // Tail concentration: share of the weight mass on the top 0.1% of paths.
    {
        const std::size_t top = std::max<std::size_t>(1, paths / 1000);
        std::vector<double> sorted = weights;
        std::nth_element(sorted.begin(), sorted.begin() + (sorted.size() - top), sorted.end());
        double tail = 0.0;
        for (std::size_t i = sorted.size() - top; i < sorted.size(); ++i) tail += sorted[i];
        rep.heavy_tail = tail > 0.5 * wsum;
    }

    // Percentile bootstrap of the exponential CE.
    {
        const int B = std::max(1, options.bootstrap_resamples);
        std::uint64_t sm = seed ^ 0x9d2c5680dde6e5b9ULL;
        Rng rng(splitmix64(sm));
        std::vector<double> ces(B);
        for (int rep_i = 0; rep_i < B; ++rep_i) {
            double acc = 0.0;
            for (std::size_t i = 0; i < paths; ++i) {
                const std::size_t idx =
                    static_cast<std::size_t>(rng.uniform() * static_cast<double>(paths));
                acc += weights[std::min(idx, paths - 1)];
            }
            ces[rep_i] = (shift + std::log(acc / static_cast<double>(paths))) / nl;
        }
        std::sort(ces.begin(), ces.end());
        const auto pick = [&](double q) {
            return ces[std::min<std::size_t>(static_cast<std::size_t>(q * (B - 1)), B - 1)];
        };
        rep.ce_ci_lo = std::min(pick(0.025), rep.ce_estimate);
        rep.ce_ci_hi = std::max(pick(0.975), rep.ce_estimate);
    }

    // Histogram of F - V^gamma.
    {
        const int bins = std::max(1, options.histogram_bins);
        double lo = *std::min_element(pnl.begin(), pnl.end());
        double hi = *std::max_element(pnl.begin(), pnl.end());
        if (!(hi > lo)) {
            lo -= 0.5;
            hi += 0.5;
        }
        rep.bin_edges.resize(bins + 1);
        for (int i = 0; i <= bins; ++i)
            rep.bin_edges[i] = lo + (hi - lo) * static_cast<double>(i) / bins;
        rep.bin_counts.assign(bins, 0);
        const double width = (hi - lo) / bins;
        for (double x : pnl) {
            int idx = static_cast<int>((x - lo) / width);
            idx = std::clamp(idx, 0, bins - 1);
            ++rep.bin_counts[idx];
        }
    }
    return rep;
}

} // namespace trihedge::hedge
