#ifndef TRIHEDGE_HEDGE_HPP
#define TRIHEDGE_HEDGE_HPP

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "trihedge/lattice.hpp"
#include "trihedge/model.hpp"
#include "trihedge/pde.hpp"

namespace trihedge::hedge {

/// A Markovian trading rule: shares held over step i as a function of the
/// spot at time i/n.
class HedgeStrategy {
public:
    enum class Provenance { PdeDelta, LatticeOptimal, Constant, User };

    /// Delta read off the PDE solution, gamma(i, x) = v_x((i+1)/n, x); the
    /// time argument snaps to (i+1)/n, the spot interpolates in log space.
    /// Throws CoverageError if the solution grid does not contain every spot
    /// reachable by the n-step lattice.
    static HedgeStrategy pde_delta(std::shared_ptr<const pde::PdeSolution> sol, int n);

    /// The per-node minimizer table from lattice::primal_ce.
    static HedgeStrategy lattice_optimal(const ModelParams& params,
                                         lattice::NodeTable gamma);

    static HedgeStrategy constant(int n, double shares);
    static HedgeStrategy user(int n, std::function<double(int, double)> rule);

    int n() const { return n_; }
    Provenance provenance() const { return provenance_; }
    const char* provenance_name() const;

    /// Shares at (step, spot). Lattice tables snap to the nearest node of
    /// their layer in log space.
    double at(int step, double spot) const;

    /// Node-indexed view for exact lattice evaluation; exact (a,b) lookup for
    /// lattice tables, spot-based for the other provenances.
    lattice::NodeHedgeRule node_rule() const;

private:
    HedgeStrategy() = default;

    int n_ = 0;
    Provenance provenance_ = Provenance::User;
    std::function<double(int, double)> rule_;
    std::shared_ptr<const lattice::NodeTable> table_;
    double table_s0_ = 0.0, table_jump_ = 0.0;
};

/// Equivalent to HedgeStrategy::pde_delta.
HedgeStrategy build_delta_strategy(std::shared_ptr<const pde::PdeSolution> sol, int n);

struct HedgeEvaluation {
    double ce_tilde = 0.0;  // exact certainty equivalent of the strategy
    double ce_primal = 0.0; // optimal certainty equivalent
    double gap = 0.0;       // ce_tilde - ce_primal, nonnegative up to roundoff
};

/// Exact lattice evaluation of the strategy against the optimum.
HedgeEvaluation evaluate_hedge(const ModelParams& params, const Payoff& payoff,
                               const HedgeStrategy& strategy);

struct PnlReport {
    std::size_t paths = 0;
    double mean = 0.0;   // sample mean of F - V^gamma
    double stddev = 0.0; // sample standard deviation
    // (1/(n ell)) log mean exp(n ell (F - V^gamma)), with a bootstrap CI.
    double ce_estimate = 0.0;
    double ce_ci_lo = 0.0;
    double ce_ci_hi = 0.0;
    // Set when the top 0.1% of exponential weights carry more than half of
    // the empirical mean; the estimate is then dominated by a few paths.
    bool heavy_tail = false;
    std::vector<double> bin_edges;
    std::vector<std::size_t> bin_counts;
};

struct PnlOptions {
    int bootstrap_resamples = 200;
    int histogram_bins = 32;
};

/// Monte Carlo P&L of the strategy under the physical measure: moves are
/// i.i.d. with masses (p/2, 1-p, p/2) on {+1, 0, -1}. Paths are partitioned
/// into fixed-size blocks with per-block substreams derived from the seed, so
/// the output is bit-identical for fixed (seed, paths) at any thread count.
PnlReport simulate_pnl(const ModelParams& params, const Payoff& payoff,
                       const HedgeStrategy& strategy, std::size_t paths,
                       std::uint64_t seed, const PnlOptions& options = {});

} // namespace trihedge::hedge

#endif // TRIHEDGE_HEDGE_HPP
