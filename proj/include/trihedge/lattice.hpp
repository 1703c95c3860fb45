#ifndef TRIHEDGE_LATTICE_HPP
#define TRIHEDGE_LATTICE_HPP

#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

#include "trihedge/model.hpp"

namespace trihedge::lattice {

// The tree recombines in (up-count a, down-count b): node price is
// s0*(1+u)^a*(1-u)^b with u = sigma_bar/sqrt(n). Layer k holds the nodes
// {(a,b) : a,b >= 0, a+b <= k}; children of (k,a,b) are (k+1,a+1,b),
// (k+1,a,b) and (k+1,a,b+1).
inline std::size_t layer_size(int k) {
    return static_cast<std::size_t>(k + 1) * static_cast<std::size_t>(k + 2) / 2;
}

// Index of (a,b) inside layer k, rows of fixed a stored contiguously.
inline std::size_t node_index(int k, int a, int b) {
    const std::size_t aa = static_cast<std::size_t>(a);
    return aa * static_cast<std::size_t>(k + 1) - aa * (aa - 1) / 2 +
           static_cast<std::size_t>(b);
}

/// Per-node values on layers 0..n-1 of the recombining lattice (hedge ratios,
/// dual weights, ...).
struct NodeTable {
    int n = 0;
    std::vector<std::vector<double>> layers;

    void resize(int steps);
    double at(int k, int a, int b) const;
    double& at(int k, int a, int b);
};

/// Volatility-fraction process of a candidate martingale measure: phi(k,node)
/// in [0,1] puts conditional mass phi/2 on each of the +-1 moves and 1-phi on
/// the flat move. Values are read off the current node only (no look-ahead).
class VolFractionPolicy {
public:
    static VolFractionPolicy constant(double phi);
    static VolFractionPolicy from_table(NodeTable table);
    static VolFractionPolicy from_rule(std::function<double(int, int, int, double)> rule);

    // Throws InputError if the policy yields a value outside [0,1].
    double at(int k, int a, int b, double spot) const;

private:
    VolFractionPolicy() = default;
    std::function<double(int, int, int, double)> rule_;
};

/// Value and minimizer of the one-node inner problem
///   g(a) = log((p/2)(e^{u_up - a c} + e^{u_down + a c}) + (1-p) e^{u_mid}),
/// closed form: minimum log(p e^{(u_up+u_down)/2} + (1-p) e^{u_mid}) at
/// a* = (u_up - u_down)/(2c).
struct InnerSolution {
    double value;
    double a_star;
};
InnerSolution inner_minimum_closed(double u_up, double u_mid, double u_down,
                                   double p, double c);
/// Same problem minimized by golden-section search on a bracket of half-width
/// 10 scale units around the closed-form minimizer. tol bounds the final
/// bracket width in the scaled control a*c. Throws NumericalError if the
/// search fails to shrink the bracket (impossible for this convex objective).
InnerSolution inner_minimum_numeric(double u_up, double u_mid, double u_down,
                                    double p, double c, double tol);

struct PrimalResult {
    double ce = 0.0;
    NodeTable delta; // empty unless requested
};

/// Certainty equivalent by backward recursion on the recombining lattice,
/// inner problem in closed form, all updates max-shifted in log domain.
/// Optionally fills the per-node optimal hedge (in shares),
/// gamma*(k,node) = (U_up - U_down) / (n*ell*(S_up - S_down)).
PrimalResult primal_ce(const ModelParams& params, const Payoff& payoff,
                       bool want_delta = false);

/// Same recursion with the inner infimum solved numerically per node.
double primal_ce_numeric(const ModelParams& params, const Payoff& payoff, double tol);

struct DualResult {
    double ce = 0.0;
    NodeTable qstar; // empty unless requested
};

/// Certainty equivalent through the node-level dual: with m = (U_up+U_down)/2
/// and d = U_mid the supremum over q in (0,1) of
///   q m + (1-q) d - G_p(q)
/// is attained at q* = p e^{m-d} / ((1-p) + p e^{m-d}) and evaluated there.
/// Agrees with primal_ce up to floating-point reassociation.
DualResult dual_ce(const ModelParams& params, const Payoff& payoff,
                   bool want_qstar = false);

/// Exact certainty equivalent on the full ternary tree (no recombination);
/// supports path-dependent payoffs evaluated on the discrete node path.
/// Throws SizeError if params.n > max_n (3^n leaves).
double enumerate_ce(const ModelParams& params, const Payoff& payoff, int max_n = 9);

/// Dual objective E_Q[F_n] - (1/(n ell)) sum_k E_Q[G_p(phi_k)] for the
/// martingale measure induced by the policy. Weak duality: never exceeds the
/// primal certainty equivalent; equality at the q*-policy from dual_ce.
/// Markovian payoffs run forward induction on the recombining lattice for any
/// n; path-dependent payoffs traverse the full tree (n <= max_n).
double dual_policy_bound(const ModelParams& params, const Payoff& payoff,
                         const VolFractionPolicy& policy, int max_n = 9);

/// Hedge ratio (shares) at a lattice node; pde/constant rules ignore (a,b).
using NodeHedgeRule = std::function<double(int step, int a, int b, double spot)>;

/// Certainty equivalent (1/(n ell)) log E_P[exp(n ell (F(S_n) - sum_i
/// gamma_i dS_i))] of a fixed Markovian strategy, computed exactly by
/// backward induction. Always >= primal_ce.
double hedged_ce(const ModelParams& params, const Payoff& payoff,
                 const NodeHedgeRule& gamma);

} // namespace trihedge::lattice

#endif // TRIHEDGE_LATTICE_HPP
