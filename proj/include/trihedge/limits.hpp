#ifndef TRIHEDGE_LIMITS_HPP
#define TRIHEDGE_LIMITS_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "trihedge/model.hpp"
#include "trihedge/pde.hpp"

namespace trihedge::limits {

/// Admissible volatility control with values in [0, sigma_bar]: either
/// piecewise constant in time on a deterministic partition, or a feedback
/// rule alpha(t, x) read off the simulated state.
class AlphaPolicy {
public:
    static AlphaPolicy constant(double alpha);
    // times = t_0 < ... < t_J with t_0 = 0, t_J = 1; values_j applies on
    // [t_j, t_{j+1}).
    static AlphaPolicy piecewise(std::vector<double> times, std::vector<double> values);
    static AlphaPolicy feedback(std::function<double(double, double)> rule);

    bool piecewise_constant() const { return !feedback_; }
    /// Policy value; the caller checks the [0, sigma_bar] range.
    double value(double t, double x) const;
    const std::vector<double>& times() const { return times_; }
    const std::vector<double>& values() const { return values_; }

private:
    AlphaPolicy() = default;
    std::vector<double> times_, values_;
    std::function<double(double, double)> feedback_;
};

struct McEstimate {
    double estimate = 0.0;
    double std_error = 0.0;
};

/// Monte Carlo estimate of E[F(S^alpha) - (1/ell) int_0^1 G_p(alpha^2 /
/// sigma_bar^2) dt], a lower bound on the limiting value. The state advances
/// by exact lognormal increments per step; the penalty integral is exact for
/// piecewise-constant policies (whose partition must sit on the step grid)
/// and midpoint-in-time for feedback rules.
McEstimate mc_control_value(const ModelParams& params, const Payoff& payoff,
                            const AlphaPolicy& policy, std::size_t paths,
                            int time_steps, std::uint64_t seed);

struct LimitReferences {
    double small_ell = 0.0;                  // Black-Scholes at vol sqrt(p)*sigma_bar
    std::optional<double> large_ell_convex;  // Black-Scholes at vol sigma_bar
};

/// Reference prices for the two risk-aversion limits; the worst-case
/// reference is returned only for payoffs declaring convexity.
LimitReferences limit_references(const ModelParams& params, const Payoff& payoff);

struct ConvergenceRow {
    int n = 0;
    double c_n = 0.0;
    double c_tilde_n = 0.0;
    double gap = 0.0;
    double pde_value = 0.0;
    double abs_error = 0.0; // |c_n - pde_value|
};

struct ConvergenceTable {
    std::vector<ConvergenceRow> rows; // sorted by n
    ModelParams base_params;
    std::string payoff_name;
    pde::LogGrid grid;
};

/// Fills (n, C_n, C_tilde_n, gap, pde_value, |C_n - pde_value|) for each n:
/// C_n from the lattice recursion, C_tilde_n from the delta strategy built on
/// one PDE solve over the given grid (which must cover the largest lattice).
ConvergenceTable convergence_study(const ModelParams& base, const Payoff& payoff,
                                   std::vector<int> n_list, const pde::LogGrid& grid);

} // namespace trihedge::limits

#endif // TRIHEDGE_LIMITS_HPP
