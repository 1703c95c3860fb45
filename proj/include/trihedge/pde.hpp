#ifndef TRIHEDGE_PDE_HPP
#define TRIHEDGE_PDE_HPP

#include <string>
#include <vector>

#include "trihedge/model.hpp"

namespace trihedge::pde {

/// Uniform grid in log-price y on [y_min, y_max] with m nodes, and t_steps
/// uniform steps on the unit time interval.
struct LogGrid {
    double y_min = 0.0;
    double y_max = 0.0;
    int m = 0;
    int t_steps = 0; // 0 = pick automatically from the CFL bound

    double dy() const { return (y_max - y_min) / (m - 1); }
    double dt() const { return 1.0 / t_steps; }

    // Grid of half-width hw around log(s0); m chosen so dy == dy_target when
    // 2*hw/dy_target is integral.
    static LogGrid centered(const ModelParams& params, double half_width,
                            double dy_target, int t_steps = 0);
    // Grid covering every spot reachable by the params.n-step lattice, padded
    // by a few cells so centered differences stay inside.
    static LogGrid covering_lattice(const ModelParams& params, double dy_target,
                                    int t_steps = 0);
};

/// Largest dt of the form 1/t_steps with dt <= 0.9 * dy^2 / (Lambda*(1+dy/2)),
/// the monotonicity bound of the explicit scheme (sup K' = Lambda/2, central
/// first-order term).
double cfl_dt(const LogGrid& grid, const ModelParams& params);

/// Grid solution of the forward problem u_t = K(u_yy - u_y), u(0,.) = f,
/// with f(y) = F(e^y). Exposes the original backward-time value
/// v(t,x) = u(1-t, log x) and its delta v_x.
class PdeSolution {
public:
    double u_bar(int j, int i) const { return data_[static_cast<std::size_t>(j) * m_ + i]; }
    double initial(int i) const { return f_[i]; }
    double w0(int i) const { return w0_[i]; }
    double m0() const { return m0_; }
    double M0() const { return M0_; }

    const LogGrid& grid() const { return grid_; }
    const ModelParams& params() const { return params_; }
    double y(int i) const { return grid_.y_min + i * grid_.dy(); }
    double t(int j) const { return j * grid_.dt(); }

    /// v(t,x); bilinear interpolation in (t, log x).
    /// Throws CoverageError if log x falls outside [y_min, y_max].
    double value(double t, double x) const;

    /// v_x(t,x) from central differences of u in y, divided by x.
    /// Needs log x in [y_min + dy, y_max - dy]; throws CoverageError outside.
    double delta(double t, double x) const;

    const std::vector<std::string>& warnings() const { return warnings_; }

private:
    friend PdeSolution solve_hjb(const ModelParams&, const Payoff&, const LogGrid&, bool);

    ModelParams params_;
    LogGrid grid_;
    int m_ = 0;
    std::vector<double> data_; // (t_steps+1) x m, row per time layer
    std::vector<double> f_, w0_;
    double m0_ = 0.0, M0_ = 0.0;
    std::vector<std::string> warnings_;
};

/// Explicit monotone scheme
///   u^{j+1}_i = u^j_i + dt * K(D2 u^j_i - D1 u^j_i)
/// with central differences and Dirichlet data u(t, y_bdry) = f(y_bdry) +
/// t*K(w0(y_bdry)). grid.t_steps == 0 derives the step count from cfl_dt.
/// Throws ConfigError if dt violates dt <= dy^2/(Lambda*(1+dy/2)), and
/// NumericalError (with the offending (t,y)) if the march produces NaN/inf.
/// Non-smooth payoffs are accepted with a warning; when mollify_nonsmooth is
/// set their initial data is Gaussian-smoothed with bandwidth 2*dy.
PdeSolution solve_hjb(const ModelParams& params, const Payoff& payoff,
                      const LogGrid& grid, bool mollify_nonsmooth = true);

/// The explicit solution for F(x) = alpha + beta*log x:
///   v(t,x) = alpha + beta*log x + (1-t)*K(-beta),
/// whose delta beta/x is time-independent.
double closed_form_log_payoff(double alpha, double beta, double t, double x,
                              const ModelParams& params);

struct SolutionReport {
    double tolerance = 0.0;
    // Band property: f(y) + t*K(m0) <= u(t,y) <= f(y) + t*K(M0).
    bool band_pass = false;
    double band_violation = 0.0;
    double band_t = 0.0, band_y = 0.0;
    // Discrete time slope (u(t+dt,y)-u(t,y))/dt within [K(m0), K(M0)].
    bool slope_pass = false;
    double slope_violation = 0.0;
    // Diagnostics only: discrete Lipschitz constants of u_t and D2u - D1u.
    double lipschitz_ut = 0.0;
    double lipschitz_w = 0.0;
    double k_m0 = 0.0, k_M0 = 0.0;

    bool pass() const { return band_pass && slope_pass; }
};

/// Verifies the band and slope bounds (tol <= 0 picks 5*dy^2 + 5*dt plus a
/// roundoff floor) and estimates the Lipschitz diagnostics.
SolutionReport check_solution_properties(const PdeSolution& sol, double tol = 0.0);

} // namespace trihedge::pde

#endif // TRIHEDGE_PDE_HPP
