#include "trihedge/pde.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "trihedge/errors.hpp"
#include "trihedge/parallel.hpp"

namespace trihedge::pde {

namespace {

void validate_grid(const LogGrid& grid, const ModelParams& params) {
    params.validate();
    const double center = std::log(params.s0);
    if (grid.m < 3) throw InputError("LogGrid: need at least 3 spatial nodes");
    if (!(grid.y_min < center && center < grid.y_max))
        throw InputError("LogGrid: log(s0) must lie strictly inside [y_min, y_max]");
    if (!(grid.y_max > grid.y_min)) throw InputError("LogGrid: empty y range");
}

// K with the parameter-dependent constants folded in, for the time loop.
struct FastK {
    double log_p, log_1mp, half_ell_lambda, inv_ell;

    explicit FastK(const ModelParams& params)
        : log_p(std::log(params.p)),
          log_1mp(std::log1p(-params.p)),
          half_ell_lambda(0.5 * params.ell * params.sigma_bar * params.sigma_bar),
          inv_ell(1.0 / params.ell) {}

    double operator()(double w) const {
        const double a = log_1mp;
        const double b = log_p + half_ell_lambda * w;
        const double hi = std::max(a, b);
        const double lo = std::min(a, b);
        return inv_ell * (hi + std::log1p(std::exp(lo - hi)));
    }
};

} // namespace

LogGrid LogGrid::centered(const ModelParams& params, double half_width,
                          double dy_target, int t_steps) {
    params.validate();
    if (!(half_width > 0.0) || !(dy_target > 0.0))
        throw InputError("LogGrid::centered: half_width and dy_target must be positive");
    const double center = std::log(params.s0);
    LogGrid g;
    g.y_min = center - half_width;
    g.y_max = center + half_width;
    g.m = std::max(3, static_cast<int>(std::lround(2.0 * half_width / dy_target)) + 1);
    g.t_steps = t_steps;
    return g;
}

LogGrid LogGrid::covering_lattice(const ModelParams& params, double dy_target,
                                  int t_steps) {
    params.validate();
    if (!(dy_target > 0.0))
        throw InputError("LogGrid::covering_lattice: dy_target must be positive");
    const double center = std::log(params.s0);
    const double u = params.step_jump();
    const double lo = params.n * std::log1p(-u);
    const double hi = params.n * std::log1p(u);
    // Pad so delta extraction (one extra node each side) stays covered.
    const double pad = 4.0 * dy_target;
    LogGrid g;
    g.y_min = center + lo - pad;
    g.y_max = center + hi + pad;
    g.m = std::max(3, static_cast<int>(std::ceil((g.y_max - g.y_min) / dy_target)) + 1);
    g.t_steps = t_steps;
    return g;
}

double cfl_dt(const LogGrid& grid, const ModelParams& params) {
    validate_grid(grid, params);
    const double lambda = params.sigma_bar * params.sigma_bar;
    const double dy = grid.dy();
    const double bound = 0.9 * dy * dy / (lambda * (1.0 + 0.5 * dy));
    const int steps = std::max(1, static_cast<int>(std::ceil(1.0 / bound)));
    return 1.0 / steps;
}

double closed_form_log_payoff(double alpha, double beta, double t, double x,
                              const ModelParams& params) {
    params.validate();
    if (!(x > 0.0)) throw InputError("closed_form_log_payoff: x must be positive");
    return alpha + beta * std::log(x) + (1.0 - t) * model::nonlinearity_K(-beta, params);
}

PdeSolution solve_hjb(const ModelParams& params, const Payoff& payoff,
                      const LogGrid& grid_in, bool mollify_nonsmooth) {
    validate_grid(grid_in, params);
    if (!payoff.markovian()) throw InputError("solve_hjb: payoff must be Markovian");

    LogGrid grid = grid_in;
    if (grid.t_steps <= 0) grid.t_steps = static_cast<int>(std::lround(1.0 / cfl_dt(grid, params)));
    const double dy = grid.dy();
    const double dt = grid.dt();
    const double lambda = params.sigma_bar * params.sigma_bar;
    if (dt > dy * dy / (lambda * (1.0 + 0.5 * dy))) {
        std::ostringstream oss;
        oss << "solve_hjb: CFL violation, dt=" << dt << " exceeds "
            << dy * dy / (lambda * (1.0 + 0.5 * dy)) << "; increase t_steps";
        throw ConfigError(oss.str());
    }

    PdeSolution sol;
    sol.params_ = params;
    sol.grid_ = grid;
    sol.m_ = grid.m;
    const int m = grid.m;

    // Initial data f(y) = F(e^y), optionally mollified for kinked payoffs.
    bool mollified = false;
    sol.f_.resize(m);
    if (!payoff.smooth()) {
        sol.warnings_.push_back("payoff '" + payoff.name() +
                                "' is not twice differentiable; delta-hedging "
                                "optimality guarantees do not apply");
        mollified = mollify_nonsmooth;
        if (mollified)
            sol.warnings_.push_back("initial data mollified with Gaussian bandwidth 2*dy");
    }
    if (mollified) {
        const double bw = 2.0 * dy;
        std::vector<double> nodes, weights;
        model::gauss_hermite_rule(32, nodes, weights);
        const double inv_sqrt_pi = 0.56418958354775628694807945156077;
        const double sqrt2 = 1.4142135623730950488016887242097;
        for (int i = 0; i < m; ++i) {
            const double yi = sol.y(i);
            double acc = 0.0;
            for (std::size_t q = 0; q < nodes.size(); ++q)
                acc += weights[q] * payoff(std::exp(yi + bw * sqrt2 * nodes[q]));
            sol.f_[i] = acc * inv_sqrt_pi;
        }
    } else {
        for (int i = 0; i < m; ++i) sol.f_[i] = payoff(std::exp(sol.y(i)));
    }

    // Log-space curvature w0 = f'' - f' of the actual initial data: closed
    // form when the payoff carries one (and was not mollified), otherwise
    // central differences with the interior value copied to the boundary.
    sol.w0_.resize(m);
    if (payoff.has_analytic_w0() && !mollified) {
        for (int i = 0; i < m; ++i) sol.w0_[i] = payoff.analytic_w0(sol.y(i));
    } else {
        for (int i = 1; i + 1 < m; ++i) {
            const double d2 = (sol.f_[i + 1] - 2.0 * sol.f_[i] + sol.f_[i - 1]) / (dy * dy);
            const double d1 = (sol.f_[i + 1] - sol.f_[i - 1]) / (2.0 * dy);
            sol.w0_[i] = d2 - d1;
        }
        sol.w0_[0] = sol.w0_[1];
        sol.w0_[m - 1] = sol.w0_[m - 2];
    }
    sol.m0_ = *std::min_element(sol.w0_.begin(), sol.w0_.end());
    sol.M0_ = *std::max_element(sol.w0_.begin(), sol.w0_.end());

    const FastK K(params);
    const double k_lo = K(sol.w0_.front());
    const double k_hi = K(sol.w0_.back());

    sol.data_.assign(static_cast<std::size_t>(grid.t_steps + 1) * m, 0.0);
    std::copy(sol.f_.begin(), sol.f_.end(), sol.data_.begin());

    const double inv_dy2 = 1.0 / (dy * dy);
    const double inv_2dy = 0.5 / dy;
    for (int j = 0; j < grid.t_steps; ++j) {
        const double* cur = sol.data_.data() + static_cast<std::size_t>(j) * m;
        double* next = sol.data_.data() + static_cast<std::size_t>(j + 1) * m;
        const double t_next = (j + 1) * dt;
        parallel_for(1, static_cast<std::size_t>(m - 1), [&](std::size_t i) {
            const double w = (cur[i + 1] - 2.0 * cur[i] + cur[i - 1]) * inv_dy2 -
                             (cur[i + 1] - cur[i - 1]) * inv_2dy;
            next[i] = cur[i] + dt * K(w);
        });
        next[0] = sol.f_[0] + t_next * k_lo;
        next[m - 1] = sol.f_[m - 1] + t_next * k_hi;
        for (int i = 0; i < m; ++i) {
            if (!std::isfinite(next[i])) {
                std::ostringstream oss;
                oss << "solve_hjb: non-finite value at t=" << t_next << " y=" << sol.y(i);
                throw NumericalError(oss.str());
            }
        }
    }
    return sol;
}

double PdeSolution::value(double t, double x) const {
    if (!(x > 0.0)) throw InputError("PdeSolution::value: x must be positive");
    const double y = std::log(x);
    const double dy = grid_.dy();
    if (y < grid_.y_min - 1e-12 || y > grid_.y_max + 1e-12) {
        std::ostringstream oss;
        oss << "PdeSolution::value: log-spot " << y << " outside grid ["
            << grid_.y_min << ", " << grid_.y_max << "]";
        throw CoverageError(oss.str());
    }
    const double tt = std::clamp(1.0 - t, 0.0, 1.0);
    const double jj = tt * grid_.t_steps;
    const int j0 = std::min(static_cast<int>(jj), grid_.t_steps - 1);
    const double ft = jj - j0;
    const double ii = std::clamp((y - grid_.y_min) / dy, 0.0, static_cast<double>(m_ - 1));
    const int i0 = std::min(static_cast<int>(ii), m_ - 2);
    const double fy = ii - i0;
    const double a = (1.0 - fy) * u_bar(j0, i0) + fy * u_bar(j0, i0 + 1);
    const double b = (1.0 - fy) * u_bar(j0 + 1, i0) + fy * u_bar(j0 + 1, i0 + 1);
    return (1.0 - ft) * a + ft * b;
}

double PdeSolution::delta(double t, double x) const {
    if (!(x > 0.0)) throw InputError("PdeSolution::delta: x must be positive");
    const double y = std::log(x);
    const double dy = grid_.dy();
    if (y < grid_.y_min + dy - 1e-12 || y > grid_.y_max - dy + 1e-12) {
        std::ostringstream oss;
        oss << "PdeSolution::delta: log-spot " << y
            << " outside the centered-difference range [" << grid_.y_min + dy << ", "
            << grid_.y_max - dy << "]";
        throw CoverageError(oss.str());
    }
    const double tt = std::clamp(1.0 - t, 0.0, 1.0);
    const double jj = tt * grid_.t_steps;
    const int j0 = std::min(static_cast<int>(jj), grid_.t_steps - 1);
    const double ft = jj - j0;
    const double ii = std::clamp((y - grid_.y_min) / dy, 1.0, static_cast<double>(m_ - 2));
    int i0 = std::min(static_cast<int>(ii), m_ - 3);
    if (i0 < 1) i0 = 1;
    const double fy = ii - i0;
    auto uy = [&](int j, int i) { return (u_bar(j, i + 1) - u_bar(j, i - 1)) / (2.0 * dy); };
    const double a = (1.0 - fy) * uy(j0, i0) + fy * uy(j0, i0 + 1);
    const double b = (1.0 - fy) * uy(j0 + 1, i0) + fy * uy(j0 + 1, i0 + 1);
    return ((1.0 - ft) * a + ft * b) / x;
}

SolutionReport check_solution_properties(const PdeSolution& sol, double tol) {
    const LogGrid& grid = sol.grid();
    const double dy = grid.dy();
    const double dt = grid.dt();
    if (tol <= 0.0) tol = 5.0 * dy * dy + 5.0 * dt + 1e-12;

    SolutionReport rep;
    rep.tolerance = tol;
    rep.k_m0 = model::nonlinearity_K(sol.m0(), sol.params());
    rep.k_M0 = model::nonlinearity_K(sol.M0(), sol.params());

    const int m = grid.m;
    for (int j = 0; j <= grid.t_steps; ++j) {
        const double tj = sol.t(j);
        for (int i = 0; i < m; ++i) {
            const double u = sol.u_bar(j, i);
            const double lo = sol.initial(i) + tj * rep.k_m0;
            const double hi = sol.initial(i) + tj * rep.k_M0;
            const double viol = std::max(lo - u, u - hi);
            if (viol > rep.band_violation) {
                rep.band_violation = viol;
                rep.band_t = tj;
                rep.band_y = sol.y(i);
            }
        }
    }
    rep.band_pass = rep.band_violation <= tol;

    for (int j = 0; j < grid.t_steps; ++j)
        for (int i = 0; i < m; ++i) {
            const double slope = (sol.u_bar(j + 1, i) - sol.u_bar(j, i)) / dt;
            const double viol = std::max(rep.k_m0 - slope, slope - rep.k_M0);
            rep.slope_violation = std::max(rep.slope_violation, viol);
        }
    rep.slope_pass = rep.slope_violation <= tol;

    // Discrete Lipschitz estimates of u_t and w = D2 u - D1 u (diagnostics).
    auto ut = [&](int j, int i) { return (sol.u_bar(j + 1, i) - sol.u_bar(j, i)) / dt; };
    auto wd = [&](int j, int i) {
        return (sol.u_bar(j, i + 1) - 2.0 * sol.u_bar(j, i) + sol.u_bar(j, i - 1)) / (dy * dy) -
               (sol.u_bar(j, i + 1) - sol.u_bar(j, i - 1)) / (2.0 * dy);
    };
    for (int j = 0; j + 1 < grid.t_steps; ++j)
        for (int i = 1; i + 1 < m; ++i) {
            rep.lipschitz_ut = std::max(rep.lipschitz_ut, std::abs(ut(j + 1, i) - ut(j, i)) / dt);
            rep.lipschitz_ut = std::max(rep.lipschitz_ut, std::abs(ut(j, i + 1) - ut(j, i)) / dy);
        }
    for (int j = 0; j + 1 <= grid.t_steps; ++j)
        for (int i = 1; i + 2 < m; ++i) {
            rep.lipschitz_w = std::max(rep.lipschitz_w, std::abs(wd(j + 1, i) - wd(j, i)) / dt);
            rep.lipschitz_w = std::max(rep.lipschitz_w, std::abs(wd(j, i + 1) - wd(j, i)) / dy);
        }
    return rep;
}

} // namespace trihedge::pde
