#include "trihedge/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

#include "trihedge/errors.hpp"
#include "trihedge/parallel.hpp"

namespace trihedge::lattice {

namespace {

// log((p/2) e^{x_up} + (p/2) e^{x_down} + (1-p) e^{x_mid}), max-shifted.
double lse3(double x_up, double x_mid, double x_down, double p) {
    const double hi = std::max({x_up, x_mid, x_down});
    const double s = 0.5 * p * (std::exp(x_up - hi) + std::exp(x_down - hi)) +
                     (1.0 - p) * std::exp(x_mid - hi);
    return hi + std::log(s);
}

// Optimal node value log(p e^m + (1-p) e^d), m = (u_up+u_down)/2, d = u_mid.
double combine_primal(double u_up, double u_mid, double u_down, double p) {
    const double m = 0.5 * (u_up + u_down);
    const double hi = std::max(m, u_mid);
    return hi + std::log(p * std::exp(m - hi) + (1.0 - p) * std::exp(u_mid - hi));
}

// Dual route: evaluate q m + (1-q) d - G_p(q) at the maximizing q. Same value
// as combine_primal up to reassociation, but reached through the entropy
// objective rather than the log-sum.
double combine_dual(double u_up, double u_mid, double u_down, double p, double& qstar) {
    const double m = 0.5 * (u_up + u_down);
    const double d = u_mid;
    const double t = (m - d) + std::log(p) - std::log1p(-p);
    double q, cq;
    if (t >= 0.0) {
        const double z = std::exp(-t);
        q = 1.0 / (1.0 + z);
        cq = z / (1.0 + z);
    } else {
        const double z = std::exp(t);
        q = z / (1.0 + z);
        cq = 1.0 / (1.0 + z);
    }
    double g = 0.0;
    if (q > 0.0) g += q * (std::log(q) - std::log(p));
    if (cq > 0.0) g += cq * (std::log(cq) - std::log1p(-p));
    qstar = q;
    return d + q * (m - d) - g;
}

struct SpotPowers {
    std::vector<double> up, down;
    double s0;

    SpotPowers(const ModelParams& params) : s0(params.s0) {
        const double u = params.step_jump();
        up.resize(params.n + 1);
        down.resize(params.n + 1);
        up[0] = down[0] = 1.0;
        for (int i = 1; i <= params.n; ++i) {
            up[i] = up[i - 1] * (1.0 + u);
            down[i] = down[i - 1] * (1.0 - u);
        }
    }

    double spot(int a, int b) const { return s0 * up[a] * down[b]; }
};

void fill_terminal_layer(const ModelParams& params, const Payoff& payoff,
                         const SpotPowers& spots, std::vector<double>& layer) {
    const int n = params.n;
    const double nl = params.ell * static_cast<double>(n);
    layer.assign(layer_size(n), 0.0);
    parallel_for(0, static_cast<std::size_t>(n) + 1, [&](std::size_t av) {
        const int a = static_cast<int>(av);
        for (int b = 0; b + a <= n; ++b)
            layer[node_index(n, a, b)] = nl * payoff(spots.spot(a, b));
    });
    for (int a = 0; a <= n; ++a)
        for (int b = 0; b + a <= n; ++b)
            if (!std::isfinite(layer[node_index(n, a, b)])) {
                std::ostringstream oss;
                oss << "lattice: payoff not finite at terminal node a=" << a << " b=" << b
                    << " spot=" << spots.spot(a, b);
                throw NumericalError(oss.str());
            }
}

} // namespace

void NodeTable::resize(int steps) {
    n = steps;
    layers.assign(static_cast<std::size_t>(steps), {});
    for (int k = 0; k < steps; ++k) layers[k].assign(layer_size(k), 0.0);
}

double NodeTable::at(int k, int a, int b) const {
    if (k < 0 || k >= n || a < 0 || b < 0 || a + b > k)
        throw InputError("NodeTable::at: index out of range");
    return layers[k][node_index(k, a, b)];
}

double& NodeTable::at(int k, int a, int b) {
    if (k < 0 || k >= n || a < 0 || b < 0 || a + b > k)
        throw InputError("NodeTable::at: index out of range");
    return layers[k][node_index(k, a, b)];
}

VolFractionPolicy VolFractionPolicy::constant(double phi) {
    VolFractionPolicy p;
    p.rule_ = [phi](int, int, int, double) { return phi; };
    return p;
}

VolFractionPolicy VolFractionPolicy::from_table(NodeTable table) {
    VolFractionPolicy p;
    auto shared = std::make_shared<NodeTable>(std::move(table));
    p.rule_ = [shared](int k, int a, int b, double) { return shared->at(k, a, b); };
    return p;
}

VolFractionPolicy VolFractionPolicy::from_rule(std::function<double(int, int, int, double)> rule) {
    VolFractionPolicy p;
    p.rule_ = std::move(rule);
    return p;
}

double VolFractionPolicy::at(int k, int a, int b, double spot) const {
    const double phi = rule_(k, a, b, spot);
    if (!(phi >= 0.0 && phi <= 1.0)) {
        std::ostringstream oss;
        oss << "VolFractionPolicy: value " << phi << " at (k=" << k << ",a=" << a
            << ",b=" << b << ") outside [0,1]";
        throw InputError(oss.str());
    }
    return phi;
}

InnerSolution inner_minimum_closed(double u_up, double u_mid, double u_down,
                                   double p, double c) {
    if (!(p > 0.0 && p < 1.0)) throw InputError("inner_minimum_closed: p outside (0,1)");
    if (!(c > 0.0)) throw InputError("inner_minimum_closed: c must be positive");
    return {combine_primal(u_up, u_mid, u_down, p), (u_up - u_down) / (2.0 * c)};
}

InnerSolution inner_minimum_numeric(double u_up, double u_mid, double u_down,
                                    double p, double c, double tol) {
    if (!(p > 0.0 && p < 1.0)) throw InputError("inner_minimum_numeric: p outside (0,1)");
    if (!(c > 0.0)) throw InputError("inner_minimum_numeric: c must be positive");
    if (!(tol > 0.0)) throw InputError("inner_minimum_numeric: tol must be positive");

    // Work in the scaled control t = a*c; the objective has unit curvature
    // scale there and the minimum sits at t* = (u_up - u_down)/2.
    auto g = [&](double t) { return lse3(u_up - t, u_mid, u_down + t, p); };
    const double center = 0.5 * (u_up - u_down);
    double lo = center - 10.0, hi = center + 10.0;
    const double invphi = 0.6180339887498948482;
    double x1 = hi - invphi * (hi - lo);
    double x2 = lo + invphi * (hi - lo);
    double g1 = g(x1), g2 = g(x2);
    int iter = 0;
    while (hi - lo > tol) {
        if (++iter > 500)
            throw NumericalError("inner_minimum_numeric: golden-section search failed to converge");
        if (g1 <= g2) {
            hi = x2;
            x2 = x1;
            g2 = g1;
            x1 = hi - invphi * (hi - lo);
            g1 = g(x1);
        } else {
            lo = x1;
            x1 = x2;
            g1 = g2;
            x2 = lo + invphi * (hi - lo);
            g2 = g(x2);
        }
    }
    const double t = 0.5 * (lo + hi);
    return {g(t), t / c};
}

PrimalResult primal_ce(const ModelParams& params, const Payoff& payoff, bool want_delta) {
    params.validate();
    if (!payoff.markovian()) throw InputError("primal_ce: payoff must be Markovian");
    const int n = params.n;
    const double p = params.p;
    const double nl = params.ell * static_cast<double>(n);
    const SpotPowers spots(params);

    PrimalResult result;
    if (want_delta) result.delta.resize(n);

    std::vector<double> cur, prev;
    fill_terminal_layer(params, payoff, spots, cur);
    for (int k = n; k >= 1; --k) {
        prev.assign(layer_size(k - 1), 0.0);
        std::vector<double>* gamma = want_delta ? &result.delta.layers[k - 1] : nullptr;
        parallel_for(0, static_cast<std::size_t>(k), [&](std::size_t av) {
            const int a = static_cast<int>(av);
            for (int b = 0; b + a <= k - 1; ++b) {
                const double u_up = cur[node_index(k, a + 1, b)];
                const double u_mid = cur[node_index(k, a, b)];
                const double u_down = cur[node_index(k, a, b + 1)];
                const std::size_t idx = node_index(k - 1, a, b);
                prev[idx] = combine_primal(u_up, u_mid, u_down, p);
                if (gamma) {
                    const double ds = spots.spot(a + 1, b) - spots.spot(a, b + 1);
                    (*gamma)[idx] = (u_up - u_down) / (nl * ds);
                }
            }
        });
        cur.swap(prev);
    }
    result.ce = cur[0] / nl;
    return result;
}

double primal_ce_numeric(const ModelParams& params, const Payoff& payoff, double tol) {
    params.validate();
    if (!payoff.markovian()) throw InputError("primal_ce_numeric: payoff must be Markovian");
    if (!(tol > 0.0)) throw InputError("primal_ce_numeric: tol must be positive");
    const int n = params.n;
    const double p = params.p;
    const double nl = params.ell * static_cast<double>(n);
    const double sigma = params.sigma_bar;
    const SpotPowers spots(params);

    std::vector<double> cur, prev;
    fill_terminal_layer(params, payoff, spots, cur);
    for (int k = n; k >= 1; --k) {
        prev.assign(layer_size(k - 1), 0.0);
        parallel_for(0, static_cast<std::size_t>(k), [&](std::size_t av) {
            const int a = static_cast<int>(av);
            for (int b = 0; b + a <= k - 1; ++b) {
                const double u_up = cur[node_index(k, a + 1, b)];
                const double u_mid = cur[node_index(k, a, b)];
                const double u_down = cur[node_index(k, a, b + 1)];
                const double c = sigma * spots.spot(a, b);
                prev[node_index(k - 1, a, b)] =
                    inner_minimum_numeric(u_up, u_mid, u_down, p, c, tol).value;
            }
        });
        cur.swap(prev);
    }
    return cur[0] / nl;
}

DualResult dual_ce(const ModelParams& params, const Payoff& payoff, bool want_qstar) {
    params.validate();
    if (!payoff.markovian()) throw InputError("dual_ce: payoff must be Markovian");
    const int n = params.n;
    const double p = params.p;
    const double nl = params.ell * static_cast<double>(n);
    const SpotPowers spots(params);

    DualResult result;
    if (want_qstar) result.qstar.resize(n);

    std::vector<double> cur, prev;
    fill_terminal_layer(params, payoff, spots, cur);
    for (int k = n; k >= 1; --k) {
        prev.assign(layer_size(k - 1), 0.0);
        std::vector<double>* qs = want_qstar ? &result.qstar.layers[k - 1] : nullptr;
        parallel_for(0, static_cast<std::size_t>(k), [&](std::size_t av) {
            const int a = static_cast<int>(av);
            for (int b = 0; b + a <= k - 1; ++b) {
                const double u_up = cur[node_index(k, a + 1, b)];
                const double u_mid = cur[node_index(k, a, b)];
                const double u_down = cur[node_index(k, a, b + 1)];
                double q;
                const double v = combine_dual(u_up, u_mid, u_down, p, q);
                const std::size_t idx = node_index(k - 1, a, b);
                prev[idx] = v;
                if (qs) (*qs)[idx] = q;
            }
        });
        cur.swap(prev);
    }
    result.ce = cur[0] / nl;
    return result;
}

double enumerate_ce(const ModelParams& params, const Payoff& payoff, int max_n) {
    params.validate();
    if (params.n > max_n) {
        std::ostringstream oss;
        oss << "enumerate_ce: n=" << params.n << " exceeds max_n=" << max_n
            << " (3^n paths)";
        throw SizeError(oss.str());
    }
    const int n = params.n;
    const double p = params.p;
    const double u = params.step_jump();
    const double nl = params.ell * static_cast<double>(n);

    std::vector<double> path(static_cast<std::size_t>(n) + 1, 0.0);
    path[0] = params.s0;
    const std::function<double(int)> rec = [&](int k) -> double {
        if (k == n) {
            const double v = nl * payoff.on_path(path);
            if (!std::isfinite(v)) throw NumericalError("enumerate_ce: payoff not finite");
            return v;
        }
        const double z = path[k];
        path[k + 1] = z * (1.0 + u);
        const double v_up = rec(k + 1);
        path[k + 1] = z;
        const double v_mid = rec(k + 1);
        path[k + 1] = z * (1.0 - u);
        const double v_down = rec(k + 1);
        return combine_primal(v_up, v_mid, v_down, p);
    };
    return rec(0) / nl;
}

namespace {

double dual_policy_bound_markovian(const ModelParams& params, const Payoff& payoff,
                                   const VolFractionPolicy& policy) {
    const int n = params.n;
    const double nl = params.ell * static_cast<double>(n);
    const SpotPowers spots(params);

    std::vector<double> prob(1, 1.0), next;
    double penalty = 0.0;
    for (int k = 0; k < n; ++k) {
        next.assign(layer_size(k + 1), 0.0);
        for (int a = 0; a <= k; ++a)
            for (int b = 0; b + a <= k; ++b) {
                const double q = prob[node_index(k, a, b)];
                if (q == 0.0) continue;
                const double phi = policy.at(k, a, b, spots.spot(a, b));
                penalty += q * model::entropy_penalty(phi, params.p);
                next[node_index(k + 1, a + 1, b)] += q * 0.5 * phi;
                next[node_index(k + 1, a, b + 1)] += q * 0.5 * phi;
                next[node_index(k + 1, a, b)] += q * (1.0 - phi);
            }
        prob.swap(next);
    }
    double ef = 0.0;
    for (int a = 0; a <= n; ++a)
        for (int b = 0; b + a <= n; ++b)
            ef += prob[node_index(n, a, b)] * payoff(spots.spot(a, b));
    return ef - penalty / nl;
}

double dual_policy_bound_path(const ModelParams& params, const Payoff& payoff,
                              const VolFractionPolicy& policy) {
    const int n = params.n;
    const double nl = params.ell * static_cast<double>(n);
    const double u = params.step_jump();

    std::vector<double> path(static_cast<std::size_t>(n) + 1, 0.0);
    path[0] = params.s0;
    double acc = 0.0;
    // DFS over the full ternary tree carrying (measure weight, penalty sum).
    const std::function<void(int, int, int, double, double)> rec =
        [&](int k, int a, int b, double q, double pen) {
            if (q == 0.0) return;
            if (k == n) {
                acc += q * (payoff.on_path(path) - pen / nl);
                return;
            }
            const double z = path[k];
            const double phi = policy.at(k, a, b, z);
            const double pen2 = pen + model::entropy_penalty(phi, params.p);
            path[k + 1] = z * (1.0 + u);
            rec(k + 1, a + 1, b, q * 0.5 * phi, pen2);
            path[k + 1] = z;
            rec(k + 1, a, b, q * (1.0 - phi), pen2);
            path[k + 1] = z * (1.0 - u);
            rec(k + 1, a, b + 1, q * 0.5 * phi, pen2);
        };
    rec(0, 0, 0, 1.0, 0.0);
    return acc;
}

} // namespace

double dual_policy_bound(const ModelParams& params, const Payoff& payoff,
                         const VolFractionPolicy& policy, int max_n) {
    params.validate();
    if (payoff.markovian()) return dual_policy_bound_markovian(params, payoff, policy);
    if (params.n > max_n) {
        std::ostringstream oss;
        oss << "dual_policy_bound: path-dependent payoff needs n<=" << max_n
            << ", got n=" << params.n;
        throw SizeError(oss.str());
    }
    return dual_policy_bound_path(params, payoff, policy);
}

double hedged_ce(const ModelParams& params, const Payoff& payoff,
                 const NodeHedgeRule& gamma) {
    params.validate();
    if (!payoff.markovian()) throw InputError("hedged_ce: payoff must be Markovian");
    const int n = params.n;
    const double p = params.p;
    const double u = params.step_jump();
    const double nl = params.ell * static_cast<double>(n);
    const SpotPowers spots(params);

    std::vector<double> cur, prev;
    fill_terminal_layer(params, payoff, spots, cur);
    for (int k = n; k >= 1; --k) {
        prev.assign(layer_size(k - 1), 0.0);
        parallel_for(0, static_cast<std::size_t>(k), [&](std::size_t av) {
            const int a = static_cast<int>(av);
            for (int b = 0; b + a <= k - 1; ++b) {
                const double s = spots.spot(a, b);
                const double shift = nl * gamma(k - 1, a, b, s) * s * u; // gamma * (S_up - S)
                if (!std::isfinite(shift)) {
                    std::ostringstream oss;
                    oss << "hedged_ce: strategy not finite at step " << k - 1
                        << " spot " << s;
                    throw NumericalError(oss.str());
                }
                const double x_up = cur[node_index(k, a + 1, b)] - shift;
                const double x_mid = cur[node_index(k, a, b)];
                const double x_down = cur[node_index(k, a, b + 1)] + shift;
                prev[node_index(k - 1, a, b)] = lse3(x_up, x_mid, x_down, p);
            }
        });
        cur.swap(prev);
    }
    return cur[0] / nl;
}

} // namespace trihedge::lattice
