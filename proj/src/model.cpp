#include "trihedge/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>

#include "trihedge/errors.hpp"

namespace trihedge {

double ModelParams::step_jump() const { return sigma_bar / std::sqrt(static_cast<double>(n)); }

namespace {
[[noreturn]] void bad_param(const char* what, double value) {
    std::ostringstream oss;
    oss << "ModelParams: " << what << ", got " << value;
    throw InputError(oss.str());
}
} // namespace

void ModelParams::validate() const {
    if (!(p > 0.0 && p < 1.0)) bad_param("p must lie in (0,1)", p);
    if (!(sigma_bar > 0.0) || !std::isfinite(sigma_bar))
        bad_param("sigma_bar must be positive", sigma_bar);
    if (!(s0 > 0.0) || !std::isfinite(s0)) bad_param("s0 must be positive", s0);
    if (!(ell > 0.0) || !std::isfinite(ell)) bad_param("ell must be positive", ell);
    if (n < 1 || static_cast<double>(n) <= sigma_bar * sigma_bar) {
        std::ostringstream oss;
        oss << "ModelParams: need n > sigma_bar^2 so down moves keep the price positive"
            << " (n=" << n << ", sigma_bar=" << sigma_bar << ")";
        throw InputError(oss.str());
    }
}

// ---------------------------------------------------------------------------
// Payoff catalogue
// ---------------------------------------------------------------------------

Payoff Payoff::constant(double c) {
    Payoff f;
    f.name_ = "constant";
    f.params_ = {{"c", c}};
    f.terminal_ = [c](double) { return c; };
    f.w0_ = [](double) { return 0.0; };
    f.growth_ = {std::abs(c) + 1.0, 1.0};
    f.convex_ = true;
    f.smooth_ = true;
    return f;
}

Payoff Payoff::linear(double a, double b) {
    Payoff f;
    f.name_ = "linear";
    f.params_ = {{"a", a}, {"b", b}};
    f.terminal_ = [a, b](double x) { return a + b * x; };
    f.w0_ = [](double) { return 0.0; }; // f(y) = a + b e^y, f'' - f' = 0
    f.growth_ = {std::abs(a) + std::abs(b) + 1.0, 1.0};
    f.convex_ = true;
    f.smooth_ = true;
    return f;
}

Payoff Payoff::log_affine(double alpha, double beta) {
    Payoff f;
    f.name_ = "log_affine";
    f.params_ = {{"alpha", alpha}, {"beta", beta}};
    f.terminal_ = [alpha, beta](double x) { return alpha + beta * std::log(x); };
    f.w0_ = [beta](double) { return -beta; };
    // |log x| <= x + 1/x on (0,inf)
    f.growth_ = {std::abs(alpha) + std::abs(beta) + 1.0, 1.0};
    f.convex_ = beta <= 0.0;
    f.smooth_ = true;
    return f;
}

Payoff Payoff::power(double exponent) {
    Payoff f;
    f.name_ = "power";
    f.params_ = {{"exponent", exponent}};
    f.terminal_ = [exponent](double x) { return std::pow(x, exponent); };
    f.w0_ = [exponent](double y) {
        return (exponent * exponent - exponent) * std::exp(exponent * y);
    };
    f.growth_ = {1.0, std::max(1.0, std::abs(exponent))};
    f.convex_ = exponent >= 1.0 || exponent <= 0.0;
    f.smooth_ = true;
    return f;
}

Payoff Payoff::call(double strike) {
    Payoff f;
    f.name_ = "call";
    f.params_ = {{"strike", strike}};
    f.terminal_ = [strike](double x) { return std::max(x - strike, 0.0); };
    f.growth_ = {1.0, 1.0};
    f.convex_ = true;
    f.smooth_ = false; // kink at the strike
    return f;
}

Payoff Payoff::put(double strike) {
    Payoff f;
    f.name_ = "put";
    f.params_ = {{"strike", strike}};
    f.terminal_ = [strike](double x) { return std::max(strike - x, 0.0); };
    f.growth_ = {std::abs(strike) + 1.0, 1.0};
    f.convex_ = true;
    f.smooth_ = false;
    return f;
}

Payoff Payoff::smoothed_call(double strike, double width) {
    if (!(strike > 0.0) || !(width > 0.0))
        throw InputError("smoothed_call: strike and width must be positive");
    Payoff f;
    f.name_ = "smoothed_call";
    f.params_ = {{"strike", strike}, {"width", width}};
    auto value = [strike, width](double x) {
        const double d1 = std::log(x / strike) / width + 0.5 * width;
        const double d2 = d1 - width;
        return x * model::normal_cdf(d1) - strike * model::normal_cdf(d2);
    };
    f.terminal_ = value;
    // x^2 F''(x) = x * phi(d1) / width at x = e^y
    f.w0_ = [strike, width](double y) {
        const double x = std::exp(y);
        const double d1 = std::log(x / strike) / width + 0.5 * width;
        const double phi = std::exp(-0.5 * d1 * d1) * 0.39894228040143267794;
        return x * phi / width;
    };
    f.growth_ = {1.0, 1.0}; // 0 <= F(x) <= x
    f.convex_ = true;
    f.smooth_ = true;
    return f;
}

Payoff Payoff::custom(std::string name, std::function<double(double)> f,
                      GrowthBound growth, bool convex, bool smooth) {
    Payoff p;
    p.name_ = std::move(name);
    p.terminal_ = std::move(f);
    p.growth_ = growth;
    p.convex_ = convex;
    p.smooth_ = smooth;
    return p;
}

Payoff Payoff::lookback_max() {
    Payoff f;
    f.kind_ = Kind::PathDependent;
    f.name_ = "lookback_max";
    f.path_ = [](std::span<const double> nodes) {
        return *std::max_element(nodes.begin(), nodes.end());
    };
    f.growth_ = {1.0, 1.0};
    f.convex_ = true;
    return f;
}

Payoff Payoff::asian_average() {
    Payoff f;
    f.kind_ = Kind::PathDependent;
    f.name_ = "asian_average";
    // Trapezoid rule is exact for the piecewise-linear interpolated path.
    f.path_ = [](std::span<const double> nodes) {
        const std::size_t n = nodes.size() - 1;
        if (n == 0) return nodes[0];
        double s = 0.5 * (nodes.front() + nodes.back());
        for (std::size_t i = 1; i < n; ++i) s += nodes[i];
        return s / static_cast<double>(n);
    };
    f.growth_ = {1.0, 1.0};
    f.convex_ = true;
    return f;
}

Payoff Payoff::custom_path(std::string name,
                           std::function<double(std::span<const double>)> f,
                           GrowthBound growth) {
    Payoff p;
    p.kind_ = Kind::PathDependent;
    p.name_ = std::move(name);
    p.path_ = std::move(f);
    p.growth_ = growth;
    return p;
}

double Payoff::operator()(double x) const {
    if (kind_ != Kind::Markovian)
        throw InputError("Payoff '" + name_ + "' is path-dependent; terminal value undefined");
    return terminal_(x);
}

double Payoff::on_path(std::span<const double> nodes) const {
    if (nodes.empty()) throw InputError("Payoff::on_path: empty path");
    if (kind_ == Kind::Markovian) return terminal_(nodes.back());
    return path_(nodes);
}

double Payoff::analytic_w0(double y) const {
    if (!w0_) throw InputError("Payoff '" + name_ + "' has no analytic log-space curvature");
    return w0_(y);
}

namespace {
double growth_envelope(const GrowthBound& g, double sup_term) {
    return g.C * (1.0 + sup_term);
}
double power_pair(double x, double r) { return std::pow(x, r) + std::pow(x, -r); }
} // namespace

bool Payoff::check_growth(std::span<const double> spots) const {
    for (double x : spots) {
        if (!(x > 0.0)) throw InputError("check_growth: spots must be positive");
        const double v = kind_ == Kind::Markovian ? terminal_(x) : path_({&x, 1});
        if (!std::isfinite(v)) return false;
        if (std::abs(v) > growth_envelope(growth_, power_pair(x, growth_.r))) return false;
    }
    return true;
}

bool Payoff::check_growth_paths(std::span<const std::vector<double>> paths) const {
    for (const auto& path : paths) {
        double sup = 0.0;
        for (double x : path) {
            if (!(x > 0.0)) throw InputError("check_growth_paths: nodes must be positive");
            sup = std::max(sup, power_pair(x, growth_.r));
        }
        const double v = on_path(path);
        if (!std::isfinite(v)) return false;
        if (std::abs(v) > growth_envelope(growth_, sup)) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// Entropy penalty and HJB nonlinearity
// ---------------------------------------------------------------------------

namespace model {

double entropy_penalty(double x, double p) {
    if (!(x >= 0.0 && x <= 1.0))
        throw InputError("entropy_penalty: x must lie in [0,1]");
    if (!(p > 0.0 && p < 1.0))
        throw InputError("entropy_penalty: p must lie in (0,1)");
    double g = 0.0;
    if (x > 0.0) g += x * std::log(x / p);
    if (x < 1.0) g += (1.0 - x) * std::log((1.0 - x) / (1.0 - p));
    // Clamp the tiny negative roundoff at x ~ p.
    return g < 0.0 ? 0.0 : g;
}

double nonlinearity_K(double w, const ModelParams& params) {
    params.validate();
    const double lambda = params.sigma_bar * params.sigma_bar;
    const double ell = params.ell;
    const double p = params.p;
    // K = (1/ell) * log((1-p) + p*exp(e)) with e = ell*lambda*w/2, computed as
    // a two-term log-sum-exp: max(a,b) + log1p(exp(min-max)) with
    // a = log(1-p), b = log(p) + e.
    const double e = 0.5 * ell * lambda * w;
    const double a = std::log1p(-p);
    const double b = std::log(p) + e;
    const double hi = std::max(a, b);
    const double lo = std::min(a, b);
    return (hi + std::log1p(std::exp(lo - hi))) / ell;
}

std::pair<double, double> nonlinearity_K_derivatives(double w, const ModelParams& params) {
    params.validate();
    const double lambda = params.sigma_bar * params.sigma_bar;
    const double ell = params.ell;
    const double p = params.p;
    // s = p*exp(e) / ((1-p) + p*exp(e)) is a logistic in t = e + logit(p);
    // then K' = (lambda/2) s and K'' = (ell*lambda^2/4) s(1-s).
    const double t = 0.5 * ell * lambda * w + std::log(p) - std::log1p(-p);
    double s, one_minus_s;
    if (t >= 0.0) {
        const double z = std::exp(-t);
        s = 1.0 / (1.0 + z);
        one_minus_s = z / (1.0 + z);
    } else {
        const double z = std::exp(t);
        s = z / (1.0 + z);
        one_minus_s = 1.0 / (1.0 + z);
    }
    // The bounds are strict for every finite w; where the logistic rounds to
    // exactly 0 or 1, report the nearest representable interior value.
    const double kp_hi = std::nextafter(0.5 * lambda, 0.0);
    const double kpp_hi = std::nextafter(ell * lambda * lambda / 16.0, 0.0);
    const double tiny = std::numeric_limits<double>::min();
    const double kp = std::clamp(0.5 * lambda * s, tiny, kp_hi);
    const double kpp = std::clamp(0.25 * ell * lambda * lambda * s * one_minus_s, tiny, kpp_hi);
    return {kp, kpp};
}

// ---------------------------------------------------------------------------
// Gauss-Hermite quadrature and reference prices
// ---------------------------------------------------------------------------

namespace {

// Eigenvalues of a symmetric tridiagonal matrix by implicit-shift QL,
// accumulating the first component of each eigenvector in z (all that
// Golub-Welsch needs for the weights). d = diagonal, e = subdiagonal.
void tridiag_ql_first_components(std::vector<double>& d, std::vector<double>& e,
                                 std::vector<double>& z) {
    const int n = static_cast<int>(d.size());
    e.push_back(0.0);
    for (int l = 0; l < n; ++l) {
        int iter = 0;
        int m;
        do {
            for (m = l; m < n - 1; ++m) {
                const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
                if (std::abs(e[m]) <= std::numeric_limits<double>::epsilon() * dd) break;
            }
            if (m != l) {
                if (iter++ == 50)
                    throw NumericalError("gauss_hermite_rule: QL iteration failed to converge");
                double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                double r = std::hypot(g, 1.0);
                g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
                double s = 1.0, c = 1.0, p = 0.0;
                int i;
                for (i = m - 1; i >= l; --i) {
                    double f = s * e[i];
                    const double b = c * e[i];
                    r = std::hypot(f, g);
                    e[i + 1] = r;
                    if (r == 0.0) {
                        d[i + 1] -= p;
                        e[m] = 0.0;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - b;
                    f = z[i + 1];
                    z[i + 1] = s * z[i] + c * f;
                    z[i] = c * z[i] - s * f;
                }
                if (r == 0.0 && i >= l) continue;
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        } while (m != l);
    }
}

struct GhRule {
    std::vector<double> nodes, weights;
};

// Golub-Welsch on the Hermite Jacobi matrix (diagonal 0, subdiagonal
// sqrt(j/2)); weights are sqrt(pi) times the squared first components.
GhRule compute_gauss_hermite(int n) {
    std::vector<double> d(n, 0.0), e(n - 1), z(n, 0.0);
    for (int j = 1; j < n; ++j) e[j - 1] = std::sqrt(0.5 * j);
    z[0] = 1.0;
    tridiag_ql_first_components(d, e, z);
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return d[a] < d[b]; });
    GhRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    const double sqrt_pi = 1.7724538509055160272981674833411;
    for (int i = 0; i < n; ++i) {
        rule.nodes[i] = d[idx[i]];
        rule.weights[i] = sqrt_pi * z[idx[i]] * z[idx[i]];
    }
    return rule;
}

const GhRule& cached_gauss_hermite(int order) {
    static std::mutex mutex;
    static std::map<int, GhRule> cache;
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(order);
    if (it == cache.end()) it = cache.emplace(order, compute_gauss_hermite(order)).first;
    return it->second;
}

} // namespace

void gauss_hermite_rule(int order, std::vector<double>& nodes, std::vector<double>& weights) {
    if (order < 1) throw InputError("gauss_hermite_rule: order must be >= 1");
    const GhRule& rule = cached_gauss_hermite(order);
    nodes = rule.nodes;
    weights = rule.weights;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x * 0.70710678118654752440); }

namespace {

double lognormal_expectation_gh(const std::function<double(double)>& f, double sigma,
                                double s0, int order) {
    std::vector<double> nodes, weights;
    gauss_hermite_rule(order, nodes, weights);
    const double inv_sqrt_pi = 0.56418958354775628694807945156077;
    const double sqrt2 = 1.4142135623730950488016887242097;
    double acc = 0.0;
    for (int i = 0; i < order; ++i) {
        const double zi = sqrt2 * nodes[i];
        const double spot = s0 * std::exp(sigma * zi - 0.5 * sigma * sigma);
        acc += weights[i] * f(spot);
    }
    return acc * inv_sqrt_pi;
}

} // namespace

double bs_price(const Payoff& payoff, double sigma, double s0) {
    if (!payoff.markovian())
        throw InputError("bs_price: payoff must be Markovian");
    if (!(sigma > 0.0) || !(s0 > 0.0))
        throw InputError("bs_price: sigma and s0 must be positive");

    const auto& pm = payoff.params();
    if (payoff.name() == "log_affine") {
        const double alpha = pm.at("alpha");
        const double beta = pm.at("beta");
        return alpha + beta * std::log(s0) - 0.5 * beta * sigma * sigma;
    }
    if (payoff.name() == "constant") return pm.at("c");
    if (payoff.name() == "call" || payoff.name() == "put") {
        const double strike = pm.at("strike");
        const double d1 = std::log(s0 / strike) / sigma + 0.5 * sigma;
        const double d2 = d1 - sigma;
        const double callv = s0 * normal_cdf(d1) - strike * normal_cdf(d2);
        if (payoff.name() == "call") return callv;
        return callv - s0 + strike; // put-call parity at zero rate
    }

    // Generic payoff: Gauss-Hermite with a doubling convergence check, capped
    // at order 512. Kinked payoffs may stop unconverged; the last estimate is
    // returned (the catalogue prices kinks in closed form above).
    auto f = [&payoff](double spot) { return payoff(spot); };
    double prev = lognormal_expectation_gh(f, sigma, s0, 64);
    for (int order = 128; order <= 512; order *= 2) {
        const double cur = lognormal_expectation_gh(f, sigma, s0, order);
        if (std::abs(cur - prev) <= 1e-9 * std::max(1.0, std::abs(cur))) return cur;
        prev = cur;
    }
    return prev; // smooth catalogue payoffs converge long before the cap
}

} // namespace model
} // namespace trihedge
