#ifndef TRIHEDGE_MODEL_HPP
#define TRIHEDGE_MODEL_HPP

#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace trihedge {

/// Parameters of the scaled n-step trinomial market.
///
/// Per step the stock moves by factor 1 + sigma_bar/sqrt(n) with probability
/// p/2, by 1 - sigma_bar/sqrt(n) with probability p/2, and stays flat with
/// probability 1 - p. Exponential utility uses absolute risk aversion n*ell.
struct ModelParams {
    double p = 0.5;         // jump activity, in (0,1)
    double sigma_bar = 0.2; // volatility scale per unit time
    double s0 = 1.0;        // initial spot
    double ell = 1.0;       // risk-aversion scale
    int n = 1;              // number of trading steps

    // Per-step jump size sigma_bar/sqrt(n).
    double step_jump() const;

    // Throws InputError unless 0<p<1, sigma_bar>0, s0>0, ell>0 and
    // n > sigma_bar^2 (so the down factor 1 - sigma_bar/sqrt(n) stays
    // positive and every lattice price is strictly positive).
    void validate() const;
};

/// Declared growth envelope |F| <= C * (1 + sup(y^r + y^-r)).
struct GrowthBound {
    double C = 1.0;
    double r = 1.0;
};

/// European payoff: either a terminal function F(x) of the final spot, or a
/// functional of the whole discrete path (z_0,...,z_n), understood as the
/// piecewise-linear interpolation of those node values on [0,1].
class Payoff {
public:
    enum class Kind { Markovian, PathDependent };

    // Markovian catalogue.
    static Payoff constant(double c);
    static Payoff linear(double a, double b);                 // a + b*x
    static Payoff log_affine(double alpha, double beta);      // alpha + beta*log(x)
    static Payoff power(double exponent);                     // x^e
    static Payoff call(double strike);
    static Payoff put(double strike);
    // Lognormally mollified call: E[(x*exp(w*Z - w^2/2) - K)^+]. Smooth and
    // convex with bounded log-space curvature, unlike the vanilla call.
    static Payoff smoothed_call(double strike, double width);
    static Payoff custom(std::string name, std::function<double(double)> f,
                         GrowthBound growth, bool convex, bool smooth);

    // Path-dependent catalogue. Both are convex functionals of the node
    // values; linear interpolation attains its extremes and integrals there.
    static Payoff lookback_max();
    static Payoff asian_average(); // time integral of the interpolated path
    static Payoff custom_path(std::string name,
                              std::function<double(std::span<const double>)> f,
                              GrowthBound growth);

    Kind kind() const { return kind_; }
    bool markovian() const { return kind_ == Kind::Markovian; }

    // Terminal value F(x). Throws InputError for path-dependent payoffs.
    double operator()(double x) const;

    // Value on a discrete path (z_0,...,z_n). Markovian payoffs read z_n.
    double on_path(std::span<const double> nodes) const;

    const GrowthBound& growth() const { return growth_; }
    Payoff with_growth(GrowthBound g) const {
        Payoff p = *this;
        p.growth_ = g;
        return p;
    }
    bool convex() const { return convex_; }
    bool smooth() const { return smooth_; }
    const std::string& name() const { return name_; }
    const std::map<std::string, double>& params() const { return params_; }

    // Log-space curvature w0(y) = f''(y) - f'(y) of f(y) = F(e^y), when the
    // catalogue entry has a closed form (used for PDE boundary data).
    bool has_analytic_w0() const { return static_cast<bool>(w0_); }
    double analytic_w0(double y) const;

    // Samples the declared growth envelope: returns false if |F| exceeds
    // C*(1 + sup(y^r + y^-r)) at any of the given spots/paths.
    bool check_growth(std::span<const double> spots) const;
    bool check_growth_paths(std::span<const std::vector<double>> paths) const;

private:
    Payoff() = default;

    Kind kind_ = Kind::Markovian;
    std::string name_;
    std::map<std::string, double> params_;
    std::function<double(double)> terminal_;
    std::function<double(std::span<const double>)> path_;
    std::function<double(double)> w0_;
    GrowthBound growth_;
    bool convex_ = false;
    bool smooth_ = true;
};

namespace model {

/// Relative entropy between Bernoulli(x) and Bernoulli(p),
///   G_p(x) = x log(x/p) + (1-x) log((1-x)/(1-p)),
/// with the convention 0*log 0 = 0, so G_p(0) = log(1/(1-p)) and
/// G_p(1) = log(1/p). Nonnegative, convex, zero exactly at x = p.
/// Throws InputError if x is outside [0,1] or p outside (0,1).
double entropy_penalty(double x, double p);

/// HJB nonlinearity K(w) = (1/ell) log((1-p) + p exp(ell*Lambda*w/2)) with
/// Lambda = sigma_bar^2, evaluated in shifted-log form so large |w| cannot
/// overflow. K(0) = 0; for large positive w, K(w) ~ Lambda*w/2 + log(p)/ell.
double nonlinearity_K(double w, const ModelParams& params);

/// Analytic (K'(w), K''(w)); K' in (0, Lambda/2), K'' in (0, ell*Lambda^2/16).
std::pair<double, double> nonlinearity_K_derivatives(double w,
                                                     const ModelParams& params);

/// E[F(s0 * exp(sigma*Z - sigma^2/2))] for standard normal Z.
///
/// log-affine payoffs are priced exactly as alpha + beta*log(s0) -
/// beta*sigma^2/2, calls/puts by the lognormal closed form, and everything
/// else by Gauss-Hermite quadrature (64 points, doubled until two
/// consecutive orders agree to 1e-9). Throws InputError for path payoffs.
double bs_price(const Payoff& payoff, double sigma, double s0);

/// Gauss-Hermite rule for weight exp(-x^2): sum w_i f(x_i) ~ integral.
void gauss_hermite_rule(int order, std::vector<double>& nodes,
                        std::vector<double>& weights);

/// Standard normal CDF.
double normal_cdf(double x);

} // namespace model
} // namespace trihedge

#endif // TRIHEDGE_MODEL_HPP
