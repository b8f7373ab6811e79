#include "pamlab/reaction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace pamlab {

namespace {

// Tangent-line continuation of a polynomial drift beyond |z| = cap.
inline double clamped(double z, double cap, double (*poly)(double, double, double),
                      double (*dpoly)(double, double, double), double a, double b) {
    if (z > cap) return poly(cap, a, b) + dpoly(cap, a, b) * (z - cap);
    if (z < -cap) return poly(-cap, a, b) + dpoly(-cap, a, b) * (z + cap);
    return poly(z, a, b);
}

double kpp_poly(double z, double a, double b) { return a * z - b * z * z; }
double kpp_dpoly(double z, double a, double b) { return a - 2.0 * b * z; }
double ac_poly(double z, double a, double b) { return a * z - b * z * z * z; }
double ac_dpoly(double z, double a, double b) { return a - 3.0 * b * z * z; }

} // namespace

double ReactionSpec::f(double z) const {
    switch (kind) {
        case Kind::Linear: return mu * z;
        case Kind::FisherKpp: return clamped(z, z_cap, kpp_poly, kpp_dpoly, a, b);
        case Kind::AllenCahn: return clamped(z, z_cap, ac_poly, ac_dpoly, a, b);
        case Kind::Custom: return custom_f(z);
    }
    return 0.0;
}

double ReactionSpec::g(double z) const {
    if (kind == Kind::Custom) return custom_g(z);
    return sigma * z;
}

ReactionSpec make_linear(double mu, double sigma) {
    ReactionSpec s;
    s.kind = ReactionSpec::Kind::Linear;
    s.name = "linear";
    s.mu = mu;
    s.sigma = sigma;
    s.lip_f = std::fabs(mu);
    s.lip_g = std::fabs(sigma);
    s.L_g = std::fabs(sigma);
    s.sup_f_ratio = mu;
    return s;
}

ReactionSpec make_fisher_kpp(double a, double b, double sigma, double z_cap) {
    if (b < 0.0) throw std::domain_error("fisher_kpp: b must be nonnegative");
    ReactionSpec s;
    s.kind = ReactionSpec::Kind::FisherKpp;
    s.name = "fisher_kpp";
    s.a = a;
    s.b = b;
    s.z_cap = z_cap;
    s.sigma = sigma;
    // mu = a - V'(0) with V(z) = b z^2, so mu = a.
    s.mu = a;
    // f'(z) = a - 2bz on [-cap, cap], constant outside.
    s.lip_f = std::max(std::fabs(a - 2.0 * b * z_cap), std::fabs(a + 2.0 * b * z_cap));
    s.lip_g = std::fabs(sigma);
    s.L_g = std::fabs(sigma);
    // f(z)/z = a - bz < a for z > 0, approaching a at the origin.
    s.sup_f_ratio = a;
    return s;
}

ReactionSpec make_allen_cahn(double a, double b, double sigma, double z_cap) {
    if (b < 0.0) throw std::domain_error("allen_cahn: b must be nonnegative");
    ReactionSpec s;
    s.kind = ReactionSpec::Kind::AllenCahn;
    s.name = "allen_cahn";
    s.a = a;
    s.b = b;
    s.z_cap = z_cap;
    s.sigma = sigma;
    s.mu = a; // V(z) = b z^3 has V'(0) = 0
    s.lip_f = std::max(std::fabs(a), std::fabs(a - 3.0 * b * z_cap * z_cap));
    s.lip_g = std::fabs(sigma);
    s.L_g = std::fabs(sigma);
    s.sup_f_ratio = a; // f(z)/z = a - b z^2 <= a for z > 0
    return s;
}

ReactionSpec make_custom(std::function<double(double)> f, std::function<double(double)> g,
                         std::string name) {
    ReactionSpec s;
    s.kind = ReactionSpec::Kind::Custom;
    s.name = std::move(name);
    s.custom_f = std::move(f);
    s.custom_g = std::move(g);
    if (s.custom_f(0.0) != 0.0 || s.custom_g(0.0) != 0.0)
        throw std::domain_error("make_custom: f(0) and g(0) must vanish");

    // One-sided derivatives at the origin, Richardson-extrapolated from the
    // difference quotients at z = 1e-6 and 1e-7.
    auto deriv0 = [](const std::function<double(double)>& h) {
        const double d1 = h(1e-6) / 1e-6;
        const double d2 = h(1e-7) / 1e-7;
        return (10.0 * d2 - d1) / 9.0;
    };
    s.mu = deriv0(s.custom_f);
    s.sigma = deriv0(s.custom_g);

    // Dense log-spaced sampling for the ratio extrema.
    const int kSamples = 20000;
    double inf_g = std::numeric_limits<double>::infinity();
    double sup_f = -std::numeric_limits<double>::infinity();
    for (int i = 0; i <= kSamples; ++i) {
        const double t = static_cast<double>(i) / kSamples;
        const double z = std::pow(10.0, -12.0 + 24.0 * t);
        inf_g = std::min(inf_g, std::fabs(s.custom_g(z) / z));
        sup_f = std::max(sup_f, s.custom_f(z) / z);
    }
    s.L_g = inf_g;
    s.sup_f_ratio = sup_f;

    // Lipschitz bounds from consecutive differences on [-10, 10].
    const int kLipSamples = 20000;
    double lf = 0.0, lg = 0.0;
    double prev_z = -10.0, prev_f = s.custom_f(-10.0), prev_g = s.custom_g(-10.0);
    for (int i = 1; i <= kLipSamples; ++i) {
        const double z = -10.0 + 20.0 * static_cast<double>(i) / kLipSamples;
        const double fz = s.custom_f(z), gz = s.custom_g(z);
        lf = std::max(lf, std::fabs(fz - prev_f) / (z - prev_z));
        lg = std::max(lg, std::fabs(gz - prev_g) / (z - prev_z));
        prev_z = z; prev_f = fz; prev_g = gz;
    }
    s.lip_f = lf;
    s.lip_g = lg;
    return s;
}

ReactionSpec make_preset(const std::string& name, double p0, double p1, double p2) {
    if (name == "linear") return make_linear(p0, p1);
    if (name == "fisher_kpp") return make_fisher_kpp(p0, p1, p2);
    if (name == "allen_cahn") return make_allen_cahn(p0, p1, p2);
    throw std::domain_error("unknown reaction preset: " + name);
}

double linearization_error(const ReactionSpec& spec, double a, int n_samples) {
    if (!(a > 0.0)) throw std::domain_error("linearization_error: a must be positive");
    if (n_samples < 2) throw std::domain_error("linearization_error: too few samples");
    if (spec.kind == ReactionSpec::Kind::Linear) return 0.0; // exact by closed form
    // Log-spaced sample of (0, a], endpoint included so monotone moduli
    // attain their supremum exactly at z = a.
    const double lo = std::log(a) - 27.0; // spans ~12 decades below a
    const double hi = std::log(a);
    double err_f = 0.0, err_g = 0.0;
    for (int i = 0; i < n_samples; ++i) {
        const double t = static_cast<double>(i) / (n_samples - 1);
        const double z = std::exp(lo + (hi - lo) * t);
        err_f = std::max(err_f, std::fabs(spec.f(z) / z - spec.mu));
        err_g = std::max(err_g, std::fabs(spec.g(z) / z - spec.sigma));
    }
    return err_f + err_g;
}

double dissipation_rate(const ReactionSpec& spec) {
    return spec.L_g * spec.L_g / 64.0 - spec.sup_f_ratio;
}

HighNoiseReport check_high_noise(const ReactionSpec& spec) {
    HighNoiseReport r;
    r.sup_f_ratio = spec.sup_f_ratio;
    r.threshold = spec.L_g * spec.L_g / 64.0;
    r.margin = r.threshold - r.sup_f_ratio;
    r.holds = r.sup_f_ratio < r.threshold;
    return r;
}

} // namespace pamlab
