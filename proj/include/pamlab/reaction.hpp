#pragma once

#include <functional>
#include <optional>
#include <string>

namespace pamlab {

/// The nonlinearity pair (f, g) of a reaction-diffusion equation together
/// with its derived constants.  Specs are immutable after construction and
/// freely shared across trajectories.
///
/// Presets evaluate through closed forms in the hot path; custom callables
/// fall back to std::function.  Nonlinear presets are clamped outside
/// |z| <= z_cap to their boundary tangent lines so they stay globally
/// Lipschitz; in the dissipative regime solutions live far below the cap.
struct ReactionSpec {
    enum class Kind { Linear, FisherKpp, AllenCahn, Custom };

    Kind kind = Kind::Linear;
    std::string name = "linear";

    // Preset parameters.  Linear: f(z) = mu z, g(z) = sigma z.
    // FisherKpp: f(z) = a z - b z^2.  AllenCahn: f(z) = a z - b z^3.
    // Both nonlinear presets use g(z) = sigma z and tangent-line clamping
    // beyond |z| = z_cap.
    double a = 0.0;
    double b = 0.0;
    double z_cap = 10.0;

    std::function<double(double)> custom_f;
    std::function<double(double)> custom_g;

    // Derived constants.
    double mu = 0.0;          // f'(0+)
    double sigma = 0.0;       // g'(0+)
    double lip_f = 0.0;
    double lip_g = 0.0;
    double L_g = 0.0;         // inf_{z>0} |g(z)/z|
    double sup_f_ratio = 0.0; // sup_{z>0} f(z)/z
    std::optional<double> chi;

    double f(double z) const;
    double g(double z) const;

    bool is_linear() const { return kind == Kind::Linear; }
};

/// Presets.  fisher_kpp and allen_cahn take the noise slope sigma for
/// g(z) = sigma z alongside the drift parameters (a, b).
ReactionSpec make_linear(double mu, double sigma);
ReactionSpec make_fisher_kpp(double a, double b, double sigma = 1.0, double z_cap = 10.0);
ReactionSpec make_allen_cahn(double a, double b, double sigma = 1.0, double z_cap = 10.0);

/// Custom pair; derived constants are computed by dense log-spaced sampling
/// over z in (1e-12, 1e12] and Richardson extrapolation at the origin.
ReactionSpec make_custom(std::function<double(double)> f, std::function<double(double)> g,
                         std::string name = "custom");

/// Preset factory by name: "linear" (mu, sigma), "fisher_kpp" (a, b, sigma),
/// "allen_cahn" (a, b, sigma).
ReactionSpec make_preset(const std::string& name, double p0, double p1, double p2);

/// Joint linearization-error modulus
///   E(a) = sup_{0<z<=a} |f(z)/z - mu| + sup_{0<z<=a} |g(z)/z - sigma|,
/// each supremum evaluated over a log-spaced sample of n_samples points.
double linearization_error(const ReactionSpec& spec, double a, int n_samples = 4096);

/// Dissipation rate gamma = L_g^2 / 64 - sup_{z>0} f(z)/z.  Positive exactly
/// when the high-noise condition holds.
double dissipation_rate(const ReactionSpec& spec);

/// Both sides of the high-noise condition sup f/z < L_g^2 / 64.
struct HighNoiseReport {
    bool holds = false;
    double sup_f_ratio = 0.0;
    double threshold = 0.0; // L_g^2 / 64
    double margin = 0.0;    // threshold - sup_f_ratio
};
HighNoiseReport check_high_noise(const ReactionSpec& spec);

} // namespace pamlab
