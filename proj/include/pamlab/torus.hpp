#pragma once

#include <cstddef>
#include <vector>

namespace pamlab {

// Circumference of the torus [-1, 1) with periodic identification.
inline constexpr double kTorusLength = 2.0;

/// Uniform discretization of the torus into n_points cells.
/// Cell centers sit at x_i = -1 + i * spacing, spacing = 2 / n_points.
struct Grid {
    int n_points = 0;
    double spacing = 0.0;

    Grid() = default;
    explicit Grid(int n);

    double point(int i) const { return -1.0 + spacing * static_cast<double>(i); }
    int wrap(int i) const {
        int m = i % n_points;
        return m < 0 ? m + n_points : m;
    }
    bool operator==(const Grid& o) const { return n_points == o.n_points; }
};

/// A real-valued spatial profile, one value per grid cell.
struct Field {
    Grid grid;
    std::vector<double> values;

    Field() = default;
    explicit Field(const Grid& g, double fill = 0.0)
        : grid(g), values(static_cast<std::size_t>(g.n_points), fill) {}

    int size() const { return grid.n_points; }
    double& operator[](int i) { return values[static_cast<std::size_t>(i)]; }
    double operator[](int i) const { return values[static_cast<std::size_t>(i)]; }
};

/// Periodic heat kernel p_t(dx) = sum_n G_t(dx + 2n), G_t(a) = (4 pi t)^{-1/2} exp(-a^2/(4t)).
/// The image count defaults to enough terms for relative error below 1e-12.
double heat_kernel(double t, double dx, int k_images);
double heat_kernel(double t, double dx);

/// Number of image terms used by the one-argument heat_kernel overload.
int default_image_count(double t);

/// Convolution (p_t * phi) by cyclic quadrature on phi's grid.
/// For t below spacing^2 the kernel is under-resolved and the input is
/// returned unchanged; the flag, when given, reports that fallback.
Field convolve(double kernel_time, const Field& phi, bool* under_resolved = nullptr);

double sup_norm(const Field& phi);         // max |values|
double inf_value(const Field& phi);        // min over values (signed)
double max_value(const Field& phi);        // max over values (signed)
double oscillation_ratio(const Field& phi); // max / min, requires min > 0
double mean_value(const Field& phi);       // arithmetic mean of values
double quadrature(const Field& phi);       // integral over the torus (spacing * sum)

bool all_finite(const Field& phi);

} // namespace pamlab
