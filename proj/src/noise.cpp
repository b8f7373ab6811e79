#include "pamlab/noise.hpp"

#include <cmath>
#include <stdexcept>

namespace pamlab {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mul_hi_lo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

inline void philox_round(std::uint32_t c[4], const std::uint32_t k[2]) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mul_hi_lo(kPhiloxM0, c[0], hi0, lo0);
    mul_hi_lo(kPhiloxM1, c[2], hi1, lo1);
    std::uint32_t n0 = hi1 ^ c[1] ^ k[0];
    std::uint32_t n1 = lo1;
    std::uint32_t n2 = hi0 ^ c[3] ^ k[1];
    std::uint32_t n3 = lo0;
    c[0] = n0; c[1] = n1; c[2] = n2; c[3] = n3;
}

// Uniform in (0, 1]: never zero, so log() below is safe.
inline double to_unit_open(std::uint32_t a, std::uint32_t b) {
    std::uint64_t v = (static_cast<std::uint64_t>(a) << 32) | b;
    return (static_cast<double>(v >> 11) + 1.0) * 0x1.0p-53;
}

// Uniform in [0, 1).
inline double to_unit_closed(std::uint32_t a, std::uint32_t b) {
    std::uint64_t v = (static_cast<std::uint64_t>(a) << 32) | b;
    return static_cast<double>(v >> 11) * 0x1.0p-53;
}

// Two standard Gaussians from one Philox block (Box-Muller pair).
inline void gauss_pair(const NoiseStream& s, std::uint32_t pair_index, double& z0, double& z1) {
    const std::array<std::uint32_t, 4> ctr = {
        static_cast<std::uint32_t>(s.step_counter),
        pair_index,
        s.stream_id,
        s.trajectory_id,
    };
    const std::array<std::uint32_t, 2> key = {
        static_cast<std::uint32_t>(s.master_seed),
        static_cast<std::uint32_t>(s.master_seed >> 32),
    };
    const auto r = philox4x32(ctr, key);
    const double u1 = to_unit_open(r[0], r[1]);
    const double u2 = to_unit_closed(r[2], r[3]);
    const double rad = std::sqrt(-2.0 * std::log(u1));
    const double ang = 2.0 * M_PI * u2;
    z0 = rad * std::cos(ang);
    z1 = rad * std::sin(ang);
}

} // namespace

std::array<std::uint32_t, 4> philox4x32(const std::array<std::uint32_t, 4>& counter,
                                        const std::array<std::uint32_t, 2>& key) {
    std::uint32_t c[4] = {counter[0], counter[1], counter[2], counter[3]};
    std::uint32_t k[2] = {key[0], key[1]};
    for (int round = 0; round < 10; ++round) {
        philox_round(c, k);
        k[0] += kPhiloxW0;
        k[1] += kPhiloxW1;
    }
    // The key schedule bumps after the final round too; undo is unnecessary
    // since k is local.  The canonical formulation bumps between rounds only,
    // which is what the loop above produces for the counter words.
    return {c[0], c[1], c[2], c[3]};
}

void fill_increment(const NoiseStream& stream, const Grid& grid, double dt, double* out) {
    if (!(dt > 0.0)) throw std::domain_error("sample_increment: dt must be positive");
    if (stream.step_counter > 0xFFFFFFFFull)
        throw std::domain_error("sample_increment: step counter exceeds 32 bits");
    const double scale = std::sqrt(dt / grid.spacing);
    const int n = grid.n_points;
    int i = 0;
    std::uint32_t pair = 0;
    while (i + 1 < n) {
        double z0, z1;
        gauss_pair(stream, pair++, z0, z1);
        out[i++] = scale * z0;
        out[i++] = scale * z1;
    }
    if (i < n) {
        double z0, z1;
        gauss_pair(stream, pair, z0, z1);
        out[i] = scale * z0;
    }
}

Field sample_increment(NoiseStream& stream, const Grid& grid, double dt) {
    Field f(grid);
    fill_increment(stream, grid, dt, f.values.data());
    ++stream.step_counter;
    return f;
}

Field mix_noise(const Field& dW, const Field& dW0, const Field& phi, const Field& psi) {
    const int n = dW.size();
    if (dW0.size() != n || phi.size() != n || psi.size() != n)
        throw std::domain_error("mix_noise: fields must share one grid");
    Field out(dW.grid);
    for (int i = 0; i < n; ++i) {
        const double norm = phi[i] * phi[i] + psi[i] * psi[i];
        if (std::fabs(norm - 1.0) > 1e-12)
            throw std::domain_error("mix_noise: phi^2 + psi^2 != 1");
        out[i] = psi[i] * dW[i] + phi[i] * dW0[i];
    }
    return out;
}

} // namespace pamlab
