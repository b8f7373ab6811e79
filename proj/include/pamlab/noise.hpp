#pragma once

#include <array>
#include <cstdint>

#include "pamlab/torus.hpp"

namespace pamlab {

/// Philox-4x32-10 counter-based generator block.
/// Pure function: output depends only on (counter, key).
std::array<std::uint32_t, 4> philox4x32(const std::array<std::uint32_t, 4>& counter,
                                        const std::array<std::uint32_t, 2>& key);

/// Deterministic white-noise increment stream.
///
/// The tuple (master_seed, stream_id, trajectory_id, step_counter) fully
/// determines every increment field: the per-cell Gaussians come from Philox
/// blocks keyed by master_seed with the counter words
/// (step, cell_pair, stream_id, trajectory_id).  Distinct streams and
/// trajectories are therefore independent, replay is bit-exact, and no state
/// is shared between concurrent trajectories.
struct NoiseStream {
    std::uint64_t master_seed = 0;
    std::uint32_t stream_id = 0;
    std::uint32_t trajectory_id = 0;
    std::uint64_t step_counter = 0;
};

/// Draw one space-time white-noise increment over `grid` for a time step dt:
/// i.i.d. centered Gaussians of variance dt / spacing per cell.  Advances
/// stream.step_counter by one.
Field sample_increment(NoiseStream& stream, const Grid& grid, double dt);

/// Same draw without mutating the stream (used by steppers that share one
/// increment among several fields).
void fill_increment(const NoiseStream& stream, const Grid& grid, double dt,
                    double* out);

/// Cellwise mixture psi * dW + phi * dW0.  Requires phi^2 + psi^2 = 1 to
/// 1e-12 at every cell, which keeps the mixture a white-noise increment.
Field mix_noise(const Field& dW, const Field& dW0, const Field& phi, const Field& psi);

} // namespace pamlab
