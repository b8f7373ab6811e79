#pragma once

#include <stdexcept>
#include <string>

namespace pamlab {

// Numeric failure of a trajectory: sup-norm crossed the blowup cap.
struct BlowupError : std::runtime_error {
    double time;
    explicit BlowupError(double t, const std::string& what)
        : std::runtime_error(what), time(t) {}
};

// NaN/Inf appeared in a field.
struct NumericError : std::runtime_error {
    double time;
    explicit NumericError(double t, const std::string& what)
        : std::runtime_error(what), time(t) {}
};

// A statistic that requires strictly positive fields met a nonpositive value.
struct PositivityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Cellwise ordering of a coupled pair broke beyond the configured tolerance.
struct OrderingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A coupled process spent too long at the positivity floor.
struct DegeneracyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A staged run hit inf w = 0 at a stage boundary.
struct OscillationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace pamlab
