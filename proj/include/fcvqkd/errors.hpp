#pragma once

#include <stdexcept>
#include <string>

namespace fcvqkd {

// Invalid distribution / protocol parameters or out-of-domain arguments.
struct ParameterError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Quadrature or root-finding failed to reach its tolerance.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InsufficientDataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A covariance matrix with a symplectic eigenvalue below one.
struct UnphysicalStateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EmptyClusterError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ClusterTooSmallError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed input files (CSV / JSON schema problems).
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace fcvqkd
