#pragma once

#include <stdexcept>
#include <string>

namespace mmx {

// Base class for every error thrown by the library. CLI maps subtypes to
// exit codes: config -> 2, domain -> 3, budget -> 4.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct invalid_matrix : error {
    using error::error;
};
struct index_error : error {
    using error::error;
};
struct dimension_error : error {
    using error::error;
};
struct invalid_spec : error {
    using error::error;
};
struct domain_error : error {
    using error::error;
};
struct config_error : error {
    using error::error;
};
struct budget_exceeded : error {
    using error::error;
};
struct singular_matrix : error {
    using error::error;
};
struct infinite_kl : error {
    using error::error;
};
struct optimization_error : error {
    using error::error;
};
struct construction_failed : error {
    using error::error;
};
struct io_error : error {
    using error::error;
};

} // namespace mmx
