#pragma once

#include <stdexcept>
#include <string>

namespace zico {

// Error taxonomy. The CLI maps validation/parse/usage to exit code 2 and
// numeric/assertion failures to exit code 1.

struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// bad shapes, mismatched dimensions
struct dim_error : error {
    using error::error;
};

// bad arguments, out-of-range values, malformed configs
struct validation_error : error {
    using error::error;
};

// malformed serialized data (genome JSON, IDX files, CSV)
struct parse_error : error {
    using error::error;
};

// filesystem failures
struct io_error : error {
    using error::error;
};

// NaN/Inf where finite values are required, bound violations
struct numeric_error : error {
    using error::error;
};

} // namespace zico
