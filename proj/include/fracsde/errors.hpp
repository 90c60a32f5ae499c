#pragma once

#include <stdexcept>
#include <string>

namespace fracsde {

// Base for everything thrown by this library.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Argument outside a function's mathematical domain (x <= 0 for gamma, ...).
struct domain_error : error {
    using error::error;
};

// Parameter outside the documented supported box; no silent extrapolation.
struct unsupported_range_error : domain_error {
    using domain_error::domain_error;
};

// Transcendental equation has no root in the admissible interval.
struct no_root_error : error {
    using error::error;
};

// Literal formula evaluation would divide by (numerically) zero.
struct degenerate_denominator_error : error {
    using error::error;
};

// Curve handed to a log-linear fit has nonpositive values in the window.
struct fit_domain_error : error {
    using error::error;
};

// Neutral coefficient falls outside the fractional-power domain weighting.
struct ill_posed_neutral_term_error : error {
    using error::error;
};

// Operation called outside the regime it supports (e.g. nonzero contractors).
struct unsupported_regime_error : error {
    using error::error;
};

// A closed-form criterion's hypotheses fail, so its conclusion is unusable.
struct inapplicable_criterion_error : error {
    using error::error;
};

// p = 2 makes an exponent singular and the limit convention is disabled.
struct singular_exponent_error : error {
    using error::error;
};

// Malformed or inconsistent configuration input.
struct config_error : error {
    using error::error;
};

}  // namespace fracsde
