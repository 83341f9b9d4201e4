#pragma once

#include <stdexcept>
#include <string>

namespace tpca {

/// Invalid argument passed to a library function (empty sample, dimension
/// mismatch, non-finite value, ...).
struct InvalidInput : std::invalid_argument {
    explicit InvalidInput(const std::string& what) : std::invalid_argument(what) {}
};

/// A polar angle sits on the chart boundary of a halved coordinate, where the
/// inverse chart jumps.
struct AtSingularity : std::domain_error {
    explicit AtSingularity(const std::string& what) : std::domain_error(what) {}
};

/// A sphere point is too close to a degeneracy of the polar coordinate system
/// (a prefix product of sines vanishes).
struct PolarDegenerate : std::domain_error {
    explicit PolarDegenerate(const std::string& what) : std::domain_error(what) {}
};

/// Nonlinear fit did not converge within its restart budget.
struct FitFailure : std::runtime_error {
    explicit FitFailure(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical routine (quadrature, ...) failed to reach its tolerance.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed input file; carries the 1-based line number when known.
struct ParseError : std::runtime_error {
    int line = 0;
    ParseError(const std::string& what, int line_no)
        : std::runtime_error(what + " (line " + std::to_string(line_no) + ")"), line(line_no) {}
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace tpca
