#ifndef BTQ_ERRORS_HPP
#define BTQ_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace btq {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Point left the chart of validity (CP1 far field); caller must switch chart.
struct ChartError : Error {
    using Error::Error;
};

// Polarized extension hit the log branch cut (far off-diagonal pair on CP1).
struct BranchError : Error {
    using Error::Error;
};

struct ParseError : Error {
    ParseError(const std::string& what, std::size_t offset)
        : Error(what), offset(offset) {}
    std::size_t offset;
};

struct DerivativeOrderError : Error {
    using Error::Error;
};

struct QuadratureError : Error {
    using Error::Error;
};

struct DimensionError : Error {
    using Error::Error;
};

// A run was requested on inputs whose hypotheses failed numerical certification.
struct CertificationError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

} // namespace btq

#endif
