#pragma once

#include <stdexcept>
#include <string>

namespace wproj {

// Base class for all library errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

struct EmptySupport : Error {
    explicit EmptySupport(const std::string& what) : Error(what) {}
};
struct DimensionMismatch : Error {
    explicit DimensionMismatch(const std::string& what) : Error(what) {}
};
struct NonFiniteCoordinate : Error {
    explicit NonFiniteCoordinate(const std::string& what) : Error(what) {}
};
struct NegativeWeight : Error {
    explicit NegativeWeight(const std::string& what) : Error(what) {}
};
struct NonPositiveScale : Error {
    explicit NonPositiveScale(const std::string& what) : Error(what) {}
};
struct WrongDimension : Error {
    explicit WrongDimension(const std::string& what) : Error(what) {}
};
struct LengthMismatch : Error {
    explicit LengthMismatch(const std::string& what) : Error(what) {}
};
struct NotMonotone : Error {
    explicit NotMonotone(const std::string& what) : Error(what) {}
};
struct SizeLimitExceeded : Error {
    explicit SizeLimitExceeded(const std::string& what) : Error(what) {}
};
struct ZeroRowMass : Error {
    explicit ZeroRowMass(const std::string& what) : Error(what) {}
};
struct TimeNotGreaterThanOne : Error {
    explicit TimeNotGreaterThanOne(const std::string& what) : Error(what) {}
};
struct TooLarge : Error {
    explicit TooLarge(const std::string& what) : Error(what) {}
};
struct CheckUnavailableForDim : Error {
    explicit CheckUnavailableForDim(const std::string& what) : Error(what) {}
};
struct ParseError : Error {
    explicit ParseError(const std::string& what) : Error(what) {}
};
struct SchemaVersionUnsupported : Error {
    explicit SchemaVersionUnsupported(const std::string& what) : Error(what) {}
};
struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error(what) {}
};
struct InvalidArgument : Error {
    explicit InvalidArgument(const std::string& what) : Error(what) {}
};
struct SolverFailure : Error {
    explicit SolverFailure(const std::string& what) : Error(what) {}
};

} // namespace wproj
