#pragma once

#include <stdexcept>
#include <string>

namespace irmbench {

// Error hierarchy. Every throwing operation documents which of these it uses.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct InvalidMatrixError : Error {
    explicit InvalidMatrixError(const std::string& msg) : Error(msg) {}
};

struct ShapeError : Error {
    explicit ShapeError(const std::string& msg) : Error(msg) {}
};

struct NotPSDError : Error {
    explicit NotPSDError(const std::string& msg) : Error(msg) {}
};

struct DegenerateError : Error {
    explicit DegenerateError(const std::string& msg) : Error(msg) {}
};

struct EmptyEnvironmentError : Error {
    explicit EmptyEnvironmentError(const std::string& msg) : Error(msg) {}
};

struct DegenerateCoefficientError : Error {
    explicit DegenerateCoefficientError(const std::string& msg) : Error(msg) {}
};

struct SpecError : Error {
    explicit SpecError(const std::string& msg) : Error(msg) {}
};

struct OrderingError : Error {
    explicit OrderingError(const std::string& msg) : Error(msg) {}
};

struct PreconditionError : Error {
    explicit PreconditionError(const std::string& msg) : Error(msg) {}
};

struct SingularCovarianceError : Error {
    explicit SingularCovarianceError(const std::string& msg) : Error(msg) {}
};

struct DivergedError : Error {
    int step;
    DivergedError(const std::string& msg, int step_idx) : Error(msg), step(step_idx) {}
};

}  // namespace irmbench
