#ifndef ACR_ERRORS_HPP
#define ACR_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace acr {

/// Base class for all structured solver errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Shape or plane-count mismatch; carries the offending plane index (-1 if global).
class DimensionError : public Error {
public:
    DimensionError(const std::string& msg, int plane = -1)
        : Error(msg), plane_index(plane) {}
    int plane_index;
};

/// Relative residual is undefined for a zero right-hand side.
class ZeroRhsError : public Error {
public:
    ZeroRhsError() : Error("relative residual undefined: right-hand side has zero norm") {}
};

/// A diagonal pivot block failed to invert at working tolerance.
class SingularBlockError : public Error {
public:
    SingularBlockError(const std::string& msg, int level_ = -1, int plane_ = -1)
        : Error(msg), level(level_), plane(plane_) {}
    int level;
    int plane;
};

/// Materializing an admissible leaf would exceed the configured memory cap.
class LeafMemoryError : public Error {
public:
    explicit LeafMemoryError(const std::string& msg) : Error(msg) {}
};

/// Indefiniteness detected inside CG (p^T A p <= 0).
class IndefiniteError : public Error {
public:
    explicit IndefiniteError(const std::string& msg) : Error(msg) {}
};

/// Residual grew over consecutive refinement steps.
class DivergenceError : public Error {
public:
    explicit DivergenceError(const std::string& msg) : Error(msg) {}
};

/// Invalid user-facing configuration (CLI or plan parameters).
class UsageError : public Error {
public:
    explicit UsageError(const std::string& msg) : Error(msg) {}
};

} // namespace acr

#endif
