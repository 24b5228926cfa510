#pragma once

#include <stdexcept>
#include <string>

namespace densemodel {

/// Base class for all library errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

struct UniverseMismatch : Error {
    explicit UniverseMismatch(const std::string& what = "operands live on different universes")
        : Error(what) {}
};

struct InvalidParameter : Error {
    explicit InvalidParameter(const std::string& what) : Error(what) {}
};

/// Constructor-time rejection of out-of-range values. Carries the offending
/// field path so the CLI can point at the exact location in an input file.
struct ValidationError : Error {
    std::string field;
    ValidationError(std::string field_path, const std::string& what)
        : Error(field_path.empty() ? what : field_path + ": " + what), field(std::move(field_path)) {}
};

struct NoThreshold : Error {
    explicit NoThreshold(const std::string& what) : Error(what) {}
};

struct SupportViolation : Error {
    explicit SupportViolation(const std::string& what) : Error(what) {}
};

struct DominationViolated : Error {
    explicit DominationViolated(const std::string& what) : Error(what) {}
};

struct SandwichViolation : Error {
    explicit SandwichViolation(const std::string& what) : Error(what) {}
};

struct TermSelectionFailed : Error {
    explicit TermSelectionFailed(const std::string& what) : Error(what) {}
};

struct DegreeCapExceeded : Error {
    explicit DegreeCapExceeded(const std::string& what) : Error(what) {}
};

struct MeanMismatch : Error {
    explicit MeanMismatch(const std::string& what) : Error(what) {}
};

struct BudgetExceeded : Error {
    explicit BudgetExceeded(const std::string& what) : Error(what) {}
};

struct EmptySet : Error {
    explicit EmptySet(const std::string& what) : Error(what) {}
};

struct Unresolved : Error {
    explicit Unresolved(const std::string& what) : Error(what) {}
};

struct ParseError : Error {
    std::string field;
    ParseError(std::string field_path, const std::string& what)
        : Error(field_path.empty() ? what : field_path + ": " + what), field(std::move(field_path)) {}
};

}  // namespace densemodel
