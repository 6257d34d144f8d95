#pragma once

#include <stdexcept>
#include <string>

namespace meco {

// Base for every domain failure raised by the library. The CLI maps these to
// exit status 1; anything else (parse errors, bad flags) maps to 2.
class Error : public std::runtime_error
{
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind))
    {}

    // Stable machine-readable tag, e.g. "infeasible_instance".
    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

class InvalidInput : public Error
{
public:
    explicit InvalidInput(const std::string& what) : Error("invalid_input", what) {}
};

class InfeasibleInstance : public Error
{
public:
    explicit InfeasibleInstance(const std::string& what) : Error("infeasible_instance", what) {}
};

class InfeasibleChain : public Error
{
public:
    explicit InfeasibleChain(const std::string& what) : Error("infeasible_chain", what) {}
};

class SolverMismatch : public Error
{
public:
    explicit SolverMismatch(const std::string& what) : Error("solver_mismatch", what) {}
};

class BracketError : public Error
{
public:
    explicit BracketError(const std::string& what) : Error("bracket_failure", what) {}
};

class ScheduleOverflow : public Error
{
public:
    explicit ScheduleOverflow(const std::string& what) : Error("schedule_overflow", what) {}
};

class AllocationError : public Error
{
public:
    explicit AllocationError(const std::string& what) : Error("allocation_error", what) {}
};

} // namespace meco
