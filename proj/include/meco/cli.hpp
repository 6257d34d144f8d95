#pragma once

#include <meco/io.hpp>

#include <optional>
#include <ostream>
#include <string_view>

// Command-line front end. Exit codes: 0 success, 1 domain failure, 2 usage
// or parse failure.
namespace meco::cli {

enum class Solver { Auto, Bcd, Ordered, Reverse, Oracle };

const char* to_string(Solver s) noexcept;
std::optional<Solver> solver_from_string(std::string_view s);

struct SolveRequest
{
    Solver solver = Solver::Auto;
    std::optional<double> tol; // solver default when empty
};

/// Solver chosen for `auto`: ordered for identical and reverse for reverse
/// instances when m = 3 and the capacities never bind, bcd otherwise.
Solver dispatch(const io::ScenarioFile& scenario);

/// Solution document (schema version 1). Throws meco::Error on failure;
/// SolverMismatch messages start with "solver/instance mismatch".
io::Json solve_scenario(const io::ScenarioFile& scenario, const SolveRequest& request);

inline constexpr int kSchemaVersion = 1;

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace meco::cli
