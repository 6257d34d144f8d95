#pragma once

#include <meco/energy.hpp>
#include <meco/error.hpp>
#include <meco/timeline.hpp>

#include <span>
#include <vector>

// Generic interior-point solver for the joint bits/durations problem, used
// to check the structured solvers. It only shares the energy evaluator with
// them.
namespace meco::oracle {

struct OracleOptions
{
    double armijo = 0.25;      // sufficient-decrease constant of the Newton line search
    int max_newton = 3000;     // total Newton steps over all barrier stages
    double barrier_growth = 20.0;
    double gap_tol = 1e-9;     // stop once the certified gap is below gap_tol * objective
};

struct OracleResult
{
    Allocation alloc;
    double objective = 0.0;
    double gap_bound = 0.0; // certified bound on objective - optimum (J)
    int iterations = 0;     // Newton steps
    std::vector<double> trace; // objective at the end of each barrier stage
};

class OracleNonConvergence : public Error
{
public:
    OracleNonConvergence(const std::string& what, std::vector<double> trace)
        : Error("non_convergence", what), trace_(std::move(trace))
    {}
    const std::vector<double>& trace() const noexcept { return trace_; }

private:
    std::vector<double> trace_;
};

OracleResult oracle_solve(std::span<const TaskSpec> tasks,
                          const SystemParams& params,
                          const Timeline& timeline,
                          const OracleOptions& options = {});

/// Gradient of the total energy with respect to bits and durations, laid out
/// like the allocation. Durations must be > 0 where bits are.
Allocation objective_gradient(std::span<const TaskSpec> tasks,
                              const SystemParams& params,
                              const Timeline& timeline,
                              const Allocation& at);

/// Euclidean projection onto {x >= 0, sum x <= cap}.
std::vector<double> project_epoch_simplex(std::span<const double> values, double cap);

/// Euclidean projection onto {x >= 0, lo <= sum x <= hi}.
std::vector<double> project_capped_sum_box(std::span<const double> values, double lo, double hi);

/// Exhaustive grid minimum over at most four variables; points with bits
/// but no airtime are skipped.
double brute_force_small(std::span<const TaskSpec> tasks,
                         const SystemParams& params,
                         const Timeline& timeline,
                         int grid_points_per_axis);

} // namespace meco::oracle
