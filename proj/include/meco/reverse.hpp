#pragma once

#include <meco/ordered.hpp>
#include <meco/schedule.hpp>

#include <span>
#include <vector>

// Reverse-order solver: shift every window so the deadlines line up, solve
// the resulting identical-order problem, then place the airtimes back
// against the original windows. Tasks must be sorted by arrival.
namespace meco::reverse {

struct MigratedInstance
{
    std::vector<TaskSpec> tasks; // same latencies, common deadline T_1^d
    std::vector<double> shifts;  // T_1^d - T_k^d, nondecreasing
};

/// Throws SolverMismatch unless the instance is in reverse order.
MigratedInstance migrate_deadlines(std::span<const TaskSpec> tasks);

/// (0, 1, ..., K-1, K-2, ..., 0).
std::vector<int> optimal_order_reverse(std::span<const TaskSpec> tasks);

/// Primary interval [y_s, y_e] and secondary interval [z_s, z_e] per
/// mobile; an unused secondary has z_s = z_e.
struct TwoPhaseSchedule
{
    std::vector<Interval> primary;
    std::vector<Interval> secondary;
};

/// Backward placement pass. Throws ScheduleOverflow if a secondary interval
/// would end after its mobile's deadline by more than rounding.
TwoPhaseSchedule schedule_reverse_order(std::span<const double> durations,
                                        std::span<const double> bits,
                                        std::span<const TaskSpec> tasks);

/// Drops empty intervals and lists the channel order by start time.
Schedule to_schedule(const TwoPhaseSchedule& two_phase);

struct ReverseSolution
{
    MigratedInstance migrated;
    ordered::MasterSolution master; // solved on the migrated instance
    TwoPhaseSchedule two_phase;
    Schedule schedule;
    double objective = 0.0;
};

ReverseSolution solve_reverse(std::span<const TaskSpec> tasks,
                              const SystemParams& params,
                              const ordered::MasterOptions& options = {});

} // namespace meco::reverse
