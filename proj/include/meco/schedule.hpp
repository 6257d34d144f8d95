#pragma once

#include <meco/energy.hpp>
#include <meco/timeline.hpp>

#include <span>
#include <string>
#include <vector>

namespace meco {

struct Interval
{
    double start = 0.0; // s
    double end = 0.0;   // s
    double bits = 0.0;

    double length() const noexcept { return end - start; }
};

/// Offloading intervals per mobile (indexed like the task list) plus the
/// sequence in which mobiles take the channel.
struct Schedule
{
    std::vector<std::vector<Interval>> intervals;
    std::vector<int> order; // task-list positions, one entry per interval
};

/// Splits every interval over the epochs it overlaps, bits in proportion to
/// the overlap. Intervals must lie inside their mobile's window.
Allocation schedule_to_allocation(const Schedule& schedule,
                                  std::span<const TaskSpec> tasks,
                                  const Timeline& timeline);

struct ScheduleCheck
{
    bool ok = true;
    std::string problem; // first violation found
};

/// Exact check (no tolerance) that intervals are well formed, lie in their
/// mobile's window and are pairwise disjoint apart from shared endpoints.
ScheduleCheck check_schedule(const Schedule& schedule, std::span<const TaskSpec> tasks);

} // namespace meco
