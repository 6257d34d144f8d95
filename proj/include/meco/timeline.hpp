#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace meco {

/// One mobile's one-shot computation task. SI units throughout.
struct TaskSpec
{
    int id = 0;
    double arrival = 0.0;        // s
    double deadline = 0.0;       // s
    double data_bits = 0.0;      // bits
    double cycles_per_bit = 0.0; // cycles/bit
    double max_cpu_freq = 0.0;   // cycles/s, may be +inf
    double vm_cap_cycles = 0.0;  // cycles, may be +inf
    double channel_gain = 0.0;   // dimensionless power gain

    double latency() const noexcept { return deadline - arrival; }
};

enum class OrderClass { General, Identical, Reverse };

const char* to_string(OrderClass c) noexcept;

/// Epoch structure induced by the sorted multiset of arrivals and deadlines.
///
/// Epoch n spans [boundaries[n], boundaries[n+1]]. Mobile indices refer to
/// positions in the task list the timeline was built from; epoch indices are
/// zero-based. Zero-length epochs (coinciding instants) are kept.
struct Timeline
{
    std::vector<double> boundaries;
    std::vector<double> epoch_lengths;
    std::vector<std::vector<int>> epoch_sets; // A_k, ascending
    std::vector<std::vector<int>> user_sets;  // B_n, ascending

    std::size_t num_epochs() const noexcept { return epoch_lengths.size(); }
    std::size_t num_mobiles() const noexcept { return epoch_sets.size(); }
};

/// Throws InvalidInput when a task violates the TaskSpec invariants.
void check_task(const TaskSpec& task);

/// Builds the epoch/user sets. Ties between equal instants are broken with
/// arrivals before deadlines, then by input position.
Timeline build_timeline(std::span<const TaskSpec> tasks);

/// Returns `tasks` stably sorted by arrival.
std::vector<TaskSpec> sort_by_arrival(std::span<const TaskSpec> tasks);

/// Classifies the arrival-deadline order of `tasks` (stably sorted by
/// arrival first). A fully tied instance is Identical.
OrderClass classify_order(std::span<const TaskSpec> tasks);

struct SystemParams;

struct MobileFeasibility
{
    int id = 0;
    bool valid = true;        // TaskSpec invariants hold
    std::string problem;      // set when !valid
    double r_min_bits = 0.0;
    double r_max_bits = 0.0;
    bool feasible = false;    // valid && r_min <= r_max
};

struct FeasibilityReport
{
    std::vector<MobileFeasibility> mobiles;
    // Footnote-style overlap assumption: deadline_k > arrival_{k+1} in
    // arrival order. Violations are reported but do not block solving.
    bool overlap_holds = true;
    std::vector<int> overlap_gaps; // position k in arrival order where it fails
    bool all_feasible() const noexcept;
};

/// Report-only feasibility check; never throws for invalid tasks.
FeasibilityReport validate_tasks(std::span<const TaskSpec> tasks, const SystemParams& params);

} // namespace meco
