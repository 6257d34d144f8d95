#include <meco/reverse.hpp>

#include <meco/error.hpp>

#include <algorithm>
#include <sstream>

namespace meco::reverse {

namespace {

void require_reverse(std::span<const TaskSpec> tasks)
{
    if (tasks.empty()) throw InvalidInput("task list is empty");
    for (std::size_t k = 1; k < tasks.size(); ++k) {
        if (tasks[k].arrival < tasks[k - 1].arrival) {
            throw InvalidInput("tasks must be sorted by arrival");
        }
    }
    // A fully tied instance classifies as identical but is reverse as well.
    for (std::size_t k = 1; k < tasks.size(); ++k) {
        if (tasks[k].deadline > tasks[k - 1].deadline) {
            throw SolverMismatch("solver/instance mismatch: deadlines are not in reverse order");
        }
    }
}

} // namespace

MigratedInstance migrate_deadlines(std::span<const TaskSpec> tasks)
{
    require_reverse(tasks);
    MigratedInstance m;
    m.tasks.assign(tasks.begin(), tasks.end());
    m.shifts.resize(tasks.size());
    const double common = tasks.front().deadline;
    for (std::size_t k = 0; k < tasks.size(); ++k) {
        m.shifts[k] = common - tasks[k].deadline;
        m.tasks[k].arrival = tasks[k].arrival + m.shifts[k];
        m.tasks[k].deadline = common;
    }
    return m;
}

std::vector<int> optimal_order_reverse(std::span<const TaskSpec> tasks)
{
    require_reverse(tasks);
    const int K = static_cast<int>(tasks.size());
    std::vector<int> order;
    for (int k = 0; k < K; ++k) order.push_back(k);
    for (int k = K - 2; k >= 0; --k) order.push_back(k);
    return order;
}

TwoPhaseSchedule schedule_reverse_order(std::span<const double> durations,
                                        std::span<const double> bits,
                                        std::span<const TaskSpec> tasks)
{
    const std::size_t K = tasks.size();
    if (K == 0) throw InvalidInput("task list is empty");
    if (durations.size() != K || bits.size() != K) {
        throw InvalidInput("durations and bits must have one entry per mobile");
    }
    const double horizon = tasks.front().deadline - tasks.front().arrival;
    const double slop = 1e-9 * horizon;

    TwoPhaseSchedule s;
    s.primary.resize(K);
    s.secondary.resize(K);

    // Last mobile: one interval ending at its own deadline.
    double y_end = tasks[K - 1].deadline;
    double z_start = tasks[K - 1].deadline;
    double first = y_end - durations[K - 1];
    if (first < tasks[K - 1].arrival) {
        // The migrated solve keeps this start at or after the arrival; only
        // rounding in the shift can push it earlier.
        if (tasks[K - 1].arrival - first > slop) {
            std::ostringstream os;
            os << "mobile " << tasks[K - 1].id << ": interval would start at " << first
               << " before its arrival " << tasks[K - 1].arrival;
            throw ScheduleOverflow(os.str());
        }
        first = tasks[K - 1].arrival;
    }
    s.primary[K - 1] = {first, y_end, 0.0};
    s.secondary[K - 1] = {z_start, z_start, 0.0};
    y_end = s.primary[K - 1].start;

    for (std::size_t k = K - 1; k-- > 0;) {
        const double t = durations[k];
        const double delta = y_end - t;
        double z_end = z_start;
        double y_start = delta;
        if (delta < tasks[k].arrival) {
            y_start = tasks[k].arrival;
            z_end = z_start + (tasks[k].arrival - delta);
        }
        if (z_end > tasks[k].deadline) {
            if (z_end - tasks[k].deadline > slop) {
                std::ostringstream os;
                os << "mobile " << tasks[k].id << ": secondary interval ends at " << z_end
                   << " after its deadline " << tasks[k].deadline;
                throw ScheduleOverflow(os.str());
            }
            z_end = tasks[k].deadline;
        }
        s.primary[k] = {y_start, y_end, 0.0};
        s.secondary[k] = {z_start, z_end, 0.0};
        y_end = y_start;
        z_start = z_end;
    }

    for (std::size_t k = 0; k < K; ++k) {
        if (!(durations[k] > 0.0)) continue;
        if (s.secondary[k].length() > 0.0) {
            s.primary[k].bits = s.primary[k].length() * bits[k] / durations[k];
            s.secondary[k].bits = bits[k] - s.primary[k].bits;
        } else {
            s.primary[k].bits = bits[k];
        }
    }
    return s;
}

Schedule to_schedule(const TwoPhaseSchedule& two_phase)
{
    const std::size_t K = two_phase.primary.size();
    Schedule out;
    out.intervals.resize(K);
    struct Entry
    {
        double start;
        int k;
    };
    std::vector<Entry> entries;
    for (std::size_t k = 0; k < K; ++k) {
        for (const auto* iv : {&two_phase.primary[k], &two_phase.secondary[k]}) {
            if (iv->length() > 0.0) {
                out.intervals[k].push_back(*iv);
                entries.push_back({iv->start, static_cast<int>(k)});
            }
        }
    }
    std::stable_sort(entries.begin(), entries.end(),
                     [](const Entry& a, const Entry& b) { return a.start < b.start; });
    for (const auto& e : entries) out.order.push_back(e.k);
    return out;
}

ReverseSolution solve_reverse(std::span<const TaskSpec> tasks,
                              const SystemParams& params,
                              const ordered::MasterOptions& options)
{
    ReverseSolution sol;
    sol.migrated = migrate_deadlines(tasks);
    sol.master = ordered::solve_master(sol.migrated.tasks, params, options);
    sol.two_phase = schedule_reverse_order(sol.master.durations, sol.master.bits, tasks);
    sol.schedule = to_schedule(sol.two_phase);
    sol.objective = sol.master.objective;
    return sol;
}

} // namespace meco::reverse
