#pragma once

#include <meco/energy.hpp>
#include <meco/schedule.hpp>
#include <meco/timeline.hpp>

#include <span>
#include <vector>

// Identical-order solver for m = 3 and unbounded CPU/VM capacities. Every
// function here expects the task list sorted by arrival; mobile indices are
// positions in that list.
namespace meco::ordered {

/// Throws SolverMismatch unless m = 3 and every mobile has R_min = 0 and
/// R_max = L (the capacities never bind).
void require_ordered_model(std::span<const TaskSpec> tasks, const SystemParams& params);

/// (0, 1, ..., K-1). Throws SolverMismatch for a non-identical instance.
std::vector<int> optimal_order_identical(std::span<const TaskSpec> tasks);

struct SlaveSolution
{
    double bits = 0.0;   // offloaded
    double energy = 0.0; // local + offload at the optimal split
};

/// Optimal split of one mobile's data given airtime t.
SlaveSolution slave_partition(const MobileCoeffs& coeffs, const TaskSpec& task, double t);

/// a L^3 / (sqrt(a/b) T + x)^3, the effective computing power at airtime x.
double reference_f(const MobileCoeffs& coeffs, const TaskSpec& task, double x);

struct KktResiduals
{
    double stationarity = 0.0;    // relative to max_k 2 f_k
    double primal = 0.0;          // relative to the horizon
    double dual = 0.0;            // negative multipliers, relative to max_k 2 f_k
    double complementarity = 0.0; // |multiplier * slack|, relative to both scales

    double max() const noexcept;
};

/// Optimal airtimes of the master problem. Slot j is served by mobile
/// order[j]; all per-mobile vectors are indexed by mobile.
struct MasterSolution
{
    std::vector<int> order;
    std::vector<double> durations;       // t_k
    std::vector<double> starts;          // s_{j-1} for the slot of mobile k
    std::vector<double> cumulative;      // s_j per slot, absolute time, size K + 1
    std::vector<double> omega;           // deadline multipliers, per slot
    std::vector<double> mu;              // arrival multipliers, per slot (last is 0)
    std::vector<double> sigma;           // t >= 0 multipliers, per mobile
    std::vector<double> effective_power; // f_k(t_k)
    std::vector<double> bits;            // slave split at t_k
    std::vector<double> energies;        // E_k(t_k)
    double objective = 0.0;
    KktResiduals kkt;
    int iterations = 0;
};

struct MasterOptions
{
    double tol = 1e-13; // projected-gradient stationarity in scaled units
    int max_iters = 20000;
};

/// Solves the master problem for mobiles served in `order` (one interval
/// each, back to back). Throws InfeasibleChain when no order-respecting
/// placement exists.
MasterSolution solve_in_order(std::span<const TaskSpec> tasks,
                              const SystemParams& params,
                              std::span<const int> order,
                              const MasterOptions& options = {});

/// solve_in_order with the identical-order sequence. Requires an identical
/// instance with T_{k+1}^a <= T_k^d for every k.
MasterSolution solve_master(std::span<const TaskSpec> tasks,
                            const SystemParams& params,
                            const MasterOptions& options = {});

enum class PairRelation { Equal, ArrivalActive, DeadlineActive };

const char* to_string(PairRelation r) noexcept;

struct PairCheck
{
    int first = 0;  // mobile index
    int second = 0;
    PairRelation relation = PairRelation::Equal;
    bool skipped = false; // a non-offloading mobile sits between the two
    bool holds = true;    // the relation's power inequality holds
};

struct EffectivePowerReport
{
    std::vector<int> offloaders; // t_k above the non-offloading threshold
    std::vector<PairCheck> pairs;
    bool identical_arrivals = false;
    bool identical_deadlines = false;
    bool monotone_ok = true; // nonincreasing / nondecreasing where applicable
    bool all_hold = true;
};

EffectivePowerReport effective_power_report(const MasterSolution& solution,
                                            std::span<const TaskSpec> tasks,
                                            double rel_tol = 1e-6);

enum class TwoUserCase { FirstTakesAll, SecondTakesAll, Balanced };

const char* to_string(TwoUserCase c) noexcept;

struct TwoUserSolution
{
    double t1 = 0.0;
    double t2 = 0.0;
    TwoUserCase regime = TwoUserCase::Balanced;
    double omega = 0.0; // common 2 f value in the balanced case
};

/// Double-threshold closed form for T1a < T2a < T1d < T2d.
TwoUserSolution solve_two_user(std::span<const TaskSpec> tasks, const SystemParams& params);

/// One interval [s_{j-1}, s_j] per offloading mobile carrying its bits.
Schedule expand_to_schedule(const MasterSolution& solution);

} // namespace meco::ordered
