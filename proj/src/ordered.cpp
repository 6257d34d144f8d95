#include <meco/ordered.hpp>

#include <meco/error.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <sstream>

namespace meco::ordered {

namespace {

// Airtime below this is "not offloading" (sigma active).
constexpr double kIdle = 1e-12;

void require_sorted(std::span<const TaskSpec> tasks)
{
    if (tasks.empty()) throw InvalidInput("task list is empty");
    for (std::size_t k = 1; k < tasks.size(); ++k) {
        if (tasks[k].arrival < tasks[k - 1].arrival) {
            throw InvalidInput("tasks must be sorted by arrival");
        }
    }
}

// Lawson-Hanson nonnegative least squares: min ||A z - b|| subject to z >= 0.
Eigen::VectorXd nnls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b)
{
    const auto n = A.cols();
    Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
    if (n == 0) return z;
    std::vector<bool> passive(static_cast<std::size_t>(n), false);
    const double tol = 1e-12 * std::max(1.0, A.cwiseAbs().maxCoeff()) * std::max(1.0, b.norm());

    auto solve_passive = [&](Eigen::VectorXd& s) {
        std::vector<Eigen::Index> idx;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
        }
        Eigen::MatrixXd Ap(A.rows(), static_cast<Eigen::Index>(idx.size()));
        for (std::size_t i = 0; i < idx.size(); ++i) Ap.col(static_cast<Eigen::Index>(i)) = A.col(idx[i]);
        const Eigen::VectorXd sp = Ap.colPivHouseholderQr().solve(b);
        s.setZero(n);
        for (std::size_t i = 0; i < idx.size(); ++i) s(idx[i]) = sp(static_cast<Eigen::Index>(i));
    };

    for (int outer = 0; outer < 3 * static_cast<int>(n) + 10; ++outer) {
        const Eigen::VectorXd w = A.transpose() * (b - A * z);
        Eigen::Index best = -1;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (!passive[static_cast<std::size_t>(j)] && w(j) > tol && (best < 0 || w(j) > w(best))) {
                best = j;
            }
        }
        if (best < 0) break;
        passive[static_cast<std::size_t>(best)] = true;
        Eigen::VectorXd s;
        for (int inner = 0; inner < 3 * static_cast<int>(n) + 10; ++inner) {
            solve_passive(s);
            double alpha = 1.0;
            bool feasible = true;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (passive[static_cast<std::size_t>(j)] && s(j) <= 0.0) {
                    feasible = false;
                    alpha = std::min(alpha, z(j) / (z(j) - s(j)));
                }
            }
            if (feasible) {
                z = s;
                break;
            }
            z += alpha * (s - z);
            for (Eigen::Index j = 0; j < n; ++j) {
                if (passive[static_cast<std::size_t>(j)] && z(j) <= tol) {
                    passive[static_cast<std::size_t>(j)] = false;
                    z(j) = 0.0;
                }
            }
        }
    }
    return z;
}

// Pool-adjacent-violators for the least-squares nondecreasing fit with
// per-entry bounds. Each pooled block takes its mean clamped to the block's
// tightest bounds; with nondecreasing lo and hi that is the exact projection.
void isotonic_in_place(std::vector<double>& y, std::span<const double> lo, std::span<const double> hi)
{
    struct Block
    {
        double sum;
        std::size_t count;
        double lo, hi;
        double value() const { return std::clamp(sum / static_cast<double>(count), lo, hi); }
    };
    std::vector<Block> blocks;
    blocks.reserve(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        blocks.push_back({y[i], 1, lo[i], hi[i]});
        while (blocks.size() > 1) {
            const auto& last = blocks.back();
            const auto& prev = blocks[blocks.size() - 2];
            if (prev.value() <= last.value()) break;
            const Block merged{prev.sum + last.sum, prev.count + last.count,
                               std::max(prev.lo, last.lo), std::min(prev.hi, last.hi)};
            blocks.pop_back();
            blocks.back() = merged;
        }
    }
    std::size_t i = 0;
    for (const auto& b : blocks) {
        const double v = b.value();
        for (std::size_t c = 0; c < b.count; ++c) y[i++] = v;
    }
}

// Master problem in scaled cumulative variables u_1..u_{K-1} in [0, 1]
// (u_0 = 0, u_K = 1), objective divided by the pure-local energy.
class Chain
{
public:
    Chain(std::vector<double> A, std::vector<double> c, double horizon,
          std::vector<double> lo, std::vector<double> hi)
        : A_(std::move(A)), c_(std::move(c)), H_(horizon), lo_(std::move(lo)), hi_(std::move(hi))
    {
        E0_ = 0.0;
        for (std::size_t i = 0; i < A_.size(); ++i) E0_ += A_[i] / (c_[i] * c_[i]);
        if (!(E0_ > 0.0)) E0_ = 1.0;
    }

    std::size_t slots() const noexcept { return A_.size(); }
    std::size_t vars() const noexcept { return A_.size() - 1; }

    double at(const std::vector<double>& u, std::size_t j) const
    {
        if (j == 0) return 0.0;
        if (j == slots()) return 1.0;
        return u[j - 1];
    }

    double duration(const std::vector<double>& u, std::size_t i) const
    {
        return H_ * (at(u, i + 1) - at(u, i));
    }

    double energy(std::size_t i, double t) const
    {
        const double d = c_[i] + t;
        return A_[i] / (d * d);
    }
    double denergy(std::size_t i, double t) const
    {
        const double d = c_[i] + t;
        return -2.0 * A_[i] / (d * d * d);
    }
    double d2energy(std::size_t i, double t) const
    {
        const double d = c_[i] + t;
        return 6.0 * A_[i] / (d * d * d * d);
    }

    double value(const std::vector<double>& u) const
    {
        double f = 0.0;
        for (std::size_t i = 0; i < slots(); ++i) f += energy(i, duration(u, i));
        return f / E0_;
    }

    void gradient(const std::vector<double>& u, std::vector<double>& g) const
    {
        g.resize(vars());
        for (std::size_t j = 1; j <= vars(); ++j) {
            g[j - 1] = H_ / E0_ * (denergy(j - 1, duration(u, j - 1)) - denergy(j, duration(u, j)));
        }
    }

    void project(std::vector<double>& u) const
    {
        isotonic_in_place(u, lo_, hi_);
    }

    int spg(std::vector<double>& u, double tol, int max_iters) const
    {
        std::vector<double> g, gn, trial, d, pg;
        std::deque<double> recent;
        double f = value(u);
        gradient(u, g);
        double alpha = 1.0;
        int it = 0;
        for (; it < max_iters; ++it) {
            pg = u;
            for (std::size_t j = 0; j < u.size(); ++j) pg[j] -= g[j];
            project(pg);
            double pg_norm = 0.0;
            for (std::size_t j = 0; j < u.size(); ++j) pg_norm = std::max(pg_norm, std::abs(pg[j] - u[j]));
            if (pg_norm <= tol) break;

            d = u;
            for (std::size_t j = 0; j < u.size(); ++j) d[j] -= alpha * g[j];
            project(d);
            double slope = 0.0;
            for (std::size_t j = 0; j < u.size(); ++j) {
                d[j] -= u[j];
                slope += g[j] * d[j];
            }
            recent.push_back(f);
            if (recent.size() > 10) recent.pop_front();
            const double f_ref = *std::max_element(recent.begin(), recent.end());
            double step = 1.0, fn = f;
            bool accepted = false;
            for (int ls = 0; ls < 60; ++ls) {
                trial = u;
                for (std::size_t j = 0; j < u.size(); ++j) trial[j] += step * d[j];
                fn = value(trial);
                if (fn <= f_ref + 1e-4 * step * slope) {
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if (!accepted) break;
            gradient(trial, gn);
            double ss = 0.0, sy = 0.0;
            for (std::size_t j = 0; j < u.size(); ++j) {
                const double s = trial[j] - u[j];
                ss += s * s;
                sy += s * (gn[j] - g[j]);
            }
            alpha = sy > 0.0 ? std::clamp(ss / sy, 1e-12, 1e12) : 1e12;
            u.swap(trial);
            g.swap(gn);
            f = fn;
            if (ss == 0.0) break;
        }
        return it;
    }

    // Newton refinement on the variables that are neither at a bound nor
    // tied to a fixed neighbour; ties between free variables move together.
    void polish(std::vector<double>& u) const
    {
        constexpr double pin = 1e-10;
        const std::size_t n = vars();
        if (n == 0) return;
        for (int round = 0; round < 60; ++round) {
            // Blocks of consecutive equal values over positions 0..K.
            std::vector<double> vals(n + 2);
            for (std::size_t j = 0; j <= n + 1; ++j) vals[j] = at(u, j);
            std::vector<std::size_t> block_of(n + 2);
            std::vector<std::pair<std::size_t, std::size_t>> blocks; // [first, last]
            for (std::size_t j = 0; j <= n + 1; ++j) {
                if (j > 0 && std::abs(vals[j] - vals[blocks.back().second]) <= pin) {
                    blocks.back().second = j;
                } else {
                    blocks.push_back({j, j});
                }
                block_of[j] = blocks.size() - 1;
            }
            std::vector<bool> fixed(blocks.size(), false);
            std::vector<double> fixed_value(blocks.size(), 0.0);
            for (std::size_t b = 0; b < blocks.size(); ++b) {
                double sum = 0.0;
                for (std::size_t j = blocks[b].first; j <= blocks[b].second; ++j) {
                    sum += vals[j];
                    if (j == 0 || j == n + 1) {
                        fixed[b] = true;
                        fixed_value[b] = vals[j];
                    } else if (std::abs(vals[j] - lo_[j - 1]) <= pin) {
                        fixed[b] = true;
                        fixed_value[b] = lo_[j - 1];
                    } else if (std::abs(vals[j] - hi_[j - 1]) <= pin) {
                        fixed[b] = true;
                        fixed_value[b] = hi_[j - 1];
                    }
                }
                if (!fixed[b]) {
                    fixed_value[b] = sum / static_cast<double>(blocks[b].second - blocks[b].first + 1);
                }
            }
            std::vector<double> snapped = u;
            for (std::size_t j = 1; j <= n; ++j) snapped[j - 1] = fixed_value[block_of[j]];

            // Free blocks in order; gradient and tridiagonal Hessian.
            std::vector<std::size_t> free_blocks;
            for (std::size_t b = 0; b < blocks.size(); ++b) {
                if (!fixed[b]) free_blocks.push_back(b);
            }
            if (free_blocks.empty()) {
                if (is_feasible(snapped)) u = snapped;
                return;
            }
            const std::size_t m = free_blocks.size();
            std::vector<double> grad(m), diag(m), off(m, 0.0);
            const double scale1 = H_ / E0_, scale2 = H_ * H_ / E0_;
            for (std::size_t i = 0; i < m; ++i) {
                const auto [p, q] = blocks[free_blocks[i]];
                const double t_before = duration(snapped, p - 1);
                const double t_after = duration(snapped, q);
                grad[i] = scale1 * (denergy(p - 1, t_before) - denergy(q, t_after));
                diag[i] = scale2 * (d2energy(p - 1, t_before) + d2energy(q, t_after));
                if (i + 1 < m && free_blocks[i + 1] == free_blocks[i] + 1) {
                    off[i] = -scale2 * d2energy(q, t_after);
                }
            }
            // Thomas algorithm for H delta = -grad.
            std::vector<double> cp(m), dp(m), delta(m);
            cp[0] = off[0] / diag[0];
            dp[0] = -grad[0] / diag[0];
            for (std::size_t i = 1; i < m; ++i) {
                const double den = diag[i] - off[i - 1] * cp[i - 1];
                cp[i] = off[i] / den;
                dp[i] = (-grad[i] - off[i - 1] * dp[i - 1]) / den;
            }
            delta[m - 1] = dp[m - 1];
            for (std::size_t i = m - 1; i-- > 0;) delta[i] = dp[i] - cp[i] * delta[i + 1];

            const double f0 = value(snapped);
            double step = 1.0;
            bool moved = false;
            double biggest = 0.0;
            for (double v : delta) biggest = std::max(biggest, std::abs(v));
            for (int ls = 0; ls < 40; ++ls) {
                std::vector<double> trial = snapped;
                for (std::size_t i = 0; i < m; ++i) {
                    const auto [p, q] = blocks[free_blocks[i]];
                    for (std::size_t j = p; j <= q; ++j) trial[j - 1] += step * delta[i];
                }
                if (is_feasible(trial) && value(trial) <= f0 + 1e-15 * std::abs(f0)) {
                    u = trial;
                    moved = true;
                    break;
                }
                step *= 0.5;
            }
            if (!moved) {
                if (is_feasible(snapped) && value(snapped) <= value(u)) u = snapped;
                return;
            }
            if (step * biggest <= 1e-16) return;
        }
    }

    bool is_feasible(const std::vector<double>& u) const
    {
        double prev = 0.0;
        for (std::size_t j = 0; j < u.size(); ++j) {
            if (u[j] < lo_[j] || u[j] > hi_[j] || u[j] < prev) return false;
            prev = u[j];
        }
        return prev <= 1.0;
    }

private:
    std::vector<double> A_, c_;
    double H_, E0_;
    std::vector<double> lo_, hi_;
};

} // namespace

void require_ordered_model(std::span<const TaskSpec> tasks, const SystemParams& params)
{
    check_params(params);
    if (params.model != EnergyModel::Monomial || params.monomial_order != 3.0) {
        throw SolverMismatch("solver/instance mismatch: the ordered path needs the monomial model with m = 3");
    }
    for (const auto& t : tasks) {
        const auto c = mobile_coeffs(t, params);
        if (c.r_min_bits > 0.0 || c.r_max_bits < t.data_bits) {
            std::ostringstream os;
            os << "solver/instance mismatch: mobile " << t.id
               << " has binding CPU or VM capacity; use the general solver";
            throw SolverMismatch(os.str());
        }
    }
}

std::vector<int> optimal_order_identical(std::span<const TaskSpec> tasks)
{
    require_sorted(tasks);
    if (classify_order(tasks) != OrderClass::Identical) {
        throw SolverMismatch("solver/instance mismatch: arrival and deadline orders differ");
    }
    std::vector<int> order(tasks.size());
    std::iota(order.begin(), order.end(), 0);
    return order;
}

SlaveSolution slave_partition(const MobileCoeffs& coeffs, const TaskSpec& task, double t)
{
    if (!(t >= 0.0)) throw InvalidInput("slave_partition: airtime must be >= 0");
    const double L = task.data_bits;
    const double T = task.latency();
    const double theta = std::sqrt(coeffs.b / coeffs.a) * t / T;
    const double c = std::sqrt(coeffs.a / coeffs.b) * T;
    SlaveSolution s;
    s.bits = theta / (1.0 + theta) * L;
    s.energy = coeffs.a * L * L * L / ((c + t) * (c + t));
    return s;
}

double reference_f(const MobileCoeffs& coeffs, const TaskSpec& task, double x)
{
    const double L = task.data_bits;
    const double d = std::sqrt(coeffs.a / coeffs.b) * task.latency() + x;
    return coeffs.a * L * L * L / (d * d * d);
}

double KktResiduals::max() const noexcept
{
    return std::max({stationarity, primal, dual, complementarity});
}

MasterSolution solve_in_order(std::span<const TaskSpec> tasks,
                              const SystemParams& params,
                              std::span<const int> order,
                              const MasterOptions& options)
{
    if (tasks.empty()) throw InvalidInput("task list is empty");
    require_ordered_model(tasks, params);
    const std::size_t K = tasks.size();
    if (order.size() != K) throw InvalidInput("order must list every mobile once");
    {
        std::vector<int> seen(order.begin(), order.end());
        std::sort(seen.begin(), seen.end());
        for (std::size_t i = 0; i < K; ++i) {
            if (seen[i] != static_cast<int>(i)) throw InvalidInput("order must be a permutation");
        }
    }
    auto task_at = [&](std::size_t slot) -> const TaskSpec& {
        return tasks[static_cast<std::size_t>(order[slot])];
    };

    std::vector<MobileCoeffs> coeffs(K);
    std::vector<double> A(K), c(K);
    for (std::size_t i = 0; i < K; ++i) {
        const auto& t = task_at(i);
        coeffs[i] = mobile_coeffs(t, params);
        A[i] = coeffs[i].a * t.data_bits * t.data_bits * t.data_bits;
        c[i] = std::sqrt(coeffs[i].a / coeffs[i].b) * t.latency();
    }

    const double s0 = task_at(0).arrival;
    const double sK = task_at(K - 1).deadline;
    const double H = sK - s0;
    // Raw bounds on the interior boundaries s_1..s_{K-1}, then propagated so
    // that they are themselves nondecreasing.
    std::vector<double> lo(K > 0 ? K - 1 : 0), hi(lo.size());
    for (std::size_t j = 1; j < K; ++j) {
        lo[j - 1] = task_at(j).arrival;
        hi[j - 1] = task_at(j - 1).deadline;
    }
    for (std::size_t j = 0; j < lo.size(); ++j) {
        lo[j] = std::max(lo[j], j == 0 ? s0 : lo[j - 1]);
    }
    for (std::size_t j = lo.size(); j-- > 0;) {
        hi[j] = std::min(hi[j], j + 1 == hi.size() ? sK : hi[j + 1]);
    }
    if (!(H > 0.0)) throw InfeasibleChain("chain has no room: first arrival is not before last deadline");
    for (std::size_t j = 0; j < lo.size(); ++j) {
        if (lo[j] > hi[j]) {
            std::ostringstream os;
            os << "infeasible chain: slot " << j + 1 << " cannot start by " << lo[j]
               << " and the previous one end by " << hi[j];
            throw InfeasibleChain(os.str());
        }
    }
    std::vector<double> ulo(lo.size()), uhi(lo.size());
    for (std::size_t j = 0; j < lo.size(); ++j) {
        ulo[j] = std::clamp((lo[j] - s0) / H, 0.0, 1.0);
        uhi[j] = std::clamp((hi[j] - s0) / H, 0.0, 1.0);
    }

    Chain chain(A, c, H, ulo, uhi);
    std::vector<double> u(lo.size());
    for (std::size_t j = 0; j < u.size(); ++j) u[j] = static_cast<double>(j + 1) / static_cast<double>(K);
    chain.project(u);
    MasterSolution sol;
    sol.iterations = chain.spg(u, options.tol, options.max_iters);
    chain.polish(u);

    // Absolute boundaries; bound hits are snapped to the exact instants.
    sol.order.assign(order.begin(), order.end());
    sol.cumulative.resize(K + 1);
    sol.cumulative[0] = s0;
    sol.cumulative[K] = sK;
    for (std::size_t j = 1; j < K; ++j) {
        double s = s0 + H * u[j - 1];
        if (u[j - 1] == ulo[j - 1]) s = lo[j - 1];
        if (u[j - 1] == uhi[j - 1]) s = hi[j - 1];
        sol.cumulative[j] = std::clamp(s, lo[j - 1], hi[j - 1]);
    }
    for (std::size_t j = 1; j <= K; ++j) {
        sol.cumulative[j] = std::max(sol.cumulative[j], sol.cumulative[j - 1]);
    }

    sol.durations.assign(K, 0.0);
    sol.starts.assign(K, 0.0);
    sol.effective_power.assign(K, 0.0);
    sol.bits.assign(K, 0.0);
    sol.energies.assign(K, 0.0);
    std::vector<double> slot_t(K), two_f(K);
    for (std::size_t i = 0; i < K; ++i) {
        const auto k = static_cast<std::size_t>(order[i]);
        slot_t[i] = sol.cumulative[i + 1] - sol.cumulative[i];
        sol.durations[k] = slot_t[i];
        sol.starts[k] = sol.cumulative[i];
        sol.effective_power[k] = reference_f(coeffs[i], tasks[k], slot_t[i]);
        const auto slave = slave_partition(coeffs[i], tasks[k], slot_t[i]);
        sol.bits[k] = slave.bits;
        sol.energies[k] = slave.energy;
        sol.objective += slave.energy;
        two_f[i] = 2.0 * sol.effective_power[k];
    }

    // Multipliers: nonnegative fit of 2 f_i = sum_{i'>=i} omega - sum_{i'>=i} mu - sigma_i
    // over the active constraints.
    const double act = 1e-9 * H;
    const double P0 = std::max(*std::max_element(two_f.begin(), two_f.end()), 1e-300);
    struct Column
    {
        char kind; // 'w', 'm', 's'
        std::size_t slot;
    };
    std::vector<Column> cols;
    for (std::size_t i = 0; i < K; ++i) {
        const double end = sol.cumulative[i + 1];
        if (i + 1 == K || end >= task_at(i).deadline - act) cols.push_back({'w', i});
        if (i + 1 < K && end <= task_at(i + 1).arrival + act) cols.push_back({'m', i});
        if (slot_t[i] < kIdle) cols.push_back({'s', i});
    }
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(cols.size()));
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(K));
    for (std::size_t i = 0; i < K; ++i) rhs(static_cast<Eigen::Index>(i)) = two_f[i] / P0;
    for (std::size_t col = 0; col < cols.size(); ++col) {
        const auto [kind, slot] = cols[col];
        for (std::size_t i = 0; i < K; ++i) {
            double v = 0.0;
            if (kind == 'w' && slot >= i) v = 1.0;
            if (kind == 'm' && slot >= i) v = -1.0;
            if (kind == 's' && slot == i) v = -1.0;
            M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(col)) = v;
        }
    }
    const Eigen::VectorXd z = nnls(M, rhs);
    sol.omega.assign(K, 0.0);
    sol.mu.assign(K, 0.0);
    sol.sigma.assign(K, 0.0);
    double complementarity = 0.0;
    for (std::size_t col = 0; col < cols.size(); ++col) {
        const auto [kind, slot] = cols[col];
        const double zc = z(static_cast<Eigen::Index>(col));
        double slack = 0.0;
        if (kind == 'w') {
            sol.omega[slot] = zc * P0;
            slack = task_at(slot).deadline - sol.cumulative[slot + 1];
        } else if (kind == 'm') {
            sol.mu[slot] = zc * P0;
            slack = sol.cumulative[slot + 1] - task_at(slot + 1).arrival;
        } else {
            sol.sigma[static_cast<std::size_t>(order[slot])] = zc * P0;
            slack = slot_t[slot];
        }
        complementarity = std::max(complementarity, std::abs(zc * slack) / H);
    }
    const Eigen::VectorXd resid = M * z - rhs;
    sol.kkt.stationarity = resid.size() ? resid.cwiseAbs().maxCoeff() : 0.0;
    sol.kkt.dual = z.size() ? std::max(0.0, -z.minCoeff()) : 0.0;
    sol.kkt.complementarity = complementarity;
    double primal = 0.0;
    for (std::size_t i = 0; i < K; ++i) {
        primal = std::max(primal, task_at(i).arrival - sol.cumulative[i]);
        primal = std::max(primal, sol.cumulative[i + 1] - task_at(i).deadline);
        primal = std::max(primal, -slot_t[i]);
    }
    sol.kkt.primal = primal / H;
    return sol;
}

MasterSolution solve_master(std::span<const TaskSpec> tasks,
                            const SystemParams& params,
                            const MasterOptions& options)
{
    const auto order = optimal_order_identical(tasks);
    for (std::size_t k = 0; k + 1 < tasks.size(); ++k) {
        if (tasks[k + 1].arrival > tasks[k].deadline) {
            std::ostringstream os;
            os << "infeasible chain: mobile " << tasks[k + 1].id << " arrives at "
               << tasks[k + 1].arrival << " after mobile " << tasks[k].id << "'s deadline "
               << tasks[k].deadline;
            throw InfeasibleChain(os.str());
        }
    }
    return solve_in_order(tasks, params, order, options);
}

const char* to_string(PairRelation r) noexcept
{
    switch (r) {
    case PairRelation::Equal: return "equal";
    case PairRelation::ArrivalActive: return "arrival_active";
    case PairRelation::DeadlineActive: return "deadline_active";
    }
    return "unknown";
}

EffectivePowerReport effective_power_report(const MasterSolution& solution,
                                            std::span<const TaskSpec> tasks,
                                            double rel_tol)
{
    EffectivePowerReport rep;
    const std::size_t K = tasks.size();
    if (solution.order.size() != K) throw InvalidInput("solution does not match the task list");
    const double H = solution.cumulative.back() - solution.cumulative.front();
    const double act = 1e-9 * H;

    std::vector<std::size_t> slots;
    for (std::size_t i = 0; i < K; ++i) {
        const auto k = static_cast<std::size_t>(solution.order[i]);
        if (solution.durations[k] >= kIdle) {
            slots.push_back(i);
            rep.offloaders.push_back(static_cast<int>(k));
        }
    }
    const auto& P = solution.effective_power;
    for (std::size_t x = 0; x + 1 < slots.size(); ++x) {
        const std::size_t i = slots[x], i2 = slots[x + 1];
        PairCheck pc;
        pc.first = solution.order[i];
        pc.second = solution.order[i2];
        const double p1 = P[static_cast<std::size_t>(pc.first)];
        const double p2 = P[static_cast<std::size_t>(pc.second)];
        if (i2 != i + 1) {
            pc.skipped = true;
            rep.pairs.push_back(pc);
            continue;
        }
        const double boundary = solution.cumulative[i + 1];
        const auto& cur = tasks[static_cast<std::size_t>(solution.order[i])];
        const auto& next = tasks[static_cast<std::size_t>(solution.order[i2])];
        const bool at_arrival = boundary <= next.arrival + act;
        const bool at_deadline = boundary >= cur.deadline - act;
        const double scale = std::max(p1, p2);
        if (at_arrival && at_deadline) {
            pc.relation = PairRelation::ArrivalActive;
            pc.holds = true;
        } else if (at_arrival) {
            pc.relation = PairRelation::ArrivalActive;
            pc.holds = p1 <= p2 + rel_tol * scale;
        } else if (at_deadline) {
            pc.relation = PairRelation::DeadlineActive;
            pc.holds = p1 >= p2 - rel_tol * scale;
        } else {
            pc.relation = PairRelation::Equal;
            pc.holds = std::abs(p1 - p2) <= rel_tol * scale;
        }
        rep.all_hold = rep.all_hold && pc.holds;
        rep.pairs.push_back(pc);
    }

    rep.identical_arrivals = true;
    rep.identical_deadlines = true;
    for (std::size_t k = 1; k < K; ++k) {
        rep.identical_arrivals = rep.identical_arrivals && tasks[k].arrival == tasks[0].arrival;
        rep.identical_deadlines = rep.identical_deadlines && tasks[k].deadline == tasks[0].deadline;
    }
    for (std::size_t x = 0; x + 1 < rep.offloaders.size(); ++x) {
        const double p1 = P[static_cast<std::size_t>(rep.offloaders[x])];
        const double p2 = P[static_cast<std::size_t>(rep.offloaders[x + 1])];
        const double scale = std::max(p1, p2);
        if (rep.identical_arrivals && !rep.identical_deadlines && p1 < p2 - rel_tol * scale) {
            rep.monotone_ok = false;
        }
        if (rep.identical_deadlines && !rep.identical_arrivals && p1 > p2 + rel_tol * scale) {
            rep.monotone_ok = false;
        }
    }
    rep.all_hold = rep.all_hold && rep.monotone_ok;
    return rep;
}

const char* to_string(TwoUserCase c) noexcept
{
    switch (c) {
    case TwoUserCase::FirstTakesAll: return "first_takes_all";
    case TwoUserCase::SecondTakesAll: return "second_takes_all";
    case TwoUserCase::Balanced: return "balanced";
    }
    return "unknown";
}

TwoUserSolution solve_two_user(std::span<const TaskSpec> tasks, const SystemParams& params)
{
    if (tasks.size() != 2) throw InvalidInput("solve_two_user needs exactly two mobiles");
    require_ordered_model(tasks, params);
    const auto& m1 = tasks[0];
    const auto& m2 = tasks[1];
    if (!(m1.arrival < m2.arrival && m2.arrival < m1.deadline && m1.deadline < m2.deadline)) {
        throw InvalidInput("solve_two_user needs T1a < T2a < T1d < T2d");
    }
    const auto c1 = mobile_coeffs(m1, params);
    const auto c2 = mobile_coeffs(m2, params);
    const double H = m2.deadline - m1.arrival;
    const double t1_min = m2.arrival - m1.arrival, t1_max = m1.deadline - m1.arrival;
    const double t2_min = m2.deadline - m1.deadline, t2_max = m2.deadline - m2.arrival;
    const double d11 = reference_f(c1, m1, t1_max), d12 = reference_f(c1, m1, t1_min);
    const double d21 = reference_f(c2, m2, t2_max), d22 = reference_f(c2, m2, t2_min);

    TwoUserSolution s;
    if (d11 >= d22) {
        s.regime = TwoUserCase::FirstTakesAll;
        s.t1 = t1_max;
        s.t2 = t2_min;
        return s;
    }
    if (d12 <= d21) {
        s.regime = TwoUserCase::SecondTakesAll;
        s.t1 = t1_min;
        s.t2 = t2_max;
        return s;
    }
    // f_k(t) = omega / 2 inverted: t = (2 a L^3 / omega)^{1/3} - sqrt(a/b) T.
    auto airtime = [](const MobileCoeffs& c, const TaskSpec& t, double omega) {
        const double L = t.data_bits;
        return std::cbrt(2.0 * c.a * L * L * L / omega) - std::sqrt(c.a / c.b) * t.latency();
    };
    double lo = std::log(2.0 * std::min(d11, d21));
    double hi = std::log(2.0 * std::max(d12, d22));
    for (int it = 0; it < 400; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const double w = std::exp(mid);
        const double total = airtime(c1, m1, w) + airtime(c2, m2, w);
        (total > H ? lo : hi) = mid;
    }
    s.regime = TwoUserCase::Balanced;
    s.omega = std::exp(0.5 * (lo + hi));
    s.t1 = std::clamp(airtime(c1, m1, s.omega), t1_min, t1_max);
    s.t2 = H - s.t1;
    return s;
}

Schedule expand_to_schedule(const MasterSolution& solution)
{
    const std::size_t K = solution.order.size();
    Schedule sched;
    sched.intervals.resize(K);
    for (std::size_t i = 0; i < K; ++i) {
        const auto k = static_cast<std::size_t>(solution.order[i]);
        const double start = solution.cumulative[i];
        const double end = solution.cumulative[i + 1];
        if (end > start) {
            sched.intervals[k].push_back({start, end, solution.bits[k]});
            sched.order.push_back(static_cast<int>(k));
        }
    }
    return sched;
}

} // namespace meco::ordered
