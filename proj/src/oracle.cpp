#include <meco/oracle.hpp>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

namespace meco::oracle {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Projection onto {x >= 0, sum x = s} by sort-based thresholding.
void project_sum_equal(std::span<const double> y, double s, std::vector<double>& out)
{
    out.assign(y.begin(), y.end());
    if (y.empty()) return;
    if (s <= 0.0) {
        std::fill(out.begin(), out.end(), 0.0);
        return;
    }
    std::vector<double> u(y.begin(), y.end());
    std::sort(u.begin(), u.end(), std::greater<>());
    double cum = 0.0, theta = 0.0;
    for (std::size_t j = 0; j < u.size(); ++j) {
        cum += u[j];
        const double cand = (cum - s) / static_cast<double>(j + 1);
        if (u[j] - cand > 0.0) theta = cand;
    }
    for (auto& v : out) v = std::max(v - theta, 0.0);
}

// First and second partial derivatives of one offload term.
struct Partials
{
    double db = 0.0, dt = 0.0;
    double dbb = 0.0, dbt = 0.0, dtt = 0.0;
};

Partials offload_partials(const TaskSpec& task, const SystemParams& params, double bits, double t)
{
    Partials p;
    if (params.model == EnergyModel::Monomial) {
        const double m = params.monomial_order;
        const double c = params.lambda_coeff / task.channel_gain;
        const double r = bits / t;
        const double rm2 = std::pow(r, m - 2.0);
        p.db = c * m * rm2 * r;
        p.dt = -c * (m - 1.0) * rm2 * r * r;
        p.dbb = c * m * (m - 1.0) * rm2 / t;
        p.dbt = -c * m * (m - 1.0) * rm2 * r / t;
        p.dtt = c * m * (m - 1.0) * rm2 * r * r / t;
        return p;
    }
    const double n_g = params.noise_power / task.channel_gain;
    const double k = std::numbers::ln2 / params.bandwidth_hz;
    const double r = k * bits / t;
    const double er = std::exp(r);
    p.db = n_g * k * er;
    p.dt = n_g * (std::expm1(r) - r * er);
    p.dbb = n_g * k * k * er / t;
    p.dbt = -n_g * k * r * er / t;
    p.dtt = n_g * r * r * er / t;
    return p;
}

double local_cost(const TaskSpec& t, const SystemParams& params, double offloaded)
{
    const double rest = std::max(t.data_bits - offloaded, 0.0);
    const double T = t.latency();
    return params.gamma_switch * std::pow(t.cycles_per_bit, 3) * rest * rest * rest / (T * T);
}

double local_slope(const TaskSpec& t, const SystemParams& params, double offloaded)
{
    const double rest = std::max(t.data_bits - offloaded, 0.0);
    const double T = t.latency();
    return -3.0 * params.gamma_switch * std::pow(t.cycles_per_bit, 3) * rest * rest / (T * T);
}

double local_curvature(const TaskSpec& t, const SystemParams& params, double offloaded)
{
    const double rest = std::max(t.data_bits - offloaded, 0.0);
    const double T = t.latency();
    return 6.0 * params.gamma_switch * std::pow(t.cycles_per_bit, 3) * rest / (T * T);
}

struct Entry
{
    std::size_t k; // mobile
    std::size_t j; // slot in the mobile's epoch set
    std::size_t n; // epoch
};

using Triplets = std::vector<Eigen::Triplet<double>>;

// Log-barrier formulation in scaled variables x = bits / Ls_k and
// y = duration / tau_n, objective divided by the pure-local energy E0.
// z = [x ; y]. Mobiles that cannot offload (R_max = 0) and zero-length
// epochs carry no variables.
class Barrier
{
public:
    Barrier(std::span<const TaskSpec> tasks, const SystemParams& params, const Timeline& timeline)
        : tasks_(tasks), params_(params), timeline_(timeline)
    {
        check_params(params);
        if (timeline.num_mobiles() != tasks.size()) {
            throw InvalidInput("timeline was built for a different task list");
        }
        by_mobile_.resize(tasks.size());
        by_epoch_.resize(timeline.num_epochs());
        for (std::size_t k = 0; k < tasks.size(); ++k) {
            const auto c = mobile_coeffs(tasks[k], params);
            const double Ls = std::max(tasks[k].data_bits, 1.0);
            scale_.push_back(Ls);
            lo_.push_back(c.r_min_bits / Ls);
            hi_.push_back(c.r_max_bits / Ls);
            equality_.push_back(hi_.back() - lo_.back() <= 1e-12 * hi_.back());
            const double T = tasks[k].latency();
            E0_ += params.gamma_switch * std::pow(tasks[k].cycles_per_bit, 3)
                   * std::pow(tasks[k].data_bits, 3) / (T * T);
            if (!(c.r_max_bits > 0.0)) continue;
            const auto& epochs = timeline.epoch_sets[k];
            for (std::size_t j = 0; j < epochs.size(); ++j) {
                const auto n = static_cast<std::size_t>(epochs[j]);
                if (!(timeline.epoch_lengths[n] > 0.0)) continue;
                by_mobile_[k].push_back(entries_.size());
                by_epoch_[n].push_back(entries_.size());
                entries_.push_back({k, j, n});
            }
            if (c.r_min_bits > 0.0 && by_mobile_[k].empty()) {
                std::ostringstream os;
                os << "mobile " << tasks[k].id << " must offload but has no airtime";
                throw InfeasibleInstance(os.str());
            }
        }
        if (!(E0_ > 0.0)) E0_ = 1.0;
        for (std::size_t k = 0; k < tasks.size(); ++k) {
            if (by_mobile_[k].empty()) continue;
            if (equality_[k]) {
                eq_rows_.push_back(k);
            } else {
                ++ineq_;
                if (lo_[k] > 0.0) ++ineq_;
            }
        }
        ineq_ += 2 * entries_.size();
        for (const auto& m : by_epoch_) {
            if (!m.empty()) ++ineq_;
        }
    }

    std::size_t entries() const noexcept { return entries_.size(); }
    std::size_t dim() const noexcept { return 2 * entries_.size(); }
    std::size_t inequalities() const noexcept { return ineq_; }
    double energy_scale() const noexcept { return E0_; }
    const std::vector<std::size_t>& equality_rows() const noexcept { return eq_rows_; }
    const std::vector<std::size_t>& mobile_entries(std::size_t k) const { return by_mobile_[k]; }

    Eigen::VectorXd start() const
    {
        const std::size_t E = entries();
        Eigen::VectorXd z(static_cast<Eigen::Index>(dim()));
        for (std::size_t k = 0; k < tasks_.size(); ++k) {
            if (by_mobile_[k].empty()) continue;
            const double target = equality_[k] ? lo_[k] : 0.5 * (lo_[k] + hi_[k]);
            double span = 0.0;
            for (auto e : by_mobile_[k]) span += tau(e);
            for (auto e : by_mobile_[k]) z(idx(e)) = target * tau(e) / span;
        }
        for (const auto& members : by_epoch_) {
            for (auto e : members) {
                z(idx(E + e)) = 1.0 / static_cast<double>(members.size() + 1);
            }
        }
        return z;
    }

    // Scaled objective; +inf outside the domain.
    double objective(const Eigen::VectorXd& z) const
    {
        const std::size_t E = entries();
        double total = 0.0;
        for (std::size_t k = 0; k < tasks_.size(); ++k) {
            double off = 0.0;
            for (auto e : by_mobile_[k]) {
                const double bits = z(idx(e)) * scale_[k];
                const double t = z(idx(E + e)) * tau(e);
                if (!(bits > 0.0) || !(t > 0.0)) return kInf;
                off += bits;
                total += offload_energy(tasks_[k], params_, bits, t);
            }
            if (off > tasks_[k].data_bits * (1.0 + 1e-12)) return kInf;
            total += local_cost(tasks_[k], params_, off);
        }
        total /= E0_;
        return std::isfinite(total) ? total : kInf;
    }

    // -sum log(slack); +inf when a slack is not positive.
    double barrier(const Eigen::VectorXd& z) const
    {
        const std::size_t E = entries();
        double b = 0.0;
        for (Eigen::Index i = 0; i < z.size(); ++i) {
            if (!(z(i) > 0.0)) return kInf;
            b -= std::log(z(i));
        }
        for (const auto& members : by_epoch_) {
            if (members.empty()) continue;
            double s = 1.0;
            for (auto e : members) s -= z(idx(E + e));
            if (!(s > 0.0)) return kInf;
            b -= std::log(s);
        }
        for (std::size_t k = 0; k < tasks_.size(); ++k) {
            if (by_mobile_[k].empty() || equality_[k]) continue;
            const double sum = bit_sum(z, k);
            if (!(hi_[k] - sum > 0.0)) return kInf;
            b -= std::log(hi_[k] - sum);
            if (lo_[k] > 0.0) {
                if (!(sum - lo_[k] > 0.0)) return kInf;
                b -= std::log(sum - lo_[k]);
            }
        }
        return b;
    }

    // Gradient and Hessian of tb * objective + barrier.
    void derivatives(const Eigen::VectorXd& z, double tb, Eigen::VectorXd& g,
                     Eigen::SparseMatrix<double>& H) const
    {
        const std::size_t E = entries();
        g.setZero(static_cast<Eigen::Index>(dim()));
        Triplets trip;
        const double w = tb / E0_;
        for (std::size_t k = 0; k < tasks_.size(); ++k) {
            const auto& members = by_mobile_[k];
            if (members.empty()) continue;
            const double Ls = scale_[k];
            const double off = bit_sum(z, k) * Ls;
            const double slope = local_slope(tasks_[k], params_, off);
            const double curv = local_curvature(tasks_[k], params_, off);
            for (auto e : members) {
                const double tn = tau(e);
                const auto p = offload_partials(tasks_[k], params_, z(idx(e)) * Ls, z(idx(E + e)) * tn);
                g(idx(e)) += w * Ls * (p.db + slope);
                g(idx(E + e)) += w * tn * p.dt;
                trip.emplace_back(idx(e), idx(e), w * Ls * Ls * p.dbb);
                trip.emplace_back(idx(e), idx(E + e), w * Ls * tn * p.dbt);
                trip.emplace_back(idx(E + e), idx(e), w * Ls * tn * p.dbt);
                trip.emplace_back(idx(E + e), idx(E + e), w * tn * tn * p.dtt);
            }
            double pair = w * Ls * Ls * curv;
            if (!equality_[k]) {
                const double sum = bit_sum(z, k);
                const double up = hi_[k] - sum;
                for (auto e : members) g(idx(e)) += 1.0 / up;
                pair += 1.0 / (up * up);
                if (lo_[k] > 0.0) {
                    const double dn = sum - lo_[k];
                    for (auto e : members) g(idx(e)) -= 1.0 / dn;
                    pair += 1.0 / (dn * dn);
                }
            }
            for (auto e1 : members) {
                for (auto e2 : members) trip.emplace_back(idx(e1), idx(e2), pair);
            }
        }
        for (Eigen::Index i = 0; i < z.size(); ++i) {
            g(i) -= 1.0 / z(i);
            trip.emplace_back(i, i, 1.0 / (z(i) * z(i)));
        }
        for (const auto& members : by_epoch_) {
            if (members.empty()) continue;
            double s = 1.0;
            for (auto e : members) s -= z(idx(E + e));
            for (auto e : members) g(idx(E + e)) += 1.0 / s;
            const double pair = 1.0 / (s * s);
            for (auto e1 : members) {
                for (auto e2 : members) trip.emplace_back(idx(E + e1), idx(E + e2), pair);
            }
        }
        H.resize(z.size(), z.size());
        H.setFromTriplets(trip.begin(), trip.end());
    }

    Allocation to_allocation(const Eigen::VectorXd& z) const
    {
        const std::size_t E = entries();
        Allocation a = Allocation::zeros(timeline_);
        for (std::size_t e = 0; e < E; ++e) {
            const auto& en = entries_[e];
            a.bits[en.k][en.j] = z(idx(e)) * scale_[en.k];
            a.durations[en.k][en.j] = z(idx(E + e)) * tau(e);
        }
        for (std::size_t k = 0; k < tasks_.size(); ++k) {
            const double total = a.total_bits(k);
            if (total > tasks_[k].data_bits && total > 0.0) {
                for (auto& v : a.bits[k]) v *= tasks_[k].data_bits / total;
            }
        }
        return a;
    }

private:
    static Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }
    double tau(std::size_t e) const { return timeline_.epoch_lengths[entries_[e].n]; }
    double bit_sum(const Eigen::VectorXd& z, std::size_t k) const
    {
        double s = 0.0;
        for (auto e : by_mobile_[k]) s += z(idx(e));
        return s;
    }

    std::span<const TaskSpec> tasks_;
    const SystemParams& params_;
    const Timeline& timeline_;
    std::vector<Entry> entries_;
    std::vector<std::vector<std::size_t>> by_mobile_, by_epoch_;
    std::vector<double> scale_, lo_, hi_;
    std::vector<bool> equality_;
    std::vector<std::size_t> eq_rows_;
    std::size_t ineq_ = 0;
    double E0_ = 0.0;
};

// Newton direction for H d = -g subject to sum_{e in mobile} d_x = 0 for
// every equality row.
bool newton_direction(const Barrier& prob, const Eigen::SparseMatrix<double>& H,
                      const Eigen::VectorXd& g, Eigen::VectorXd& d)
{
    // Near the boundary the system can lose definiteness to rounding; retry
    // with a growing diagonal shift.
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
    ldlt.compute(H);
    const double scale = H.diagonal().cwiseAbs().maxCoeff();
    for (double shift = 1e-14; ldlt.info() != Eigen::Success || (ldlt.vectorD().array() <= 0.0).any();
         shift *= 100.0) {
        if (shift > 1e-4) return false;
        ldlt.setShift(shift * scale);
        ldlt.compute(H);
    }
    d = ldlt.solve(-g);
    const auto& rows = prob.equality_rows();
    if (rows.empty()) return d.allFinite();
    const auto q = static_cast<Eigen::Index>(rows.size());
    Eigen::MatrixXd W(g.size(), q);
    Eigen::MatrixXd S(q, q);
    Eigen::VectorXd Ad(q);
    for (Eigen::Index r = 0; r < q; ++r) {
        Eigen::VectorXd a = Eigen::VectorXd::Zero(g.size());
        for (auto e : prob.mobile_entries(rows[static_cast<std::size_t>(r)])) {
            a(static_cast<Eigen::Index>(e)) = 1.0;
        }
        W.col(r) = ldlt.solve(a);
    }
    for (Eigen::Index r = 0; r < q; ++r) {
        const auto& members = prob.mobile_entries(rows[static_cast<std::size_t>(r)]);
        double ad = 0.0;
        for (auto e : members) ad += d(static_cast<Eigen::Index>(e));
        Ad(r) = ad;
        for (Eigen::Index c = 0; c < q; ++c) {
            double s = 0.0;
            for (auto e : members) s += W(static_cast<Eigen::Index>(e), c);
            S(r, c) = s;
        }
    }
    const Eigen::VectorXd nu = S.ldlt().solve(Ad);
    d -= W * nu;
    return d.allFinite();
}

} // namespace

std::vector<double> project_epoch_simplex(std::span<const double> values, double cap)
{
    if (cap < 0.0) throw InvalidInput("project_epoch_simplex: cap must be >= 0");
    std::vector<double> out(values.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        out[i] = std::max(values[i], 0.0);
        sum += out[i];
    }
    if (sum <= cap) return out;
    project_sum_equal(values, cap, out);
    return out;
}

std::vector<double> project_capped_sum_box(std::span<const double> values, double lo, double hi)
{
    if (!(lo >= 0.0 && lo <= hi)) throw InvalidInput("project_capped_sum_box: need 0 <= lo <= hi");
    std::vector<double> out(values.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        out[i] = std::max(values[i], 0.0);
        sum += out[i];
    }
    if (sum > hi) {
        project_sum_equal(values, hi, out);
    } else if (sum < lo) {
        project_sum_equal(values, lo, out);
    }
    return out;
}

Allocation objective_gradient(std::span<const TaskSpec> tasks,
                              const SystemParams& params,
                              const Timeline& timeline,
                              const Allocation& at)
{
    check_params(params);
    Allocation g = Allocation::zeros(timeline);
    for (std::size_t k = 0; k < tasks.size(); ++k) {
        const double dlocal = local_slope(tasks[k], params, at.total_bits(k));
        for (std::size_t j = 0; j < at.bits[k].size(); ++j) {
            Partials p;
            if (at.bits[k][j] > 0.0) {
                if (!(at.durations[k][j] > 0.0)) {
                    throw AllocationError("objective_gradient: bits without airtime");
                }
                p = offload_partials(tasks[k], params, at.bits[k][j], at.durations[k][j]);
            }
            g.bits[k][j] = p.db + dlocal;
            g.durations[k][j] = p.dt;
        }
    }
    return g;
}

OracleResult oracle_solve(std::span<const TaskSpec> tasks,
                          const SystemParams& params,
                          const Timeline& timeline,
                          const OracleOptions& options)
{
    if (!(options.gap_tol > 0.0) || !(options.barrier_growth > 1.0)) {
        throw InvalidInput("oracle: gap tolerance must be > 0 and barrier growth > 1");
    }
    if (tasks.size() * std::max<std::size_t>(timeline.num_epochs(), 1) > 10000) {
        throw InvalidInput("oracle: instance too large (K * N > 10^4)");
    }
    const Barrier prob(tasks, params, timeline);
    OracleResult res;
    if (prob.dim() == 0) {
        res.alloc = Allocation::zeros(timeline);
        res.objective = objective(tasks, params, timeline, res.alloc);
        return res;
    }

    Eigen::VectorXd z = prob.start();
    double f = prob.objective(z);
    if (!std::isfinite(f) || !std::isfinite(prob.barrier(z))) {
        throw OracleNonConvergence("oracle: starting point outside the domain", {});
    }
    const double m = static_cast<double>(prob.inequalities());
    double tb = m / std::max(f, 1e-12);
    Eigen::VectorXd g, d;
    Eigen::SparseMatrix<double> H;
    bool done = false;
    while (!done) {
        for (int inner = 0; inner < 200 && res.iterations < options.max_newton; ++inner) {
            prob.derivatives(z, tb, g, H);
            if (!newton_direction(prob, H, g, d)) {
                throw OracleNonConvergence("oracle: Newton system is not positive definite", res.trace);
            }
            const double slope = g.dot(d);
            if (!(slope < 0.0) || -slope <= 1e-10) break;
            ++res.iterations;
            const double phi = tb * prob.objective(z) + prob.barrier(z);
            double step = 1.0;
            bool accepted = false;
            for (int ls = 0; ls < 80; ++ls) {
                const Eigen::VectorXd trial = z + step * d;
                const double b = prob.barrier(trial);
                if (std::isfinite(b)) {
                    const double phi_t = tb * prob.objective(trial) + b;
                    if (std::isfinite(phi_t)
                        && phi_t <= phi + options.armijo * step * slope + 1e-15 * std::abs(phi)) {
                        z = trial;
                        accepted = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            if (!accepted) break;
        }
        f = prob.objective(z);
        res.trace.push_back(f * prob.energy_scale());
        if (m / tb <= options.gap_tol * f) {
            done = true;
        } else if (res.iterations >= options.max_newton) {
            std::ostringstream os;
            os << "oracle: Newton budget exhausted with relative gap " << m / tb / f;
            throw OracleNonConvergence(os.str(), res.trace);
        } else {
            tb *= options.barrier_growth;
        }
    }
    res.gap_bound = m / tb * prob.energy_scale();
    res.alloc = prob.to_allocation(z);
    res.objective = objective(tasks, params, timeline, res.alloc);
    return res;
}

double brute_force_small(std::span<const TaskSpec> tasks,
                         const SystemParams& params,
                         const Timeline& timeline,
                         int grid_points_per_axis)
{
    if (grid_points_per_axis < 2) throw InvalidInput("brute_force_small: need >= 2 grid points");
    struct Var
    {
        std::size_t k, j;
        bool is_bits;
        double upper;
    };
    std::vector<Var> vars;
    for (std::size_t k = 0; k < tasks.size(); ++k) {
        for (std::size_t j = 0; j < timeline.epoch_sets[k].size(); ++j) {
            const auto n = static_cast<std::size_t>(timeline.epoch_sets[k][j]);
            if (!(timeline.epoch_lengths[n] > 0.0)) continue;
            vars.push_back({k, j, true, tasks[k].data_bits});
            vars.push_back({k, j, false, timeline.epoch_lengths[n]});
        }
    }
    if (vars.size() > 4) throw InvalidInput("brute_force_small: more than four variables");
    std::vector<MobileCoeffs> coeffs;
    for (const auto& t : tasks) coeffs.push_back(mobile_coeffs(t, params));

    Allocation a = Allocation::zeros(timeline);
    std::vector<int> idx(vars.size(), 0);
    const int G = grid_points_per_axis;
    double best = kInf;
    for (;;) {
        for (std::size_t v = 0; v < vars.size(); ++v) {
            const double val = vars[v].upper * idx[v] / (G - 1);
            (vars[v].is_bits ? a.bits : a.durations)[vars[v].k][vars[v].j] = val;
        }
        bool ok = true;
        for (std::size_t k = 0; k < tasks.size() && ok; ++k) {
            const double total = a.total_bits(k);
            ok = total >= coeffs[k].r_min_bits && total <= coeffs[k].r_max_bits;
            for (std::size_t j = 0; j < a.bits[k].size() && ok; ++j) {
                ok = !(a.bits[k][j] > 0.0 && a.durations[k][j] == 0.0);
            }
        }
        if (ok) {
            std::vector<double> load(timeline.num_epochs(), 0.0);
            for (std::size_t k = 0; k < tasks.size(); ++k) {
                for (std::size_t j = 0; j < a.durations[k].size(); ++j) {
                    load[static_cast<std::size_t>(timeline.epoch_sets[k][j])] += a.durations[k][j];
                }
            }
            for (std::size_t n = 0; n < load.size() && ok; ++n) {
                ok = load[n] <= timeline.epoch_lengths[n] * (1.0 + 1e-12);
            }
        }
        if (ok) best = std::min(best, objective(tasks, params, timeline, a));

        std::size_t v = 0;
        while (v < vars.size() && ++idx[v] == G) idx[v++] = 0;
        if (v == vars.size()) break;
    }
    return best;
}

} // namespace meco::oracle
