#include <meco/bcd.hpp>

#include <meco/lambert.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

namespace meco::bcd {

const char* to_string(Regime r) noexcept
{
    switch (r) {
    case Regime::Interior: return "interior";
    case Regime::MobileConstrainedMin: return "mobile_constrained_min";
    case Regime::CloudConstrainedMax: return "cloud_constrained_max";
    }
    return "unknown";
}

namespace {

// Airtime or bits at or below this are treated as "not offloading".
constexpr double kPositive = 1e-15;
constexpr int kMaxBisection = 200;

struct DualRoot
{
    double xi = 0.0;
    double total = 0.0;
};

// Bisection for U(xi) = (L - total(xi))^2 - xi on [lo, hi], where total() is
// nondecreasing and stays <= L on the bracket, so U is strictly decreasing.
template <class TotalFn>
DualRoot solve_dual(double L, double lo, double hi, TotalFn&& total)
{
    auto U = [&](double xi) {
        const double d = L - total(xi);
        return d * d - xi;
    };
    if (U(hi) >= 0.0) return {hi, total(hi)};
    for (int it = 0; it < kMaxBisection; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double u = U(mid);
        if (u == 0.0) {
            lo = hi = mid;
            break;
        }
        (u > 0.0 ? lo : hi) = mid;
        if (hi - lo <= 1e-15 * hi) break;
    }
    const double xi = 0.5 * (lo + hi);
    return {xi, total(xi)};
}

void check_durations(std::span<const double> durations)
{
    for (double t : durations) {
        if (!(t > 0.0) || !std::isfinite(t)) {
            throw InvalidInput("partition_data: durations must be finite and > 0");
        }
    }
}

// Moves the rounding residue of a left-to-right sum into one entry, so the
// entries add up to `target` exactly as summed elsewhere. Later entries are
// tried first: ulp steps on them are less likely to skip over the target.
// Small entries are left alone so their relative value barely moves.
void fit_sum(std::vector<double>& v, double target)
{
    const auto total = [&] { return std::accumulate(v.begin(), v.end(), 0.0); };
    const double s = total();
    if (s == target || v.empty()) return;
    for (std::size_t at = v.size(); at-- > 0;) {
        if (!(v[at] > 1e9 * std::abs(target - s))) continue;
        const double keep = v[at];
        v[at] = keep + (target - s);
        for (int pass = 0; pass < 8; ++pass) {
            const double now = total();
            if (now == target) return;
            v[at] = std::nextafter(v[at], now < target ? std::numeric_limits<double>::max() : 0.0);
        }
        v[at] = keep;
    }
}

// Shared tail of both partition variants: clamp the unconstrained total into
// [r_min, r_max] and spread it proportionally to airtime (equal rates).
PartitionSolution finish_partition(const MobileCoeffs& coeffs,
                                   std::span<const double> durations,
                                   double sum_t,
                                   const DualRoot& root)
{
    PartitionSolution sol;
    sol.dual_root = root.xi;
    sol.unconstrained_total = root.total;
    double total = root.total;
    if (root.total < coeffs.r_min_bits) {
        sol.regime = Regime::MobileConstrainedMin;
        total = coeffs.r_min_bits;
    } else if (root.total > coeffs.r_max_bits) {
        sol.regime = Regime::CloudConstrainedMax;
        total = coeffs.r_max_bits;
    }
    sol.bits.resize(durations.size());
    for (std::size_t j = 0; j < durations.size(); ++j) {
        sol.bits[j] = total * (durations[j] / sum_t);
    }
    fit_sum(sol.bits, total);
    return sol;
}

// Handles the degenerate inputs common to both models; returns true when
// `out` is already the answer.
bool trivial_partition(const MobileCoeffs& coeffs,
                       const TaskSpec& task,
                       std::span<const double> durations,
                       PartitionSolution& out)
{
    if (durations.empty()) {
        if (coeffs.r_min_bits > 0.0) {
            std::ostringstream os;
            os << "mobile " << task.id << " must offload " << coeffs.r_min_bits
               << " bits but has no airtime";
            throw AllocationError(os.str());
        }
        out = {};
        return true;
    }
    check_durations(durations);
    if (task.data_bits == 0.0) {
        out = {};
        out.bits.assign(durations.size(), 0.0);
        return true;
    }
    return false;
}

} // namespace

PartitionSolution partition_data_monomial(const MobileCoeffs& coeffs,
                                          const TaskSpec& task,
                                          const SystemParams& params,
                                          std::span<const double> durations)
{
    PartitionSolution out;
    if (trivial_partition(coeffs, task, durations, out)) return out;

    const double L = task.data_bits;
    const double T = task.latency();
    const double m = params.monomial_order;
    const double sum_t = std::accumulate(durations.begin(), durations.end(), 0.0);

    // total(xi) = sum_n h(xi) = (3 b xi / (m a T^2))^{1/(m-1)} * sum_t, in logs.
    const double log_scale =
        (std::log(3.0 * coeffs.b) - std::log(m * coeffs.a * T * T)) / (m - 1.0) + std::log(sum_t);
    auto total = [&](double xi) {
        return xi > 0.0 ? std::exp(log_scale + std::log(xi) / (m - 1.0)) : 0.0;
    };
    auto xi_for_total = [&](double x) { return (m - 1.0) * (std::log(x) - log_scale); };

    double hi = L * L;
    if (const double log_xi_full = xi_for_total(L); log_xi_full < std::log(hi)) {
        hi = std::exp(log_xi_full);
    }
    double lo = 0.0;
    if (coeffs.r_max_bits > 0.0) {
        // Narrow with the bracket endpoint at which the offload hits r_max.
        const double xi_hat = std::exp(xi_for_total(coeffs.r_max_bits));
        if (xi_hat < hi) {
            const double d = L - coeffs.r_max_bits;
            if (d * d - xi_hat <= 0.0) {
                hi = xi_hat;
            } else {
                lo = xi_hat;
            }
        }
    }
    return finish_partition(coeffs, durations, sum_t, solve_dual(L, lo, hi, total));
}

double exponential_threshold(const TaskSpec& task, const SystemParams& params)
{
    const double T = task.latency();
    return 3.0 * params.gamma_switch * std::pow(task.cycles_per_bit, 3) * task.channel_gain
           * params.bandwidth_hz / (T * T * params.noise_power * std::numbers::ln2);
}

PartitionSolution partition_data_exponential(const MobileCoeffs& coeffs,
                                             const TaskSpec& task,
                                             const SystemParams& params,
                                             std::span<const double> durations)
{
    PartitionSolution out;
    if (trivial_partition(coeffs, task, durations, out)) return out;

    const double L = task.data_bits;
    const double u = exponential_threshold(task, params);
    const double sum_t = std::accumulate(durations.begin(), durations.end(), 0.0);
    const double slope = params.bandwidth_hz * sum_t / std::numbers::ln2;
    const double log_u = std::log(u);

    // total(xi) = sum_n (B t_n / ln 2) ln(u xi), floored at zero.
    auto total = [&](double xi) {
        if (!(xi > 0.0)) return 0.0;
        return std::max(0.0, slope * (log_u + std::log(xi)));
    };

    double hi = L * L;
    if (const double log_xi_full = L / slope - log_u; log_xi_full < std::log(hi)) {
        hi = std::exp(log_xi_full);
    }
    return finish_partition(coeffs, durations, sum_t, solve_dual(L, 0.0, hi, total));
}

PartitionSolution partition_data(const MobileCoeffs& coeffs,
                                 const TaskSpec& task,
                                 const SystemParams& params,
                                 std::span<const double> durations)
{
    return params.model == EnergyModel::Monomial
               ? partition_data_monomial(coeffs, task, params, durations)
               : partition_data_exponential(coeffs, task, params, durations);
}

double local_bits_threshold(const MobileCoeffs& coeffs,
                            const TaskSpec& task,
                            const SystemParams& params,
                            double total_duration)
{
    const double L = task.data_bits;
    if (L == 0.0) return 0.0;
    if (!(total_duration > 0.0)) return L;
    const double T = task.latency();
    const double m = params.monomial_order;
    // (L - x)^{m-1} / x^2 = kappa, solved in logs; the left side falls from
    // +inf to 0 on (0, L).
    const double log_kappa = std::log(3.0 * coeffs.b) + (m - 1.0) * std::log(total_duration)
                             - std::log(m * coeffs.a * T * T);
    auto G = [&](double x) { return (m - 1.0) * std::log(L - x) - 2.0 * std::log(x) - log_kappa; };
    double lo = 0.0, hi = L;
    for (int it = 0; it < kMaxBisection; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        (G(mid) > 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

Regime regime_from_thresholds(const MobileCoeffs& coeffs,
                              const TaskSpec& task,
                              const SystemParams& params,
                              double total_duration)
{
    const double phi = local_bits_threshold(coeffs, task, params, total_duration);
    const double C = task.cycles_per_bit;
    const double T = task.latency();
    if (task.max_cpu_freq < C * phi / T) return Regime::MobileConstrainedMin;
    if (task.vm_cap_cycles < C * (task.data_bits - phi)) return Regime::CloudConstrainedMax;
    return Regime::Interior;
}

namespace {

void check_offloaders(double epoch_len, std::span<const Offloader> offloaders)
{
    if (!(epoch_len > 0.0)) throw InvalidInput("divide_time: epoch length must be > 0");
    if (offloaders.empty()) throw InvalidInput("divide_time: no offloaders");
    for (const auto& o : offloaders) {
        if (!(o.bits > 0.0)) throw InvalidInput("divide_time: offloader with non-positive bits");
        if (!(o.channel_gain > 0.0)) throw InvalidInput("divide_time: non-positive channel gain");
    }
}

// Rescales so the durations sum to epoch_len.
void normalize_to(std::vector<double>& t, double epoch_len)
{
    const double sum = std::accumulate(t.begin(), t.end(), 0.0);
    for (double& v : t) v *= epoch_len / sum;
    fit_sum(t, epoch_len);
}

} // namespace

std::vector<double> divide_time_monomial(double epoch_len,
                                         std::span<const Offloader> offloaders,
                                         const SystemParams& params)
{
    check_offloaders(epoch_len, offloaders);
    const double m = params.monomial_order;
    std::vector<double> t(offloaders.size());
    for (std::size_t i = 0; i < offloaders.size(); ++i) {
        const auto& o = offloaders[i];
        t[i] = std::pow((m - 1.0) * params.lambda_coeff / o.channel_gain, 1.0 / m) * o.bits;
    }
    normalize_to(t, epoch_len);
    return t;
}

double psi_bar(double rate, const SystemParams& params)
{
    if (rate < 0.0) throw InvalidInput("psi_bar: negative rate");
    return -params.noise_power
           * lambert_w0_shifted_inverse(rate * std::numbers::ln2 / params.bandwidth_hz);
}

double psi_bar_inverse(double value, const SystemParams& params)
{
    if (value > 0.0) throw InvalidInput("psi_bar_inverse: psi_bar takes only nonpositive values");
    // B (W0((value + N0) / (-N0 e)) + 1) / ln 2
    return params.bandwidth_hz * lambert_w0_shifted(-value / params.noise_power) / std::numbers::ln2;
}

std::vector<double> divide_time_exponential(double epoch_len,
                                            std::span<const Offloader> offloaders,
                                            const SystemParams& params)
{
    check_offloaders(epoch_len, offloaders);
    const std::size_t n = offloaders.size();
    if (n == 1) return {epoch_len};

    std::vector<double> t(n);
    auto durations_at = [&](double log_eta) {
        const double eta = std::exp(log_eta);
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double rate = psi_bar_inverse(-offloaders[i].channel_gain * eta, params);
            t[i] = rate > 0.0 ? offloaders[i].bits / rate : std::numeric_limits<double>::infinity();
            sum += t[i];
        }
        return sum;
    };

    // Start from the multiplier that would give every offloader the common
    // rate sum(bits) / epoch_len.
    double total_bits = 0.0;
    for (const auto& o : offloaders) total_bits += o.bits;
    const double gap = -psi_bar(total_bits / epoch_len, params);
    double log_eta0 = 0.0;
    for (const auto& o : offloaders) log_eta0 += std::log(gap / o.channel_gain);
    log_eta0 /= static_cast<double>(n);
    if (!std::isfinite(log_eta0)) {
        throw BracketError("divide_time_exponential: cannot seed the multiplier search");
    }

    // Sum of durations falls as eta grows.
    double lo = log_eta0, hi = log_eta0;
    const double step = std::log(4.0);
    int expand = 0;
    while (durations_at(lo) < epoch_len && expand++ < 400) lo -= step;
    expand = 0;
    while (durations_at(hi) > epoch_len && expand++ < 400) hi += step;
    if (!(durations_at(lo) >= epoch_len && durations_at(hi) <= epoch_len)) {
        std::ostringstream os;
        os << "divide_time_exponential: multiplier bracket failed on [" << std::exp(lo) << ", "
           << std::exp(hi) << "]; check units of bits, bandwidth and noise power";
        throw BracketError(os.str());
    }
    for (int it = 0; it < 4 * kMaxBisection; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double sum = durations_at(mid);
        if (std::abs(sum - epoch_len) <= 1e-13 * epoch_len) break;
        (sum > epoch_len ? lo : hi) = mid;
        if (hi - lo <= 1e-15 * std::max(1.0, std::abs(mid))) break;
    }
    durations_at(0.5 * (lo + hi));
    normalize_to(t, epoch_len);
    return t;
}

std::vector<double> divide_time(double epoch_len,
                                std::span<const Offloader> offloaders,
                                const SystemParams& params)
{
    return params.model == EnergyModel::Monomial
               ? divide_time_monomial(epoch_len, offloaders, params)
               : divide_time_exponential(epoch_len, offloaders, params);
}

namespace {

class Engine
{
public:
    Engine(std::span<const TaskSpec> tasks, const SystemParams& params, const Timeline& timeline)
        : tasks_(tasks), params_(params), timeline_(timeline)
    {
        check_params(params);
        if (timeline.num_mobiles() != tasks.size()) {
            throw InvalidInput("timeline was built for a different task list");
        }
        coeffs_.reserve(tasks.size());
        for (const auto& t : tasks) coeffs_.push_back(mobile_coeffs(t, params));
        alloc_ = Allocation::zeros(timeline);
    }

    void initialize(const std::optional<Allocation>& init)
    {
        if (init) {
            if (init->durations.size() != tasks_.size()) {
                throw InvalidInput("initial allocation has the wrong number of mobiles");
            }
            for (std::size_t k = 0; k < tasks_.size(); ++k) {
                if (init->durations[k].size() != timeline_.epoch_sets[k].size()) {
                    throw InvalidInput("initial allocation does not match the epoch sets");
                }
                alloc_.durations[k] = init->durations[k];
            }
            return;
        }
        for (std::size_t k = 0; k < tasks_.size(); ++k) {
            const auto& epochs = timeline_.epoch_sets[k];
            for (std::size_t j = 0; j < epochs.size(); ++j) {
                const auto n = static_cast<std::size_t>(epochs[j]);
                alloc_.durations[k][j] =
                    timeline_.epoch_lengths[n] / static_cast<double>(timeline_.user_sets[n].size());
            }
        }
    }

    void partition_all()
    {
        std::vector<double> d;
        std::vector<std::size_t> idx;
        std::vector<std::size_t> repaired;
        for (std::size_t k = 0; k < tasks_.size(); ++k) {
            auto& bits = alloc_.bits[k];
            const auto& dur = alloc_.durations[k];
            std::fill(bits.begin(), bits.end(), 0.0);
            if (tasks_[k].data_bits == 0.0) continue;
            d.clear();
            idx.clear();
            for (std::size_t j = 0; j < dur.size(); ++j) {
                if (dur[j] > kPositive) {
                    d.push_back(dur[j]);
                    idx.push_back(j);
                }
            }
            if (idx.empty()) {
                if (coeffs_[k].r_min_bits > 0.0) {
                    // Required bits but no airtime left: spread them over the
                    // window by epoch length and let those epochs be re-divided.
                    const auto& epochs = timeline_.epoch_sets[k];
                    const double span = tasks_[k].latency();
                    for (std::size_t j = 0; j < epochs.size(); ++j) {
                        const auto n = static_cast<std::size_t>(epochs[j]);
                        if (!(timeline_.epoch_lengths[n] > 0.0)) continue;
                        bits[j] = coeffs_[k].r_min_bits * (timeline_.epoch_lengths[n] / span);
                        repaired.push_back(n);
                    }
                    fit_sum(bits, coeffs_[k].r_min_bits);
                }
                continue;
            }
            const auto sol = partition_data(coeffs_[k], tasks_[k], params_, d);
            for (std::size_t i = 0; i < idx.size(); ++i) bits[idx[i]] = sol.bits[i];
        }
        for (auto n : repaired) divide_epoch(n);
    }

    void divide_all()
    {
        for (std::size_t n = 0; n < timeline_.num_epochs(); ++n) divide_epoch(n);
    }

    double objective() const { return meco::objective(tasks_, params_, timeline_, alloc_); }

    const Allocation& allocation() const noexcept { return alloc_; }

private:
    std::size_t slot(std::size_t k, std::size_t n) const
    {
        return n - static_cast<std::size_t>(timeline_.epoch_sets[k].front());
    }

    void divide_epoch(std::size_t n)
    {
        const double tau = timeline_.epoch_lengths[n];
        offloaders_.clear();
        members_.clear();
        for (int kk : timeline_.user_sets[n]) {
            const auto k = static_cast<std::size_t>(kk);
            const auto j = slot(k, n);
            double& bits = alloc_.bits[k][j];
            if (!(tau > 0.0) || bits <= kPositive) {
                bits = 0.0;
                alloc_.durations[k][j] = 0.0;
                continue;
            }
            offloaders_.push_back({tasks_[k].channel_gain, bits});
            members_.push_back(k);
        }
        if (offloaders_.empty()) return;
        const auto t = divide_time(tau, offloaders_, params_);
        for (std::size_t i = 0; i < members_.size(); ++i) {
            alloc_.durations[members_[i]][slot(members_[i], n)] = t[i];
        }
    }

    std::span<const TaskSpec> tasks_;
    const SystemParams& params_;
    const Timeline& timeline_;
    std::vector<MobileCoeffs> coeffs_;
    Allocation alloc_;
    std::vector<Offloader> offloaders_;
    std::vector<std::size_t> members_;
};

bool small_decrease(double prev, double cur, double tol)
{
    if (prev <= 0.0) return true;
    return (prev - cur) <= tol * prev;
}

Result finish(const Engine& eng, std::span<const TaskSpec> tasks, const Timeline& timeline,
              SolveReport report)
{
    Result r;
    r.alloc = eng.allocation();
    report.objective_joules = report.objective_trace.back();
    report.residuals = allocation_residuals(tasks, timeline, r.alloc);
    r.report = std::move(report);
    return r;
}

} // namespace

Result run_rounds(std::span<const TaskSpec> tasks,
                  const SystemParams& params,
                  const Timeline& timeline,
                  int rounds,
                  const std::optional<Allocation>& init)
{
    Engine eng(tasks, params, timeline);
    eng.initialize(init);
    eng.partition_all();
    SolveReport rep;
    rep.objective_trace.push_back(eng.objective());
    for (int r = 0; r < rounds; ++r) {
        eng.divide_all();
        eng.partition_all();
        rep.objective_trace.push_back(eng.objective());
        rep.iterations = r + 1;
    }
    const auto& tr = rep.objective_trace;
    rep.converged = tr.size() >= 2 && small_decrease(tr[tr.size() - 2], tr.back(), Options{}.tol);
    return finish(eng, tasks, timeline, std::move(rep));
}

Result solve(std::span<const TaskSpec> tasks,
             const SystemParams& params,
             const Timeline& timeline,
             const Options& options)
{
    if (!(options.tol > 0.0)) throw InvalidInput("bcd: tolerance must be > 0");
    if (options.max_iters < 1) throw InvalidInput("bcd: max_iters must be >= 1");
    Engine eng(tasks, params, timeline);
    eng.initialize(options.init);
    eng.partition_all();
    SolveReport rep;
    rep.objective_trace.push_back(eng.objective());
    for (int r = 0; r < options.max_iters; ++r) {
        eng.divide_all();
        eng.partition_all();
        const double prev = rep.objective_trace.back();
        const double cur = eng.objective();
        rep.objective_trace.push_back(cur);
        rep.iterations = r + 1;
        // Never stop before two rounds, so the result is never worse than
        // the two-round baseline.
        if (r >= 1 && small_decrease(prev, cur, options.tol)) {
            rep.converged = true;
            break;
        }
    }
    auto result = finish(eng, tasks, timeline, std::move(rep));
    if (!result.report.converged) {
        std::ostringstream os;
        os << "bcd: no convergence within " << options.max_iters << " iterations";
        throw NonConvergence(os.str(), std::move(result));
    }
    return result;
}

} // namespace meco::bcd
