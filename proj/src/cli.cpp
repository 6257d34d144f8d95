#include <meco/cli.hpp>

#include <meco/bcd.hpp>
#include <meco/oracle.hpp>
#include <meco/ordered.hpp>
#include <meco/reverse.hpp>
#include <meco/schedule.hpp>

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace meco::cli {

namespace {

using io::Json;

constexpr const char* kMismatch = "solver/instance mismatch";

// Positions of `tasks` stably sorted by arrival.
std::vector<std::size_t> arrival_permutation(std::span<const TaskSpec> tasks)
{
    std::vector<std::size_t> perm(tasks.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::stable_sort(perm.begin(), perm.end(),
                     [&](std::size_t a, std::size_t b) { return tasks[a].arrival < tasks[b].arrival; });
    return perm;
}

std::vector<TaskSpec> permuted(std::span<const TaskSpec> tasks, std::span<const std::size_t> perm)
{
    std::vector<TaskSpec> out;
    for (auto i : perm) out.push_back(tasks[i]);
    return out;
}

// Maps a schedule over the sorted list back to input positions.
Schedule unpermute(const Schedule& s, std::span<const std::size_t> perm)
{
    Schedule out;
    out.intervals.resize(perm.size());
    for (std::size_t i = 0; i < perm.size(); ++i) out.intervals[perm[i]] = s.intervals[i];
    for (int o : s.order) out.order.push_back(static_cast<int>(perm[static_cast<std::size_t>(o)]));
    return out;
}

bool ordered_model_applies(std::span<const TaskSpec> sorted, const SystemParams& params)
{
    try {
        ordered::require_ordered_model(sorted, params);
        return true;
    } catch (const SolverMismatch&) {
        return false;
    }
}

[[noreturn]] void mismatch(const std::string& detail)
{
    throw SolverMismatch(std::string(kMismatch) + ": " + detail);
}

void require_structured(std::span<const TaskSpec> sorted, const SystemParams& params, OrderClass want,
                        const char* solver)
{
    const OrderClass got = classify_order(sorted);
    if (got != want) {
        mismatch(std::string(solver) + " solver needs " + to_string(want)
                 + " arrival-deadline order, instance is " + to_string(got));
    }
    ordered::require_ordered_model(sorted, params);
}

Json kkt_json(const ordered::KktResiduals& k)
{
    return Json{{"stationarity", k.stationarity},
                {"primal", k.primal},
                {"dual", k.dual},
                {"complementarity", k.complementarity}};
}

struct Solved
{
    Allocation alloc;
    std::optional<Schedule> schedule;
    double objective = 0.0;
    double tol = 0.0;
    int iterations = 0;
    bool converged = true;
    Json extra = Json::object();
};

} // namespace

const char* to_string(Solver s) noexcept
{
    switch (s) {
    case Solver::Auto: return "auto";
    case Solver::Bcd: return "bcd";
    case Solver::Ordered: return "ordered";
    case Solver::Reverse: return "reverse";
    case Solver::Oracle: return "oracle";
    }
    return "?";
}

std::optional<Solver> solver_from_string(std::string_view s)
{
    for (auto v : {Solver::Auto, Solver::Bcd, Solver::Ordered, Solver::Reverse, Solver::Oracle}) {
        if (s == to_string(v)) return v;
    }
    return std::nullopt;
}

Solver dispatch(const io::ScenarioFile& scenario)
{
    const auto sorted = permuted(scenario.tasks, arrival_permutation(scenario.tasks));
    const OrderClass c = classify_order(sorted);
    if (c == OrderClass::General || !ordered_model_applies(sorted, scenario.params)) return Solver::Bcd;
    return c == OrderClass::Identical ? Solver::Ordered : Solver::Reverse;
}

Json solve_scenario(const io::ScenarioFile& scenario, const SolveRequest& request)
{
    const auto& tasks = scenario.tasks;
    const auto& params = scenario.params;
    check_params(params);
    const Timeline tl = build_timeline(tasks);
    const auto report = validate_tasks(tasks, params);
    for (const auto& m : report.mobiles) {
        if (!m.feasible) {
            std::ostringstream os;
            os << "mobile " << m.id << " is infeasible: R_min = " << m.r_min_bits << " > R_max = " << m.r_max_bits;
            throw InfeasibleInstance(os.str());
        }
    }
    if (request.tol && !(*request.tol > 0.0)) throw InvalidInput("tolerance must be > 0");

    const Solver solver = request.solver == Solver::Auto ? dispatch(scenario) : request.solver;
    const auto perm = arrival_permutation(tasks);
    const auto sorted = permuted(tasks, perm);
    Solved s;
    switch (solver) {
    case Solver::Auto:
    case Solver::Bcd: {
        bcd::Options opt;
        if (request.tol) opt.tol = *request.tol;
        const auto r = bcd::solve(tasks, params, tl, opt);
        s.alloc = r.alloc;
        s.objective = r.report.objective_joules;
        s.tol = opt.tol;
        s.iterations = r.report.iterations;
        s.converged = r.report.converged;
        break;
    }
    case Solver::Ordered: {
        require_structured(sorted, params, OrderClass::Identical, "ordered");
        ordered::MasterOptions opt;
        if (request.tol) opt.tol = *request.tol;
        const auto m = ordered::solve_master(sorted, params, opt);
        s.schedule = unpermute(ordered::expand_to_schedule(m), perm);
        s.objective = m.objective;
        s.tol = opt.tol;
        s.iterations = m.iterations;
        s.extra["kkt"] = kkt_json(m.kkt);
        break;
    }
    case Solver::Reverse: {
        require_structured(sorted, params, OrderClass::Reverse, "reverse");
        ordered::MasterOptions opt;
        if (request.tol) opt.tol = *request.tol;
        const auto r = reverse::solve_reverse(sorted, params, opt);
        s.schedule = unpermute(r.schedule, perm);
        s.objective = r.objective;
        s.tol = opt.tol;
        s.iterations = r.master.iterations;
        s.extra["kkt"] = kkt_json(r.master.kkt);
        break;
    }
    case Solver::Oracle: {
        oracle::OracleOptions opt;
        if (request.tol) opt.gap_tol = *request.tol;
        const auto r = oracle::oracle_solve(tasks, params, tl, opt);
        s.alloc = r.alloc;
        s.objective = r.objective;
        s.tol = opt.gap_tol;
        s.iterations = r.iterations;
        s.extra["gap_bound_j"] = r.gap_bound;
        break;
    }
    }
    if (s.schedule) s.alloc = schedule_to_allocation(*s.schedule, tasks, tl);

    const auto split = energy_by_mobile(tasks, params, tl, s.alloc);
    const auto res = allocation_residuals(tasks, tl, s.alloc);
    Json mobiles = Json::array();
    for (std::size_t k = 0; k < tasks.size(); ++k) {
        Json alloc = Json::array();
        for (std::size_t j = 0; j < tl.epoch_sets[k].size(); ++j) {
            alloc.push_back(Json{{"epoch", tl.epoch_sets[k][j]},
                                 {"bits", s.alloc.bits[k][j]},
                                 {"duration", s.alloc.durations[k][j]}});
        }
        Json m{{"id", tasks[k].id},
               {"offloaded_bits", s.alloc.total_bits(k)},
               {"local_energy_j", split[k].local},
               {"offload_energy_j", split[k].offload},
               {"allocation", alloc}};
        if (s.schedule) {
            Json iv = Json::array();
            for (const auto& i : s.schedule->intervals[k]) {
                iv.push_back(Json{{"start", i.start}, {"end", i.end}, {"bits", i.bits}});
            }
            m["intervals"] = iv;
        }
        mobiles.push_back(m);
    }
    Json doc{{"schema_version", kSchemaVersion},
             {"solver", to_string(solver)},
             {"tolerance", s.tol},
             {"order_class", to_string(classify_order(tasks))},
             {"objective_j", s.objective},
             {"iterations", s.iterations},
             {"converged", s.converged},
             {"residuals",
              Json{{"time_sharing", res.time_sharing},
                   {"data_bounds", res.data_bounds},
                   {"negativity", res.negativity}}},
             {"epoch_boundaries", tl.boundaries},
             {"mobiles", mobiles}};
    if (s.schedule) {
        Json order = Json::array();
        for (int o : s.schedule->order) order.push_back(tasks[static_cast<std::size_t>(o)].id);
        doc["channel_order"] = order;
    }
    doc.update(s.extra);
    return doc;
}

namespace {

int cmd_validate(const std::string& path, std::ostream& out, std::ostream& err)
{
    io::ScenarioFile sc;
    try {
        sc = io::parse_scenario(io::read_json_file(path));
        check_params(sc.params);
    } catch (const io::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    if (sc.tasks.empty()) {
        err << "error: scenario has no tasks\n";
        return 1;
    }
    const auto report = validate_tasks(sc.tasks, sc.params);
    for (const auto& m : report.mobiles) {
        out << "mobile " << m.id << ": ";
        if (!m.valid) {
            out << "invalid (" << m.problem << ")\n";
        } else {
            out << (m.feasible ? "feasible" : "infeasible") << " r_min_bits=" << m.r_min_bits
                << " r_max_bits=" << m.r_max_bits << '\n';
        }
    }
    bool all_valid = std::all_of(report.mobiles.begin(), report.mobiles.end(), [](const auto& m) { return m.valid; });
    if (all_valid) {
        out << "order: " << to_string(classify_order(sc.tasks)) << '\n';
        out << "overlap: " << (report.overlap_holds ? "holds" : "violated") << '\n';
    }
    if (!report.all_feasible()) {
        for (const auto& m : report.mobiles) {
            if (!m.feasible) {
                err << "error: mobile " << m.id << (m.valid ? " is infeasible" : " is invalid: " + m.problem) << '\n';
            }
        }
        return 1;
    }
    return 0;
}

void write_text(const std::string& path, const std::string& text, std::ostream& out)
{
    if (path.empty()) {
        out << text;
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw io::ParseError("cannot write " + path);
    f << text;
}

int cmd_solve(const std::string& path, const std::string& solver_name, std::optional<double> tol,
              const std::string& out_path, bool verbose, std::ostream& out, std::ostream& err)
{
    const auto solver = solver_from_string(solver_name);
    if (!solver) {
        err << "error: unknown solver '" << solver_name << "'\n";
        return 2;
    }
    io::ScenarioFile sc;
    try {
        sc = io::parse_scenario(io::read_json_file(path));
    } catch (const io::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
    try {
        const Json doc = solve_scenario(sc, {*solver, tol});
        write_text(out_path, doc.dump(2) + "\n", out);
        if (verbose) {
            err << "solver " << doc["solver"].get<std::string>() << ": objective " << std::setprecision(10)
                << doc["objective_j"].get<double>() << " J after " << doc["iterations"].get<int>()
                << " iterations\n";
        }
        return 0;
    } catch (const Error& e) {
        const Json doc{{"schema_version", kSchemaVersion},
                       {"error", Json{{"kind", e.kind()}, {"message", e.what()}}}};
        try {
            write_text(out_path, doc.dump(2) + "\n", out);
        } catch (const io::ParseError& w) {
            err << "error: " << w.what() << '\n';
        }
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const io::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
}

int cmd_sweep(const std::string& path, const std::string& out_path, std::optional<std::uint64_t> seed,
              unsigned jobs, std::ostream& out, std::ostream& err)
{
    harness::SweepSpec spec;
    try {
        spec = io::parse_sweep_spec(io::read_json_file(path));
    } catch (const io::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
    if (seed) spec.base.seed = *seed;
    spec.jobs = jobs;
    std::vector<harness::ExperimentRow> rows;
    try {
        rows = harness::run_sweep(spec);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    std::ostringstream csv;
    harness::write_csv(csv, rows);
    std::ostream& summary = out_path.empty() ? err : out;
    try {
        write_text(out_path, csv.str(), out);
    } catch (const io::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
    summary << std::left << std::setw(12) << "value" << std::setw(22) << "policy" << std::setw(16) << "mean_energy_j"
            << std::setw(10) << "ok" << "failed\n";
    bool empty_point = false;
    for (const auto& r : rows) {
        summary << std::left << std::setw(12) << r.value << std::setw(22) << to_string(r.policy) << std::setw(16)
                << std::setprecision(6) << r.mean_energy_j << std::setw(10) << r.realizations << r.failures << '\n';
        empty_point = empty_point || r.realizations == 0;
    }
    if (empty_point) {
        err << "error: every realization failed at some sweep point\n";
        return 1;
    }
    return 0;
}

} // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Energy-optimal offloading for asynchronous mobile-edge computing", "meco"};
    app.require_subcommand(1);
    bool verbose = false;
    app.add_flag("-v,--verbose", verbose, "Print a short report to stderr");

    std::string scenario_path;
    auto* validate = app.add_subcommand("validate", "Check a scenario file");
    validate->add_option("file", scenario_path, "Scenario JSON")->required();

    std::string solver = "auto";
    std::optional<double> tol;
    std::string out_path;
    auto* solve = app.add_subcommand("solve", "Solve a scenario and write the solution JSON");
    solve->add_option("file", scenario_path, "Scenario JSON")->required();
    solve->add_option("--solver", solver, "auto, bcd, ordered, reverse or oracle")->capture_default_str();
    solve->add_option("--tol", tol, "Solver tolerance");
    solve->add_option("-o,--output", out_path, "Solution file (default stdout)");

    std::string spec_path;
    std::optional<std::uint64_t> seed;
    unsigned jobs = 0;
    auto* sweep = app.add_subcommand("sweep", "Run a parameter sweep and write CSV");
    sweep->add_option("spec", spec_path, "Sweep spec JSON")->required();
    sweep->add_option("-o,--output", out_path, "CSV file (default stdout)");
    sweep->add_option("--seed", seed, "Override the master seed");
    sweep->add_option("--jobs", jobs, "Worker threads (0: all cores)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            return 0;
        }
        err << "error: " << e.what() << '\n';
        return 2;
    }
    if (*validate) return cmd_validate(scenario_path, out, err);
    if (*solve) return cmd_solve(scenario_path, solver, tol, out_path, verbose, out, err);
    return cmd_sweep(spec_path, out_path, seed, jobs, out, err);
}

} // namespace meco::cli
