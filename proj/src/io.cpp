#include <meco/io.hpp>

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <sstream>

namespace meco::io {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_object(const Json& j, const std::string& where)
{
    if (!j.is_object()) throw ParseError(where + ": expected an object");
}

void reject_unknown(const Json& j, const std::string& where, std::initializer_list<const char*> known)
{
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* k : known) ok = ok || key == k;
        if (!ok) throw ParseError(where + ": unknown field '" + key + "'");
    }
}

double get_number(const Json& j, const std::string& key, const std::string& where)
{
    if (!j.contains(key)) throw ParseError(where + ": missing field '" + key + "'");
    const auto& v = j.at(key);
    if (!v.is_number()) throw ParseError(where + ": field '" + key + "' must be a number");
    return v.get<double>();
}

void read_number(const Json& j, const std::string& key, const std::string& where, double& out)
{
    if (j.contains(key)) out = get_number(j, key, where);
}

double get_cap(const Json& j, const std::string& key, const std::string& where)
{
    if (!j.contains(key) || j.at(key).is_null()) return kInf;
    return get_number(j, key, where);
}

void read_range(const Json& j, const std::string& key, const std::string& where, double& lo, double& hi)
{
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
        throw ParseError(where + ": field '" + key + "' must be [min, max]");
    }
    lo = v[0].get<double>();
    hi = v[1].get<double>();
}

std::string get_string(const Json& j, const std::string& key, const std::string& where)
{
    const auto& v = j.at(key);
    if (!v.is_string()) throw ParseError(where + ": field '" + key + "' must be a string");
    return v.get<std::string>();
}

} // namespace

Json number_or_null(double v)
{
    return std::isfinite(v) ? Json(v) : Json(nullptr);
}

SystemParams parse_params(const Json& obj)
{
    const std::string where = "params";
    require_object(obj, where);
    reject_unknown(obj, where, {"model", "lambda_coeff", "gamma_switch", "monomial_order", "bandwidth_hz",
                                "noise_power"});
    SystemParams p;
    if (obj.contains("model")) {
        const auto m = get_string(obj, "model", where);
        if (m == "monomial") {
            p.model = EnergyModel::Monomial;
        } else if (m == "exponential") {
            p.model = EnergyModel::Exponential;
        } else {
            throw ParseError(where + ": model must be \"monomial\" or \"exponential\"");
        }
    }
    read_number(obj, "lambda_coeff", where, p.lambda_coeff);
    read_number(obj, "gamma_switch", where, p.gamma_switch);
    read_number(obj, "monomial_order", where, p.monomial_order);
    read_number(obj, "bandwidth_hz", where, p.bandwidth_hz);
    read_number(obj, "noise_power", where, p.noise_power);
    return p;
}

Json params_to_json(const SystemParams& p)
{
    return Json{{"model", to_string(p.model)},
                {"lambda_coeff", p.lambda_coeff},
                {"gamma_switch", p.gamma_switch},
                {"monomial_order", p.monomial_order},
                {"bandwidth_hz", p.bandwidth_hz},
                {"noise_power", p.noise_power}};
}

ScenarioFile parse_scenario(const Json& doc)
{
    require_object(doc, "scenario");
    reject_unknown(doc, "scenario", {"params", "tasks"});
    ScenarioFile sc;
    if (doc.contains("params")) sc.params = parse_params(doc.at("params"));
    if (!doc.contains("tasks") || !doc.at("tasks").is_array()) {
        throw ParseError("scenario: 'tasks' must be an array");
    }
    std::size_t i = 0;
    for (const auto& t : doc.at("tasks")) {
        const std::string where = "tasks[" + std::to_string(i++) + "]";
        require_object(t, where);
        reject_unknown(t, where, {"id", "arrival", "deadline", "data_bits", "cycles_per_bit", "max_cpu_freq",
                                  "vm_cap_cycles", "channel_gain"});
        TaskSpec task;
        if (!t.contains("id") || !t.at("id").is_number_integer()) {
            throw ParseError(where + ": 'id' must be an integer");
        }
        task.id = t.at("id").get<int>();
        task.arrival = get_number(t, "arrival", where);
        task.deadline = get_number(t, "deadline", where);
        task.data_bits = get_number(t, "data_bits", where);
        task.cycles_per_bit = get_number(t, "cycles_per_bit", where);
        task.max_cpu_freq = get_cap(t, "max_cpu_freq", where);
        task.vm_cap_cycles = get_cap(t, "vm_cap_cycles", where);
        task.channel_gain = get_number(t, "channel_gain", where);
        sc.tasks.push_back(task);
    }
    return sc;
}

Json scenario_to_json(const ScenarioFile& scenario)
{
    Json tasks = Json::array();
    for (const auto& t : scenario.tasks) {
        tasks.push_back(Json{{"id", t.id},
                             {"arrival", t.arrival},
                             {"deadline", t.deadline},
                             {"data_bits", t.data_bits},
                             {"cycles_per_bit", t.cycles_per_bit},
                             {"max_cpu_freq", number_or_null(t.max_cpu_freq)},
                             {"vm_cap_cycles", number_or_null(t.vm_cap_cycles)},
                             {"channel_gain", t.channel_gain}});
    }
    return Json{{"params", params_to_json(scenario.params)}, {"tasks", tasks}};
}

harness::SweepSpec parse_sweep_spec(const Json& doc)
{
    const std::string where = "sweep spec";
    require_object(doc, where);
    reject_unknown(doc, where, {"mobiles", "window_s", "expected_latency_s", "data_kb", "kb_bits",
                                "cycles_per_bit", "cpu_freqs_hz", "vm_cap_cycles", "mean_channel_gain",
                                "params", "regime", "seed", "sweep"});
    harness::SweepSpec spec;
    auto& cfg = spec.base;
    if (doc.contains("mobiles")) {
        if (!doc.at("mobiles").is_number_integer()) throw ParseError(where + ": 'mobiles' must be an integer");
        cfg.mobiles = doc.at("mobiles").get<int>();
    }
    read_number(doc, "window_s", where, cfg.window_s);
    read_number(doc, "expected_latency_s", where, cfg.expected_latency_s);
    read_range(doc, "data_kb", where, cfg.data_min_kb, cfg.data_max_kb);
    read_number(doc, "kb_bits", where, cfg.kb_bits);
    read_range(doc, "cycles_per_bit", where, cfg.cycles_min, cfg.cycles_max);
    read_range(doc, "vm_cap_cycles", where, cfg.vm_cap_min, cfg.vm_cap_max);
    read_number(doc, "mean_channel_gain", where, cfg.mean_channel_gain);
    if (doc.contains("cpu_freqs_hz")) {
        const auto& f = doc.at("cpu_freqs_hz");
        if (!f.is_array()) throw ParseError(where + ": 'cpu_freqs_hz' must be an array");
        cfg.cpu_freqs_hz.clear();
        for (const auto& v : f) {
            if (!v.is_number()) throw ParseError(where + ": 'cpu_freqs_hz' entries must be numbers");
            cfg.cpu_freqs_hz.push_back(v.get<double>());
        }
    }
    if (doc.contains("params")) cfg.params = parse_params(doc.at("params"));
    if (doc.contains("regime")) {
        const auto r = harness::regime_from_string(get_string(doc, "regime", where));
        if (!r) throw ParseError(where + ": regime must be general, identical or reverse");
        cfg.regime = *r;
    }
    if (doc.contains("seed")) {
        if (!doc.at("seed").is_number_unsigned()) throw ParseError(where + ": 'seed' must be a nonnegative integer");
        cfg.seed = doc.at("seed").get<std::uint64_t>();
    }

    if (!doc.contains("sweep")) throw ParseError(where + ": missing 'sweep' object");
    const auto& sw = doc.at("sweep");
    const std::string swhere = "sweep";
    require_object(sw, swhere);
    reject_unknown(sw, swhere, {"axis", "values", "policies", "realizations"});
    if (!sw.contains("axis")) throw ParseError(swhere + ": missing field 'axis'");
    const auto axis = harness::axis_from_string(get_string(sw, "axis", swhere));
    if (!axis) {
        throw ParseError(swhere + ": axis must be monomial_order, expected_latency, expected_data_size or total_duration");
    }
    spec.axis = *axis;
    if (!sw.contains("values") || !sw.at("values").is_array()) throw ParseError(swhere + ": 'values' must be an array");
    for (const auto& v : sw.at("values")) {
        if (!v.is_number()) throw ParseError(swhere + ": 'values' entries must be numbers");
        spec.values.push_back(v.get<double>());
    }
    if (spec.values.empty()) throw ParseError("empty sweep");
    if (sw.contains("policies")) {
        const auto& ps = sw.at("policies");
        if (!ps.is_array() || ps.empty()) throw ParseError(swhere + ": 'policies' must be a nonempty array");
        spec.policies.clear();
        for (const auto& p : ps) {
            const auto pol = p.is_string() ? harness::policy_from_string(p.get<std::string>()) : std::nullopt;
            if (!pol) throw ParseError(swhere + ": unknown policy " + p.dump());
            spec.policies.push_back(*pol);
        }
    }
    if (sw.contains("realizations")) {
        if (!sw.at("realizations").is_number_integer() || sw.at("realizations").get<long long>() < 1) {
            throw ParseError(swhere + ": 'realizations' must be a positive integer");
        }
        spec.realizations = sw.at("realizations").get<int>();
    }
    return spec;
}

Json read_json_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

} // namespace meco::io
