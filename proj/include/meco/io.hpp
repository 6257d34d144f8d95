#pragma once

#include <meco/energy.hpp>
#include <meco/harness.hpp>
#include <meco/timeline.hpp>

#include <json.hpp>

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

// JSON readers and writers for scenario and sweep files. Readers reject
// unknown fields and wrong types with ParseError; range checks are left to
// the library so that they surface as domain errors.
namespace meco::io {

using Json = nlohmann::json;

class ParseError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

struct ScenarioFile
{
    SystemParams params;
    std::vector<TaskSpec> tasks;
};

/// Missing `params` fields keep their defaults. In a task, `max_cpu_freq`
/// and `vm_cap_cycles` may be null or absent, meaning unbounded.
ScenarioFile parse_scenario(const Json& doc);
Json scenario_to_json(const ScenarioFile& scenario);

/// Top-level ScenarioConfig fields plus a `sweep` object.
harness::SweepSpec parse_sweep_spec(const Json& doc);

SystemParams parse_params(const Json& obj);
Json params_to_json(const SystemParams& params);

/// Reads and parses a whole file; I/O and syntax failures become ParseError.
Json read_json_file(const std::filesystem::path& path);

/// Nonfinite numbers as null (+inf caps) so that the output stays valid JSON.
Json number_or_null(double v);

} // namespace meco::io
