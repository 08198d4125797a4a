#include "cps/config.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace cps {

namespace {

using nlohmann::json;

dvec flatten_rows(const json& rows, const std::string& where) {
  dvec out;
  if (!rows.is_array() || rows.empty() || !rows[0].is_array())
    throw ConfigError(where + ": expected an array of rows");
  std::size_t cols = rows[0].size();
  for (const auto& row : rows) {
    if (!row.is_array() || row.size() != cols)
      throw ConfigError(where + ": ragged rows");
    for (const auto& v : row) {
      if (!v.is_number()) throw ConfigError(where + ": non-numeric entry");
      out.push_back(v.get<double>());
    }
  }
  return out;
}

// A table node is either {"stationary": [[...], ...]} or
// {"per_stage": [ [[...], ...], ... ]} with one row-list per stage.
StageTable parse_table(const json& node, int stages, int rows, int cols,
                       const std::string& where) {
  if (node.contains("stationary")) {
    dvec data = flatten_rows(node["stationary"], where);
    if (static_cast<int>(data.size()) != rows * cols)
      throw ConfigError(where + ": expected " + std::to_string(rows) + "x" +
                        std::to_string(cols) + " entries");
    return StageTable::stationary(stages, rows, cols, std::move(data));
  }
  if (node.contains("per_stage")) {
    const json& list = node["per_stage"];
    if (!list.is_array() || static_cast<int>(list.size()) != stages)
      throw ConfigError(where + ": per_stage needs " + std::to_string(stages) +
                        " stage entries");
    std::vector<dvec> data;
    for (int t = 0; t < stages; ++t) {
      dvec d = flatten_rows(list[t], where + " stage " + std::to_string(t));
      if (static_cast<int>(d.size()) != rows * cols)
        throw ConfigError(where + " stage " + std::to_string(t) +
                          ": wrong shape");
      data.push_back(std::move(d));
    }
    return StageTable::per_stage(rows, cols, std::move(data));
  }
  throw ConfigError(where + ": expected 'stationary' or 'per_stage'");
}

template <typename T>
T require(const json& j, const std::string& key) {
  if (!j.contains(key)) throw ConfigError("missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("field '" + key + "' has the wrong type");
  }
}

}  // namespace

System parse_system(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("json parse error: ") + e.what());
  }

  System sys;
  sys.num_states = require<int>(j, "num_states");
  sys.num_subsystems = require<int>(j, "num_subsystems");
  sys.actions_per_subsystem = require<std::vector<int>>(j, "actions_per_subsystem");
  sys.observations_per_subsystem =
      require<std::vector<int>>(j, "observations_per_subsystem");
  sys.horizon = require<int>(j, "horizon");
  std::string coupling = j.value("coupling", std::string("shared"));
  if (coupling == "shared")
    sys.coupling = Coupling::SharedDisturbance;
  else if (coupling == "independent")
    sys.coupling = Coupling::Independent;
  else
    throw ConfigError("coupling: expected 'shared' or 'independent'");

  if (sys.num_states <= 0 || sys.num_subsystems <= 0 || sys.horizon < 1)
    throw ValidationError("cardinalities must be positive and horizon >= 1");
  if (static_cast<int>(sys.actions_per_subsystem.size()) != sys.num_subsystems ||
      static_cast<int>(sys.observations_per_subsystem.size()) !=
          sys.num_subsystems)
    throw ConfigError("per-subsystem lists must have num_subsystems entries");

  const int n = sys.num_states;
  const int nu = sys.num_joint_actions();
  if (!j.contains("model_kernel")) throw ConfigError("missing 'model_kernel'");
  sys.model_kernel =
      parse_table(j["model_kernel"], sys.horizon, n * nu, n, "model_kernel");
  if (!j.contains("actual_kernel"))
    throw ConfigError("missing 'actual_kernel'");
  sys.actual_kernel =
      parse_table(j["actual_kernel"], sys.horizon, n * nu, n, "actual_kernel");

  if (!j.contains("observation_kernels"))
    throw ConfigError("missing 'observation_kernels'");
  const json& obs = j["observation_kernels"];
  if (!obs.is_array() || static_cast<int>(obs.size()) != sys.num_subsystems)
    throw ConfigError("observation_kernels: one table per subsystem");
  for (int k = 0; k < sys.num_subsystems; ++k)
    sys.observation_kernels.push_back(
        parse_table(obs[k], sys.horizon + 1, n, sys.observations_per_subsystem[k],
                    "observation_kernels[" + std::to_string(k) + "]"));

  sys.initial_joint = require<dvec>(j, "initial_joint");

  if (!j.contains("costs")) throw ConfigError("missing 'costs'");
  const json& c = j["costs"];
  if (!c.contains("stage")) throw ConfigError("costs: missing 'stage'");
  sys.costs.stage_cost = parse_table(c["stage"], sys.horizon, n, nu, "costs.stage");
  sys.costs.terminal_cost = require<dvec>(c, "terminal");
  sys.costs.mismatch_weight = c.value("mismatch_weight", 0.0);
  if (c.contains("state_metric") && c["state_metric"].is_array())
    sys.costs.state_metric = flatten_rows(c["state_metric"], "costs.state_metric");
  else {
    std::string metric = c.value("state_metric", std::string("squared-index"));
    if (metric != "squared-index")
      throw ConfigError("costs.state_metric: expected matrix or 'squared-index'");
    sys.costs.state_metric = squared_index_metric(n);
  }

  validate(sys);
  return sys;
}

System load_system(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_system(buf.str());
}

std::uint64_t config_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return fnv1a64(buf.str());
}

}  // namespace cps
