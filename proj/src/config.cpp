#include "asfl/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "asfl/units.hpp"

namespace asfl {

using json = nlohmann::json;

double LayerProfile::fp_client(int cut) const {
  double s = 0;
  for (int m = 0; m < cut; ++m) s += flops_fp[m];
  return s;
}

double LayerProfile::bp_client(int cut) const {
  double s = 0;
  for (int m = 0; m < cut; ++m) s += flops_bp[m];
  return s;
}

double LayerProfile::fp_server(int cut) const {
  double s = 0;
  for (int m = cut; m < layers(); ++m) s += flops_fp[m];
  return s;
}

double LayerProfile::bp_server(int cut) const {
  double s = 0;
  for (int m = cut; m < layers(); ++m) s += flops_bp[m];
  return s;
}

double LayerProfile::cut_output_bits(int cut) const {
  if (cut >= layers()) return 0.0;
  return output_bits[cut - 1];
}

double LayerProfile::grad_downlink_bits(int cut) const {
  if (cut >= layers()) return 0.0;
  return size_bits[cut];  // payload of the first server-side layer
}

double LayerProfile::migration_bits(int from_cut, int to_cut) const {
  const int lo = std::min(from_cut, to_cut);
  const int hi = std::max(from_cut, to_cut);
  double s = 0;
  for (int m = lo; m < hi; ++m) s += size_bits[m];
  return s;
}

void LayerProfile::validate() const {
  const std::size_t m = size_bits.size();
  if (m < 2) throw ConfigError("layer profile: need at least 2 layers");
  if (output_bits.size() != m || flops_fp.size() != m || flops_bp.size() != m ||
      allowed.size() != m)
    throw ConfigError("layer profile: parallel arrays must share one length");
  for (std::size_t i = 0; i < m; ++i) {
    if (size_bits[i] < 0 || output_bits[i] < 0 || flops_fp[i] < 0 || flops_bp[i] < 0)
      throw ConfigError("layer profile: negative entry at layer " + std::to_string(i + 1));
  }
  if (std::find(allowed.begin(), allowed.end(), char(1)) == allowed.end())
    throw ConfigError("layer profile: no admissible cut");
}

LayerProfile profile_from_widths(const std::vector<int>& widths, bool allow_full_client_cut) {
  LayerProfile p;
  const int m = static_cast<int>(widths.size()) - 1;
  for (int i = 0; i < m; ++i) {
    const double fan_in = widths[i];
    const double fan_out = widths[i + 1];
    p.size_bits.push_back(32.0 * (fan_in * fan_out + fan_out));
    p.output_bits.push_back(32.0 * fan_out);
    p.flops_fp.push_back(2.0 * fan_in * fan_out);
    p.flops_bp.push_back(4.0 * fan_in * fan_out);
    p.allowed.push_back(i + 1 < m || allow_full_client_cut ? 1 : 0);
  }
  return p;
}

namespace {

void check_positive(double v, const char* name) {
  if (!(v > 0) || !std::isfinite(v))
    throw ConfigError(std::string(name) + " out of (0, inf)");
}

}  // namespace

void ScenarioConfig::validate() const {
  if (n_clients < 1) throw ConfigError("n_clients out of [1, inf)");
  if (n_rounds < 1) throw ConfigError("n_rounds out of [1, inf)");
  if (n_rbs < 0) throw ConfigError("n_rbs out of [0, inf)");
  check_positive(rb_bandwidth_hz, "rb_bandwidth_hz");
  check_positive(downlink_bandwidth_hz, "downlink_bandwidth_hz");
  check_positive(noise_psd_w_per_hz, "noise_psd_w_per_hz");
  check_positive(waterfall_threshold, "waterfall_threshold");
  check_positive(max_tx_power_w, "max_tx_power_w");
  check_positive(server_tx_power_w, "server_tx_power_w");
  check_positive(coverage_radius_m, "coverage_radius_m");
  check_positive(server_cpu_hz, "server_cpu_hz");
  check_positive(server_cycles_per_flop, "server_cycles_per_flop");
  check_positive(client_cycles_per_flop, "client_cycles_per_flop");
  check_positive(cpu_freq_min_hz, "cpu_freq_min_hz");
  if (cpu_freq_max_hz < cpu_freq_min_hz)
    throw ConfigError("cpu_freq_max_hz out of [cpu_freq_min_hz, inf)");
  if (energy_coeff < 0) throw ConfigError("energy_coeff out of [0, inf)");
  check_positive(delay_budget_s, "delay_budget_s");
  check_positive(energy_budget_j, "energy_budget_j");
  if (!(sampling_ratio > 0 && sampling_ratio <= 1))
    throw ConfigError("sampling_ratio out of (0,1]");
  if (!(queue_memory >= 0 && queue_memory <= 1))
    throw ConfigError("queue_memory out of [0,1]");
  if (penalty_weight < 0) throw ConfigError("penalty_weight out of [0, inf)");
  if (!(solver_tol_outer > 0)) throw ConfigError("solver_tol_outer out of (0, inf]");
  if (!(solver_tol_power > 0)) throw ConfigError("solver_tol_power out of (0, inf]");
  if (bcd_max_outer < 1) throw ConfigError("bcd_max_outer out of [1, inf)");
  if (power_max_iters < 1) throw ConfigError("power_max_iters out of [1, inf)");
  if (rb_exact_budget < 1) throw ConfigError("rb_exact_budget out of [1, inf)");
  if (layer_widths.size() < 3) throw ConfigError("layer_widths needs at least 3 entries");
  for (int w : layer_widths)
    if (w < 1) throw ConfigError("layer_widths entries out of [1, inf)");
  if (dataset_samples < n_clients)
    throw ConfigError("dataset_samples out of [n_clients, inf)");
  if (test_samples < 1) throw ConfigError("test_samples out of [1, inf)");
  if (batch_size < 1) throw ConfigError("batch_size out of [1, inf)");
  if (batch_size > samples_per_client())
    throw ConfigError("batch_size out of [1, samples_per_client]");
  check_positive(learning_rate, "learning_rate");
  check_positive(dirichlet_alpha, "dirichlet_alpha");
  check_positive(mixture_spread, "mixture_spread");
  check_positive(mixture_sigma, "mixture_sigma");
  profile.validate();
  const int m = profile.layers();
  if (static_cast<int>(layer_widths.size()) - 1 != m)
    throw ConfigError("layer profile length must match layer_widths length - 1");
  if (initial_cut < 1 || initial_cut > m || !profile.allowed[initial_cut - 1])
    throw ConfigError("initial_cut is not an admissible cut");
  if (weight_snapshot_every < 0)
    throw ConfigError("weight_snapshot_every out of [0, inf)");
}

ScenarioConfig default_config() {
  ScenarioConfig cfg;
  cfg.noise_psd_w_per_hz = dbm_to_watt(cfg.noise_psd_dbm_per_hz);
  cfg.profile = profile_from_widths(cfg.layer_widths, cfg.allow_full_client_cut);
  cfg.validate();
  return cfg;
}

namespace {

const std::set<std::string> kKnownKeys = {
    "n_clients", "n_rounds", "n_rbs", "rb_bandwidth_hz", "downlink_bandwidth_hz",
    "noise_psd_dbm_per_hz", "waterfall_threshold", "max_tx_power_w",
    "server_tx_power_w", "coverage_radius_m", "fading_enabled", "server_cpu_hz",
    "server_cycles_per_flop", "client_cycles_per_flop", "cpu_freq_min_hz",
    "cpu_freq_max_hz", "energy_coeff", "delay_budget_s", "energy_budget_j",
    "sampling_ratio", "queue_memory", "penalty_weight", "solver_tol_outer",
    "solver_tol_power", "bcd_max_outer", "power_max_iters", "rb_exact_budget",
    "random_aux_init", "objective_mode", "layer_widths", "dataset_samples",
    "test_samples", "batch_size", "learning_rate", "dirichlet_alpha",
    "mixture_spread", "mixture_sigma", "initial_cut", "allow_full_client_cut",
    "redraw_positions_per_round", "weight_snapshot_every", "seeds",
    "profile_size_bits", "profile_output_bits", "profile_flops_fp",
    "profile_flops_bp", "profile_allowed_cuts"};

template <typename T>
void read_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) {
    try {
      out = j.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(std::string(key) + ": wrong value type");
    }
  }
}

ScenarioConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");
  for (const auto& item : j.items()) {
    if (!kKnownKeys.count(item.key()))
      throw ConfigError("unknown config key: " + item.key());
  }

  ScenarioConfig cfg;
  read_if(j, "n_clients", cfg.n_clients);
  read_if(j, "n_rounds", cfg.n_rounds);
  read_if(j, "n_rbs", cfg.n_rbs);
  read_if(j, "rb_bandwidth_hz", cfg.rb_bandwidth_hz);
  read_if(j, "downlink_bandwidth_hz", cfg.downlink_bandwidth_hz);
  read_if(j, "noise_psd_dbm_per_hz", cfg.noise_psd_dbm_per_hz);
  read_if(j, "waterfall_threshold", cfg.waterfall_threshold);
  read_if(j, "max_tx_power_w", cfg.max_tx_power_w);
  read_if(j, "server_tx_power_w", cfg.server_tx_power_w);
  read_if(j, "coverage_radius_m", cfg.coverage_radius_m);
  read_if(j, "fading_enabled", cfg.fading_enabled);
  read_if(j, "server_cpu_hz", cfg.server_cpu_hz);
  read_if(j, "server_cycles_per_flop", cfg.server_cycles_per_flop);
  read_if(j, "client_cycles_per_flop", cfg.client_cycles_per_flop);
  read_if(j, "cpu_freq_min_hz", cfg.cpu_freq_min_hz);
  read_if(j, "cpu_freq_max_hz", cfg.cpu_freq_max_hz);
  read_if(j, "energy_coeff", cfg.energy_coeff);
  read_if(j, "delay_budget_s", cfg.delay_budget_s);
  read_if(j, "energy_budget_j", cfg.energy_budget_j);
  read_if(j, "sampling_ratio", cfg.sampling_ratio);
  read_if(j, "queue_memory", cfg.queue_memory);
  read_if(j, "penalty_weight", cfg.penalty_weight);
  read_if(j, "solver_tol_outer", cfg.solver_tol_outer);
  read_if(j, "solver_tol_power", cfg.solver_tol_power);
  read_if(j, "bcd_max_outer", cfg.bcd_max_outer);
  read_if(j, "power_max_iters", cfg.power_max_iters);
  read_if(j, "rb_exact_budget", cfg.rb_exact_budget);
  read_if(j, "random_aux_init", cfg.random_aux_init);
  read_if(j, "layer_widths", cfg.layer_widths);
  read_if(j, "dataset_samples", cfg.dataset_samples);
  read_if(j, "test_samples", cfg.test_samples);
  read_if(j, "batch_size", cfg.batch_size);
  read_if(j, "learning_rate", cfg.learning_rate);
  read_if(j, "dirichlet_alpha", cfg.dirichlet_alpha);
  read_if(j, "mixture_spread", cfg.mixture_spread);
  read_if(j, "mixture_sigma", cfg.mixture_sigma);
  read_if(j, "initial_cut", cfg.initial_cut);
  read_if(j, "allow_full_client_cut", cfg.allow_full_client_cut);
  read_if(j, "redraw_positions_per_round", cfg.redraw_positions_per_round);
  read_if(j, "weight_snapshot_every", cfg.weight_snapshot_every);

  if (j.contains("objective_mode")) {
    const std::string mode = j.at("objective_mode").get<std::string>();
    if (mode == "verbatim")
      cfg.objective_mode = ObjectiveMode::verbatim;
    else if (mode == "consistent")
      cfg.objective_mode = ObjectiveMode::consistent;
    else
      throw ConfigError("objective_mode must be \"verbatim\" or \"consistent\"");
  }

  if (j.contains("seeds")) {
    const json& s = j.at("seeds");
    if (!s.is_object()) throw ConfigError("seeds must be an object");
    for (const auto& item : s.items()) {
      const std::string& k = item.key();
      if (k != "env" && k != "data" && k != "model" && k != "sampling")
        throw ConfigError("unknown seed stream: " + k);
    }
    read_if(s, "env", cfg.seeds.env);
    read_if(s, "data", cfg.seeds.data);
    read_if(s, "model", cfg.seeds.model);
    read_if(s, "sampling", cfg.seeds.sampling);
  }

  cfg.noise_psd_w_per_hz = dbm_to_watt(cfg.noise_psd_dbm_per_hz);

  const bool has_profile = j.contains("profile_size_bits");
  if (has_profile) {
    LayerProfile p;
    read_if(j, "profile_size_bits", p.size_bits);
    read_if(j, "profile_output_bits", p.output_bits);
    read_if(j, "profile_flops_fp", p.flops_fp);
    read_if(j, "profile_flops_bp", p.flops_bp);
    if (j.contains("profile_allowed_cuts")) {
      std::vector<int> mask;
      read_if(j, "profile_allowed_cuts", mask);
      for (int v : mask) p.allowed.push_back(v ? 1 : 0);
    } else {
      const int m = static_cast<int>(p.size_bits.size());
      for (int i = 0; i < m; ++i)
        p.allowed.push_back(i + 1 < m || cfg.allow_full_client_cut ? 1 : 0);
    }
    cfg.profile = p;
    // When the profile is supplied explicitly the widths must describe a model
    // with the same layer count; keep the default widths only if they agree.
    if (static_cast<int>(cfg.layer_widths.size()) - 1 != p.layers() &&
        !j.contains("layer_widths"))
      throw ConfigError("explicit layer profile requires matching layer_widths");
  } else {
    cfg.profile = profile_from_widths(cfg.layer_widths, cfg.allow_full_client_cut);
  }

  cfg.validate();
  return cfg;
}

}  // namespace

ScenarioConfig load_config(const std::string& path_or_json) {
  json j;
  const auto trimmed_start = path_or_json.find_first_not_of(" \t\r\n");
  if (trimmed_start != std::string::npos && path_or_json[trimmed_start] == '{') {
    try {
      j = json::parse(path_or_json);
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config parse error: ") + e.what());
    }
  } else {
    std::ifstream in(path_or_json);
    if (!in) throw ConfigError("cannot open config file: " + path_or_json);
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config parse error: ") + e.what());
    }
  }
  return config_from_json(j);
}

void apply_override(ScenarioConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override must look like key=value: " + assignment);
  const std::string key = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);

  json j;
  try {
    j = json::parse(config_to_json(cfg));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("internal config snapshot error: ") + e.what());
  }
  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::exception&) {
    parsed = value;  // bare strings allowed, e.g. objective_mode=verbatim
  }
  if (key.rfind("seeds.", 0) == 0)
    j["seeds"][key.substr(6)] = parsed;
  else
    j[key] = parsed;
  cfg = config_from_json(j);
}

std::string config_to_json(const ScenarioConfig& cfg) {
  json j;
  j["n_clients"] = cfg.n_clients;
  j["n_rounds"] = cfg.n_rounds;
  j["n_rbs"] = cfg.n_rbs;
  j["rb_bandwidth_hz"] = cfg.rb_bandwidth_hz;
  j["downlink_bandwidth_hz"] = cfg.downlink_bandwidth_hz;
  j["noise_psd_dbm_per_hz"] = cfg.noise_psd_dbm_per_hz;
  j["waterfall_threshold"] = cfg.waterfall_threshold;
  j["max_tx_power_w"] = cfg.max_tx_power_w;
  j["server_tx_power_w"] = cfg.server_tx_power_w;
  j["coverage_radius_m"] = cfg.coverage_radius_m;
  j["fading_enabled"] = cfg.fading_enabled;
  j["server_cpu_hz"] = cfg.server_cpu_hz;
  j["server_cycles_per_flop"] = cfg.server_cycles_per_flop;
  j["client_cycles_per_flop"] = cfg.client_cycles_per_flop;
  j["cpu_freq_min_hz"] = cfg.cpu_freq_min_hz;
  j["cpu_freq_max_hz"] = cfg.cpu_freq_max_hz;
  j["energy_coeff"] = cfg.energy_coeff;
  j["delay_budget_s"] = cfg.delay_budget_s;
  j["energy_budget_j"] = cfg.energy_budget_j;
  j["sampling_ratio"] = cfg.sampling_ratio;
  j["queue_memory"] = cfg.queue_memory;
  j["penalty_weight"] = cfg.penalty_weight;
  j["solver_tol_outer"] = cfg.solver_tol_outer;
  j["solver_tol_power"] = cfg.solver_tol_power;
  j["bcd_max_outer"] = cfg.bcd_max_outer;
  j["power_max_iters"] = cfg.power_max_iters;
  j["rb_exact_budget"] = cfg.rb_exact_budget;
  j["random_aux_init"] = cfg.random_aux_init;
  j["objective_mode"] =
      cfg.objective_mode == ObjectiveMode::verbatim ? "verbatim" : "consistent";
  j["layer_widths"] = cfg.layer_widths;
  j["dataset_samples"] = cfg.dataset_samples;
  j["test_samples"] = cfg.test_samples;
  j["batch_size"] = cfg.batch_size;
  j["learning_rate"] = cfg.learning_rate;
  j["dirichlet_alpha"] = cfg.dirichlet_alpha;
  j["mixture_spread"] = cfg.mixture_spread;
  j["mixture_sigma"] = cfg.mixture_sigma;
  j["initial_cut"] = cfg.initial_cut;
  j["allow_full_client_cut"] = cfg.allow_full_client_cut;
  j["redraw_positions_per_round"] = cfg.redraw_positions_per_round;
  j["weight_snapshot_every"] = cfg.weight_snapshot_every;
  j["seeds"] = {{"env", cfg.seeds.env},
                {"data", cfg.seeds.data},
                {"model", cfg.seeds.model},
                {"sampling", cfg.seeds.sampling}};
  j["profile_size_bits"] = cfg.profile.size_bits;
  j["profile_output_bits"] = cfg.profile.output_bits;
  j["profile_flops_fp"] = cfg.profile.flops_fp;
  j["profile_flops_bp"] = cfg.profile.flops_bp;
  std::vector<int> mask;
  for (char c : cfg.profile.allowed) mask.push_back(c ? 1 : 0);
  j["profile_allowed_cuts"] = mask;
  return j.dump(2);
}

}  // namespace asfl
