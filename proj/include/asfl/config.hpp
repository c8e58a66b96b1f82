#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "asfl/rng.hpp"

namespace asfl {

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// How the per-client model-discrepancy penalty treats the packet error rate.
//   verbatim:   S_n = (1 - s_n)^2 * ||server_avg||^2
//   consistent: S_n = ||server_avg - (1 - s_n) * server_n||^2
// The verbatim form shrinks as errors increase, which inverts the intended
// incentive; the consistent form matches the coefficients used by the
// closed-form power step. Both are computed and reported side by side.
enum class ObjectiveMode { verbatim, consistent };

// Static per-layer cost descriptors for a model with M layers. Cuts are
// 1-based: cut = l keeps layers 1..l on the client. allowed[l-1] marks cut l
// as admissible for the split optimizer.
struct LayerProfile {
  std::vector<double> size_bits;    // parameter payload of each layer (migration traffic)
  std::vector<double> output_bits;  // per-sample activation payload emitted by each layer
  std::vector<double> flops_fp;     // per-sample forward FLOPs of each layer
  std::vector<double> flops_bp;     // per-sample backward FLOPs of each layer
  std::vector<char> allowed;        // admissible cut mask, length M

  int layers() const { return static_cast<int>(size_bits.size()); }

  // Sum of per-sample forward FLOPs over layers 1..cut (client side).
  double fp_client(int cut) const;
  // Sum of per-sample backward FLOPs over layers 1..cut (client side).
  double bp_client(int cut) const;
  double fp_server(int cut) const;
  double bp_server(int cut) const;
  // Activation payload crossing the cut (bits per sample); zero when the cut
  // swallows the whole model.
  double cut_output_bits(int cut) const;
  // Gradient payload returned over the downlink: the activation-gradient of
  // the first server layer, sized like that layer's input coming from the cut.
  double grad_downlink_bits(int cut) const;
  // Parameter bits that move when the boundary migrates between two cuts.
  double migration_bits(int from_cut, int to_cut) const;

  void validate() const;
};

struct ScenarioConfig {
  // population / schedule
  int n_clients = 10;
  int n_rounds = 200;
  int n_rbs = 8;  // uplink resource blocks per round

  // radio
  double rb_bandwidth_hz = 1e6;          // bandwidth of one uplink resource block
  double downlink_bandwidth_hz = 8e6;    // dedicated broadcast band
  double noise_psd_dbm_per_hz = -173.0;  // as ingested
  double noise_psd_w_per_hz = 0.0;       // derived at load time
  double waterfall_threshold = 1.0;      // error-model steepness
  double max_tx_power_w = 1.5;
  double server_tx_power_w = 5.0;
  double coverage_radius_m = 500.0;
  bool fading_enabled = true;

  // compute
  double server_cpu_hz = 1e10;
  double server_cycles_per_flop = 1.0 / 32.0;
  double client_cycles_per_flop = 1.0 / 16.0;
  double cpu_freq_min_hz = 1e9;
  double cpu_freq_max_hz = 1.6e9;
  double energy_coeff = 1e-28;  // effective switched capacitance

  // budgets
  double delay_budget_s = 20.0;   // per-round latency cap
  double energy_budget_j = 0.5;   // per-client per-round energy cap

  // optimizer
  double sampling_ratio = 0.05;   // fraction of client-side weights probed
  double queue_memory = 0.5;      // virtual-queue decay factor
  double penalty_weight = 10.0;   // objective weight against queue drift
  double solver_tol_outer = 0.01;
  double solver_tol_power = 0.01;
  int bcd_max_outer = 20;
  int power_max_iters = 50;
  long long rb_exact_budget = 1000000;  // max count vectors for exact enumeration
  bool random_aux_init = false;  // draw power sub-budget split randomly instead of 1/3 each
  ObjectiveMode objective_mode = ObjectiveMode::consistent;

  // learning task
  std::vector<int> layer_widths = {8, 32, 32, 32, 32, 32, 4};
  int dataset_samples = 64000;
  int test_samples = 2000;
  int batch_size = 64;
  double learning_rate = 1e-4;
  double dirichlet_alpha = 10.0;
  double mixture_spread = 1.5;  // class-mean magnitude of the synthetic task
  double mixture_sigma = 0.6;   // per-feature noise of the synthetic task
  int initial_cut = 2;
  bool allow_full_client_cut = false;

  // environment dynamics
  bool redraw_positions_per_round = false;

  // io
  int weight_snapshot_every = 0;  // rounds between weight dumps; 0 disables

  SeedPack seeds;

  // Derived from layer_widths unless overridden in the config file.
  LayerProfile profile;

  int samples_per_client() const { return dataset_samples / n_clients; }
  int input_dim() const { return layer_widths.front(); }
  int n_classes() const { return layer_widths.back(); }

  void validate() const;
};

// Builds the profile implied by layer_widths: dense layer m maps
// widths[m-1] -> widths[m]; parameters are 32-bit; forward FLOPs are
// 2*in*out per sample and backward FLOPs twice that.
LayerProfile profile_from_widths(const std::vector<int>& widths, bool allow_full_client_cut);

ScenarioConfig default_config();

// Parses a JSON config. Accepts a file path or an inline JSON string. Unknown
// keys are rejected. An empty object yields default_config().
ScenarioConfig load_config(const std::string& path_or_json);

// Applies one "key=value" override (value parsed as a JSON literal), then
// re-derives and re-validates.
void apply_override(ScenarioConfig& cfg, const std::string& assignment);

// Canonical JSON snapshot (SI units plus the ingested dBm field); feeding it
// back through load_config reproduces the config exactly.
std::string config_to_json(const ScenarioConfig& cfg);

}  // namespace asfl
