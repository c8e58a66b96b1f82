#pragma once

#include <vector>

#include "asfl/config.hpp"

namespace asfl {

struct ClientProfile {
  int id = 0;
  int n_samples = 0;     // local dataset size used by the cost model
  double cpu_hz = 0;     // local clock
  double distance_m = 0; // to the base station
};

struct ChannelDraw {
  double path_loss_linear = 0;  // mean channel power gain from distance
  double fading_gain_sq = 1.0;  // unit-mean exponential multiplier
  double gain_sq = 0;           // realized |h|^2 driving the rates
};

struct Environment {
  std::vector<ClientProfile> clients;
  std::vector<ChannelDraw> channels;
};

// Mean channel power gain at distance d (meters): -30 - 40*log10(d) dB,
// distance clamped to >= 1 m.
double path_loss_linear(double distance_m);

// Deterministic environment for one round. Positions and CPU frequencies are
// drawn once from the env stream (round-independent unless
// redraw_positions_per_round); fading is redrawn per round per client.
Environment draw_environment(const ScenarioConfig& cfg, int round);

struct Dataset {
  int input_dim = 0;
  int n_classes = 0;
  std::vector<double> x;  // row-major, size n * input_dim
  std::vector<int> y;
  int size() const { return static_cast<int>(y.size()); }
};

// Balanced Gaussian-mixture classification task; one isotropic component per
// class with deterministic means. Drawn from the data stream under `tag`.
Dataset make_synthetic_dataset(const ScenarioConfig& cfg, int count, const char* tag);

// Splits dataset indices across n_clients clients, exactly per_client samples
// each. Class mass is spread with per-class Dirichlet(alpha) proportions;
// surplus/deficit after largest-remainder rounding is settled
// deterministically by index.
std::vector<std::vector<int>> partition_indices(const Dataset& ds, int n_clients,
                                                int per_client, double alpha,
                                                std::uint64_t data_seed);

std::vector<std::vector<int>> partition_data(const ScenarioConfig& cfg, const Dataset& ds);

// Per-round, per-client minibatch of batch_size indices into the client's
// partition, drawn without replacement from the data stream.
std::vector<int> draw_batch(const ScenarioConfig& cfg, const std::vector<int>& pool,
                            int round, int client);

}  // namespace asfl
