#pragma once

#include <cstdint>
#include <vector>

#include "asfl/scenario.hpp"

namespace asfl {

// One dense layer: w is out x in row-major, b is out.
struct LayerParams {
  std::vector<double> w;
  std::vector<double> b;
};

using Stack = std::vector<LayerParams>;

// Per-sample forward through layers [first, last) of a stack. Hidden layers
// (all but the final one of the full model) use tanh; the final layer emits
// raw logits. Activations for the whole batch are kept for backprop.
struct ForwardCache {
  // act[0] is the input batch; act[m] is the batch output of layer m.
  std::vector<std::vector<double>> act;
};

// Split neural model for N clients. Every client holds a full stack of M
// layers; layers 1..cut are its personal client-side model and layers
// cut+1..M its copy of the shared server-side model. Moving the boundary is a
// relabeling: parameter values are preserved bit-for-bit in both directions,
// which matches broadcast-on-grow (copies are equal after aggregation) and
// upload-on-shrink (per-client values travel with the layers).
class SplitModel {
 public:
  SplitModel(std::vector<int> widths, int n_clients, int cut, std::uint64_t model_seed);

  int layer_count() const { return static_cast<int>(widths_.size()) - 1; }
  int n_clients() const { return static_cast<int>(stacks_.size()); }
  int cut() const { return cut_; }
  const std::vector<int>& widths() const { return widths_; }
  const Stack& stack(int n) const { return stacks_[n]; }
  Stack& mutable_stack(int n) { return stacks_[n]; }

  void migrate(int from_cut, int to_cut);

  struct TrainResult {
    std::vector<char> beta;          // delivery outcome per client
    std::vector<double> loss;        // batch cross-entropy per participant (NaN otherwise)
    std::vector<double> checksum;    // cut-activation checksum per participant
    double mean_loss = 0;            // over participants; 0 if none
    double mean_accuracy = 0;
    int participants = 0;
    bool aggregated = false;
  };

  // One synchronous round: each client forwards its batch, delivery succeeds
  // with probability 1 - per_error[n] (one uniform draw per client in id
  // order, consumed even for clients that cannot deliver), delivered batches
  // are backpropagated and both model sides updated with plain SGD, then the
  // server side is sample-size-weighted-averaged over updated clients and
  // redistributed to everyone. Clients with per_error = 1 never update.
  TrainResult train_round(const Dataset& ds, const std::vector<std::vector<int>>& batches,
                          const std::vector<double>& per_error,
                          const std::vector<double>& sample_weights, double learning_rate,
                          std::mt19937_64& outcome_rng);

  // Flattened parameter views (layer-major, weights then bias per layer).
  std::size_t param_count(int first_layer, int last_layer) const;
  void flatten(int client, int first_layer, int last_layer, std::vector<double>& out) const;
  std::size_t client_param_count(int cut) const { return param_count(0, cut); }

  // Accuracy of the sample-size-weighted average model on a dataset.
  double average_model_accuracy(const Dataset& ds, const std::vector<double>& sample_weights) const;

 private:
  std::vector<int> widths_;
  int cut_;
  std::vector<Stack> stacks_;
};

// Forward layers [first, last) of st for a batch gathered from ds at `rows`.
void forward_batch(const Stack& st, const std::vector<int>& widths, int first, int last,
                   const Dataset& ds, const std::vector<int>& rows, ForwardCache& cache);

// Mean softmax cross-entropy over the batch; fills d_logits (already divided
// by batch size) and optionally the batch accuracy.
double softmax_cross_entropy(const std::vector<double>& logits, const Dataset& ds,
                             const std::vector<int>& rows, int n_classes,
                             std::vector<double>& d_logits, double* accuracy);

// Backprop through layers [first, last); returns parameter gradients for those
// layers and leaves the gradient w.r.t. act[first] in d_input.
void backward_batch(const Stack& st, const std::vector<int>& widths, int first, int last,
                    const ForwardCache& cache, const std::vector<double>& d_out,
                    std::vector<LayerParams>& grads, std::vector<double>& d_input);

void sgd_step(Stack& st, int first, int last, const std::vector<LayerParams>& grads,
              double learning_rate);

// Index probe over the client-side parameter vector: ceil(ratio * P_c)
// distinct indices, identical for every client, drawn from the sampling
// stream keyed by (round, cut).
struct ProbeSet {
  std::vector<std::size_t> indices;
  std::vector<std::vector<double>> per_client;
  std::vector<double> average;
};

ProbeSet sample_discrepancy_probe(const SplitModel& model, int cut, double ratio,
                                  std::uint64_t sampling_seed, int round);

}  // namespace asfl
