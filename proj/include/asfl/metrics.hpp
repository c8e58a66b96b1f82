#pragma once

#include <string>

#include "asfl/coordinator.hpp"

namespace asfl {

// Frozen header for the default 10-client population; metrics_header(10) must
// reproduce it byte for byte (golden-tested). Other population sizes get the
// same column families with their own client index ranges.
extern const char* const kMetricsHeader10;

// round,cut,k_0..k_{N-1},p_0..,s_0..,t_stage1,t_stage2,t_stage3,t_total,
// e_total_0..,g_obj_verbatim,g_obj_consistent,q_0..q_N,participation,
// bcd_iters,train_loss,train_accuracy
std::string metrics_header(int n_clients);

// One CSV line (newline included). Doubles use printf %.17g so identical runs
// serialize bit-identically and values survive a parse round trip.
std::string metrics_row(const RoundRecord& rec, int n_clients);

std::string format_g17(double v);

std::string iso8601_utc_now();

// Run manifest: config snapshot (feed it back through the loader to re-run),
// seeds, policy, build id, timestamps, and output file names. end_time empty
// -> serialized as null (the manifest is first written before round 1).
std::string manifest_json(const ScenarioConfig& cfg, const BaselinePolicy& policy,
                          const std::string& build_id, const std::string& start_time,
                          const std::string& end_time, const std::string& out_dir);

// Weight snapshot, all clients, little-endian:
//   bytes 0-7   magic "ASFLWSNP"
//   u32 version (= 1), u32 round, u32 n_clients, u32 n_layers, u32 cut
//   u32 widths[n_layers + 1]
//   then per client, per layer: weights row-major (out x in), then biases,
//   each value one little-endian IEEE-754 float32.
void write_weight_snapshot(const SplitModel& model, int round, const std::string& path);

}  // namespace asfl
