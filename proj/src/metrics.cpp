#include "asfl/metrics.hpp"

#include <chrono>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace asfl {

const char* const kMetricsHeader10 =
    "round,cut,k_0,k_1,k_2,k_3,k_4,k_5,k_6,k_7,k_8,k_9,"
    "p_0,p_1,p_2,p_3,p_4,p_5,p_6,p_7,p_8,p_9,"
    "s_0,s_1,s_2,s_3,s_4,s_5,s_6,s_7,s_8,s_9,"
    "t_stage1,t_stage2,t_stage3,t_total,"
    "e_total_0,e_total_1,e_total_2,e_total_3,e_total_4,e_total_5,e_total_6,"
    "e_total_7,e_total_8,e_total_9,"
    "g_obj_verbatim,g_obj_consistent,"
    "q_0,q_1,q_2,q_3,q_4,q_5,q_6,q_7,q_8,q_9,q_10,"
    "participation,bcd_iters,train_loss,train_accuracy";

std::string metrics_header(int n_clients) {
  std::ostringstream os;
  os << "round,cut";
  for (int i = 0; i < n_clients; ++i) os << ",k_" << i;
  for (int i = 0; i < n_clients; ++i) os << ",p_" << i;
  for (int i = 0; i < n_clients; ++i) os << ",s_" << i;
  os << ",t_stage1,t_stage2,t_stage3,t_total";
  for (int i = 0; i < n_clients; ++i) os << ",e_total_" << i;
  os << ",g_obj_verbatim,g_obj_consistent";
  for (int i = 0; i <= n_clients; ++i) os << ",q_" << i;
  os << ",participation,bcd_iters,train_loss,train_accuracy";
  return os.str();
}

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string metrics_row(const RoundRecord& rec, int n_clients) {
  std::ostringstream os;
  os << rec.round << ',' << rec.decisions.split.cut;
  for (int i = 0; i < n_clients; ++i) os << ',' << rec.decisions.rb_counts[i];
  for (int i = 0; i < n_clients; ++i) os << ',' << format_g17(rec.decisions.tx_power_w[i]);
  for (int i = 0; i < n_clients; ++i) os << ',' << format_g17(rec.costs.per_error[i]);
  os << ',' << format_g17(rec.costs.t_stage1) << ',' << format_g17(rec.costs.t_stage2) << ','
     << format_g17(rec.costs.t_stage3) << ',' << format_g17(rec.costs.t_total);
  for (int i = 0; i < n_clients; ++i) os << ',' << format_g17(rec.costs.e_total[i]);
  os << ',' << format_g17(rec.g_obj_verbatim) << ',' << format_g17(rec.g_obj_consistent);
  for (int i = 0; i <= n_clients; ++i) os << ',' << format_g17(rec.queues[i]);
  os << ',';
  for (int i = 0; i < n_clients; ++i) os << (rec.participation[i] ? '1' : '0');
  os << ',' << rec.bcd_iters << ',' << format_g17(rec.train_loss) << ','
     << format_g17(rec.train_accuracy) << '\n';
  return os.str();
}

std::string iso8601_utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string manifest_json(const ScenarioConfig& cfg, const BaselinePolicy& policy,
                          const std::string& build_id, const std::string& start_time,
                          const std::string& end_time, const std::string& out_dir) {
  nlohmann::json j;
  j["build_id"] = build_id;
  j["policy"] = policy.name();
  j["n_rounds"] = cfg.n_rounds;
  j["seeds"] = {{"env", cfg.seeds.env},
                {"data", cfg.seeds.data},
                {"model", cfg.seeds.model},
                {"sampling", cfg.seeds.sampling}};
  j["started_utc"] = start_time;
  if (end_time.empty())
    j["finished_utc"] = nullptr;
  else
    j["finished_utc"] = end_time;
  j["out_dir"] = out_dir;
  j["outputs"] = {{"metrics", "metrics.csv"},
                  {"stability", "stability.json"},
                  {"manifest", "manifest.json"}};
  j["config"] = nlohmann::json::parse(config_to_json(cfg));
  return j.dump(2) + "\n";
}

namespace {

void put_u32(std::ofstream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_f32(std::ofstream& os, double v) {
  float f = static_cast<float>(v);
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  put_u32(os, bits);
}

}  // namespace

void write_weight_snapshot(const SplitModel& model, int round, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open weight snapshot file: " + path);
  os.write("ASFLWSNP", 8);
  const int m = model.layer_count();
  put_u32(os, 1u);
  put_u32(os, static_cast<std::uint32_t>(round));
  put_u32(os, static_cast<std::uint32_t>(model.n_clients()));
  put_u32(os, static_cast<std::uint32_t>(m));
  put_u32(os, static_cast<std::uint32_t>(model.cut()));
  for (int w : model.widths()) put_u32(os, static_cast<std::uint32_t>(w));
  for (int n = 0; n < model.n_clients(); ++n) {
    const Stack& st = model.stack(n);
    for (int l = 0; l < m; ++l) {
      for (double v : st[l].w) put_f32(os, v);
      for (double v : st[l].b) put_f32(os, v);
    }
  }
  if (!os) throw std::runtime_error("short write on weight snapshot file: " + path);
}

}  // namespace asfl
