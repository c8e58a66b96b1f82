#include "asfl/learner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "asfl/rng.hpp"

namespace asfl {

SplitModel::SplitModel(std::vector<int> widths, int n_clients, int cut,
                       std::uint64_t model_seed)
    : widths_(std::move(widths)), cut_(cut) {
  const int m = layer_count();
  if (m < 2) throw std::invalid_argument("SplitModel: need at least 2 layers");
  if (cut_ < 1 || cut_ > m) throw std::invalid_argument("SplitModel: cut out of [1, layers]");
  if (n_clients < 1) throw std::invalid_argument("SplitModel: n_clients out of [1, inf)");

  // One shared initialization, replicated to every client.
  auto rng = make_stream(model_seed, "init", 0, 0);
  Stack init(m);
  for (int l = 0; l < m; ++l) {
    const int in = widths_[l], out = widths_[l + 1];
    const double bound = std::sqrt(6.0 / (in + out));
    std::uniform_real_distribution<double> u(-bound, bound);
    init[l].w.resize(static_cast<std::size_t>(out) * in);
    init[l].b.assign(out, 0.0);
    for (double& v : init[l].w) v = u(rng);
  }
  stacks_.assign(n_clients, init);
}

void SplitModel::migrate(int from_cut, int to_cut) {
  if (from_cut != cut_)
    throw std::invalid_argument("migrate: from_cut does not match the current boundary");
  if (to_cut < 1 || to_cut > layer_count())
    throw std::invalid_argument("migrate: to_cut out of [1, layers]");
  cut_ = to_cut;  // values stay in place on both grow and shrink
}

void forward_batch(const Stack& st, const std::vector<int>& widths, int first, int last,
                   const Dataset& ds, const std::vector<int>& rows, ForwardCache& cache) {
  const int b = static_cast<int>(rows.size());
  const int m_total = static_cast<int>(widths.size()) - 1;
  cache.act.assign(last - first + 1, {});
  cache.act[0].resize(static_cast<std::size_t>(b) * widths[first]);
  for (int r = 0; r < b; ++r) {
    const double* src = ds.x.data() + static_cast<std::size_t>(rows[r]) * ds.input_dim;
    std::copy(src, src + widths[first], cache.act[0].begin() + static_cast<std::size_t>(r) * widths[first]);
  }
  for (int l = first; l < last; ++l) {
    const int in = widths[l], out = widths[l + 1];
    const std::vector<double>& a = cache.act[l - first];
    std::vector<double>& z = cache.act[l - first + 1];
    z.assign(static_cast<std::size_t>(b) * out, 0.0);
    const LayerParams& p = st[l];
    for (int r = 0; r < b; ++r) {
      const double* ar = a.data() + static_cast<std::size_t>(r) * in;
      double* zr = z.data() + static_cast<std::size_t>(r) * out;
      for (int o = 0; o < out; ++o) {
        const double* wr = p.w.data() + static_cast<std::size_t>(o) * in;
        double acc = p.b[o];
        for (int i = 0; i < in; ++i) acc += wr[i] * ar[i];
        zr[o] = (l + 1 < m_total) ? std::tanh(acc) : acc;  // final layer stays linear
      }
    }
  }
}

double softmax_cross_entropy(const std::vector<double>& logits, const Dataset& ds,
                             const std::vector<int>& rows, int n_classes,
                             std::vector<double>& d_logits, double* accuracy) {
  const int b = static_cast<int>(rows.size());
  d_logits.assign(logits.size(), 0.0);
  double loss = 0;
  int correct = 0;
  for (int r = 0; r < b; ++r) {
    const double* lr = logits.data() + static_cast<std::size_t>(r) * n_classes;
    double* dr = d_logits.data() + static_cast<std::size_t>(r) * n_classes;
    const int label = ds.y[rows[r]];
    double mx = lr[0];
    int arg = 0;
    for (int c = 1; c < n_classes; ++c)
      if (lr[c] > mx) {
        mx = lr[c];
        arg = c;
      }
    if (arg == label) ++correct;
    double denom = 0;
    for (int c = 0; c < n_classes; ++c) denom += std::exp(lr[c] - mx);
    loss += std::log(denom) - (lr[label] - mx);
    for (int c = 0; c < n_classes; ++c)
      dr[c] = (std::exp(lr[c] - mx) / denom - (c == label ? 1.0 : 0.0)) / b;
  }
  if (accuracy) *accuracy = static_cast<double>(correct) / b;
  return loss / b;
}

void backward_batch(const Stack& st, const std::vector<int>& widths, int first, int last,
                    const ForwardCache& cache, const std::vector<double>& d_out,
                    std::vector<LayerParams>& grads, std::vector<double>& d_input) {
  const int m_total = static_cast<int>(widths.size()) - 1;
  const int b = static_cast<int>(cache.act[0].size()) / widths[first];
  grads.assign(last - first, {});
  std::vector<double> delta = d_out;  // gradient w.r.t. post-activation output of layer l
  for (int l = last - 1; l >= first; --l) {
    const int in = widths[l], out = widths[l + 1];
    const std::vector<double>& a_prev = cache.act[l - first];
    const std::vector<double>& a_cur = cache.act[l - first + 1];
    // through the activation
    if (l + 1 < m_total) {
      for (std::size_t i = 0; i < delta.size(); ++i)
        delta[i] *= (1.0 - a_cur[i] * a_cur[i]);
    }
    LayerParams& g = grads[l - first];
    g.w.assign(static_cast<std::size_t>(out) * in, 0.0);
    g.b.assign(out, 0.0);
    std::vector<double> d_prev(static_cast<std::size_t>(b) * in, 0.0);
    const LayerParams& p = st[l];
    for (int r = 0; r < b; ++r) {
      const double* dr = delta.data() + static_cast<std::size_t>(r) * out;
      const double* ar = a_prev.data() + static_cast<std::size_t>(r) * in;
      double* dpr = d_prev.data() + static_cast<std::size_t>(r) * in;
      for (int o = 0; o < out; ++o) {
        const double d = dr[o];
        double* gw = g.w.data() + static_cast<std::size_t>(o) * in;
        const double* wr = p.w.data() + static_cast<std::size_t>(o) * in;
        g.b[o] += d;
        for (int i = 0; i < in; ++i) {
          gw[i] += d * ar[i];
          dpr[i] += d * wr[i];
        }
      }
    }
    delta.swap(d_prev);
  }
  d_input.swap(delta);
}

void sgd_step(Stack& st, int first, int last, const std::vector<LayerParams>& grads,
              double learning_rate) {
  for (int l = first; l < last; ++l) {
    LayerParams& p = st[l];
    const LayerParams& g = grads[l - first];
    for (std::size_t i = 0; i < p.w.size(); ++i) p.w[i] -= learning_rate * g.w[i];
    for (std::size_t i = 0; i < p.b.size(); ++i) p.b[i] -= learning_rate * g.b[i];
  }
}

SplitModel::TrainResult SplitModel::train_round(
    const Dataset& ds, const std::vector<std::vector<int>>& batches,
    const std::vector<double>& per_error, const std::vector<double>& sample_weights,
    double learning_rate, std::mt19937_64& outcome_rng) {
  const int n = n_clients();
  const int m = layer_count();
  if (static_cast<int>(batches.size()) != n || static_cast<int>(per_error.size()) != n ||
      static_cast<int>(sample_weights.size()) != n)
    throw std::invalid_argument("train_round: per-client arrays must share one length");

  TrainResult res;
  res.beta.assign(n, 0);
  res.loss.assign(n, std::numeric_limits<double>::quiet_NaN());
  res.checksum.assign(n, 0.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  double loss_sum = 0, acc_sum = 0;
  for (int c = 0; c < n; ++c) {
    const double u = unit(outcome_rng);  // consumed for every client to keep streams aligned
    const bool delivered = u < 1.0 - per_error[c];
    if (!delivered) continue;
    res.beta[c] = 1;

    ForwardCache cache;
    forward_batch(stacks_[c], widths_, 0, m, ds, batches[c], cache);
    double checksum = 0;
    for (double v : cache.act[cut_]) checksum += v;
    res.checksum[c] = checksum;

    std::vector<double> d_logits;
    double acc = 0;
    const double loss = softmax_cross_entropy(cache.act[m], ds, batches[c],
                                              widths_.back(), d_logits, &acc);
    res.loss[c] = loss;
    loss_sum += loss;
    acc_sum += acc;

    std::vector<LayerParams> grads;
    std::vector<double> d_input;
    backward_batch(stacks_[c], widths_, 0, m, cache, d_logits, grads, d_input);
    sgd_step(stacks_[c], 0, m, grads, learning_rate);
    ++res.participants;
  }

  if (res.participants > 0) {
    res.mean_loss = loss_sum / res.participants;
    res.mean_accuracy = acc_sum / res.participants;
    // aggregate the server side over updated clients, weighted by sample count
    double wsum = 0;
    for (int c = 0; c < n; ++c)
      if (res.beta[c]) wsum += sample_weights[c];
    for (int l = cut_; l < m; ++l) {
      LayerParams mean;
      mean.w.assign(stacks_[0][l].w.size(), 0.0);
      mean.b.assign(stacks_[0][l].b.size(), 0.0);
      for (int c = 0; c < n; ++c) {
        if (!res.beta[c]) continue;
        const double wgt = sample_weights[c] / wsum;
        for (std::size_t i = 0; i < mean.w.size(); ++i) mean.w[i] += wgt * stacks_[c][l].w[i];
        for (std::size_t i = 0; i < mean.b.size(); ++i) mean.b[i] += wgt * stacks_[c][l].b[i];
      }
      for (int c = 0; c < n; ++c) stacks_[c][l] = mean;
    }
    res.aggregated = true;
  }
  return res;
}

std::size_t SplitModel::param_count(int first_layer, int last_layer) const {
  std::size_t total = 0;
  for (int l = first_layer; l < last_layer; ++l)
    total += stacks_[0][l].w.size() + stacks_[0][l].b.size();
  return total;
}

void SplitModel::flatten(int client, int first_layer, int last_layer,
                         std::vector<double>& out) const {
  out.clear();
  out.reserve(param_count(first_layer, last_layer));
  const Stack& st = stacks_[client];
  for (int l = first_layer; l < last_layer; ++l) {
    out.insert(out.end(), st[l].w.begin(), st[l].w.end());
    out.insert(out.end(), st[l].b.begin(), st[l].b.end());
  }
}

double SplitModel::average_model_accuracy(const Dataset& ds,
                                          const std::vector<double>& sample_weights) const {
  const int n = n_clients();
  const int m = layer_count();
  double wsum = 0;
  for (double w : sample_weights) wsum += w;
  Stack avg = stacks_[0];
  for (int l = 0; l < m; ++l) {
    std::fill(avg[l].w.begin(), avg[l].w.end(), 0.0);
    std::fill(avg[l].b.begin(), avg[l].b.end(), 0.0);
    for (int c = 0; c < n; ++c) {
      const double wgt = sample_weights[c] / wsum;
      for (std::size_t i = 0; i < avg[l].w.size(); ++i) avg[l].w[i] += wgt * stacks_[c][l].w[i];
      for (std::size_t i = 0; i < avg[l].b.size(); ++i) avg[l].b[i] += wgt * stacks_[c][l].b[i];
    }
  }
  std::vector<int> rows(ds.size());
  for (int i = 0; i < ds.size(); ++i) rows[i] = i;
  ForwardCache cache;
  forward_batch(avg, widths_, 0, m, ds, rows, cache);
  const std::vector<double>& logits = cache.act[m];
  const int classes = widths_.back();
  int correct = 0;
  for (int r = 0; r < ds.size(); ++r) {
    const double* lr = logits.data() + static_cast<std::size_t>(r) * classes;
    int arg = 0;
    for (int c = 1; c < classes; ++c)
      if (lr[c] > lr[arg]) arg = c;
    if (arg == ds.y[r]) ++correct;
  }
  return static_cast<double>(correct) / ds.size();
}

ProbeSet sample_discrepancy_probe(const SplitModel& model, int cut, double ratio,
                                  std::uint64_t sampling_seed, int round) {
  const std::size_t p_c = model.client_param_count(cut);
  const std::size_t take =
      std::min(p_c, static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(p_c))));
  auto rng = make_stream(sampling_seed, "probe", static_cast<std::uint64_t>(round),
                         static_cast<std::uint64_t>(cut));

  ProbeSet probe;
  std::vector<std::size_t> idx(p_c);
  for (std::size_t i = 0; i < p_c; ++i) idx[i] = i;
  for (std::size_t i = 0; i < take; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, p_c - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  probe.indices.assign(idx.begin(), idx.begin() + take);

  const int n = model.n_clients();
  probe.per_client.resize(n);
  probe.average.assign(take, 0.0);
  std::vector<double> flat;
  for (int c = 0; c < n; ++c) {
    model.flatten(c, 0, cut, flat);
    probe.per_client[c].resize(take);
    for (std::size_t i = 0; i < take; ++i) {
      probe.per_client[c][i] = flat[probe.indices[i]];
      probe.average[i] += flat[probe.indices[i]] / n;
    }
  }
  return probe;
}

}  // namespace asfl
