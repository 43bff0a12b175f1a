#include "gridrl/policy.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gridrl/errors.hpp"

namespace gridrl {

namespace {

// y = W x + b, double accumulation over float weights.
void linear_forward(const LinearLayer& layer, const double* x, double* y) {
  for (int r = 0; r < layer.out; ++r) {
    double acc = layer.bias[static_cast<std::size_t>(r)];
    const float* w = layer.weight.data() +
                     static_cast<std::size_t>(r) *
                         static_cast<std::size_t>(layer.in);
    for (int c = 0; c < layer.in; ++c) {
      acc += static_cast<double>(w[c]) * x[c];
    }
    y[r] = acc;
  }
}

struct ForwardCache {
  std::vector<double> x;   // input
  std::vector<double> z1;  // pre-activation hidden0
  std::vector<double> h1;
  std::vector<double> z2;  // pre-activation hidden1
  std::vector<double> h2;
  std::vector<double> logits;
};

ForwardCache forward_cached(const PolicyParams& p,
                            const std::vector<double>& obs) {
  if (static_cast<int>(obs.size()) != p.meta.input_dim) {
    throw ConfigError("input_dim",
                      "observation dim " + std::to_string(obs.size()) +
                          " does not match policy input_dim " +
                          std::to_string(p.meta.input_dim));
  }
  ForwardCache c;
  c.x = obs;
  c.z1.resize(static_cast<std::size_t>(p.hidden0.out));
  linear_forward(p.hidden0, c.x.data(), c.z1.data());
  c.h1 = c.z1;
  for (double& v : c.h1) v = v > 0.0 ? v : 0.0;
  c.z2.resize(static_cast<std::size_t>(p.hidden1.out));
  linear_forward(p.hidden1, c.h1.data(), c.z2.data());
  c.h2 = c.z2;
  for (double& v : c.h2) v = v > 0.0 ? v : 0.0;
  c.logits.resize(static_cast<std::size_t>(p.head.out));
  linear_forward(p.head, c.h2.data(), c.logits.data());
  return c;
}

// Backprop from dlogits through head and both hidden layers into grads.
void backprop(const PolicyParams& p, const ForwardCache& c,
              const std::vector<double>& dlogits, GradVector& grads) {
  const ParamLayout lay = param_layout(p.meta);
  const int hid = p.meta.hidden_dim;

  std::vector<double> dh2(static_cast<std::size_t>(hid), 0.0);
  for (int r = 0; r < p.head.out; ++r) {
    const double g = dlogits[static_cast<std::size_t>(r)];
    if (g == 0.0) continue;
    const std::size_t row = static_cast<std::size_t>(r) *
                            static_cast<std::size_t>(hid);
    for (int k = 0; k < hid; ++k) {
      grads[lay.hw + row + static_cast<std::size_t>(k)] +=
          g * c.h2[static_cast<std::size_t>(k)];
      dh2[static_cast<std::size_t>(k)] +=
          g * static_cast<double>(p.head.weight[row + static_cast<std::size_t>(k)]);
    }
    grads[lay.hb + static_cast<std::size_t>(r)] += g;
  }

  std::vector<double> dh1(static_cast<std::size_t>(hid), 0.0);
  for (int r = 0; r < hid; ++r) {
    const double dz = c.z2[static_cast<std::size_t>(r)] > 0.0
                          ? dh2[static_cast<std::size_t>(r)]
                          : 0.0;
    if (dz == 0.0) continue;
    const std::size_t row = static_cast<std::size_t>(r) *
                            static_cast<std::size_t>(hid);
    for (int k = 0; k < hid; ++k) {
      grads[lay.w1 + row + static_cast<std::size_t>(k)] +=
          dz * c.h1[static_cast<std::size_t>(k)];
      dh1[static_cast<std::size_t>(k)] +=
          dz *
          static_cast<double>(p.hidden1.weight[row + static_cast<std::size_t>(k)]);
    }
    grads[lay.b1 + static_cast<std::size_t>(r)] += dz;
  }

  const int in = p.meta.input_dim;
  for (int r = 0; r < hid; ++r) {
    const double dz = c.z1[static_cast<std::size_t>(r)] > 0.0
                          ? dh1[static_cast<std::size_t>(r)]
                          : 0.0;
    if (dz == 0.0) continue;
    const std::size_t row = static_cast<std::size_t>(r) *
                            static_cast<std::size_t>(in);
    for (int k = 0; k < in; ++k) {
      grads[lay.w0 + row + static_cast<std::size_t>(k)] +=
          dz * c.x[static_cast<std::size_t>(k)];
    }
    grads[lay.b0 + static_cast<std::size_t>(r)] += dz;
  }
}

}  // namespace

ParamLayout param_layout(const PolicyMeta& meta) {
  const auto hid = static_cast<std::size_t>(meta.hidden_dim);
  const auto in = static_cast<std::size_t>(meta.input_dim);
  const auto head = static_cast<std::size_t>(meta.chunk_size) *
                    static_cast<std::size_t>(meta.vocab_size);
  ParamLayout lay;
  lay.w0 = 0;
  lay.b0 = lay.w0 + hid * in;
  lay.w1 = lay.b0 + hid;
  lay.b1 = lay.w1 + hid * hid;
  lay.hw = lay.b1 + hid;
  lay.hb = lay.hw + head * hid;
  lay.total = lay.hb + head;
  return lay;
}

std::vector<float> flatten_params(const PolicyParams& p) {
  std::vector<float> flat;
  flat.reserve(param_layout(p.meta).total);
  for (const LinearLayer* layer : {&p.hidden0, &p.hidden1, &p.head}) {
    flat.insert(flat.end(), layer->weight.begin(), layer->weight.end());
    flat.insert(flat.end(), layer->bias.begin(), layer->bias.end());
  }
  return flat;
}

void unflatten_params(const std::vector<float>& flat, PolicyParams& p) {
  const ParamLayout lay = param_layout(p.meta);
  if (flat.size() != lay.total) {
    throw ConfigError("checkpoint", "flat parameter size mismatch");
  }
  auto it = flat.begin();
  for (LinearLayer* layer : {&p.hidden0, &p.hidden1, &p.head}) {
    std::copy(it, it + static_cast<std::ptrdiff_t>(layer->weight.size()),
              layer->weight.begin());
    it += static_cast<std::ptrdiff_t>(layer->weight.size());
    std::copy(it, it + static_cast<std::ptrdiff_t>(layer->bias.size()),
              layer->bias.begin());
    it += static_cast<std::ptrdiff_t>(layer->bias.size());
  }
}

PolicyParams init_policy(const PolicyMeta& meta, std::uint64_t seed) {
  if (meta.input_dim < 1 || meta.hidden_dim < 1 || meta.chunk_size < 1 ||
      meta.vocab_size < 2) {
    throw ConfigError("policy", "invalid policy dimensions");
  }
  PolicyParams p;
  p.meta = meta;
  const auto make_layer = [&](int out, int in, bool zero,
                              std::uint64_t stream) {
    LinearLayer layer;
    layer.out = out;
    layer.in = in;
    layer.weight.assign(static_cast<std::size_t>(out) *
                            static_cast<std::size_t>(in),
                        0.0f);
    layer.bias.assign(static_cast<std::size_t>(out), 0.0f);
    if (!zero) {
      RngStream rng(StreamId::policy_init, seed, stream);
      const double bound = 1.0 / std::sqrt(static_cast<double>(in));
      for (float& w : layer.weight) {
        w = static_cast<float>((2.0 * rng.next_unit() - 1.0) * bound);
      }
    }
    return layer;
  };
  p.hidden0 = make_layer(meta.hidden_dim, meta.input_dim, false, 0);
  p.hidden1 = make_layer(meta.hidden_dim, meta.hidden_dim, false, 1);
  p.head = make_layer(meta.chunk_size * meta.vocab_size, meta.hidden_dim,
                      true, 2);
  return p;
}

void validate_params(const PolicyParams& p) {
  const auto check = [](const LinearLayer& layer, const char* name) {
    for (float w : layer.weight) {
      if (!std::isfinite(w)) {
        throw NumericError(std::string("non-finite weight in ") + name);
      }
    }
    for (float b : layer.bias) {
      if (!std::isfinite(b)) {
        throw NumericError(std::string("non-finite bias in ") + name);
      }
    }
  };
  check(p.hidden0, "hidden0");
  check(p.hidden1, "hidden1");
  check(p.head, "head");
}

ChunkDistribution forward(const PolicyParams& params,
                          const std::vector<double>& observation,
                          double temperature) {
  const ForwardCache cache = forward_cached(params, observation);
  ChunkDistribution dist;
  dist.chunk_size = params.meta.chunk_size;
  dist.vocab_size = params.meta.vocab_size;
  dist.logits = cache.logits;
  dist.temperature = temperature;
  return dist;
}

std::vector<double> row_log_softmax(const double* row, int vocab,
                                    double temperature) {
  double mx = row[0];
  for (int v = 1; v < vocab; ++v) mx = std::max(mx, row[v]);
  std::vector<double> logp(static_cast<std::size_t>(vocab));
  double sum = 0.0;
  for (int v = 0; v < vocab; ++v) {
    logp[static_cast<std::size_t>(v)] = (row[v] - mx) / temperature;
    sum += std::exp(logp[static_cast<std::size_t>(v)]);
  }
  const double log_z = std::log(sum);
  for (double& lp : logp) lp -= log_z;
  return logp;
}

SampledChunk sample_chunk(const ChunkDistribution& dist, RngStream& rng) {
  SampledChunk out;
  out.tokens.reserve(static_cast<std::size_t>(dist.chunk_size));
  out.logprobs.reserve(static_cast<std::size_t>(dist.chunk_size));
  for (int r = 0; r < dist.chunk_size; ++r) {
    const std::vector<double> logp = row_log_softmax(
        dist.logits.data() + static_cast<std::size_t>(r) *
                                 static_cast<std::size_t>(dist.vocab_size),
        dist.vocab_size, dist.temperature);
    const double u = rng.next_unit();
    double cum = 0.0;
    int token = dist.vocab_size - 1;
    for (int v = 0; v < dist.vocab_size; ++v) {
      cum += std::exp(logp[static_cast<std::size_t>(v)]);
      if (u < cum) {
        token = v;
        break;
      }
    }
    out.tokens.push_back(token);
    out.logprobs.push_back(logp[static_cast<std::size_t>(token)]);
    double entropy = 0.0;
    for (double lp : logp) entropy -= std::exp(lp) * lp;
    out.entropy_sum += entropy;
  }
  return out;
}

std::vector<int> greedy_chunk(const ChunkDistribution& dist) {
  std::vector<int> tokens(static_cast<std::size_t>(dist.chunk_size));
  for (int r = 0; r < dist.chunk_size; ++r) {
    const double* row = dist.logits.data() +
                        static_cast<std::size_t>(r) *
                            static_cast<std::size_t>(dist.vocab_size);
    int best = 0;
    for (int v = 1; v < dist.vocab_size; ++v) {
      if (row[v] > row[best]) best = v;
    }
    tokens[static_cast<std::size_t>(r)] = best;
  }
  return tokens;
}

std::vector<double> logprob_of(const PolicyParams& params,
                               const std::vector<double>& observation,
                               const std::vector<int>& tokens,
                               double temperature) {
  const ForwardCache cache = forward_cached(params, observation);
  std::vector<double> out;
  out.reserve(tokens.size());
  for (std::size_t r = 0; r < tokens.size(); ++r) {
    const int token = tokens[r];
    if (token < 0 || token >= params.meta.vocab_size) {
      throw DataError("token " + std::to_string(token) +
                      " outside vocabulary");
    }
    const std::vector<double> logp = row_log_softmax(
        cache.logits.data() + r * static_cast<std::size_t>(
                                      params.meta.vocab_size),
        params.meta.vocab_size, temperature);
    out.push_back(logp[static_cast<std::size_t>(token)]);
  }
  return out;
}

GradVector backward(const PolicyParams& params,
                    const std::vector<WeightedChunk>& items,
                    double temperature) {
  GradVector grads(param_layout(params.meta).total, 0.0);
  const int vocab = params.meta.vocab_size;
  std::vector<double> dlogits;
  for (const WeightedChunk& item : items) {
    if (item.tokens.size() != item.coeffs.size() ||
        item.tokens.size() >
            static_cast<std::size_t>(params.meta.chunk_size)) {
      throw ConfigError("backward", "token/coefficient shape mismatch");
    }
    const ForwardCache cache = forward_cached(params, item.observation);
    dlogits.assign(cache.logits.size(), 0.0);
    for (std::size_t r = 0; r < item.tokens.size(); ++r) {
      const double coeff = item.coeffs[r];
      if (!std::isfinite(coeff)) {
        throw NumericError("non-finite backward coefficient");
      }
      if (coeff == 0.0) continue;
      const std::vector<double> logp = row_log_softmax(
          cache.logits.data() + r * static_cast<std::size_t>(vocab), vocab,
          temperature);
      // d logpi(a)/d logit_v = (1[v == a] - p_v) / T
      for (int v = 0; v < vocab; ++v) {
        const double indicator = v == item.tokens[r] ? 1.0 : 0.0;
        dlogits[r * static_cast<std::size_t>(vocab) +
                static_cast<std::size_t>(v)] +=
            coeff * (indicator - std::exp(logp[static_cast<std::size_t>(v)])) /
            temperature;
      }
    }
    backprop(params, cache, dlogits, grads);
  }
  return grads;
}

void accumulate_logit_grads(const PolicyParams& params,
                            const std::vector<double>& observation,
                            const std::vector<double>& dlogits,
                            GradVector& grads) {
  const ForwardCache cache = forward_cached(params, observation);
  if (dlogits.size() != cache.logits.size()) {
    throw ConfigError("backward", "dlogits shape mismatch");
  }
  backprop(params, cache, dlogits, grads);
}

AdamState init_adam(const PolicyMeta& meta) {
  AdamState state;
  const std::size_t n = param_layout(meta).total;
  state.m.assign(n, 0.0f);
  state.v.assign(n, 0.0f);
  state.step = 0;
  return state;
}

void adam_step(PolicyParams& params, const GradVector& grads, AdamState& state,
               double lr) {
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  const ParamLayout lay = param_layout(params.meta);
  if (grads.size() != lay.total || state.m.size() != lay.total) {
    throw ConfigError("adam", "gradient/state size mismatch");
  }
  std::vector<float> flat = flatten_params(params);
  state.step += 1;
  const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < lay.total; ++i) {
    const double g = grads[i];
    if (!std::isfinite(g)) throw NumericError("non-finite gradient");
    const double m = kBeta1 * static_cast<double>(state.m[i]) +
                     (1.0 - kBeta1) * g;
    const double v = kBeta2 * static_cast<double>(state.v[i]) +
                     (1.0 - kBeta2) * g * g;
    state.m[i] = static_cast<float>(m);
    state.v[i] = static_cast<float>(v);
    const double update = lr * (m / bc1) / (std::sqrt(v / bc2) + kEps);
    flat[i] = static_cast<float>(static_cast<double>(flat[i]) - update);
  }
  unflatten_params(flat, params);
  validate_params(params);
}

}  // namespace gridrl
