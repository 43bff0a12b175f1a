#pragma once

#include <cstdint>
#include <vector>

#include "gridrl/rng.hpp"

namespace gridrl {

struct PolicyMeta {
  int input_dim = 0;
  int hidden_dim = 128;
  int chunk_size = 8;
  int vocab_size = 11;

  friend bool operator==(const PolicyMeta&, const PolicyMeta&) = default;
};

struct LinearLayer {
  int out = 0;
  int in = 0;
  std::vector<float> weight;  // row-major [out x in]
  std::vector<float> bias;    // [out]
};

// All learnable tensors. Two ReLU hidden layers feed a linear head that
// emits logits for every chunk position in one pass. Storage is float32;
// arithmetic runs in double.
struct PolicyParams {
  PolicyMeta meta;
  LinearLayer hidden0;
  LinearLayer hidden1;
  LinearLayer head;  // [(chunk_size * vocab_size) x hidden_dim]
};

// Flat parameter order: hidden0.w, hidden0.b, hidden1.w, hidden1.b,
// head.w, head.b. Gradients, Adam state and checkpoints all share it.
struct ParamLayout {
  std::size_t w0 = 0, b0 = 0, w1 = 0, b1 = 0, hw = 0, hb = 0;
  std::size_t total = 0;
};

ParamLayout param_layout(const PolicyMeta& meta);
std::vector<float> flatten_params(const PolicyParams& params);
void unflatten_params(const std::vector<float>& flat, PolicyParams& params);

using GradVector = std::vector<double>;

// Hidden layers get fan-in-scaled uniform weights; the head starts at zero
// so the initial policy is uniform over tokens.
PolicyParams init_policy(const PolicyMeta& meta, std::uint64_t seed);

void validate_params(const PolicyParams& params);

struct ChunkDistribution {
  int chunk_size = 0;
  int vocab_size = 0;
  std::vector<double> logits;  // row-major [chunk_size x vocab_size]
  double temperature = 1.0;
};

ChunkDistribution forward(const PolicyParams& params,
                          const std::vector<double>& observation,
                          double temperature = 1.0);

// Temperature-scaled log-softmax of one logits row. Shared by sampling and
// ratio evaluation so recomputed log-probabilities match stored ones bit for
// bit.
std::vector<double> row_log_softmax(const double* row, int vocab,
                                    double temperature);

struct SampledChunk {
  std::vector<int> tokens;
  std::vector<double> logprobs;
  double entropy_sum = 0.0;  // behavior entropy summed over rows, in nats
};

SampledChunk sample_chunk(const ChunkDistribution& dist, RngStream& rng);

// Per-row argmax; ties break toward the lowest token index.
std::vector<int> greedy_chunk(const ChunkDistribution& dist);

std::vector<double> logprob_of(const PolicyParams& params,
                               const std::vector<double>& observation,
                               const std::vector<int>& tokens,
                               double temperature);

// One weighted-log-likelihood term: d/dtheta sum_t coeffs[t] *
// log pi(tokens[t] | observation, row t). Rows beyond tokens.size() do not
// contribute.
struct WeightedChunk {
  std::vector<double> observation;
  std::vector<int> tokens;
  std::vector<double> coeffs;
};

// Exact analytic gradient of sum over items of the weighted log-likelihood.
GradVector backward(const PolicyParams& params,
                    const std::vector<WeightedChunk>& items,
                    double temperature);

// Accumulates parameter gradients from explicit per-logit gradients
// (row-major [chunk_size x vocab_size]). Building block for objectives that
// are not plain log-likelihoods, e.g. the KL regularizer.
void accumulate_logit_grads(const PolicyParams& params,
                            const std::vector<double>& observation,
                            const std::vector<double>& dlogits,
                            GradVector& grads);

struct AdamState {
  std::vector<float> m;
  std::vector<float> v;
  std::int64_t step = 0;
};

AdamState init_adam(const PolicyMeta& meta);

// Bias-corrected Adam (beta1 = 0.9, beta2 = 0.999, eps = 1e-8).
void adam_step(PolicyParams& params, const GradVector& grads, AdamState& state,
               double lr);

}  // namespace gridrl
