#include <doctest.h>

#include <cmath>

#include "gridrl/config.hpp"
#include "gridrl/envsim.hpp"
#include "gridrl/errors.hpp"
#include "gridrl/policy.hpp"
#include "gridrl/rollout.hpp"
#include "gridrl/rng.hpp"
#include "gridrl/sft.hpp"
#include "gridrl/trajectory.hpp"

using namespace gridrl;

namespace {

struct Fx {
  RunConfig cfg;
  EnvConfig env;
  PolicyMeta meta;

  Fx() {
    env = cfg.env_config();
    meta = PolicyMeta{observation_dim(env), cfg.hidden_dim, cfg.chunk_size,
                      kVocabSize};
  }

  DemoDataset demos(int count, std::uint64_t start_seed = 0) const {
    DemoDataset ds;
    for (std::uint64_t seed = start_seed;
         static_cast<int>(ds.demos.size()) < count; ++seed) {
      try {
        const Trajectory demo = expert_demo(
            make_scenario(task_by_name("move-adjacent"), seed, env),
            cfg.chunk_size);
        ds.demos.push_back({seed, 0, demo.flat_tokens(), true});
      } catch (const GenerationError&) {
      }
    }
    return ds;
  }
};

}  // namespace

TEST_CASE("uniform policy starts at ln V cross-entropy") {
  Fx fx;
  const PolicyParams p = init_policy(fx.meta, 1);
  const auto samples = build_sft_samples(fx.demos(2), fx.env, fx.cfg.chunk_size);
  std::vector<const SftSample*> batch;
  for (const SftSample& s : samples) batch.push_back(&s);
  const SftLossResult loss = sft_loss(p, batch);
  CHECK(loss.loss == doctest::Approx(std::log(11.0)).epsilon(1e-9));
}

TEST_CASE("sft gradient matches finite differences") {
  Fx fx;
  PolicyMeta meta{4, 5, 2, 3};
  PolicyParams p = init_policy(meta, 3);
  {
    RngStream rng(3, 9);
    std::vector<float> flat = flatten_params(p);
    for (float& w : flat) {
      w += static_cast<float>(0.3 * (rng.next_unit() - 0.5));
    }
    unflatten_params(flat, p);
  }
  RngStream rng(7);
  std::vector<SftSample> samples(3);
  for (SftSample& s : samples) {
    s.observation.resize(4);
    for (double& v : s.observation) v = rng.next_unit();
    s.tokens = {static_cast<int>(rng.next_below(3)),
                static_cast<int>(rng.next_below(3))};
  }
  std::vector<const SftSample*> batch;
  for (const SftSample& s : samples) batch.push_back(&s);

  const SftLossResult result = sft_loss(p, batch);
  std::vector<float> flat = flatten_params(p);
  const double h = 1e-4;
  for (std::size_t i = 0; i < flat.size(); ++i) {
    const float saved = flat[i];
    flat[i] = static_cast<float>(saved + h);
    unflatten_params(flat, p);
    const double hi = static_cast<double>(flat[i]);
    const double fp = sft_loss(p, batch).loss;
    flat[i] = static_cast<float>(saved - h);
    unflatten_params(flat, p);
    const double lo = static_cast<double>(flat[i]);
    const double fm = sft_loss(p, batch).loss;
    flat[i] = saved;
    unflatten_params(flat, p);
    const double fd = (fp - fm) / (hi - lo);
    const double scale =
        std::max({std::abs(fd), std::abs(result.grads[i]), 1e-6});
    CHECK(std::abs(fd - result.grads[i]) / scale < 1e-4);
  }
}

TEST_CASE("fitting a single demo to convergence") {
  Fx fx;
  RunConfig cfg = fx.cfg;
  cfg.sft_epochs = 500;
  cfg.sft_symmetry_augment = false;  // plain fit of the raw samples
  cfg.master_seed = 2;
  const DemoDataset ds = fx.demos(1);
  PolicyParams p = init_policy(fx.meta, 2);
  AdamState opt = init_adam(fx.meta);
  const SftRunResult result = train_sft(p, opt, ds, cfg, nullptr);
  CHECK(result.final_loss < 0.01);

  // Memorization: greedy play solves the demo's own scenario.
  const Scenario own = make_scenario(task_by_name("move-adjacent"),
                                     ds.demos[0].scenario_seed, fx.env);
  WorkerPool pool(1);
  const SuccessReport report = evaluate(p, {own}, 1, pool);
  CHECK(report.success_rate == 1.0);
}

TEST_CASE("sft never sees PUSH and the greedy policy never pushes") {
  Fx fx;
  RunConfig cfg = fx.cfg;
  cfg.sft_epochs = 80;
  cfg.master_seed = 3;
  const DemoDataset ds = fx.demos(10);
  for (const DemoRecord& demo : ds.demos) {
    for (int token : demo.tokens) {
      CHECK((token < kTokenPushN || token > kTokenPushW));
    }
  }
  PolicyParams p = init_policy(fx.meta, 3);
  AdamState opt = init_adam(fx.meta);
  train_sft(p, opt, ds, cfg, nullptr);
  WorkerPool pool(2);
  const auto scenarios = make_eval_scenarios({0}, 10000, 10050, fx.env);
  const SuccessReport report = evaluate(p, scenarios, 1, pool);
  CHECK(report.push_fraction == 0.0);
}

TEST_CASE("loss trend is non-increasing over epochs on a fixed dataset") {
  Fx fx;
  const DemoDataset ds = fx.demos(5);
  std::vector<double> medians;
  for (int epochs : {5, 25, 50}) {
    std::vector<double> losses;
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
      RunConfig cfg = fx.cfg;
      cfg.sft_epochs = epochs;
      cfg.master_seed = seed;
      PolicyParams p = init_policy(fx.meta, seed);
      AdamState opt = init_adam(fx.meta);
      losses.push_back(train_sft(p, opt, ds, cfg, nullptr).final_loss);
    }
    std::sort(losses.begin(), losses.end());
    medians.push_back(losses[1]);
  }
  CHECK(medians[1] < medians[0]);
  CHECK(medians[2] < medians[1]);
}

TEST_CASE("dataset validation rejects bad demos") {
  Fx fx;
  DemoDataset ds = fx.demos(1);

  SUBCASE("token out of range") {
    ds.demos[0].tokens[0] = 99;
    CHECK_THROWS_AS(validate_dataset(ds, fx.env), DataError);
  }

  SUBCASE("non-replaying token stream") {
    for (int& token : ds.demos[0].tokens) token = kTokenNoop;
    CHECK_THROWS_AS(validate_dataset(ds, fx.env), DataError);
  }

  SUBCASE("valid dataset passes") {
    CHECK_NOTHROW(validate_dataset(ds, fx.env));
  }
}

TEST_CASE("symmetry augmentation multiplies samples eightfold") {
  Fx fx;
  const DemoDataset ds = fx.demos(1);
  const auto plain = build_sft_samples(ds, fx.env, fx.cfg.chunk_size, false);
  const auto augmented = build_sft_samples(ds, fx.env, fx.cfg.chunk_size, true);
  CHECK(augmented.size() == 8 * plain.size());
  // All samples stay chunk-shaped with in-range tokens.
  for (const SftSample& s : augmented) {
    CHECK(s.tokens.size() == static_cast<std::size_t>(fx.cfg.chunk_size));
    for (int token : s.tokens) {
      CHECK(token >= 0);
      CHECK(token < kVocabSize);
    }
    CHECK(static_cast<int>(s.observation.size()) == observation_dim(fx.env));
  }
}
