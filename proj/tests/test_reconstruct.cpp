// Copyright 2026 The Detox Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "detox/generation.hpp"
#include "detox/reconstruct.hpp"
#include "desk_fixture.hpp"
#include "oracle.hpp"

namespace detox {
namespace {

NextTokenDistribution dist(std::vector<double> p) { return NextTokenDistribution(std::move(p)); }

ReconstructionConfig exp_config(double lambda, double tau, Normalization mode = Normalization::kRenormalize) {
  ReconstructionConfig c;
  c.decay.lambda = lambda;
  c.decay.tau = tau;
  c.normalization = mode;
  return c;
}

// Every token exposed on both sides.
ReconstructionConfig full_exposure(ReconstructionConfig c) {
  c.expert_top_fraction = 1.0;
  c.base_top_fraction = 1.0;
  return c;
}

TEST(Delta, Fixtures) {
  const auto d = delta(dist({0.6, 0.3, 0.1}), dist({0.2, 0.5, 0.3}));
  EXPECT_NEAR(d[0], 0.4, 1e-15);
  EXPECT_NEAR(d[1], -0.2, 1e-15);
  EXPECT_NEAR(d[2], -0.2, 1e-15);
  EXPECT_NEAR(d[0] + d[1] + d[2], 0.0, 1e-15);
  for (double x : delta(dist({0.5, 0.5}), dist({0.5, 0.5}))) EXPECT_EQ(x, 0.0);
  EXPECT_THROW(delta(dist({1.0}), dist({0.5, 0.5})), std::invalid_argument);
}

TEST(Decay, ExponentialFixtures) {
  DecayConfig c;
  c.lambda = 100.0;
  c.tau = 0.05;
  EXPECT_EQ(decay(-0.1, c), 1.0);
  EXPECT_EQ(decay(0.0, c), 1.0);
  EXPECT_NEAR(decay(0.02, c), std::exp(-2.0), 1e-12);
  // Literal branch: above 1 between -tau and 0.
  EXPECT_GT(decay(-0.01, c), 1.0);
  EXPECT_EQ(DecayConfig{}.lambda, 50.0);
  EXPECT_EQ(DecayConfig{}.tau, 0.05);
}

TEST(Decay, OtherFamilies) {
  DecayConfig c;
  c.lambda = 100.0;
  c.tau = 0.05;
  c.family = DecayFamily::kLinear;
  EXPECT_NEAR(decay(0.25, c), 0.7, 1e-12);
  EXPECT_EQ(decay(5.0, c), 1e-6);
  c.family = DecayFamily::kInversePower;
  EXPECT_NEAR(decay(0.15, c), std::pow(1.2, -10.0), 1e-12);
  c.family = DecayFamily::kLogistic;
  EXPECT_NEAR(decay(0.05, c), 0.5, 1e-12);
}

TEST(Decay, BoundaryAndMonotonic) {
  std::mt19937_64 rng(5);
  for (auto family : {DecayFamily::kExponential, DecayFamily::kLinear, DecayFamily::kInversePower,
                      DecayFamily::kLogistic}) {
    // The logistic near-one bound below needs lambda >= ~20 at tau = 0.05.
    for (double lambda : {50.0, 100.0, 150.0}) {
      DecayConfig c{family, lambda, 0.05};
      std::uniform_real_distribution<double> below(-1.0, -0.05);
      for (int i = 0; i < 200; ++i) {
        const double x = below(rng);
        if (family == DecayFamily::kLogistic) {
          if (x <= -0.05 - 5.0 / lambda) {
            EXPECT_GE(decay(x, c), 1.0 - 1e-3);
          }
        } else if (x < -0.05) {
          EXPECT_EQ(decay(x, c), 1.0);
        }
      }
      double prev = decay(-0.05, c);
      for (double x = -0.05; x <= 1.0; x += 0.01) {
        const double a = decay(x, c);
        EXPECT_LE(a, prev + 1e-15) << decay_family_name(family) << " x=" << x;
        EXPECT_GT(a, 0.0);
        prev = a;
      }
    }
  }
}

TEST(Decay, StrictlyDecreasingInLambda) {
  for (double x : {0.01, 0.1, 0.3}) {
    double prev = 2.0;
    for (double lambda : {1.0, 10.0, 50.0, 100.0}) {
      const double a = decay(x, DecayConfig{DecayFamily::kExponential, lambda, 0.05});
      EXPECT_LT(a, prev);
      prev = a;
    }
  }
}

TEST(Decay, ParseNames) {
  EXPECT_EQ(parse_decay_family("exp"), DecayFamily::kExponential);
  EXPECT_EQ(parse_decay_family("inverse_power"), DecayFamily::kInversePower);
  EXPECT_THROW(parse_decay_family("cubic"), std::invalid_argument);
  EXPECT_EQ(parse_normalization("renorm"), Normalization::kRenormalize);
  EXPECT_THROW(parse_normalization("l2"), std::invalid_argument);
  EXPECT_THROW((DecayConfig{DecayFamily::kExponential, 0.0, 0.05}.validate()), std::invalid_argument);
}

TEST(Candidates, ExposureSizes) {
  EXPECT_EQ(exposed_count(0.3, 10), 3u);
  EXPECT_EQ(exposed_count(0.5, 10), 5u);
  EXPECT_EQ(exposed_count(0.3, 11), 4u);
  EXPECT_EQ(exposed_count(0.3, 1), 1u);
}

TEST(Candidates, IdenticalRankingGivesExpertTop) {
  const auto p = dist({0.05, 0.3, 0.1, 0.2, 0.02, 0.08, 0.15, 0.04, 0.03, 0.03});
  EXPECT_EQ(candidate_intersection(p, p, ReconstructionConfig{}), (std::vector<TokenId>{1, 3, 6}));
}

TEST(Candidates, DisjointIsEmptyAndFallsBack) {
  const auto expert = dist({0.0, 0.0, 0.5, 0.5});
  const auto base = dist({0.5, 0.5, 0.0, 0.0});
  ReconstructionConfig c;
  c.base_top_fraction = 0.5;
  c.expert_top_fraction = 0.5;
  EXPECT_TRUE(candidate_intersection(expert, base, c).empty());
  const auto trace = reconstruct(expert, base, c);
  EXPECT_TRUE(trace.fallback_used);
  EXPECT_EQ(trace.output.probs, base.probs);
}

TEST(Reconstruct, IdentityUnderRenormalize) {
  const auto p = dist({0.1, 0.4, 0.2, 0.3});
  const auto trace = reconstruct(p, p, ReconstructionConfig{});
  EXPECT_FALSE(trace.fallback_used);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(trace.output.probs[i], p.probs[i], 1e-12);
}

TEST(Reconstruct, RenormalizeFixture) {
  // Delta {0.4, -0.2, -0.2}: only token 0 is attenuated.
  const auto base = dist({0.2, 0.5, 0.3});
  const auto expert = dist({0.6, 0.3, 0.1});
  const auto trace = reconstruct(expert, base, full_exposure(exp_config(100.0, 0.05)));
  EXPECT_EQ(trace.candidate_set, (std::vector<TokenId>{0, 1, 2}));
  EXPECT_EQ(trace.alpha[1], 1.0);
  EXPECT_NEAR(trace.alpha[0], std::exp(-40.0), 1e-30);
  EXPECT_NEAR(trace.output.probs[0], 0.0, 1e-15);
  EXPECT_NEAR(trace.output.probs[1], 0.625, 1e-12);
  EXPECT_NEAR(trace.output.probs[2], 0.375, 1e-12);
}

TEST(Reconstruct, SoftmaxFixture) {
  const auto base = dist({0.2, 0.5, 0.3});
  const auto expert = dist({0.6, 0.3, 0.1});
  const auto out = reconstruct(expert, base, full_exposure(exp_config(100.0, 0.05, Normalization::kSoftmax))).output;
  // Scaled vector {0.2 e^-40, 0.5, 0.3}; e^-40 * 0.2 is below double resolution against 1.
  const double z = std::exp(0.0) + std::exp(0.5) + std::exp(0.3);
  EXPECT_NEAR(out.probs[0], 1.0 / z, 1e-12);
  EXPECT_NEAR(out.probs[1], std::exp(0.5) / z, 1e-12);
  EXPECT_NEAR(out.probs[2], std::exp(0.3) / z, 1e-12);
  EXPECT_NEAR(out.probs[0], 0.2501, 1e-4);
  EXPECT_NEAR(out.probs[1], 0.4123, 1e-4);
  EXPECT_NEAR(out.probs[2], 0.3376, 1e-4);
}

TEST(Reconstruct, SuppressionRatio) {
  const auto base = dist({0.4, 0.3, 0.2, 0.1});
  const auto expert = dist({0.7, 0.1, 0.1, 0.1});
  const auto config = exp_config(50.0, 0.05);
  const auto trace = reconstruct(expert, base, config);
  ASSERT_EQ(trace.candidate_set, (std::vector<TokenId>{0, 1}));
  const double expected = (0.4 / 0.3) * std::exp(-50.0 * 0.3);
  EXPECT_NEAR(trace.output.probs[0] / trace.output.probs[1], expected, expected * 1e-9);
  EXPECT_LT(trace.output.probs[0] / trace.output.probs[1], 0.4 / 0.3);
}

TEST(Reconstruct, SuppressedTokenNotGreedyChoice) {
  // Token 0 leads the base, but 0.4 * e^{-15} < 0.3 so greedy moves to 1.
  const auto base = dist({0.4, 0.3, 0.2, 0.1});
  const auto expert = dist({0.7, 0.1, 0.1, 0.1});
  Rng rng(0);
  const auto out = reconstruct(expert, base, exp_config(50.0, 0.05)).output;
  EXPECT_EQ(select_token(base, SelectionStrategy::greedy(), rng), 0);
  EXPECT_EQ(select_token(out, SelectionStrategy::greedy(), rng), 1);
}

TEST(Reconstruct, NormalizedInBothModes) {
  std::mt19937_64 rng(11);
  std::gamma_distribution<double> g(0.5);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t v = 2 + trial % 30;
    std::vector<double> a(v);
    std::vector<double> b(v);
    double sa = 0.0;
    double sb = 0.0;
    for (std::size_t i = 0; i < v; ++i) {
      sa += a[i] = g(rng) + 1e-12;
      sb += b[i] = g(rng) + 1e-12;
    }
    for (std::size_t i = 0; i < v; ++i) {
      a[i] /= sa;
      b[i] /= sb;
    }
    for (auto mode : {Normalization::kSoftmax, Normalization::kRenormalize}) {
      const auto out = reconstruct(dist(a), dist(b), exp_config(100.0, 0.05, mode)).output;
      EXPECT_TRUE(is_normalized(out));
    }
  }
}

TEST(Reconstruct, MatchesOracle) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> tenth(0, 10);
  for (int trial = 0; trial < 3000; ++trial) {
    const std::size_t v = 2 + static_cast<std::size_t>(trial % 5);
    auto grid_point = [&] {
      // Random composition of 10 tenths over v slots.
      std::vector<int> units(v, 0);
      for (int u = 0; u < 10; ++u) ++units[static_cast<std::size_t>(rng() % v)];
      std::vector<double> p(v);
      for (std::size_t i = 0; i < v; ++i) p[i] = units[i] / 10.0;
      return p;
    };
    const auto e = grid_point();
    const auto b = grid_point();
    for (auto mode : {oracle::Mode::kSoftmax, oracle::Mode::kRenormalize}) {
      oracle::Params params;
      params.lambda = 100.0;
      params.mode = mode;
      const auto expected = oracle::reconstruct(e, b, params);
      const auto config = exp_config(
          100.0, 0.05, mode == oracle::Mode::kSoftmax ? Normalization::kSoftmax : Normalization::kRenormalize);
      const auto trace = reconstruct(dist(e), dist(b), config);
      ASSERT_EQ(trace.fallback_used, expected.fallback);
      ASSERT_EQ(trace.candidate_set.size(), expected.candidates.size());
      for (std::size_t i = 0; i < v; ++i) ASSERT_NEAR(trace.output.probs[i], expected.output[i], 1e-9);
    }
  }
}

// Random floor-plus-entries distribution with deliberate ties, entries equal
// to the floor and entries below it.
SparseDistribution random_sparse(std::mt19937_64& rng, std::size_t v) {
  std::uniform_int_distribution<int> level(0, 6);
  const int floor_level = 1 + static_cast<int>(rng() % 3);
  SparseDistribution s;
  s.vocab_size = v;
  std::vector<std::pair<TokenId, int>> raw;
  for (std::size_t i = 0; i < v; ++i) {
    if (rng() % 3 == 0) raw.emplace_back(static_cast<TokenId>(i), level(rng));
  }
  double total = static_cast<double>(floor_level) * static_cast<double>(v - raw.size());
  for (const auto& [id, r] : raw) total += r;
  if (total == 0.0) {
    raw.clear();
    total = static_cast<double>(floor_level) * static_cast<double>(v);
  }
  s.floor = floor_level / total;
  for (const auto& [id, r] : raw) s.entries.emplace_back(id, r / total);
  return s;
}

TEST(Reconstruct, SparseMatchesDense) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 4000; ++trial) {
    const std::size_t v = 1 + rng() % 40;
    const auto e = random_sparse(rng, v);
    const auto b = random_sparse(rng, v);
    for (auto mode : {Normalization::kSoftmax, Normalization::kRenormalize}) {
      for (auto family : {DecayFamily::kExponential, DecayFamily::kLinear, DecayFamily::kLogistic}) {
        auto config = exp_config(100.0, 0.05, mode);
        config.decay.family = family;
        bool fallback = false;
        const auto sparse = reconstruct_sparse(e, b, config, &fallback);
        const auto dense = reconstruct(e.dense(), b.dense(), config);
        ASSERT_EQ(fallback, dense.fallback_used) << "trial " << trial;
        ASSERT_EQ(sparse.size(), v);
        for (std::size_t i = 0; i < v; ++i) {
          ASSERT_NEAR(sparse.probs[i], dense.output.probs[i], 1e-12) << "trial " << trial << " id " << i;
        }
      }
    }
  }
}

using testing::small_desk_models;

TEST(Decoder, ObservedAndFastPathsAgree) {
  const auto& models = small_desk_models();
  for (auto mode : {Normalization::kSoftmax, Normalization::kRenormalize}) {
    auto config = exp_config(100.0, 0.05, mode);
    ExpertGuidedDecoder fast(models.expert, models.base, config);
    ExpertGuidedDecoder observed(models.expert, models.base, config);
    int steps = 0;
    observed.set_observer([&](const ReconstructionTrace&) { ++steps; });
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<TokenId> prefix;
      for (std::size_t n = rng() % 4; n > 0; --n) {
        prefix.push_back(static_cast<TokenId>(3 + rng() % (models.vocab.size() - 3)));
      }
      const auto a = fast.next_token_distribution(prefix);
      const auto b = observed.next_token_distribution(prefix);
      for (std::size_t i = 0; i < a.size(); ++i) ASSERT_NEAR(a.probs[i], b.probs[i], 1e-12);
    }
    EXPECT_EQ(steps, 200);
  }
}

TEST(Decoder, IdentityWhenExpertIsBase) {
  const auto& models = small_desk_models();
  ExpertGuidedDecoder decoder(models.base, models.base, ReconstructionConfig{});
  GenerationConfig config;
  config.selection = SelectionStrategy::top_k(20);
  config.seed = 5;
  const std::vector<TokenId> prefix = {models.vocab.lookup("the")};
  EXPECT_EQ(generate(decoder, prefix, config).ids, generate(models.base, prefix, config).ids);
}

TEST(Decoder, DebiasStepIdentityAndTrace) {
  const auto& models = small_desk_models();
  ReconstructionConfig config;
  config.selection = SelectionStrategy::top_k(20);
  const std::vector<TokenId> prefix = {models.vocab.lookup("you")};
  Rng a(9);
  Rng b(9);
  const auto [token, trace] = debias_step(models.base, models.base, prefix, config, a);
  EXPECT_EQ(token, select_token(models.base.next_token_distribution(prefix), config.selection, b));
  EXPECT_FALSE(trace.fallback_used);

  const auto j = trace_to_json(trace, token);
  EXPECT_EQ(j["chosen"], token);
  EXPECT_EQ(j["fallback"], false);
  ASSERT_EQ(j["candidates"].size(), trace.candidate_set.size());
  for (const auto& c : j["candidates"]) {
    EXPECT_EQ(c[1].get<double>(), 0.0);
    EXPECT_EQ(c[2].get<double>(), 1.0);
  }
  EXPECT_EQ(config_to_json(config)["normalization"], "renormalize");
}

TEST(Decoder, RejectsVocabularyMismatch) {
  NGramModel a(2, 1.0, 5, 1);
  NGramModel b(2, 1.0, 6, 1);
  EXPECT_THROW(ExpertGuidedDecoder(a, b, ReconstructionConfig{}), std::invalid_argument);
}

}  // namespace
}  // namespace detox
