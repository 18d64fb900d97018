// Copyright 2026 The Detox Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "desk_fixture.hpp"
#include "detox/bridge_client.hpp"
#include "detox/generation.hpp"
#include "detox/reconstruct.hpp"
#include "test_support.hpp"

namespace detox {
namespace {

TEST(BridgeFrames, RequestShapes) {
  const std::vector<TokenId> ids = {4, 5};
  EXPECT_EQ(handshake_request().dump(), R"({"type":"handshake"})");
  EXPECT_EQ(dist_request("s1", ids, 8).dump(), R"({"session_id":"s1","token_ids":[4,5],"top_m":8,"type":"dist"})");
  EXPECT_EQ(error_response("boom")["type"], "error");
}

TEST(BridgeFrames, ExactEchoWhenUntruncated) {
  const NextTokenDistribution d({0.2, 0.5, 0.3});
  const auto frame = dist_response(d, 3);
  EXPECT_EQ(frame["remainder_mass"].get<double>(), 0.0);
  EXPECT_EQ(frame["entries"][0][0], 1);
  EXPECT_EQ(decode_dist_response(nlohmann::json::parse(frame.dump()), 3).probs, d.probs);
}

TEST(BridgeFrames, RemainderSpreadOverUnlisted) {
  const NextTokenDistribution d({0.1, 0.6, 0.2, 0.1});
  const auto frame = dist_response(d, 2);
  EXPECT_NEAR(frame["remainder_mass"].get<double>(), 0.2, 1e-12);
  const auto out = decode_dist_response(frame, 4);
  EXPECT_NEAR(out.probs[0], 0.1, 1e-12);
  EXPECT_NEAR(out.probs[3], 0.1, 1e-12);
  EXPECT_EQ(out.probs[1], 0.6);
}

TEST(BridgeFrames, RejectsMalformed) {
  using nlohmann::json;
  EXPECT_THROW(decode_dist_response(json{{"type", "error"}, {"msg", "x"}}, 2), BridgeError);
  EXPECT_THROW(decode_dist_response(json{{"type", "dist"}, {"entries", json::array()}}, 2), BridgeError);
  EXPECT_THROW(decode_dist_response(json::parse(R"({"type":"dist","entries":[[5,1.0]],"remainder_mass":0})"), 2),
               BridgeError);
  EXPECT_THROW(decode_dist_response(json::parse(R"({"type":"dist","entries":[[0,0.5],[0,0.5]],"remainder_mass":0})"), 2),
               BridgeError);
  EXPECT_THROW(decode_dist_response(json::parse(R"({"type":"dist","entries":[[0,0.5]],"remainder_mass":0.1})"), 2),
               BridgeError);
}

// Scripted channel for client-side protocol checks.
class ScriptedChannel final : public LineChannel {
 public:
  explicit ScriptedChannel(std::vector<std::string> replies) : replies_(std::move(replies)) {}
  void write_line(const std::string& line) override { sent.push_back(line); }
  std::string read_line() override {
    if (next_ >= replies_.size()) throw BridgeError("bridge closed the connection");
    return replies_[next_++];
  }
  std::vector<std::string> sent;

 private:
  std::vector<std::string> replies_;
  std::size_t next_ = 0;
};

TEST(BridgeClient, ErrorFrameAndGarbage) {
  const Vocabulary vocab(std::vector<std::string>{"a", "b"});
  const auto hello = handshake_response(vocab).dump();
  BridgeLanguageModel ok(std::make_unique<ScriptedChannel>(
                             std::vector<std::string>{hello, error_response("busy").dump(), "not json"}),
                         vocab);
  EXPECT_THROW(ok.next_token_distribution({}), BridgeError);
  EXPECT_THROW(ok.next_token_distribution({}), BridgeError);
  EXPECT_THROW(ok.next_token_distribution({}), BridgeError);
}

class MockServer : public ::testing::Test {
 protected:
  void SetUp() override {
    save_vocabulary(desk().vocab, dir / "vocab.json");
    save_model(desk().base, desk().vocab, dir / "base.json");
  }
  static const DeskModels& desk() { return testing::small_desk_models(); }
  std::string command(const std::string& extra = "") const {
    return std::string(DETOX_MOCK_BRIDGE) + " --vocab " + (dir / "vocab.json").string() + " --model " +
           (dir / "base.json").string() + extra;
  }
  testing::TempDir dir;
};

TEST_F(MockServer, HandshakeIsIdempotent) {
  BridgeLanguageModel model(spawn_process_channel(command()), desk().vocab);
  const auto a = model.handshake();
  const auto b = model.handshake();
  EXPECT_EQ(a.hash, b.hash);
  EXPECT_EQ(a.size, desk().vocab.size());
  EXPECT_EQ(a.eos_id, 2);
}

TEST_F(MockServer, RejectsMismatchedHash) {
  try {
    BridgeLanguageModel model(spawn_process_channel(command(" --hash 0000000000000000")), desk().vocab);
    FAIL() << "expected a vocabulary mismatch";
  } catch (const BridgeError& e) {
    EXPECT_STREQ(e.what(), "vocabulary mismatch");
  }
}

TEST_F(MockServer, IdenticalRequestsIdenticalResponses) {
  BridgeLanguageModel model(spawn_process_channel(command()), desk().vocab);
  const std::vector<TokenId> prefix = {5, 6};
  EXPECT_EQ(model.next_token_distribution(prefix).probs, model.next_token_distribution(prefix).probs);
}

TEST_F(MockServer, MatchesLocalDecodingTokenForToken) {
  const auto& vocab = desk().vocab;
  BridgeLanguageModel remote(spawn_process_channel(command()), vocab, vocab.size());
  ReconstructionConfig config;
  config.decay.lambda = 100.0;
  ExpertGuidedDecoder local(desk().expert, desk().base, config);
  ExpertGuidedDecoder bridged(desk().expert, remote, config);
  const auto& prompts = testing::small_desk_corpus().prompts;
  for (std::uint64_t i = 0; i < 50; ++i) {
    const auto prompt = tokenize(prompts[i % prompts.size()].text, vocab, SequenceRole::kPrefix);
    GenerationConfig gen;
    gen.selection = SelectionStrategy::top_k(20);
    gen.seed = derive_seed(42, i);
    EXPECT_EQ(generate(bridged, prompt.ids, gen).ids, generate(local, prompt.ids, gen).ids) << "continuation " << i;
  }
}

TEST_F(MockServer, OutOfRangeIdIsAnErrorFrame) {
  BridgeLanguageModel model(spawn_process_channel(command()), desk().vocab);
  const std::vector<TokenId> prefix = {static_cast<TokenId>(desk().vocab.size())};
  EXPECT_THROW(model.next_token_distribution(prefix), BridgeError);
  const std::vector<TokenId> ok = {3};
  EXPECT_NO_THROW(model.next_token_distribution(ok));
}

TEST_F(MockServer, DeadServerSurfacesAsBridgeError) {
  EXPECT_THROW(BridgeLanguageModel(spawn_process_channel("exit 0"), desk().vocab), BridgeError);
}

}  // namespace
}  // namespace detox
