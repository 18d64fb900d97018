// Copyright 2026 The Detox Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "detox/distribution.hpp"
#include "detox/vocab.hpp"

namespace detox {

class BridgeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One NDJSON line out, one line back.
class LineChannel {
 public:
  virtual ~LineChannel() = default;
  virtual void write_line(const std::string& line) = 0;
  // Throws BridgeError on EOF.
  virtual std::string read_line() = 0;
};

// Runs `command` under /bin/sh with its stdin/stdout connected to the channel.
std::unique_ptr<LineChannel> spawn_process_channel(const std::string& command);
// host:port over TCP.
std::unique_ptr<LineChannel> connect_tcp_channel(const std::string& host, int port);

struct VocabularyDescriptor {
  std::size_t size = 0;
  std::string hash;
  TokenId unk_id = 0;
  TokenId bos_id = 0;
  TokenId eos_id = 0;
};

// Wire frames:
//   -> {"type":"handshake"}
//   <- {"type":"handshake","vocab_size":V,"vocab_hash":"...","unk_id":u,"bos_id":b,"eos_id":e}
//   -> {"type":"dist","session_id":"...","token_ids":[...],"top_m":N}
//   <- {"type":"dist","entries":[[id,p],...],"remainder_mass":r}
//   <- {"type":"error","msg":"..."}
nlohmann::json handshake_request();
nlohmann::json dist_request(const std::string& session_id, std::span<const TokenId> token_ids, std::size_t top_m);
nlohmann::json handshake_response(const Vocabulary& vocab);
// Truncates to the top_m most probable entries (ties by id) plus remainder.
nlohmann::json dist_response(const NextTokenDistribution& dist, std::size_t top_m);
nlohmann::json error_response(const std::string& message);

// Dense distribution from a dist frame; the remainder is spread evenly over
// unlisted ids. Throws BridgeError on malformed frames or mass off by > 1e-6.
NextTokenDistribution decode_dist_response(const nlohmann::json& frame, std::size_t vocab_size);

// Remote base model behind the distribution-provider protocol. Requests are
// strictly sequential; the object is not thread-safe.
class BridgeLanguageModel final : public LanguageModel {
 public:
  static constexpr std::size_t kDefaultTopM = 512;

  // Performs the handshake; throws BridgeError("vocabulary mismatch") if the
  // server's descriptor disagrees with vocab.
  BridgeLanguageModel(std::unique_ptr<LineChannel> channel, const Vocabulary& vocab,
                      std::size_t top_m = kDefaultTopM, std::string session_id = "detox-0");

  std::size_t vocab_size() const override { return vocab_size_; }
  NextTokenDistribution next_token_distribution(std::span<const TokenId> prefix) const override;

  VocabularyDescriptor handshake() const;
  const VocabularyDescriptor& server_vocabulary() const { return descriptor_; }

 private:
  nlohmann::json exchange(const nlohmann::json& request) const;

  std::unique_ptr<LineChannel> channel_;
  std::size_t vocab_size_;
  std::size_t top_m_;
  std::string session_id_;
  VocabularyDescriptor descriptor_;
};

}  // namespace detox
