// Copyright 2026 The Detox Authors
// SPDX-License-Identifier: Apache-2.0

#include "detox/bridge_client.hpp"

#include <netdb.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstring>

#include "detox/sampling.hpp"

namespace detox {

namespace {

constexpr double kMassTolerance = 1e-6;

std::string errno_message(const char* what) { return std::string(what) + ": " + std::strerror(errno); }

// Buffered line reader/writer over a pair of file descriptors.
class FdChannel : public LineChannel {
 public:
  FdChannel(int read_fd, int write_fd) : read_fd_(read_fd), write_fd_(write_fd) {}

  ~FdChannel() override {
    if (write_fd_ != read_fd_ && write_fd_ >= 0) ::close(write_fd_);
    if (read_fd_ >= 0) ::close(read_fd_);
  }

  void write_line(const std::string& line) override {
    std::string payload = line;
    payload.push_back('\n');
    std::size_t sent = 0;
    while (sent < payload.size()) {
      const ssize_t n = send_or_write(write_fd_, payload.data() + sent, payload.size() - sent);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw BridgeError(errno_message("bridge write failed"));
      }
      sent += static_cast<std::size_t>(n);
    }
  }

  std::string read_line() override {
    for (;;) {
      const auto newline = buffer_.find('\n');
      if (newline != std::string::npos) {
        std::string line = buffer_.substr(0, newline);
        buffer_.erase(0, newline + 1);
        return line;
      }
      char chunk[4096];
      const ssize_t n = ::read(read_fd_, chunk, sizeof chunk);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw BridgeError(errno_message("bridge read failed"));
      }
      if (n == 0) throw BridgeError("bridge closed the connection");
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

 protected:
  static ssize_t send_or_write(int fd, const char* data, std::size_t size) {
    // MSG_NOSIGNAL keeps a dead peer from raising SIGPIPE on sockets.
    const ssize_t n = ::send(fd, data, size, MSG_NOSIGNAL);
    if (n < 0 && errno == ENOTSOCK) return ::write(fd, data, size);
    return n;
  }

  int read_fd_;
  int write_fd_;
  std::string buffer_;
};

class ProcessChannel final : public FdChannel {
 public:
  ProcessChannel(int read_fd, int write_fd, pid_t pid) : FdChannel(read_fd, write_fd), pid_(pid) {}

  ~ProcessChannel() override {
    // Closing stdin is the shutdown signal; reap the child afterwards.
    ::close(write_fd_);
    write_fd_ = -1;
    int status = 0;
    ::waitpid(pid_, &status, 0);
  }

 private:
  pid_t pid_;
};

const nlohmann::json& require_field(const nlohmann::json& frame, const char* name) {
  auto it = frame.find(name);
  if (it == frame.end()) throw BridgeError(std::string("bridge frame missing field: ") + name);
  return *it;
}

void check_error_frame(const nlohmann::json& frame) {
  if (!frame.is_object()) throw BridgeError("bridge frame is not an object");
  const auto& type = require_field(frame, "type");
  if (type == "error") {
    throw BridgeError("bridge error: " + frame.value("msg", std::string("(no message)")));
  }
}

}  // namespace

std::unique_ptr<LineChannel> spawn_process_channel(const std::string& command) {
  // A child that exits early must surface as EPIPE, not kill the caller.
  ::signal(SIGPIPE, SIG_IGN);
  int to_child[2];
  int from_child[2];
  if (::pipe(to_child) != 0) throw BridgeError(errno_message("pipe"));
  if (::pipe(from_child) != 0) {
    ::close(to_child[0]);
    ::close(to_child[1]);
    throw BridgeError(errno_message("pipe"));
  }
  const pid_t pid = ::fork();
  if (pid < 0) throw BridgeError(errno_message("fork"));
  if (pid == 0) {
    ::dup2(to_child[0], STDIN_FILENO);
    ::dup2(from_child[1], STDOUT_FILENO);
    ::close(to_child[0]);
    ::close(to_child[1]);
    ::close(from_child[0]);
    ::close(from_child[1]);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(to_child[0]);
  ::close(from_child[1]);
  return std::make_unique<ProcessChannel>(from_child[0], to_child[1], pid);
}

std::unique_ptr<LineChannel> connect_tcp_channel(const std::string& host, int port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* result = nullptr;
  const std::string service = std::to_string(port);
  if (const int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &result); rc != 0) {
    throw BridgeError("cannot resolve " + host + ": " + ::gai_strerror(rc));
  }
  int fd = -1;
  for (addrinfo* ai = result; ai != nullptr; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(result);
  if (fd < 0) throw BridgeError("cannot connect to " + host + ":" + service);
  return std::make_unique<FdChannel>(fd, fd);
}

nlohmann::json handshake_request() { return {{"type", "handshake"}}; }

nlohmann::json dist_request(const std::string& session_id, std::span<const TokenId> token_ids, std::size_t top_m) {
  return {{"type", "dist"},
          {"session_id", session_id},
          {"token_ids", std::vector<TokenId>(token_ids.begin(), token_ids.end())},
          {"top_m", top_m}};
}

nlohmann::json handshake_response(const Vocabulary& vocab) {
  return {{"type", "handshake"},       {"vocab_size", vocab.size()}, {"vocab_hash", vocab.hash()},
          {"unk_id", vocab.unk_id()}, {"bos_id", vocab.bos_id()},   {"eos_id", vocab.eos_id()}};
}

nlohmann::json dist_response(const NextTokenDistribution& dist, std::size_t top_m) {
  const auto ids = ranked_top_ids(dist.probs, std::min(top_m, dist.size()));
  nlohmann::json entries = nlohmann::json::array();
  double listed = 0.0;
  for (TokenId id : ids) {
    entries.push_back({id, dist[id]});
    listed += dist[id];
  }
  return {{"type", "dist"}, {"entries", std::move(entries)}, {"remainder_mass", std::max(0.0, 1.0 - listed)}};
}

nlohmann::json error_response(const std::string& message) { return {{"type", "error"}, {"msg", message}}; }

NextTokenDistribution decode_dist_response(const nlohmann::json& frame, std::size_t vocab_size) {
  check_error_frame(frame);
  if (frame["type"] != "dist") throw BridgeError("expected a dist frame");
  const auto& entries = require_field(frame, "entries");
  const auto& remainder_field = require_field(frame, "remainder_mass");
  if (!entries.is_array() || !remainder_field.is_number()) throw BridgeError("malformed dist frame");

  std::vector<double> probs(vocab_size, 0.0);
  std::vector<char> listed(vocab_size, 0);
  std::size_t n_listed = 0;
  double total = 0.0;
  for (const auto& entry : entries) {
    if (!entry.is_array() || entry.size() != 2 || !entry[0].is_number_integer() || !entry[1].is_number()) {
      throw BridgeError("malformed dist entry");
    }
    const auto id = entry[0].get<long long>();
    const double p = entry[1].get<double>();
    if (id < 0 || static_cast<std::size_t>(id) >= vocab_size) throw BridgeError("dist entry id out of range");
    if (!(p >= 0.0) || !std::isfinite(p)) throw BridgeError("dist entry probability out of range");
    const auto i = static_cast<std::size_t>(id);
    if (listed[i]) throw BridgeError("duplicate dist entry id");
    listed[i] = 1;
    ++n_listed;
    probs[i] = p;
    total += p;
  }
  const double remainder = remainder_field.get<double>();
  if (!(remainder >= 0.0)) throw BridgeError("negative remainder mass");
  total += remainder;
  if (std::abs(total - 1.0) > kMassTolerance) throw BridgeError("dist mass does not sum to 1");
  const std::size_t unlisted = vocab_size - n_listed;
  if (unlisted > 0) {
    const double share = remainder / static_cast<double>(unlisted);
    for (std::size_t i = 0; i < vocab_size; ++i) {
      if (!listed[i]) probs[i] = share;
    }
  } else if (remainder > kMassTolerance) {
    throw BridgeError("remainder mass with no unlisted ids");
  }
  return NextTokenDistribution(std::move(probs));
}

BridgeLanguageModel::BridgeLanguageModel(std::unique_ptr<LineChannel> channel, const Vocabulary& vocab,
                                         std::size_t top_m, std::string session_id)
    : channel_(std::move(channel)), vocab_size_(vocab.size()), top_m_(top_m), session_id_(std::move(session_id)) {
  if (!channel_) throw std::invalid_argument("null bridge channel");
  if (top_m_ < 1) throw std::invalid_argument("top_m must be >= 1");
  descriptor_ = handshake();
  if (descriptor_.size != vocab.size() || descriptor_.hash != vocab.hash() || descriptor_.unk_id != vocab.unk_id() ||
      descriptor_.bos_id != vocab.bos_id() || descriptor_.eos_id != vocab.eos_id()) {
    throw BridgeError("vocabulary mismatch");
  }
}

nlohmann::json BridgeLanguageModel::exchange(const nlohmann::json& request) const {
  channel_->write_line(request.dump());
  const std::string line = channel_->read_line();
  try {
    auto frame = nlohmann::json::parse(line);
    check_error_frame(frame);
    return frame;
  } catch (const nlohmann::json::exception& e) {
    throw BridgeError(std::string("malformed bridge frame: ") + e.what());
  }
}

VocabularyDescriptor BridgeLanguageModel::handshake() const {
  const auto frame = exchange(handshake_request());
  if (frame["type"] != "handshake") throw BridgeError("expected a handshake frame");
  try {
    VocabularyDescriptor d;
    d.size = require_field(frame, "vocab_size").get<std::size_t>();
    d.hash = require_field(frame, "vocab_hash").get<std::string>();
    d.unk_id = require_field(frame, "unk_id").get<TokenId>();
    d.bos_id = require_field(frame, "bos_id").get<TokenId>();
    d.eos_id = require_field(frame, "eos_id").get<TokenId>();
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw BridgeError(std::string("malformed handshake frame: ") + e.what());
  }
}

NextTokenDistribution BridgeLanguageModel::next_token_distribution(std::span<const TokenId> prefix) const {
  return decode_dist_response(exchange(dist_request(session_id_, prefix, top_m_)), vocab_size_);
}

}  // namespace detox
