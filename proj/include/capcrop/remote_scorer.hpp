#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>

#include "capcrop/objective.hpp"
#include "capcrop/protocol.hpp"
#include "capcrop/transport.hpp"

namespace capcrop {

// "cmd:<shell command>" or "tcp:<host>:<port>".
struct ScorerEndpoint {
  enum class Kind { child, tcp };
  Kind kind = Kind::child;
  std::string command;
  std::string host;
  int port = 0;

  static ScorerEndpoint parse(std::string_view spec);
};

struct ConnectOptions {
  std::chrono::milliseconds timeout{30'000};
};

// Scorer backed by an external process speaking the line protocol.
// Stop-and-wait: one request in flight, calls are serialized internally.
// After a desync, timeout or lost connection the handle is poisoned and every
// later call fails fast.
class RemoteScorer final : public Scorer {
 public:
  RemoteScorer(std::unique_ptr<LineChannel> channel, const Vocabulary& vocab,
               ConnectOptions opts = {});

  std::size_t vocab_size() const override { return vocab_size_; }
  bool concurrent_safe() const override { return false; }
  bool provides_gradients() const override { return hello_.gradients; }

  ScoreOutput evaluate(const Image& crop) override;
  std::vector<double> backward(const Image& crop, std::span<const double> d_mean,
                               double d_aesthetic) override;

  const proto::Hello& server_hello() const { return hello_; }
  std::uint64_t last_id() const { return next_id_ - 1; }
  bool poisoned() const { return poisoned_; }

 private:
  proto::ScoreResponse exchange(proto::ScoreRequest req);

  std::unique_ptr<LineChannel> channel_;
  std::size_t vocab_size_;
  std::string vocab_hash_;
  ConnectOptions opts_;
  proto::Hello hello_;
  std::uint64_t next_id_ = 1;
  bool poisoned_ = false;
  std::mutex mu_;
};

std::unique_ptr<RemoteScorer> connect_scorer(std::string_view endpoint,
                                             const Vocabulary& vocab,
                                             ConnectOptions opts = {});

}  // namespace capcrop
