#pragma once

// Reference scorer double: uniform (or fixture-mode) caption steps, aesthetic =
// mean pixel intensity. Used for protocol conformance tests and as a template for
// adapters in other languages.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "capcrop/protocol.hpp"

namespace capcrop {

struct EchoOptions {
  std::size_t vocab_size = 0;
  std::string vocab_hash;
  int steps = 1;
  bool gradients = false;
  bool concurrent_safe = false;
  int protocol = proto::kProtocolVersion;
  long stall_after = -1;  // stop answering after this many score responses
  long exit_after = -1;   // exit after this many score responses
  // Fixture mode: caption steps from fixture_caption_steps with this seed
  // instead of uniform ones.
  std::optional<std::uint64_t> fixture_seed;
};

class EchoServer {
 public:
  explicit EchoServer(EchoOptions opts) : opts_(std::move(opts)) {}

  // Reply line (with '\n'), or nullopt when the server stays silent.
  std::optional<std::string> handle(std::string_view line);

  bool stalled() const { return opts_.stall_after >= 0 && answered_ >= opts_.stall_after; }
  bool finished() const { return opts_.exit_after >= 0 && answered_ >= opts_.exit_after; }
  long answered() const { return answered_; }

 private:
  proto::ScoreResponse score(const proto::ScoreRequest& req) const;

  EchoOptions opts_;
  long answered_ = 0;
};

}  // namespace capcrop
