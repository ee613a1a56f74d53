#pragma once

// Newline-delimited JSON scorer protocol. See docs/protocol.md.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "capcrop/objective.hpp"

namespace capcrop::proto {

inline constexpr int kProtocolVersion = 1;

struct Hello {
  int protocol = kProtocolVersion;
  std::string vocab_hash;
  // Server-side fields; ignored in the client's hello.
  bool concurrent_safe = false;
  bool gradients = false;

  bool operator==(const Hello&) const = default;
};

struct ScoreRequest {
  std::uint64_t id = 0;
  int out_size = 0;
  int channels = 0;
  std::vector<float> pixels;  // row-major, channel-interleaved
  std::string vocab_hash;
  bool want_gradient = false;
  std::vector<double> caption_cotangent;  // only with want_gradient

  bool operator==(const ScoreRequest&) const = default;
};

struct ScoreResponse {
  std::uint64_t id = 0;
  std::vector<Distribution> caption_steps;
  double aesthetic = 0.0;
  // d(cotangent . mean_step)/d(pixel) and dg/d(pixel), when gradients were asked for.
  std::optional<std::vector<float>> caption_gradient;
  std::optional<std::vector<float>> aesthetic_gradient;
  std::optional<std::string> error;

  bool operator==(const ScoreResponse&) const = default;
};

std::string base64_encode(std::span<const unsigned char> bytes);
std::vector<unsigned char> base64_decode(std::string_view text);

// float32 little-endian buffer <-> base64 text.
std::string encode_f32le(std::span<const float> values);
std::vector<float> decode_f32le(std::string_view text);

// Every encoder returns one line terminated by '\n'.
std::string encode_client_hello(const Hello& h);
std::string encode_server_hello(const Hello& h);
Hello decode_hello(std::string_view line);

std::string encode_request(const ScoreRequest& req);
ScoreRequest decode_request(std::string_view line);

std::string encode_response(const ScoreResponse& resp);
// Parse only; structural errors raise ProtocolError.
ScoreResponse parse_response(std::string_view line);
// Parse and validate against the outstanding request: id mismatch raises
// DesyncError, a scorer-side error raises ScorerError, distributions must
// have vocab_size entries and sum to 1 within 1e-6.
ScoreResponse decode_response(std::string_view line, std::uint64_t expected_id,
                              std::size_t vocab_size);

inline constexpr double kDistributionTolerance = 1e-6;

void validate_steps(std::span<const Distribution> steps, std::size_t vocab_size);

}  // namespace capcrop::proto
