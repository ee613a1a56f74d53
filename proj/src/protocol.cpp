#include "capcrop/protocol.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cmath>
#include <cstring>

#include <json.hpp>

#include "capcrop/error.hpp"

namespace capcrop::proto {

using ojson = nlohmann::ordered_json;

static_assert(std::endian::native == std::endian::little,
              "float32 wire buffers assume a little-endian host");

std::string base64_encode(std::span<const unsigned char> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                bytes.data(), static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::vector<unsigned char> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) {
    throw ProtocolError("base64 payload length is not a multiple of 4");
  }
  std::vector<unsigned char> out(3 * (text.size() / 4));
  const int n = EVP_DecodeBlock(out.data(),
                                reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) {
    throw ProtocolError("invalid base64 payload");
  }
  // EVP_DecodeBlock keeps the bytes produced by '=' padding.
  std::size_t pad = 0;
  if (!text.empty() && text.back() == '=') {
    ++pad;
    if (text.size() >= 2 && text[text.size() - 2] == '=') {
      ++pad;
    }
  }
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

std::string encode_f32le(std::span<const float> values) {
  return base64_encode({reinterpret_cast<const unsigned char*>(values.data()),
                        values.size() * sizeof(float)});
}

std::vector<float> decode_f32le(std::string_view text) {
  const auto bytes = base64_decode(text);
  if (bytes.size() % sizeof(float) != 0) {
    throw ProtocolError("float32 payload is not a multiple of 4 bytes");
  }
  std::vector<float> out(bytes.size() / sizeof(float));
  std::memcpy(out.data(), bytes.data(), bytes.size());
  return out;
}

namespace {

ojson parse_line(std::string_view line) {
  if (!line.empty() && line.back() == '\n') {
    line.remove_suffix(1);
  }
  if (line.find('\n') != std::string_view::npos) {
    throw ProtocolError("embedded newline in message");
  }
  try {
    ojson j = ojson::parse(line);
    if (!j.is_object()) {
      throw ProtocolError("message is not a JSON object");
    }
    return j;
  } catch (const ojson::exception& e) {
    throw ProtocolError(std::string("malformed message: ") + e.what());
  }
}

template <typename T>
T field(const ojson& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) {
    throw ProtocolError(std::string("missing field '") + key + "'");
  }
  try {
    return it->get<T>();
  } catch (const ojson::exception&) {
    throw ProtocolError(std::string("field '") + key + "' has the wrong type");
  }
}

std::string line_of(const ojson& j) { return j.dump() + '\n'; }

}  // namespace

std::string encode_client_hello(const Hello& h) {
  return line_of({{"type", "hello"}, {"protocol", h.protocol}, {"vocab_hash", h.vocab_hash}});
}

std::string encode_server_hello(const Hello& h) {
  return line_of({{"type", "hello"},
                  {"protocol", h.protocol},
                  {"vocab_hash", h.vocab_hash},
                  {"concurrent_safe", h.concurrent_safe},
                  {"gradients", h.gradients}});
}

Hello decode_hello(std::string_view line) {
  const ojson j = parse_line(line);
  if (field<std::string>(j, "type") != "hello") {
    throw ProtocolError("expected a hello message");
  }
  Hello h;
  h.protocol = field<int>(j, "protocol");
  h.vocab_hash = field<std::string>(j, "vocab_hash");
  h.concurrent_safe = j.value("concurrent_safe", false);
  h.gradients = j.value("gradients", false);
  return h;
}

std::string encode_request(const ScoreRequest& req) {
  ojson j = {{"type", "score"},
             {"id", req.id},
             {"crop",
              {{"size", req.out_size},
               {"channels", req.channels},
               {"data", encode_f32le(req.pixels)}}},
             {"vocab_hash", req.vocab_hash},
             {"want_gradient", req.want_gradient}};
  if (req.want_gradient) {
    j["caption_cotangent"] = req.caption_cotangent;
  }
  return line_of(j);
}

ScoreRequest decode_request(std::string_view line) {
  const ojson j = parse_line(line);
  if (field<std::string>(j, "type") != "score") {
    throw ProtocolError("expected a score message");
  }
  ScoreRequest r;
  r.id = field<std::uint64_t>(j, "id");
  const ojson crop = field<ojson>(j, "crop");
  r.out_size = field<int>(crop, "size");
  r.channels = field<int>(crop, "channels");
  if (r.out_size < 1 || (r.channels != 1 && r.channels != 3)) {
    throw ProtocolError("bad crop dimensions");
  }
  r.pixels = decode_f32le(field<std::string>(crop, "data"));
  const std::size_t expect = static_cast<std::size_t>(r.out_size) * r.out_size * r.channels;
  if (r.pixels.size() != expect) {
    throw ProtocolError("crop buffer holds " + std::to_string(r.pixels.size()) +
                        " floats, expected " + std::to_string(expect));
  }
  r.vocab_hash = field<std::string>(j, "vocab_hash");
  r.want_gradient = field<bool>(j, "want_gradient");
  if (r.want_gradient) {
    r.caption_cotangent = field<std::vector<double>>(j, "caption_cotangent");
  }
  return r;
}

std::string encode_response(const ScoreResponse& resp) {
  ojson j = {{"id", resp.id}};
  if (resp.error) {
    j["error"] = *resp.error;
    return line_of(j);
  }
  j["caption_steps"] = resp.caption_steps;
  j["aesthetic"] = resp.aesthetic;
  if (resp.caption_gradient) {
    j["caption_gradient"] = encode_f32le(*resp.caption_gradient);
  }
  if (resp.aesthetic_gradient) {
    j["aesthetic_gradient"] = encode_f32le(*resp.aesthetic_gradient);
  }
  return line_of(j);
}

ScoreResponse parse_response(std::string_view line) {
  const ojson j = parse_line(line);
  ScoreResponse r;
  r.id = field<std::uint64_t>(j, "id");
  if (j.contains("error")) {
    r.error = field<std::string>(j, "error");
    return r;
  }
  r.caption_steps = field<std::vector<Distribution>>(j, "caption_steps");
  r.aesthetic = field<double>(j, "aesthetic");
  if (j.contains("caption_gradient")) {
    r.caption_gradient = decode_f32le(field<std::string>(j, "caption_gradient"));
  }
  if (j.contains("aesthetic_gradient")) {
    r.aesthetic_gradient = decode_f32le(field<std::string>(j, "aesthetic_gradient"));
  }
  return r;
}

void validate_steps(std::span<const Distribution> steps, std::size_t vocab_size) {
  if (steps.empty()) {
    throw ProtocolError("response has no caption steps");
  }
  for (std::size_t t = 0; t < steps.size(); ++t) {
    if (vocab_size != 0 && steps[t].size() != vocab_size) {
      throw ProtocolError("caption step " + std::to_string(t) + " has " +
                          std::to_string(steps[t].size()) + " entries, expected " +
                          std::to_string(vocab_size));
    }
    double sum = 0.0;
    for (double p : steps[t]) {
      if (!std::isfinite(p) || p < 0.0) {
        throw ProtocolError("caption step " + std::to_string(t) +
                            " has a negative or non-finite probability");
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > kDistributionTolerance) {
      throw ProtocolError("caption step " + std::to_string(t) + " sums to " +
                          std::to_string(sum) + ", not 1");
    }
  }
}

ScoreResponse decode_response(std::string_view line, std::uint64_t expected_id,
                              std::size_t vocab_size) {
  ScoreResponse r = parse_response(line);
  if (r.id != expected_id) {
    throw DesyncError("response id " + std::to_string(r.id) + " does not match request " +
                      std::to_string(expected_id));
  }
  if (r.error) {
    throw ScorerReportedError("scorer reported: " + *r.error);
  }
  validate_steps(r.caption_steps, vocab_size);
  if (!std::isfinite(r.aesthetic)) {
    throw ProtocolError("non-finite aesthetic score");
  }
  return r;
}

}  // namespace capcrop::proto
