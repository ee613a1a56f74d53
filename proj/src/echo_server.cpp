#include "capcrop/echo_server.hpp"

#include <exception>

#include <json.hpp>

#include "capcrop/error.hpp"
#include "capcrop/fixture_mode.hpp"

namespace capcrop {

proto::ScoreResponse EchoServer::score(const proto::ScoreRequest& req) const {
  proto::ScoreResponse resp;
  resp.id = req.id;
  if (req.vocab_hash != opts_.vocab_hash) {
    resp.error = "vocabulary hash mismatch";
    return resp;
  }
  double sum = 0.0;
  for (float v : req.pixels) {
    sum += v;
  }
  const double n = static_cast<double>(req.pixels.size());
  resp.aesthetic = sum / n;
  if (opts_.fixture_seed) {
    resp.caption_steps = fixture_caption_steps(req.pixels, req.out_size, req.channels,
                                               *opts_.fixture_seed, opts_.vocab_size,
                                               opts_.steps);
  } else {
    resp.caption_steps.assign(
        opts_.steps, Distribution(opts_.vocab_size, 1.0 / static_cast<double>(opts_.vocab_size)));
  }
  if (req.want_gradient && opts_.gradients) {
    resp.caption_gradient = std::vector<float>(req.pixels.size(), 0.0f);
    resp.aesthetic_gradient =
        std::vector<float>(req.pixels.size(), static_cast<float>(1.0 / n));
  }
  return resp;
}

std::optional<std::string> EchoServer::handle(std::string_view line) {
  if (stalled()) {
    return std::nullopt;
  }
  std::string type;
  std::uint64_t id = 0;
  try {
    const auto j = nlohmann::json::parse(line);
    type = j.value("type", "");
    id = j.value("id", std::uint64_t{0});
  } catch (const nlohmann::json::exception&) {
    proto::ScoreResponse bad;
    bad.error = "malformed message";
    return proto::encode_response(bad);
  }
  if (type == "hello") {
    proto::Hello h;
    h.protocol = opts_.protocol;
    h.vocab_hash = opts_.vocab_hash;
    h.concurrent_safe = opts_.concurrent_safe;
    h.gradients = opts_.gradients;
    return proto::encode_server_hello(h);
  }
  proto::ScoreResponse resp;
  try {
    resp = score(proto::decode_request(line));
  } catch (const std::exception& e) {
    resp = {};
    resp.id = id;
    resp.error = e.what();
  }
  ++answered_;
  return proto::encode_response(resp);
}

}  // namespace capcrop
