#include "capcrop/remote_scorer.hpp"

#include <stdexcept>

#include "capcrop/error.hpp"

namespace capcrop {

ScorerEndpoint ScorerEndpoint::parse(std::string_view spec) {
  ScorerEndpoint ep;
  if (spec.starts_with("cmd:")) {
    ep.kind = Kind::child;
    ep.command = std::string(spec.substr(4));
    if (ep.command.empty()) {
      throw std::invalid_argument("empty scorer command");
    }
    return ep;
  }
  if (spec.starts_with("tcp:")) {
    const auto rest = spec.substr(4);
    const auto colon = rest.rfind(':');
    if (colon == std::string_view::npos || colon == 0) {
      throw std::invalid_argument("expected tcp:<host>:<port>");
    }
    ep.kind = Kind::tcp;
    ep.host = std::string(rest.substr(0, colon));
    const std::string port(rest.substr(colon + 1));
    std::size_t used = 0;
    try {
      ep.port = std::stoi(port, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != port.size() || ep.port <= 0 || ep.port > 65535) {
      throw std::invalid_argument("bad port in scorer endpoint '" + std::string(spec) + "'");
    }
    return ep;
  }
  throw std::invalid_argument("scorer endpoint must start with cmd: or tcp:");
}

RemoteScorer::RemoteScorer(std::unique_ptr<LineChannel> channel, const Vocabulary& vocab,
                           ConnectOptions opts)
    : channel_(std::move(channel)),
      vocab_size_(vocab.size()),
      vocab_hash_(vocab.hash()),
      opts_(opts) {
  proto::Hello mine;
  mine.vocab_hash = vocab_hash_;
  channel_->write_line(proto::encode_client_hello(mine));
  const auto line = channel_->read_line(opts_.timeout);
  if (!line) {
    throw ScorerError("scorer closed the connection during handshake");
  }
  hello_ = proto::decode_hello(*line);
  if (hello_.protocol != proto::kProtocolVersion) {
    throw IncompatibleError("scorer speaks protocol " + std::to_string(hello_.protocol) +
                            ", expected " + std::to_string(proto::kProtocolVersion));
  }
  if (hello_.vocab_hash != vocab_hash_) {
    throw VocabularyError("scorer vocabulary hash " + hello_.vocab_hash +
                          " does not match local " + vocab_hash_);
  }
}

proto::ScoreResponse RemoteScorer::exchange(proto::ScoreRequest req) {
  std::lock_guard lock(mu_);
  if (poisoned_) {
    throw ScorerError("scorer connection is unusable after an earlier failure");
  }
  req.id = next_id_++;
  req.vocab_hash = vocab_hash_;
  try {
    channel_->write_line(proto::encode_request(req));
    const auto line = channel_->read_line(opts_.timeout);
    if (!line) {
      throw ScorerError("scorer closed the connection");
    }
    return proto::decode_response(*line, req.id, vocab_size_);
  } catch (const DesyncError&) {
    poisoned_ = true;
    throw;
  } catch (const ProtocolError&) {
    throw;
  } catch (const ScorerReportedError&) {
    throw;
  } catch (const ScorerError&) {
    // timeout or broken pipe: the stream position is unknown
    poisoned_ = true;
    throw;
  }
}

namespace {

proto::ScoreRequest request_for(const Image& crop) {
  if (crop.width() != crop.height()) {
    throw std::invalid_argument("remote scorers take square crops");
  }
  proto::ScoreRequest r;
  r.out_size = crop.width();
  r.channels = crop.channels();
  r.pixels.assign(crop.data().begin(), crop.data().end());
  return r;
}

}  // namespace

ScoreOutput RemoteScorer::evaluate(const Image& crop) {
  auto resp = exchange(request_for(crop));
  return {std::move(resp.caption_steps), resp.aesthetic};
}

std::vector<double> RemoteScorer::backward(const Image& crop,
                                           std::span<const double> d_mean,
                                           double d_aesthetic) {
  if (!provides_gradients()) {
    return Scorer::backward(crop, d_mean, d_aesthetic);
  }
  auto req = request_for(crop);
  req.want_gradient = true;
  req.caption_cotangent.assign(d_mean.begin(), d_mean.end());
  const auto resp = exchange(std::move(req));
  if (!resp.caption_gradient || !resp.aesthetic_gradient ||
      resp.caption_gradient->size() != crop.size() ||
      resp.aesthetic_gradient->size() != crop.size()) {
    throw ProtocolError("scorer response lacks pixel gradients of the crop's size");
  }
  std::vector<double> g(crop.size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    g[k] = static_cast<double>((*resp.caption_gradient)[k]) +
           d_aesthetic * static_cast<double>((*resp.aesthetic_gradient)[k]);
  }
  return g;
}

std::unique_ptr<RemoteScorer> connect_scorer(std::string_view endpoint,
                                             const Vocabulary& vocab,
                                             ConnectOptions opts) {
  const auto ep = ScorerEndpoint::parse(endpoint);
  auto channel = ep.kind == ScorerEndpoint::Kind::child ? spawn_process(ep.command)
                                                        : connect_tcp(ep.host, ep.port);
  return std::make_unique<RemoteScorer>(std::move(channel), vocab, opts);
}

}  // namespace capcrop
