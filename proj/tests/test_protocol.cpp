#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "capcrop/echo_server.hpp"
#include "capcrop/error.hpp"
#include "capcrop/fixture_mode.hpp"
#include "capcrop/protocol.hpp"

using namespace capcrop;
using namespace capcrop::proto;

namespace {

std::vector<unsigned char> bytes_of(std::string_view s) { return {s.begin(), s.end()}; }

bool same_bits(const std::vector<float>& a, const std::vector<float>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

ScoreRequest sample_request() {
  ScoreRequest r;
  r.id = 17;
  r.out_size = 2;
  r.channels = 3;
  r.pixels = {0.0f, 0.25f, 0.5f, 0.75f, 1.0f, 0.1f, 0.2f, 0.3f, 0.4f, 0.6f, 0.7f, 0.8f};
  r.vocab_hash = "abc";
  return r;
}

std::string response_line(std::uint64_t id, const std::vector<Distribution>& steps) {
  ScoreResponse r;
  r.id = id;
  r.caption_steps = steps;
  r.aesthetic = 0.5;
  return encode_response(r);
}

EchoOptions echo_options(std::size_t vocab) {
  EchoOptions o;
  o.vocab_size = vocab;
  o.vocab_hash = "hash";
  return o;
}

std::string score_line(std::uint64_t id, const std::string& hash, bool grad = false) {
  ScoreRequest r = sample_request();
  r.id = id;
  r.vocab_hash = hash;
  r.want_gradient = grad;
  if (grad) {
    r.caption_cotangent = {1.0, 2.0, 3.0};
  }
  return encode_request(r);
}

}  // namespace

TEST_SUITE("wire encoding") {
  TEST_CASE("base64 matches the standard test vectors") {
    CHECK(base64_encode(bytes_of("")) == "");
    CHECK(base64_encode(bytes_of("f")) == "Zg==");
    CHECK(base64_encode(bytes_of("fo")) == "Zm8=");
    CHECK(base64_encode(bytes_of("foo")) == "Zm9v");
    CHECK(base64_encode(bytes_of("foob")) == "Zm9vYg==");
    CHECK(base64_encode(bytes_of("fooba")) == "Zm9vYmE=");
    CHECK(base64_encode(bytes_of("foobar")) == "Zm9vYmFy");
    CHECK(base64_decode("Zm9vYg==") == bytes_of("foob"));
    CHECK(base64_decode("Zm9vYmE=") == bytes_of("fooba"));
    CHECK(base64_decode("").empty());
  }

  TEST_CASE("base64 rejects bad payloads") {
    CHECK_THROWS_AS(base64_decode("Zm9"), ProtocolError);
    CHECK_THROWS_AS(base64_decode("Zm9!"), ProtocolError);
  }

  TEST_CASE("float32 buffers are little-endian") {
    const std::vector<float> one{1.0f};
    CHECK(encode_f32le(one) == "AACAPw==");
    CHECK(decode_f32le("AACAPw==") == one);
    CHECK_THROWS_AS(decode_f32le("AACA"), ProtocolError);
  }

  TEST_CASE("float32 round trip is bit exact") {
    std::vector<float> v{0.0f,
                         -0.0f,
                         1e-45f,
                         std::numeric_limits<float>::min(),
                         std::numeric_limits<float>::max(),
                         std::numeric_limits<float>::infinity(),
                         0.1f,
                         -123.456f};
    for (int i = 0; i < 1000; ++i) {
      v.push_back(std::sin(static_cast<float>(i)) * 1e3f);
    }
    CHECK(same_bits(decode_f32le(encode_f32le(v)), v));
  }
}

TEST_SUITE("messages") {
  TEST_CASE("hello round trip") {
    Hello h;
    h.vocab_hash = "f641fd";
    h.gradients = true;
    h.concurrent_safe = true;
    const std::string server = encode_server_hello(h);
    CHECK(server.back() == '\n');
    CHECK(decode_hello(server) == h);
    const Hello client = decode_hello(encode_client_hello(h));
    CHECK(client.vocab_hash == "f641fd");
    CHECK(client.protocol == kProtocolVersion);
    CHECK_FALSE(client.gradients);
    CHECK_THROWS_AS(decode_hello(R"({"type":"score","protocol":1,"vocab_hash":""})"),
                    ProtocolError);
    CHECK_THROWS_AS(decode_hello(R"({"type":"hello","vocab_hash":""})"), ProtocolError);
  }

  TEST_CASE("request round trip is exact") {
    ScoreRequest r = sample_request();
    CHECK(decode_request(encode_request(r)) == r);
    r.want_gradient = true;
    r.caption_cotangent = {0.1, -2.5, 1e-300};
    const std::string line = encode_request(r);
    CHECK(std::count(line.begin(), line.end(), '\n') == 1);
    CHECK(decode_request(line) == r);
  }

  TEST_CASE("request field layout") {
    const auto j = nlohmann::json::parse(encode_request(sample_request()));
    CHECK(j.at("type") == "score");
    CHECK(j.at("id") == 17);
    CHECK(j.at("crop").at("size") == 2);
    CHECK(j.at("crop").at("channels") == 3);
    CHECK(j.at("crop").at("data").is_string());
    CHECK(j.at("want_gradient") == false);
    CHECK_FALSE(j.contains("caption_cotangent"));
  }

  TEST_CASE("malformed requests") {
    CHECK_THROWS_AS(decode_request("not json"), ProtocolError);
    CHECK_THROWS_AS(decode_request("[1,2]"), ProtocolError);
    CHECK_THROWS_AS(decode_request(R"({"type":"score"})"), ProtocolError);
    CHECK_THROWS_AS(decode_request("{\"type\":\n\"score\"}"), ProtocolError);
    ScoreRequest r = sample_request();
    r.pixels.pop_back();
    CHECK_THROWS_AS(decode_request(encode_request(r)), ProtocolError);
    r = sample_request();
    r.channels = 2;
    r.pixels.resize(8);
    CHECK_THROWS_AS(decode_request(encode_request(r)), ProtocolError);
  }

  TEST_CASE("response round trip including gradients") {
    ScoreResponse r;
    r.id = 3;
    r.caption_steps = {{0.25, 0.75}, {1.0, 0.0}};
    r.aesthetic = -0.125;
    r.caption_gradient = std::vector<float>{0.5f, -1.0f};
    r.aesthetic_gradient = std::vector<float>{2.0f, 3.0f};
    CHECK(parse_response(encode_response(r)) == r);
    CHECK(decode_response(encode_response(r), 3, 2) == r);
  }

  TEST_CASE("response id mismatch is a desync") {
    CHECK_THROWS_AS(decode_response(response_line(4, {{0.5, 0.5}}), 5, 2), DesyncError);
  }

  TEST_CASE("scorer-side errors surface as scorer errors") {
    ScoreResponse r;
    r.id = 9;
    r.error = "out of memory";
    try {
      decode_response(encode_response(r), 9, 2);
      FAIL("expected an error");
    } catch (const ScorerReportedError& e) {
      CHECK(std::string(e.what()).find("out of memory") != std::string::npos);
    }
  }

  TEST_CASE("a step summing to 0.9 is rejected and named") {
    try {
      decode_response(response_line(1, {{0.5, 0.5}, {0.4, 0.5}}), 1, 2);
      FAIL("expected a protocol error");
    } catch (const ProtocolError& e) {
      CHECK(std::string(e.what()).find("caption step 1") != std::string::npos);
    }
  }

  TEST_CASE("distribution checks") {
    CHECK_NOTHROW(decode_response(response_line(1, {{0.5, 0.5 + 9e-7}}), 1, 2));
    CHECK_THROWS_AS(decode_response(response_line(1, {{0.5, 0.5 + 2e-6}}), 1, 2), ProtocolError);
    CHECK_THROWS_AS(decode_response(response_line(1, {{1.0}}), 1, 2), ProtocolError);
    CHECK_THROWS_AS(decode_response(response_line(1, {{1.5, -0.5}}), 1, 2), ProtocolError);
    CHECK_THROWS_AS(decode_response(response_line(1, {}), 1, 2), ProtocolError);
    CHECK_THROWS_AS(parse_response(R"({"id":1,"caption_steps":[[1.0]]})"), ProtocolError);
  }
}

TEST_SUITE("echo server") {
  TEST_CASE("hello reply advertises the options") {
    EchoOptions o = echo_options(3);
    o.gradients = true;
    EchoServer s(o);
    const auto reply = s.handle(encode_client_hello({}));
    REQUIRE(reply);
    const Hello h = decode_hello(*reply);
    CHECK(h.vocab_hash == "hash");
    CHECK(h.gradients);
    CHECK_FALSE(h.concurrent_safe);
    CHECK(s.answered() == 0);
  }

  TEST_CASE("uniform steps and mean-intensity aesthetic") {
    EchoServer s(echo_options(3));
    const auto reply = s.handle(score_line(5, "hash"));
    REQUIRE(reply);
    const ScoreResponse r = decode_response(*reply, 5, 3);
    REQUIRE(r.caption_steps.size() == 1);
    for (double p : r.caption_steps[0]) {
      CHECK(p == doctest::Approx(1.0 / 3.0));
    }
    double sum = 0.0;
    for (float v : sample_request().pixels) {
      sum += v;
    }
    CHECK(r.aesthetic == doctest::Approx(sum / 12.0).epsilon(1e-15));
    CHECK_FALSE(r.caption_gradient);
  }

  TEST_CASE("gradients when offered and asked for") {
    EchoOptions o = echo_options(3);
    o.gradients = true;
    EchoServer s(o);
    const ScoreResponse r = decode_response(*s.handle(score_line(1, "hash", true)), 1, 3);
    REQUIRE(r.caption_gradient);
    REQUIRE(r.aesthetic_gradient);
    CHECK(r.caption_gradient->size() == 12);
    CHECK((*r.aesthetic_gradient)[0] == doctest::Approx(1.0 / 12.0));
  }

  TEST_CASE("vocabulary mismatch is reported per request") {
    EchoServer s(echo_options(3));
    CHECK_THROWS_AS(decode_response(*s.handle(score_line(2, "other")), 2, 3),
                    ScorerReportedError);
  }

  TEST_CASE("malformed lines get an error reply") {
    EchoServer s(echo_options(3));
    const auto reply = s.handle("garbage");
    REQUIRE(reply);
    CHECK(parse_response(*reply).error);
  }

  TEST_CASE("stall_after silences the server") {
    EchoOptions o = echo_options(3);
    o.stall_after = 2;
    EchoServer s(o);
    CHECK(s.handle(score_line(1, "hash")));
    CHECK(s.handle(score_line(2, "hash")));
    CHECK(s.stalled());
    CHECK_FALSE(s.handle(score_line(3, "hash")));
  }

  TEST_CASE("fixture mode serves fixture_caption_steps") {
    EchoOptions o = echo_options(7);
    o.fixture_seed = 99;
    o.steps = kFixtureSteps;
    EchoServer s(o);
    ScoreRequest req;
    req.id = 1;
    req.out_size = 4;
    req.channels = 1;
    req.vocab_hash = "hash";
    for (int i = 0; i < 16; ++i) {
      req.pixels.push_back(static_cast<float>(i) / 16.0f);
    }
    const ScoreResponse r = decode_response(*s.handle(encode_request(req)), 1, 7);
    CHECK(r.caption_steps == fixture_caption_steps(req.pixels, 4, 1, 99, 7));
  }

  TEST_CASE("fixture mode reports crops smaller than its grid") {
    EchoOptions o = echo_options(7);
    o.fixture_seed = 99;
    EchoServer s(o);
    CHECK_THROWS_AS(decode_response(*s.handle(score_line(1, "hash")), 1, 7),
                    ScorerReportedError);
  }
}

TEST_SUITE("fixture mode") {
  float f32(double v) { return static_cast<float>(v); }

  std::vector<float> ramp8() {
    std::vector<float> px(64);
    for (int i = 0; i < 64; ++i) {
      px[i] = f32((i % 16) / 15.0);
    }
    return px;
  }

  TEST_CASE("frozen vectors from an independent implementation") {
    const auto px = ramp8();
    const auto grid = fixture_grid_bytes(px, 8, 1);
    const std::array<unsigned char, 16> want_grid{77, 111, 145, 179, 77, 111, 145, 179,
                                                  77, 111, 145, 179, 77, 111, 145, 179};
    CHECK(grid == want_grid);
    const auto steps = fixture_caption_steps(px, 8, 1, 7, 5);
    const std::vector<Distribution> want{
        {0.49848989199587385, 0.0006213152433289642, 0.0004138851795762724,
         0.0740939077525685, 0.42638099982865246},
        {0.002074323476211178, 0.04435099150877695, 0.9482660107595254,
         0.0018886930179441285, 0.0034199812375420007},
        {0.6101785193904435, 0.03037899966149401, 0.0003170333102699996,
         0.35870544674033744, 0.0004200008974550551}};
    REQUIRE(steps.size() == 3);
    for (std::size_t t = 0; t < 3; ++t) {
      for (std::size_t w = 0; w < 5; ++w) {
        CHECK(std::abs(steps[t][w] - want[t][w]) < 1e-15);
      }
    }
  }

  TEST_CASE("frozen vectors: colour crop, long vocabulary") {
    std::vector<float> px(48);
    for (int i = 0; i < 48; ++i) {
      px[i] = f32(((i * 37) % 101) / 100.0);
    }
    const std::array<unsigned char, 16> want_grid{94,  120, 145, 85,  110, 136, 162, 101,
                                                  127, 152, 178, 117, 143, 82,  108, 133};
    CHECK(fixture_grid_bytes(px, 4, 3) == want_grid);
    const auto steps = fixture_caption_steps(px, 4, 3, 20210901, 40, 2);
    CHECK(std::abs(steps[0][0] - 0.0001753290525381761) < 1e-15);
    CHECK(std::abs(steps[0][1] - 0.17506533193676788) < 1e-15);
    CHECK(std::abs(steps[0][3] - 0.0012955162049769426) < 1e-15);
    CHECK(std::abs(steps[1][39] - 0.19227339247550126) < 1e-15);
  }

  TEST_CASE("every step is a distribution") {
    const auto steps = fixture_caption_steps(ramp8(), 8, 1, 3, 100);
    CHECK(steps.size() == static_cast<std::size_t>(kFixtureSteps));
    CHECK_NOTHROW(validate_steps(steps, 100));
  }

  TEST_CASE("output depends only on the grid bytes") {
    auto px = ramp8();
    const auto a = fixture_caption_steps(px, 8, 1, 5, 9);
    // Swap two pixels inside one cell: the cell mean is unchanged.
    std::swap(px[0], px[9]);
    CHECK(fixture_grid_bytes(px, 8, 1) == fixture_grid_bytes(ramp8(), 8, 1));
    CHECK(fixture_caption_steps(px, 8, 1, 5, 9) == a);
    // A different seed changes the output.
    CHECK(fixture_caption_steps(ramp8(), 8, 1, 6, 9) != a);
  }

  TEST_CASE("size mismatch and empty vocabulary are rejected") {
    const auto px = ramp8();
    CHECK_THROWS_AS(fixture_grid_bytes(px, 7, 1), std::invalid_argument);
    CHECK_THROWS_AS(fixture_grid_bytes(std::vector<float>(9), 3, 1), std::invalid_argument);
    CHECK_THROWS_AS(fixture_caption_steps(px, 8, 1, 0, 0), std::invalid_argument);
  }
}
