// Reference scorer process for the line protocol: uniform (or fixture-mode)
// caption steps and aesthetic = mean pixel intensity. Serves stdin/stdout by
// default, or one TCP client with --tcp.

#include <CLI11.hpp>

#include <chrono>
#include <csignal>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <thread>
#include <unistd.h>

#include "capcrop/echo_server.hpp"
#include "capcrop/fixture_mode.hpp"
#include "capcrop/objective.hpp"
#include "capcrop/transport.hpp"

using namespace capcrop;

namespace {

int serve(LineChannel& ch, EchoServer& server) {
  while (auto line = ch.read_line(std::chrono::milliseconds(-1))) {
    auto reply = server.handle(*line);
    if (reply) {
      ch.write_line(*reply);
    }
    if (server.finished()) {
      return 0;
    }
    if (server.stalled()) {
      // Keep the connection open but never answer again.
      for (;;) {
        std::this_thread::sleep_for(std::chrono::seconds(60));
      }
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Echo scorer for the capcrop line protocol"};
  std::string vocab_path;
  EchoOptions opts;
  int tcp_port = -1;
  std::string port_file;
  app.add_option("--vocab", vocab_path, "vocabulary file (default: built-in)")
      ->check(CLI::ExistingFile);
  app.add_option("--steps", opts.steps, "caption steps per response")->capture_default_str();
  app.add_flag("--gradients", opts.gradients, "offer pixel gradients");
  app.add_flag("--concurrent-safe", opts.concurrent_safe, "declare concurrent safety");
  app.add_option("--protocol", opts.protocol, "protocol version to announce")
      ->capture_default_str();
  app.add_option("--stall-after", opts.stall_after, "stop answering after N score responses");
  app.add_option("--exit-after", opts.exit_after, "exit after N score responses");
  std::uint64_t fixture_seed = 0;
  auto* fixture = app.add_option("--fixture-seed", fixture_seed,
                                 "fixture-mode caption steps with this seed");
  app.add_option("--tcp", tcp_port, "listen on this port (0: any free port)");
  app.add_option("--port-file", port_file, "write the bound TCP port here");
  CLI11_PARSE(app, argc, argv);

  try {
    const Vocabulary vocab =
        vocab_path.empty() ? default_vocabulary() : Vocabulary::load(vocab_path);
    opts.vocab_size = vocab.size();
    opts.vocab_hash = vocab.hash();
    if (*fixture) {
      opts.fixture_seed = fixture_seed;
      if (app.count("--steps") == 0) {
        opts.steps = kFixtureSteps;
      }
    }
    EchoServer server(opts);
    if (tcp_port >= 0) {
      TcpListener listener(tcp_port);
      if (!port_file.empty()) {
        const std::string tmp = port_file + ".tmp";
        std::ofstream(tmp) << listener.port() << '\n';
        std::rename(tmp.c_str(), port_file.c_str());
      }
      auto ch = listener.accept();
      return serve(*ch, server);
    }
    FdChannel ch(STDIN_FILENO, STDOUT_FILENO, false);
    return serve(ch, server);
  } catch (const std::exception& e) {
    std::cerr << "echo scorer: " << e.what() << '\n';
    return 2;
  }
}
