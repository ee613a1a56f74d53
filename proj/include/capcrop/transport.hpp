#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

namespace capcrop {

// Bidirectional newline-framed byte stream.
class LineChannel {
 public:
  virtual ~LineChannel() = default;
  // Appends '\n' when missing. Throws ScorerError when the peer is gone.
  virtual void write_line(std::string_view line) = 0;
  // Next line without its '\n'; nullopt at end of stream. A negative timeout
  // waits forever, otherwise ScorerTimeoutError is raised on expiry.
  virtual std::optional<std::string> read_line(std::chrono::milliseconds timeout) = 0;
};

// Channel over a pair of file descriptors (may be the same socket).
class FdChannel : public LineChannel {
 public:
  FdChannel(int read_fd, int write_fd, bool owns);
  ~FdChannel() override;
  FdChannel(const FdChannel&) = delete;
  FdChannel& operator=(const FdChannel&) = delete;

  void write_line(std::string_view line) override;
  std::optional<std::string> read_line(std::chrono::milliseconds timeout) override;

 protected:
  void close_fds();

 private:
  int read_fd_;
  int write_fd_;
  bool owns_;
  std::string buffer_;
};

// Runs `command` through /bin/sh with its stdin/stdout attached to the channel.
std::unique_ptr<LineChannel> spawn_process(const std::string& command);

std::unique_ptr<LineChannel> connect_tcp(const std::string& host, int port);

// Listening socket for servers; accept() blocks for one client.
class TcpListener {
 public:
  explicit TcpListener(int port);  // 0 picks a free port
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  int port() const { return port_; }
  std::unique_ptr<LineChannel> accept();

 private:
  int fd_ = -1;
  int port_ = 0;
};

}  // namespace capcrop
