#include "capcrop/transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <csignal>
#include <cstring>
#include <thread>

#include "capcrop/error.hpp"

extern char** environ;

namespace capcrop {

namespace {

void ignore_sigpipe() {
  static const bool once = [] {
    std::signal(SIGPIPE, SIG_IGN);
    return true;
  }();
  (void)once;
}

std::string errno_text() { return std::strerror(errno); }

}  // namespace

FdChannel::FdChannel(int read_fd, int write_fd, bool owns)
    : read_fd_(read_fd), write_fd_(write_fd), owns_(owns) {
  ignore_sigpipe();
}

FdChannel::~FdChannel() { close_fds(); }

void FdChannel::close_fds() {
  if (!owns_) {
    return;
  }
  if (write_fd_ >= 0 && write_fd_ != read_fd_) {
    ::close(write_fd_);
  }
  if (read_fd_ >= 0) {
    ::close(read_fd_);
  }
  read_fd_ = write_fd_ = -1;
}

void FdChannel::write_line(std::string_view line) {
  std::string msg(line);
  if (msg.empty() || msg.back() != '\n') {
    msg += '\n';
  }
  std::size_t off = 0;
  while (off < msg.size()) {
    const ssize_t n = ::write(write_fd_, msg.data() + off, msg.size() - off);
    if (n < 0) {
      if (errno == EINTR) {
        continue;
      }
      throw ScorerError("scorer connection write failed: " + errno_text());
    }
    off += static_cast<std::size_t>(n);
  }
}

std::optional<std::string> FdChannel::read_line(std::chrono::milliseconds timeout) {
  using clock = std::chrono::steady_clock;
  const auto deadline = clock::now() + timeout;
  for (;;) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    int wait_ms = -1;
    if (timeout.count() >= 0) {
      const auto left = std::chrono::ceil<std::chrono::milliseconds>(deadline - clock::now());
      if (clock::now() >= deadline) {
        throw ScorerTimeoutError("scorer did not answer within " +
                                 std::to_string(timeout.count()) + " ms");
      }
      wait_ms = static_cast<int>(left.count());
    }
    pollfd p{read_fd_, POLLIN, 0};
    const int r = ::poll(&p, 1, wait_ms);
    if (r < 0) {
      if (errno == EINTR) {
        continue;
      }
      throw ScorerError("poll on scorer connection failed: " + errno_text());
    }
    if (r == 0) {
      continue;  // deadline check above raises
    }
    char chunk[65536];
    const ssize_t n = ::read(read_fd_, chunk, sizeof chunk);
    if (n < 0) {
      if (errno == EINTR || errno == EAGAIN) {
        continue;
      }
      throw ScorerError("scorer connection read failed: " + errno_text());
    }
    if (n == 0) {
      if (buffer_.empty()) {
        return std::nullopt;
      }
      std::string rest = std::move(buffer_);
      buffer_.clear();
      return rest;
    }
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

namespace {

class ChildProcessChannel final : public FdChannel {
 public:
  ChildProcessChannel(int read_fd, int write_fd, pid_t pid)
      : FdChannel(read_fd, write_fd, true), pid_(pid) {}

  ~ChildProcessChannel() override {
    close_fds();  // EOF on the child's stdin asks it to exit
    for (int i = 0; i < 20; ++i) {
      if (::waitpid(pid_, nullptr, WNOHANG) == pid_) {
        return;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, nullptr, 0);
  }

 private:
  pid_t pid_;
};

}  // namespace

std::unique_ptr<LineChannel> spawn_process(const std::string& command) {
  int to_child[2];
  int from_child[2];
  if (::pipe(to_child) != 0) {
    throw ScorerError("pipe: " + errno_text());
  }
  if (::pipe(from_child) != 0) {
    ::close(to_child[0]);
    ::close(to_child[1]);
    throw ScorerError("pipe: " + errno_text());
  }
  posix_spawn_file_actions_t fa;
  posix_spawn_file_actions_init(&fa);
  posix_spawn_file_actions_adddup2(&fa, to_child[0], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&fa, from_child[1], STDOUT_FILENO);
  for (int fd : {to_child[0], to_child[1], from_child[0], from_child[1]}) {
    posix_spawn_file_actions_addclose(&fa, fd);
  }
  std::string sh = "/bin/sh";
  std::string dash_c = "-c";
  std::string cmd = command;
  char* argv[] = {sh.data(), dash_c.data(), cmd.data(), nullptr};
  pid_t pid = 0;
  const int rc = posix_spawn(&pid, "/bin/sh", &fa, nullptr, argv, environ);
  posix_spawn_file_actions_destroy(&fa);
  ::close(to_child[0]);
  ::close(from_child[1]);
  if (rc != 0) {
    ::close(to_child[1]);
    ::close(from_child[0]);
    throw ScorerError("cannot start scorer '" + command + "': " + std::strerror(rc));
  }
  return std::make_unique<ChildProcessChannel>(from_child[0], to_child[1], pid);
}

std::unique_ptr<LineChannel> connect_tcp(const std::string& host, int port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  if (const int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &res); rc != 0) {
    throw ScorerError("cannot resolve " + host + ": " + gai_strerror(rc));
  }
  int fd = -1;
  for (addrinfo* a = res; a != nullptr; a = a->ai_next) {
    fd = ::socket(a->ai_family, a->ai_socktype, a->ai_protocol);
    if (fd < 0) {
      continue;
    }
    if (::connect(fd, a->ai_addr, a->ai_addrlen) == 0) {
      break;
    }
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) {
    throw ScorerError("cannot connect to " + host + ":" + service);
  }
  return std::make_unique<FdChannel>(fd, fd, true);
}

TcpListener::TcpListener(int port) {
  ignore_sigpipe();
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) {
    throw ScorerError("socket: " + errno_text());
  }
  const int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(static_cast<uint16_t>(port));
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
      ::listen(fd_, 4) != 0) {
    const std::string err = errno_text();
    ::close(fd_);
    throw ScorerError("cannot listen on port " + std::to_string(port) + ": " + err);
  }
  socklen_t len = sizeof addr;
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() {
  if (fd_ >= 0) {
    ::close(fd_);
  }
}

std::unique_ptr<LineChannel> TcpListener::accept() {
  for (;;) {
    const int c = ::accept(fd_, nullptr, nullptr);
    if (c >= 0) {
      return std::make_unique<FdChannel>(c, c, true);
    }
    if (errno != EINTR) {
      throw ScorerError("accept: " + errno_text());
    }
  }
}

}  // namespace capcrop
