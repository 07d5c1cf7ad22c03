#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <mutex>

#include "qpay/wire.hpp"

namespace qpay {

namespace {

struct ByteQueue {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<Bytes> frames;
  bool closed = false;
};

class QueueEndpoint final : public Endpoint {
 public:
  QueueEndpoint(std::shared_ptr<ByteQueue> in, std::shared_ptr<ByteQueue> out)
      : in_(std::move(in)), out_(std::move(out)) {}
  ~QueueEndpoint() override { close(); }

  void send(const Frame& f) override {
    Bytes wire = encode_frame(f);
    std::lock_guard lock(out_->mu);
    if (out_->closed) throw TransportError("peer closed the in-memory channel");
    out_->frames.push_back(std::move(wire));
    out_->cv.notify_all();
  }

  Frame receive() override {
    std::unique_lock lock(in_->mu);
    in_->cv.wait(lock, [&] { return !in_->frames.empty() || in_->closed; });
    if (in_->frames.empty()) throw TransportError("peer closed the in-memory channel");
    Bytes wire = std::move(in_->frames.front());
    in_->frames.pop_front();
    lock.unlock();
    try {
      return decode_frame(wire);
    } catch (const FormatError& e) {
      throw TransportError(std::string("malformed frame: ") + e.what());
    }
  }

  void close() override {
    for (auto* q : {in_.get(), out_.get()}) {
      std::lock_guard lock(q->mu);
      q->closed = true;
      q->cv.notify_all();
    }
  }

 private:
  std::shared_ptr<ByteQueue> in_, out_;
};

[[noreturn]] void sys_fail(const char* what) {
  throw TransportError(std::string(what) + ": " + std::strerror(errno));
}

bool wait_fd(int fd, short events, int timeout_ms) {
  pollfd p{fd, events, 0};
  for (;;) {
    const int rc = ::poll(&p, 1, timeout_ms);
    if (rc > 0) return true;
    if (rc == 0) return false;
    if (errno != EINTR) sys_fail("poll");
  }
}

class SocketEndpoint final : public Endpoint {
 public:
  SocketEndpoint(int fd, int timeout_ms) : fd_(fd), timeout_ms_(timeout_ms) {
    int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  }
  ~SocketEndpoint() override { close(); }

  void send(const Frame& f) override {
    if (fd_ < 0) throw TransportError("socket closed");
    const Bytes wire = encode_frame(f);
    std::size_t done = 0;
    while (done < wire.size()) {
      const ssize_t n = ::send(fd_, wire.data() + done, wire.size() - done, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        sys_fail("send");
      }
      done += static_cast<std::size_t>(n);
    }
  }

  Frame receive() override {
    if (fd_ < 0) throw TransportError("socket closed");
    Bytes head(4);
    read_exact(head.data(), 4);
    const std::uint32_t len = ByteReader(head).u32();
    if (len < 2 || len > kMaxFrameBytes) throw TransportError("malformed frame length");
    head.resize(4 + len);
    read_exact(head.data() + 4, len);
    try {
      return decode_frame(head);
    } catch (const FormatError& e) {
      throw TransportError(std::string("malformed frame: ") + e.what());
    }
  }

  void close() override {
    if (fd_ >= 0) {
      ::close(fd_);
      fd_ = -1;
    }
  }

 private:
  void read_exact(std::uint8_t* dst, std::size_t n) {
    std::size_t done = 0;
    while (done < n) {
      if (!wait_fd(fd_, POLLIN, timeout_ms_)) throw TransportError("receive timed out");
      const ssize_t got = ::recv(fd_, dst + done, n - done, 0);
      if (got < 0) {
        if (errno == EINTR) continue;
        sys_fail("recv");
      }
      if (got == 0) throw TransportError("connection closed by peer");
      done += static_cast<std::size_t>(got);
    }
  }

  int fd_;
  int timeout_ms_;
};

}  // namespace

std::pair<std::unique_ptr<Endpoint>, std::unique_ptr<Endpoint>> memory_pipe() {
  auto a = std::make_shared<ByteQueue>();
  auto b = std::make_shared<ByteQueue>();
  return {std::make_unique<QueueEndpoint>(a, b), std::make_unique<QueueEndpoint>(b, a)};
}

LoopbackListener::LoopbackListener() {
  fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd_ < 0) sys_fail("socket");
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  socklen_t alen = sizeof addr;
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 || ::listen(fd_, 16) < 0 ||
      ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &alen) < 0) {
    const int err = errno;
    ::close(fd_);
    errno = err;
    sys_fail("listen");
  }
  port_ = ntohs(addr.sin_port);
}

LoopbackListener::~LoopbackListener() {
  if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<Endpoint> LoopbackListener::accept(int timeout_ms) {
  if (!wait_fd(fd_, POLLIN, timeout_ms)) throw TransportError("accept timed out");
  const int c = ::accept4(fd_, nullptr, nullptr, SOCK_CLOEXEC);
  if (c < 0) sys_fail("accept");
  return std::make_unique<SocketEndpoint>(c, timeout_ms);
}

std::unique_ptr<Endpoint> connect_loopback(std::uint16_t port, int timeout_ms) {
  const int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd < 0) sys_fail("socket");
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(port);
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0) {
    const int err = errno;
    ::close(fd);
    errno = err;
    sys_fail("connect");
  }
  return std::make_unique<SocketEndpoint>(fd, timeout_ms);
}

}  // namespace qpay
