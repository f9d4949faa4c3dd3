#include "bolting/ws_server.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include <atomic>
#include <chrono>
#include <deque>
#include <set>
#include <thread>

namespace bolting {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

namespace {

constexpr auto kPollPeriod = std::chrono::milliseconds(5);

class Session;

}  // namespace

struct WsServer::Impl {
  net::io_context ioc;
  tcp::acceptor acceptor{ioc};
  TelemetryBuffer& telemetry;
  CommandQueue& commands;
  std::string hello;
  std::function<void(const std::string&)> log;
  Ingestor ingestor;  // only touched on the I/O thread
  std::set<std::shared_ptr<Session>> sessions;
  std::atomic<std::size_t> client_count{0};
  std::uint64_t next_client = 1;
  std::thread thread;
  std::atomic<bool> stopped{false};
  unsigned short bound_port = 0;

  Impl(TelemetryBuffer& t, CommandQueue& c, std::string h,
       std::function<void(const std::string&)> l)
      : telemetry(t), commands(c), hello(std::move(h)), log(std::move(l)) {}

  void note(const std::string& msg) {
    if (log) log(msg);
  }

  void accept();
  void drop(const std::shared_ptr<Session>& s);
};

namespace {

class Session : public std::enable_shared_from_this<Session> {
 public:
  Session(tcp::socket socket, WsServer::Impl& server, std::string id)
      : ws_(std::move(socket)), timer_(ws_.get_executor()), server_(server), id_(std::move(id)) {}

  void start() {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
      if (ec) return self->close();
      self->outbox_.push_back(self->server_.hello);
      self->flush();
      self->read();
      self->poll();
    });
  }

  void close() {
    if (closed_) return;
    closed_ = true;
    timer_.cancel();
    beast::error_code ignored;
    beast::get_lowest_layer(ws_).socket().close(ignored);
    server_.ingestor.forget(id_);
    server_.drop(shared_from_this());
  }

  const std::string& id() const { return id_; }

 private:
  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return self->close();
      const std::string raw = beast::buffers_to_string(self->buffer_.data());
      self->buffer_.consume(self->buffer_.size());
      self->handle(raw);
      self->read();
    });
  }

  void handle(const std::string& raw) {
    try {
      server_.commands.push(server_.ingestor.ingest(raw, id_));
    } catch (const MalformedMessage& e) {
      server_.note(id_ + ": malformed message: " + e.what());
      outbox_.push_back(encode_error(std::string("MalformedMessage: ") + e.what(), -1));
      flush();
    } catch (const StaleSequence& e) {
      server_.note(id_ + ": stale sequence: " + e.what());
      outbox_.push_back(encode_error(std::string("StaleSequence: ") + e.what(), -1));
      flush();
    }
  }

  // latest-wins: only the freshest frame is queued, and only when idle
  void poll() {
    if (closed_) return;
    if (outbox_.empty() && !writing_) {
      if (auto frame = server_.telemetry.latest_after(last_seq_)) {
        last_seq_ = frame->first;
        outbox_.push_back(std::move(frame->second));
        flush();
      }
    }
    timer_.expires_after(kPollPeriod);
    timer_.async_wait([self = shared_from_this()](beast::error_code ec) {
      if (!ec) self->poll();
    });
  }

  void flush() {
    if (writing_ || outbox_.empty() || closed_) return;
    writing_ = true;
    ws_.text(true);
    ws_.async_write(net::buffer(outbox_.front()),
                    [self = shared_from_this()](beast::error_code ec, std::size_t) {
                      self->writing_ = false;
                      if (ec) return self->close();
                      self->outbox_.pop_front();
                      self->flush();
                    });
  }

  websocket::stream<beast::tcp_stream> ws_;
  net::steady_timer timer_;
  WsServer::Impl& server_;
  std::string id_;
  beast::flat_buffer buffer_;
  std::deque<std::string> outbox_;
  bool writing_ = false;
  bool closed_ = false;
  std::uint64_t last_seq_ = 0;
};

}  // namespace

void WsServer::Impl::accept() {
  acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
    if (ec) return;  // acceptor closed
    auto s = std::make_shared<Session>(std::move(socket), *this,
                                       "client-" + std::to_string(next_client++));
    sessions.insert(s);
    client_count = sessions.size();
    note(s->id() + " connected");
    s->start();
    accept();
  });
}

void WsServer::Impl::drop(const std::shared_ptr<Session>& s) {
  if (sessions.erase(s) > 0) note(s->id() + " disconnected");
  client_count = sessions.size();
}

WsServer::WsServer(unsigned short port, TelemetryBuffer& telemetry, CommandQueue& commands,
                   std::string hello, std::function<void(const std::string&)> log)
    : impl_(std::make_shared<Impl>(telemetry, commands, std::move(hello), std::move(log))) {
  const tcp::endpoint ep(net::ip::make_address("127.0.0.1"), port);
  impl_->acceptor.open(ep.protocol());
  impl_->acceptor.set_option(net::socket_base::reuse_address(true));
  impl_->acceptor.bind(ep);
  impl_->acceptor.listen();
  impl_->bound_port = impl_->acceptor.local_endpoint().port();
  impl_->accept();
  impl_->thread = std::thread([impl = impl_] { impl->ioc.run(); });
}

WsServer::~WsServer() { stop(); }

unsigned short WsServer::port() const { return impl_->bound_port; }

std::size_t WsServer::client_count() const { return impl_->client_count; }

void WsServer::stop() {
  if (impl_->stopped.exchange(true)) return;
  net::post(impl_->ioc, [impl = impl_] {
    beast::error_code ignored;
    impl->acceptor.close(ignored);
    const auto sessions = impl->sessions;
    for (const auto& s : sessions) s->close();
    impl->ioc.stop();
  });
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace bolting
