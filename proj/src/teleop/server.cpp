#include "ppmc/teleop/server.hpp"

#include <atomic>
#include <charconv>
#include <deque>
#include <sstream>
#include <thread>

#include <boost/asio/bind_executor.hpp>
#include <boost/asio/dispatch.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/post.hpp>
#include <boost/asio/signal_set.hpp>
#include <boost/asio/strand.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

namespace ppmc::teleop {
namespace {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;
using nlohmann::json;

HttpReply json_reply(unsigned status, const json& body) {
  return HttpReply{status, "application/json", body.dump() + "\n"};
}

HttpReply error_reply(unsigned status, const std::string& message) {
  return json_reply(status, json{{"v", kProtocolVersion}, {"error", message}});
}

// Splits "/a/b?x=1" into path segments and the raw query.
std::pair<std::vector<std::string>, std::string> split_target(const std::string& target) {
  const auto q = target.find('?');
  const std::string path = target.substr(0, q);
  std::string query = q == std::string::npos ? "" : target.substr(q + 1);
  std::vector<std::string> parts;
  std::string part;
  std::istringstream in(path);
  while (std::getline(in, part, '/')) {
    if (!part.empty()) parts.push_back(part);
  }
  return {parts, query};
}

std::optional<std::string> query_value(const std::string& query, const std::string& key) {
  std::istringstream in(query);
  std::string pair;
  while (std::getline(in, pair, '&')) {
    const auto eq = pair.find('=');
    if (pair.substr(0, eq) == key) return eq == std::string::npos ? "" : pair.substr(eq + 1);
  }
  return std::nullopt;
}

std::optional<std::string> websocket_session_id(const std::string& target) {
  auto [parts, query] = split_target(target);
  if (parts.size() == 2 && parts[0] == "session") return parts[1];
  return std::nullopt;
}

bool is_state_message(const std::string& text) { return text.find("\"type\":\"state\"") != std::string::npos; }

class WsConnection : public std::enable_shared_from_this<WsConnection> {
 public:
  WsConnection(tcp::socket&& socket, std::shared_ptr<SessionRunner> runner, std::size_t max_states)
      : ws_(std::move(socket)), runner_(std::move(runner)), max_states_(max_states) {}

  ~WsConnection() {
    if (token_ != 0) runner_->unsubscribe(token_);
  }

  void start(http::request<http::string_body> request) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(request, beast::bind_front_handler(&WsConnection::on_accept, shared_from_this()));
  }

  void send(std::string text) {
    net::post(ws_.get_executor(), [self = shared_from_this(), text = std::move(text)]() mutable {
      self->enqueue(std::move(text));
    });
  }

 private:
  void on_accept(beast::error_code ec) {
    if (ec) return;
    std::weak_ptr<WsConnection> weak = shared_from_this();
    token_ = runner_->subscribe([weak](const std::string& text) {
      if (auto self = weak.lock()) self->send(text);
    });
    enqueue(runner_->hello().dump());
    enqueue(runner_->snapshot().dump());
    do_read();
  }

  void do_read() {
    ws_.async_read(buffer_, beast::bind_front_handler(&WsConnection::on_read, shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec) {
      closing();
      return;
    }
    std::string text = beast::buffers_to_string(buffer_.data());
    buffer_.consume(buffer_.size());
    std::weak_ptr<WsConnection> weak = shared_from_this();
    runner_->post(std::move(text), [weak](const std::string& reply) {
      if (auto self = weak.lock()) self->send(reply);
    });
    do_read();
  }

  void closing() {
    if (token_ != 0) {
      runner_->unsubscribe(token_);
      token_ = 0;
    }
  }

  void enqueue(std::string text) {
    const bool state = is_state_message(text);
    if (state && queued_states_ >= max_states_) return;
    if (state) ++queued_states_;
    queue_.push_back({std::move(text), state});
    if (queue_.size() == 1) do_write();
  }

  void do_write() {
    ws_.text(true);
    ws_.async_write(net::buffer(queue_.front().text),
                    beast::bind_front_handler(&WsConnection::on_write, shared_from_this()));
  }

  void on_write(beast::error_code ec, std::size_t) {
    if (ec) {
      closing();
      queue_.clear();
      return;
    }
    if (queue_.front().state) --queued_states_;
    queue_.pop_front();
    if (!queue_.empty()) do_write();
  }

  struct Pending {
    std::string text;
    bool state;
  };

  websocket::stream<beast::tcp_stream> ws_;
  std::shared_ptr<SessionRunner> runner_;
  std::size_t max_states_;
  beast::flat_buffer buffer_;
  std::deque<Pending> queue_;
  std::size_t queued_states_ = 0;
  std::uint64_t token_ = 0;
};

class HttpConnection : public std::enable_shared_from_this<HttpConnection> {
 public:
  HttpConnection(tcp::socket&& socket, SessionRegistry& sessions, const ServerOptions& options)
      : stream_(std::move(socket)), sessions_(sessions), options_(options) {}

  void start() {
    net::dispatch(stream_.get_executor(),
                  beast::bind_front_handler(&HttpConnection::do_read, shared_from_this()));
  }

 private:
  void do_read() {
    request_ = {};
    stream_.expires_after(std::chrono::seconds(30));
    http::async_read(stream_, buffer_, request_,
                     beast::bind_front_handler(&HttpConnection::on_read, shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec == http::error::end_of_stream) {
      beast::error_code ignored;
      stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
      return;
    }
    if (ec) return;

    const std::string target(request_.target());
    if (websocket::is_upgrade(request_)) {
      const auto id = websocket_session_id(target);
      auto runner = id ? sessions_.find(*id) : nullptr;
      if (runner) {
        stream_.expires_never();
        std::make_shared<WsConnection>(stream_.release_socket(), std::move(runner), options_.max_queued_states)
            ->start(std::move(request_));
        return;
      }
      respond(error_reply(404, id ? "no such session " + *id : "websocket endpoint is /session/{id}"));
      return;
    }
    if (websocket_session_id(target)) {
      respond(error_reply(426, "this endpoint requires a WebSocket upgrade"));
      return;
    }
    respond(handle_http(sessions_, std::string(request_.method_string()), target, request_.body(), options_));
  }

  void respond(const HttpReply& reply) {
    auto response = std::make_shared<http::response<http::string_body>>(
        static_cast<http::status>(reply.status), request_.version());
    response->set(http::field::server, "ppmc-teleop");
    response->set(http::field::content_type, reply.content_type);
    response->set(http::field::access_control_allow_origin, "*");
    response->keep_alive(request_.keep_alive());
    response->body() = reply.body;
    response->prepare_payload();
    http::async_write(stream_, *response,
                      [self = shared_from_this(), response](beast::error_code ec, std::size_t) {
                        if (ec) return;
                        if (!response->keep_alive()) {
                          beast::error_code ignored;
                          self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
                          return;
                        }
                        self->do_read();
                      });
  }

  beast::tcp_stream stream_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> request_;
  SessionRegistry& sessions_;
  const ServerOptions& options_;
};

}  // namespace

HttpReply handle_http(SessionRegistry& sessions, const std::string& method, const std::string& target,
                      const std::string& body, const ServerOptions& options) {
  auto [parts, query] = split_target(target);

  if (parts.size() == 1 && parts[0] == "health") {
    if (method != "GET") return error_reply(405, "use GET");
    return json_reply(200, json{{"v", kProtocolVersion}, {"status", "ok"}});
  }

  if (parts.size() == 2 && parts[0] == "maps") {
    if (method != "GET") return error_reply(405, "use GET");
    int id = 0;
    const std::string& s = parts[1];
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), id);
    if (ec != std::errc{} || ptr != s.data() + s.size() || id < 1 || id > 3) {
      return error_reply(404, "unknown map " + s + " (expected 1, 2 or 3)");
    }
    double spacing = options.map_spacing;
    if (auto v = query_value(query, "spacing")) {
      try {
        std::size_t used = 0;
        spacing = std::stod(*v, &used);
        if (used != v->size()) throw std::invalid_argument("trailing characters");
      } catch (const std::exception&) {
        return error_reply(400, "spacing must be a number");
      }
      if (!(spacing >= 0.05 && spacing <= 5.0)) return error_reply(400, "spacing must lie in [0.05, 5] m");
    }
    std::ostringstream csv;
    dump_heightmap_csv(HeightField(terrain_preset(id)), spacing, csv);
    return HttpReply{200, "text/csv", csv.str()};
  }

  if (parts.size() == 1 && parts[0] == "sessions") {
    if (method == "GET") return json_reply(200, json{{"v", kProtocolVersion}, {"sessions", sessions.ids()}});
    if (method != "POST") return error_reply(405, "use GET or POST");
    json request = json::object();
    if (!body.empty()) {
      try {
        request = json::parse(body);
      } catch (const json::parse_error&) {
        return error_reply(400, "request body is not valid JSON");
      }
    }
    try {
      auto runner = sessions.create(SessionOptions::from_json(request));
      json reply = runner->hello();
      reply["ws"] = "/session/" + runner->id();
      return json_reply(201, reply);
    } catch (const SessionError& e) {
      return error_reply(400, e.what());
    }
  }

  if (parts.size() == 2 && parts[0] == "sessions") {
    auto runner = sessions.find(parts[1]);
    if (!runner) return error_reply(404, "no such session " + parts[1]);
    if (method == "GET") return json_reply(200, runner->snapshot());
    if (method == "DELETE") {
      sessions.remove(parts[1]);
      return HttpReply{204, "application/json", ""};
    }
    return error_reply(405, "use GET or DELETE");
  }

  return error_reply(404, "no route for " + target);
}

struct TeleopServer::Impl {
  explicit Impl(ServerOptions o) : options(std::move(o)), sessions(options.heartbeat_seconds), acceptor(io) {}

  void accept() {
    acceptor.async_accept(net::make_strand(io), [this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;  // acceptor closed
      std::make_shared<HttpConnection>(std::move(socket), sessions, options)->start();
      accept();
    });
  }

  ServerOptions options;
  SessionRegistry sessions;
  net::io_context io;
  tcp::acceptor acceptor;
  std::vector<std::thread> threads;
  std::atomic<bool> running{false};
  unsigned short bound_port = 0;
};

TeleopServer::TeleopServer(ServerOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {}

TeleopServer::~TeleopServer() { stop(); }

void TeleopServer::start() {
  if (impl_->running) return;
  beast::error_code ec;
  const auto address = net::ip::make_address(impl_->options.address, ec);
  if (ec) throw std::runtime_error("bad listen address " + impl_->options.address);
  const tcp::endpoint endpoint(address, impl_->options.port);
  tcp::acceptor& acceptor = impl_->acceptor;
  acceptor.open(endpoint.protocol(), ec);
  if (!ec) acceptor.set_option(net::socket_base::reuse_address(true), ec);
  if (!ec) acceptor.bind(endpoint, ec);
  if (!ec) acceptor.listen(net::socket_base::max_listen_connections, ec);
  if (ec) {
    throw std::runtime_error("cannot listen on " + impl_->options.address + ":" +
                             std::to_string(impl_->options.port) + ": " + ec.message());
  }
  impl_->bound_port = acceptor.local_endpoint().port();
  impl_->running = true;
  impl_->accept();
  const std::size_t n = std::max<std::size_t>(1, impl_->options.threads);
  for (std::size_t i = 0; i < n; ++i) impl_->threads.emplace_back([this] { impl_->io.run(); });
}

unsigned short TeleopServer::port() const { return impl_->bound_port; }

void TeleopServer::stop() {
  if (!impl_->running.exchange(false)) return;
  net::post(impl_->io, [this] {
    beast::error_code ignored;
    impl_->acceptor.close(ignored);
  });
  impl_->sessions.close_all();
  impl_->io.stop();
  for (std::thread& t : impl_->threads) t.join();
  impl_->threads.clear();
}

void TeleopServer::wait_for_signal() {
  net::io_context signals_io;
  net::signal_set signals(signals_io, SIGINT, SIGTERM);
  signals.async_wait([&](beast::error_code, int) { signals_io.stop(); });
  signals_io.run();
  stop();
}

SessionRegistry& TeleopServer::sessions() { return impl_->sessions; }

}  // namespace ppmc::teleop
