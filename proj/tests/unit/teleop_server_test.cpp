#include <gtest/gtest.h>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <chrono>

#include "ppmc/teleop/server.hpp"

namespace ppmc::teleop {
namespace {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;
using nlohmann::json;

TEST(HandleHttp, HealthAndMaps) {
  SessionRegistry registry;
  const ServerOptions options;
  const HttpReply health = handle_http(registry, "GET", "/health", "", options);
  EXPECT_EQ(health.status, 200u);
  EXPECT_EQ(json::parse(health.body)["status"], "ok");
  EXPECT_EQ(handle_http(registry, "POST", "/health", "", options).status, 405u);

  const HttpReply map = handle_http(registry, "GET", "/maps/2?spacing=5", "", options);
  EXPECT_EQ(map.status, 200u);
  EXPECT_EQ(map.content_type, "text/csv");
  EXPECT_EQ(map.body.substr(0, 6), "x,y,h\n");
  EXPECT_EQ(std::count(map.body.begin(), map.body.end(), '\n'), 1 + 7 * 7);
  EXPECT_EQ(handle_http(registry, "GET", "/maps/4", "", options).status, 404u);
  EXPECT_EQ(handle_http(registry, "GET", "/maps/x1", "", options).status, 404u);
  EXPECT_EQ(handle_http(registry, "GET", "/maps/1?spacing=0.01", "", options).status, 400u);
  EXPECT_EQ(handle_http(registry, "GET", "/maps/1?spacing=abc", "", options).status, 400u);
  EXPECT_EQ(handle_http(registry, "GET", "/nowhere", "", options).status, 404u);
}

TEST(HandleHttp, SessionLifecycle) {
  SessionRegistry registry;
  const ServerOptions options;
  const HttpReply created = handle_http(registry, "POST", "/sessions", R"({"map": 3, "seed": 4})", options);
  ASSERT_EQ(created.status, 201u) << created.body;
  const json hello = json::parse(created.body);
  EXPECT_EQ(hello["type"], "hello");
  EXPECT_EQ(hello["map"], 3);
  EXPECT_EQ(hello["ws"], "/session/" + hello["session"].get<std::string>());
  const std::string id = hello["session"];

  const json list = json::parse(handle_http(registry, "GET", "/sessions", "", options).body);
  EXPECT_EQ(list["sessions"], json::array({id}));
  const HttpReply snap = handle_http(registry, "GET", "/sessions/" + id, "", options);
  EXPECT_EQ(snap.status, 200u);
  EXPECT_EQ(json::parse(snap.body)["type"], "state");
  EXPECT_EQ(handle_http(registry, "PUT", "/sessions/" + id, "", options).status, 405u);
  EXPECT_EQ(handle_http(registry, "DELETE", "/sessions/" + id, "", options).status, 204u);
  EXPECT_EQ(handle_http(registry, "GET", "/sessions/" + id, "", options).status, 404u);

  EXPECT_EQ(handle_http(registry, "POST", "/sessions", "{bad", options).status, 400u);
  EXPECT_EQ(handle_http(registry, "POST", "/sessions", R"({"map": 9})", options).status, 400u);
  const HttpReply bad_policy =
      handle_http(registry, "POST", "/sessions", R"({"controller": "/no/policy.bin"})", options);
  EXPECT_EQ(bad_policy.status, 400u);
  EXPECT_NE(bad_policy.body.find("policy file not found"), std::string::npos);
  EXPECT_EQ(handle_http(registry, "POST", "/sessions", "", options).status, 201u);
}

class ServerFixture : public ::testing::Test {
 protected:
  void SetUp() override {
    ServerOptions options;
    options.port = 0;
    options.heartbeat_seconds = 0.2;
    server_ = std::make_unique<TeleopServer>(options);
    server_->start();
    ASSERT_NE(server_->port(), 0);
  }
  void TearDown() override { server_->stop(); }

  tcp::socket connect() {
    tcp::socket socket(io_);
    socket.connect(tcp::endpoint(net::ip::make_address("127.0.0.1"), server_->port()));
    return socket;
  }

  http::response<http::string_body> request(http::verb verb, const std::string& target, const std::string& body = "") {
    beast::tcp_stream stream(connect());
    http::request<http::string_body> req(verb, target, 11);
    req.set(http::field::host, "127.0.0.1");
    req.body() = body;
    req.prepare_payload();
    http::write(stream, req);
    beast::flat_buffer buffer;
    http::response<http::string_body> res;
    http::read(stream, buffer, res);
    return res;
  }

  net::io_context io_;
  std::unique_ptr<TeleopServer> server_;
};

json read_json(websocket::stream<tcp::socket>& ws) {
  beast::flat_buffer buffer;
  ws.read(buffer);
  return json::parse(beast::buffers_to_string(buffer.data()));
}

TEST_F(ServerFixture, HttpOverSocket) {
  const auto health = request(http::verb::get, "/health");
  EXPECT_EQ(health.result_int(), 200);
  const auto map = request(http::verb::get, "/maps/1?spacing=2.5");
  EXPECT_EQ(map.result_int(), 200);
  EXPECT_EQ(map[http::field::content_type], "text/csv");
  const auto created = request(http::verb::post, "/sessions", R"({"map": 1})");
  EXPECT_EQ(created.result_int(), 201);
  const std::string id = json::parse(created.body())["session"];
  // The WebSocket endpoint refuses plain HTTP.
  EXPECT_EQ(request(http::verb::get, "/session/" + id).result_int(), 426);
}

TEST_F(ServerFixture, UnknownWebSocketSessionIsRejected) {
  {
    websocket::stream<tcp::socket> ws(connect());
    beast::error_code ec;
    ws.handshake("127.0.0.1", "/session/s404", ec);
    EXPECT_EQ(ec, websocket::error::upgrade_declined);
  }
  // Same upgrade by hand, to see the status line.
  beast::tcp_stream stream(connect());
  http::request<http::empty_body> req(http::verb::get, "/session/s404", 11);
  req.set(http::field::host, "127.0.0.1");
  req.set(http::field::connection, "Upgrade");
  req.set(http::field::upgrade, "websocket");
  req.set(http::field::sec_websocket_version, "13");
  req.set(http::field::sec_websocket_key, "dGhlIHNhbXBsZSBub25jZQ==");
  http::write(stream, req);
  beast::flat_buffer buffer;
  http::response<http::string_body> res;
  http::read(stream, buffer, res);
  EXPECT_EQ(res.result_int(), 404);
  EXPECT_EQ(json::parse(res.body())["error"], "no such session s404");
}

TEST_F(ServerFixture, WebSocketDrivesASessionToCompletion) {
  const auto created = request(http::verb::post, "/sessions", R"({"map": 1, "controller": "oracle"})");
  ASSERT_EQ(created.result_int(), 201);
  const std::string ws_path = json::parse(created.body())["ws"];

  websocket::stream<tcp::socket> ws(connect());
  ws.handshake("127.0.0.1", ws_path);
  EXPECT_EQ(read_json(ws)["type"], "hello");
  const json snapshot = read_json(ws);
  EXPECT_EQ(snapshot["type"], "state");
  EXPECT_EQ(snapshot["clients"], 1);

  // A second client watches the same session.
  websocket::stream<tcp::socket> watcher(connect());
  watcher.handshake("127.0.0.1", ws_path);
  read_json(watcher);
  read_json(watcher);

  ws.write(net::buffer(std::string(R"({"v": 1, "type": "bogus"})")));
  const json err = read_json(ws);
  EXPECT_EQ(err["type"], "error");

  ws.write(net::buffer(std::string(R"({"v": 1, "type": "set_speed", "multiplier": 0})")));
  ws.write(net::buffer(std::string(R"({"v": 1, "type": "set_waypoints", "points": [[0, 8], [3, 10]]})")));
  ws.write(net::buffer(std::string(R"({"v": 1, "type": "start"})")));

  std::vector<json> events;
  std::size_t states = 0;
  double last_t = -1.0;
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(60);
  while (std::chrono::steady_clock::now() < deadline) {
    const json m = read_json(ws);
    if (m["type"] == "state") {
      ++states;
      EXPECT_GE(m["t"].get<double>(), last_t);
      last_t = m["t"].get<double>();
      continue;
    }
    if (m["type"] == "event" && m["kind"] == "heartbeat") continue;
    events.push_back(m);
    if (m["kind"] == "complete") break;
  }
  ASSERT_FALSE(events.empty());
  EXPECT_EQ(events.back()["kind"], "complete");
  std::vector<json> captures;
  std::size_t acks = 0;
  for (const json& e : events) {
    if (e["kind"] == "capture") captures.push_back(e);
    if (e["kind"] == "ack") ++acks;
  }
  EXPECT_EQ(acks, 3u);
  ASSERT_EQ(captures.size(), 2u);
  EXPECT_EQ(captures[0]["waypoint"], json::parse("[0.0, 8.0]"));
  EXPECT_EQ(captures[1]["final"], true);
  EXPECT_GT(states, 100u);

  // The watcher got the same broadcast stream but not the error reply.
  bool watcher_complete = false;
  while (!watcher_complete) {
    const json m = read_json(watcher);
    ASSERT_NE(m["type"], "error");
    watcher_complete = m["type"] == "event" && m["kind"] == "complete";
  }
  ws.close(websocket::close_code::normal);
  watcher.close(websocket::close_code::normal);
}

}  // namespace
}  // namespace ppmc::teleop
