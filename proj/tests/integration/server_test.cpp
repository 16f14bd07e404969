#include <doctest.h>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <nlohmann/json.hpp>
#include <thread>

#include "hipt/env/layout.hpp"
#include "hipt/env/trajectory_log.hpp"
#include "hipt/service/server.hpp"
#include "hipt/service/session.hpp"

using namespace hipt;
using namespace hipt::service;
namespace fs = std::filesystem;
namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

class RunningServer {
 public:
  explicit RunningServer(ServerConfig cfg)
      : server_(std::move(cfg), {load_agent("alpha=scripted"), load_agent("beta=random")}),
        thread_([this] { server_.run(); }) {}
  ~RunningServer() {
    server_.stop();
    thread_.join();
  }
  unsigned short port() const { return server_.port(); }

 private:
  SessionServer server_;
  std::thread thread_;
};

class Client {
 public:
  explicit Client(unsigned short port) : ws_(ioc_) {
    tcp::resolver resolver(ioc_);
    net::connect(ws_.next_layer(), resolver.resolve("127.0.0.1", std::to_string(port)));
    ws_.handshake("127.0.0.1", "/");
  }
  void send(const json& j) { ws_.write(net::buffer(j.dump())); }
  json receive() {
    beast::flat_buffer buf;
    ws_.read(buf);
    return json::parse(beast::buffers_to_string(buf.data()));
  }
  // Reads until a message of `type` arrives, collecting everything seen.
  json receive_until(const std::string& type, std::vector<json>* seen = nullptr) {
    for (;;) {
      auto m = receive();
      if (seen) seen->push_back(m);
      if (m["type"] == type) return m;
    }
  }
  void close() { ws_.close(websocket::close_code::normal); }

 private:
  net::io_context ioc_;
  websocket::stream<tcp::socket> ws_;
};

ServerConfig test_config(const std::string& name, int tick_ms, int horizon) {
  ServerConfig c;
  c.address = "127.0.0.1";
  c.port = 0;
  c.data_dir = fs::temp_directory_path() / ("hipt_server_test_" + name);
  fs::remove_all(c.data_dir);
  c.tick_ms = tick_ms;
  c.horizon = horizon;
  c.rounds = 1;
  return c;
}

}  // namespace

TEST_CASE("a full round over the wire") {
  auto cfg = test_config("round", 2, 15);
  const auto data = cfg.data_dir;
  RunningServer server(cfg);
  Client client(server.port());
  client.send({{"type", "join"}, {"session", "alice"}});
  const auto hello = client.receive();
  CHECK(hello["type"] == "hello");
  CHECK(hello["tick_ms"] == 2);
  CHECK(hello["seat"] == 0);
  CHECK(hello["layout"]["name"] == "cramped_room");
  client.send({{"type", "input"}, {"action", "interact"}});
  client.send({{"type", "input"}, {"action", 9}});
  CHECK(client.receive_until("error")["message"].get<std::string>().find("action") != std::string::npos);

  std::vector<json> seen;
  const auto round_end = client.receive_until("round_end", &seen);
  CHECK(round_end["scores"].size() == 2);
  int states = 0;
  for (const auto& m : seen)
    if (m["type"] == "state") ++states;
  CHECK(states >= 2 * 15);
  CHECK(client.receive()["type"] == "prompt_preference");
  client.send({{"type", "preference"}, {"choice", -1}});
  CHECK(client.receive_until("done")["session"] == "alice");

  const auto prefs = read_preferences(data / "alice" / "preferences.jsonl");
  REQUIRE(prefs.size() == 1);
  CHECK(prefs[0].choice == -1);
  CHECK(prefs[0].agents.size() == 2);
  const auto logs = env::read_jsonl_file((data / "alice" / "transcript.jsonl").string());
  REQUIRE(logs.size() == 2);
  for (const auto& log : logs) CHECK(env::replay(log, env::bundled_layout("cramped_room"), 15).ok);

  // Every broadcast digest belongs to the replayable transcript.
  std::set<std::string> digests;
  for (const auto& log : logs)
    for (const auto& s : log.steps) digests.insert(s.state_digest);
  for (const auto& m : seen)
    if (m["type"] == "state" && m["tick"] != 0) CHECK(digests.contains(m["state"]["digest"].get<std::string>()));

  Client again(server.port());
  again.send({{"type", "join"}, {"session", "alice"}});
  CHECK(again.receive()["type"] == "error");
}

TEST_CASE("tick cadence follows the configured period") {
  auto cfg = test_config("cadence", 20, 26);
  RunningServer server(cfg);
  Client client(server.port());
  client.send({{"type", "join"}, {"session", "timing"}});
  client.receive_until("hello");
  json m;
  do m = client.receive();
  while (!(m["type"] == "state" && m["tick"] == 1));
  const auto start = Clock::now();
  do m = client.receive();
  while (!(m["type"] == "state" && m["tick"] == 25));
  const double ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
  // 24 periods of 20 ms
  CHECK(ms >= 0.95 * 480.0);
  CHECK(ms <= 1.5 * 480.0);
}

TEST_CASE("a dropped connection parks the session until it rejoins") {
  auto cfg = test_config("park", 10, 400);
  RunningServer server(cfg);
  int tick_before = 0;
  {
    Client client(server.port());
    client.send({{"type", "join"}, {"session", "bob"}, {"seat", 1}});
    client.receive_until("hello");
    json m;
    do m = client.receive();
    while (!(m["type"] == "state" && m["tick"] == 5));
    tick_before = 5;
    client.close();
  }
  std::this_thread::sleep_for(std::chrono::milliseconds(200));
  Client client(server.port());
  client.send({{"type", "join"}, {"session", "bob"}});
  const auto hello = client.receive();
  CHECK(hello["seat"] == 1);
  const auto state = client.receive();
  CHECK(state["type"] == "state");
  // At most one tick can land between the last message read and the disconnect.
  CHECK(state["tick"].get<int>() >= tick_before);
  CHECK(state["tick"].get<int>() <= tick_before + 2);
}

TEST_CASE("join is required and session ids are checked") {
  auto cfg = test_config("join", 10, 20);
  RunningServer server(cfg);
  Client client(server.port());
  client.send({{"type", "input"}, {"action", "N"}});
  CHECK(client.receive()["type"] == "error");
  client.send({{"type", "join"}, {"session", "../etc"}});
  CHECK(client.receive()["type"] == "error");
}

TEST_CASE("static files are served over HTTP") {
  auto cfg = test_config("static", 10, 20);
  cfg.static_dir = cfg.data_dir.string() + "_www";
  fs::create_directories(cfg.static_dir);
  std::ofstream(cfg.static_dir / "index.html") << "<html>kitchen</html>";
  RunningServer server(cfg);

  auto get = [&](const std::string& target) {
    net::io_context ioc;
    beast::tcp_stream stream(ioc);
    tcp::resolver resolver(ioc);
    stream.connect(resolver.resolve("127.0.0.1", std::to_string(server.port())));
    http::request<http::empty_body> req{http::verb::get, target, 11};
    req.set(http::field::host, "127.0.0.1");
    http::write(stream, req);
    beast::flat_buffer buf;
    http::response<http::string_body> res;
    http::read(stream, buf, res);
    return res;
  };
  const auto ok = get("/");
  CHECK(ok.result() == http::status::ok);
  CHECK(ok.body() == "<html>kitchen</html>");
  CHECK(ok[http::field::content_type] == "text/html");
  CHECK(get("/missing.js").result() == http::status::not_found);
  CHECK(get("/../secret").result() == http::status::not_found);
}

TEST_CASE("environment overrides port and data dir") {
  ServerConfig c;
  ::setenv("HIPT_PORT", "9123", 1);
  ::setenv("HIPT_DATA_DIR", "/tmp/hipt-env-data", 1);
  c.apply_environment();
  ::unsetenv("HIPT_PORT");
  ::unsetenv("HIPT_DATA_DIR");
  CHECK(c.port == 9123);
  CHECK(c.data_dir == fs::path("/tmp/hipt-env-data"));
}
