#include "hipt/service/server.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <cstdlib>
#include <deque>
#include <map>
#include <set>
#include <spdlog/spdlog.h>

#include "hipt/env/layout.hpp"
#include "hipt/service/protocol.hpp"
#include "hipt/service/session.hpp"
#include "hipt/util/digest.hpp"
#include "hipt/util/error.hpp"

namespace hipt::service {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;
using nlohmann::json;

void ServerConfig::apply_environment() {
  if (const char* p = std::getenv("HIPT_PORT"); p && *p) {
    const long v = std::strtol(p, nullptr, 10);
    if (v < 0 || v > 65535) throw ContractViolation(std::string("HIPT_PORT out of range: ") + p);
    port = static_cast<unsigned short>(v);
  }
  if (const char* d = std::getenv("HIPT_DATA_DIR"); d && *d) data_dir = d;
}

void ServerConfig::validate() const {
  if (tick_ms <= 0) throw ContractViolation("tick_ms must be positive");
  if (horizon <= 0 || rounds <= 0 || tutorial_episodes < 0) throw ContractViolation("invalid session shape");
  if (park_timeout.count() < 0) throw ContractViolation("park timeout must be >= 0");
  if (data_dir.empty()) throw ContractViolation("data_dir is empty");
}

namespace {

bool valid_session_id(const std::string& id) {
  if (id.empty() || id.size() > 64) return false;
  for (char c : id)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') return false;
  return true;
}

const char* mime_type(const std::filesystem::path& p) {
  const auto ext = p.extension().string();
  if (ext == ".html") return "text/html";
  if (ext == ".js" || ext == ".mjs") return "application/javascript";
  if (ext == ".css") return "text/css";
  if (ext == ".json") return "application/json";
  if (ext == ".png") return "image/png";
  if (ext == ".svg") return "image/svg+xml";
  return "application/octet-stream";
}

}  // namespace

class WsConnection;

class LiveSession : public std::enable_shared_from_this<LiveSession> {
 public:
  LiveSession(net::io_context& ioc, SessionServer::Impl& server, std::unique_ptr<SessionEngine> engine)
      : server_(server), engine_(std::move(engine)), tick_timer_(ioc), park_timer_(ioc) {}

  void attach(const std::shared_ptr<WsConnection>& conn, std::optional<int> seat);
  void detach(const WsConnection* conn);
  void on_input(env::Action a) { engine_->input(a); }
  void on_preference(int choice);
  const std::string& id() const { return engine_->config().session_id; }
  void shutdown() {
    tick_timer_.cancel();
    park_timer_.cancel();
  }

 private:
  void send(const Outbox& out);
  void schedule_ticks();
  void on_tick(beast::error_code ec);
  void finish();

  SessionServer::Impl& server_;
  std::unique_ptr<SessionEngine> engine_;
  net::steady_timer tick_timer_;
  net::steady_timer park_timer_;
  std::weak_ptr<WsConnection> conn_;
  bool ticking_ = false;
  net::steady_timer::time_point next_deadline_;
};

struct SessionServer::Impl {
  ServerConfig config;
  std::vector<AgentHandle> agents;
  std::optional<AgentHandle> tutorial;
  env::Layout layout;
  net::io_context ioc{1};
  tcp::acceptor acceptor{ioc};
  std::map<std::string, std::shared_ptr<LiveSession>> sessions;
  std::set<std::string> finished;

  void accept();
  std::shared_ptr<LiveSession> find_or_create(const std::string& id);
  void forget(const std::string& id, bool completed) {
    if (completed) finished.insert(id);
    sessions.erase(id);
  }
};

class WsConnection : public std::enable_shared_from_this<WsConnection> {
 public:
  WsConnection(tcp::socket socket, SessionServer::Impl& server) : ws_(std::move(socket)), server_(server) {}

  void accept(http::request<http::string_body> req) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) {
      if (!ec) self->read();
    });
  }

  void send(std::string text) {
    queue_.push_back(std::move(text));
    if (queue_.size() == 1) write_next();
  }

  void send_json(const json& j) { send(j.dump()); }

  void close_after_flush() {
    closing_ = true;
    if (queue_.empty()) do_close();
  }

 private:
  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
  }

  void on_read(beast::error_code ec) {
    if (ec) {
      if (auto s = session_.lock()) s->detach(this);
      return;
    }
    const std::string text = beast::buffers_to_string(buffer_.data());
    buffer_.consume(buffer_.size());
    try {
      const auto msg = parse_client_message(text);
      if (const auto* join = std::get_if<JoinMessage>(&msg)) {
        auto s = server_.find_or_create(join->session);
        if (auto old = session_.lock(); old && old != s) old->detach(this);
        session_ = s;
        s->attach(shared_from_this(), join->seat);
      } else if (auto s = session_.lock()) {
        if (const auto* in = std::get_if<InputMessage>(&msg)) s->on_input(in->action);
        else if (const auto* p = std::get_if<PreferenceMessage>(&msg)) s->on_preference(p->choice);
      } else {
        throw ContractViolation("join a session first");
      }
    } catch (const std::exception& e) {
      send_json({{"type", "error"}, {"message", e.what()}});
    }
    if (!closing_) read();
  }

  void write_next() {
    ws_.text(true);
    ws_.async_write(net::buffer(queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->queue_.clear();
        return;
      }
      self->queue_.pop_front();
      if (!self->queue_.empty()) self->write_next();
      else if (self->closing_) self->do_close();
    });
  }

  void do_close() {
    ws_.async_close(websocket::close_code::normal, [self = shared_from_this()](beast::error_code) {});
  }

  websocket::stream<beast::tcp_stream> ws_;
  SessionServer::Impl& server_;
  beast::flat_buffer buffer_;
  std::deque<std::string> queue_;
  std::weak_ptr<LiveSession> session_;
  bool closing_ = false;
};

void LiveSession::send(const Outbox& out) {
  auto conn = conn_.lock();
  if (!conn) return;
  for (const auto& m : out) conn->send_json(m);
}

void LiveSession::attach(const std::shared_ptr<WsConnection>& conn, std::optional<int> seat) {
  if (auto old = conn_.lock(); old && old != conn) old->close_after_flush();
  conn_ = conn;
  park_timer_.cancel();
  send(engine_->join(seat));
  if (engine_->phase() == Phase::Done) return finish();
  schedule_ticks();
}

void LiveSession::detach(const WsConnection* conn) {
  auto current = conn_.lock();
  if (current && current.get() != conn) return;
  conn_.reset();
  tick_timer_.cancel();
  ticking_ = false;
  if (engine_->phase() == Phase::Done) return;
  spdlog::info("session {} parked", id());
  park_timer_.expires_after(server_.config.park_timeout);
  park_timer_.async_wait([self = shared_from_this()](beast::error_code ec) {
    if (ec) return;
    spdlog::warn("session {} abandoned after park timeout", self->id());
    self->server_.forget(self->id(), false);
  });
}

void LiveSession::on_preference(int choice) {
  send(engine_->preference(choice));
  if (engine_->phase() == Phase::Done) return finish();
  schedule_ticks();
}

void LiveSession::schedule_ticks() {
  if (ticking_ || !engine_->ticking() || conn_.expired()) return;
  ticking_ = true;
  next_deadline_ = net::steady_timer::clock_type::now() + std::chrono::milliseconds(engine_->config().tick_ms);
  tick_timer_.expires_at(next_deadline_);
  tick_timer_.async_wait([self = shared_from_this()](beast::error_code ec) { self->on_tick(ec); });
}

void LiveSession::on_tick(beast::error_code ec) {
  if (ec) return;
  ticking_ = false;
  if (conn_.expired()) return;
  send(engine_->tick());
  if (engine_->phase() == Phase::Done) return finish();
  if (!engine_->ticking()) return;
  ticking_ = true;
  // Fixed cadence: the next deadline follows the previous one, not the handler's finish time.
  const auto period = std::chrono::milliseconds(engine_->config().tick_ms);
  next_deadline_ += period;
  const auto now = net::steady_timer::clock_type::now();
  if (next_deadline_ < now - period) next_deadline_ = now;
  tick_timer_.expires_at(next_deadline_);
  tick_timer_.async_wait([self = shared_from_this()](beast::error_code e) { self->on_tick(e); });
}

void LiveSession::finish() {
  spdlog::info("session {} done", id());
  if (auto conn = conn_.lock()) conn->close_after_flush();
  shutdown();
  server_.forget(id(), true);
}

std::shared_ptr<LiveSession> SessionServer::Impl::find_or_create(const std::string& id) {
  if (!valid_session_id(id)) throw ContractViolation("session id must be 1-64 characters of [A-Za-z0-9_-]");
  if (auto it = sessions.find(id); it != sessions.end()) return it->second;
  const auto dir = config.data_dir / id;
  if (finished.contains(id) || std::filesystem::exists(dir)) throw ContractViolation("session id already used: " + id);
  SessionConfig sc;
  sc.session_id = id;
  sc.layout = layout;
  sc.tick_ms = config.tick_ms;
  sc.horizon = config.horizon;
  sc.rounds = config.rounds;
  sc.tutorial_episodes = config.tutorial_episodes;
  sc.output_dir = dir;
  sc.seed = derive_seed(config.seed, fnv1a(id));
  auto engine = std::make_unique<SessionEngine>(std::move(sc), agents, tutorial);
  auto s = std::make_shared<LiveSession>(ioc, *this, std::move(engine));
  sessions.emplace(id, s);
  spdlog::info("session {} created in {}", id, dir.string());
  return s;
}

class HttpConnection : public std::enable_shared_from_this<HttpConnection> {
 public:
  HttpConnection(tcp::socket socket, SessionServer::Impl& server) : stream_(std::move(socket)), server_(server) {}

  void start() {
    req_ = {};
    stream_.expires_after(std::chrono::seconds(30));
    http::async_read(stream_, buffer_, req_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return;
      if (websocket::is_upgrade(self->req_)) {
        stream_expire_never(self->stream_);
        std::make_shared<WsConnection>(self->stream_.release_socket(), self->server_)->accept(std::move(self->req_));
        return;
      }
      self->respond();
    });
  }

 private:
  static void stream_expire_never(beast::tcp_stream& s) { s.expires_never(); }

  template <typename Response>
  void write(Response&& res) {
    auto sp = std::make_shared<std::decay_t<Response>>(std::forward<Response>(res));
    http::async_write(stream_, *sp, [self = shared_from_this(), sp](beast::error_code ec, std::size_t) {
      if (ec || !sp->keep_alive()) {
        beast::error_code ignored;
        self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
        return;
      }
      self->start();
    });
  }

  void error_response(http::status status, std::string_view body) {
    http::response<http::string_body> res{status, req_.version()};
    res.set(http::field::content_type, "text/plain");
    res.keep_alive(req_.keep_alive());
    res.body() = std::string(body);
    res.prepare_payload();
    write(std::move(res));
  }

  void respond() {
    if (req_.method() != http::verb::get && req_.method() != http::verb::head)
      return error_response(http::status::bad_request, "unsupported method\n");
    const std::string target(req_.target().substr(0, req_.target().find('?')));
    if (server_.config.static_dir.empty() || target.empty() || target[0] != '/' ||
        target.find("..") != std::string::npos)
      return error_response(http::status::not_found, "not found\n");
    auto path = server_.config.static_dir / target.substr(1);
    if (target.back() == '/') path /= "index.html";
    beast::error_code ec;
    http::file_body::value_type body;
    body.open(path.c_str(), beast::file_mode::scan, ec);
    if (ec) return error_response(http::status::not_found, "not found\n");
    const auto size = body.size();
    http::response<http::file_body> res{std::piecewise_construct, std::make_tuple(std::move(body)),
                                        std::make_tuple(http::status::ok, req_.version())};
    res.set(http::field::content_type, mime_type(path));
    res.content_length(size);
    res.keep_alive(req_.keep_alive());
    if (req_.method() == http::verb::head) {
      http::response<http::empty_body> head{http::status::ok, req_.version()};
      head.set(http::field::content_type, mime_type(path));
      head.content_length(size);
      head.keep_alive(req_.keep_alive());
      return write(std::move(head));
    }
    write(std::move(res));
  }

  beast::tcp_stream stream_;
  SessionServer::Impl& server_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> req_;
};

void SessionServer::Impl::accept() {
  acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
    if (ec) return;
    std::make_shared<HttpConnection>(std::move(socket), *this)->start();
    accept();
  });
}

SessionServer::SessionServer(ServerConfig config, std::vector<AgentHandle> agents, std::optional<AgentHandle> tutorial)
    : impl_(std::make_shared<Impl>()) {
  config.validate();
  if (agents.size() < 2) throw ContractViolation("the server needs at least two agents to compare");
  if (config.tutorial_episodes > 0 && !tutorial) throw ContractViolation("tutorial episodes need a tutorial agent");
  impl_->layout = env::load_layout(config.layout);
  std::filesystem::create_directories(config.data_dir);
  impl_->config = std::move(config);
  impl_->agents = std::move(agents);
  impl_->tutorial = std::move(tutorial);
  const tcp::endpoint endpoint{net::ip::make_address(impl_->config.address), impl_->config.port};
  impl_->acceptor.open(endpoint.protocol());
  impl_->acceptor.set_option(net::socket_base::reuse_address(true));
  impl_->acceptor.bind(endpoint);
  impl_->acceptor.listen(net::socket_base::max_listen_connections);
  impl_->accept();
}

SessionServer::~SessionServer() {
  for (auto& [id, s] : impl_->sessions) s->shutdown();
}

unsigned short SessionServer::port() const { return impl_->acceptor.local_endpoint().port(); }

void SessionServer::run() {
  spdlog::info("serving {} on {}:{} (tick {} ms)", impl_->layout.name, impl_->config.address, port(),
               impl_->config.tick_ms);
  impl_->ioc.run();
}

void SessionServer::stop() { impl_->ioc.stop(); }

}  // namespace hipt::service
