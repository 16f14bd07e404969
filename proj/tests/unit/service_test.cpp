#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "hipt/env/layout.hpp"
#include "hipt/nn/model_file.hpp"
#include "hipt/service/config.hpp"
#include "hipt/service/protocol.hpp"
#include "hipt/service/run_dir.hpp"
#include "hipt/service/session.hpp"
#include "hipt/util/error.hpp"

using namespace hipt;
using namespace hipt::service;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("hipt_service_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<std::uint8_t> read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

class ThrowingPolicy final : public env::Policy {
 public:
  env::ActionDistribution act(const env::WorldState&, const env::Layout&, int) override {
    throw std::runtime_error("boom");
  }
};

SessionConfig small_session(const std::string& id, const fs::path& dir, int horizon = 12, int rounds = 1) {
  SessionConfig c;
  c.session_id = id;
  c.layout = env::bundled_layout("cramped_room");
  c.horizon = horizon;
  c.rounds = rounds;
  c.output_dir = dir / id;
  c.seed = 5;
  return c;
}

std::vector<AgentHandle> two_agents() { return {load_agent("alpha=scripted"), load_agent("beta=random")}; }

std::string type_of(const nlohmann::json& m) { return m.at("type").get<std::string>(); }

}  // namespace

TEST_CASE("config defaults follow the layout") {
  CHECK(default_run_config("train-hipt", "counter_circuit")["hipt"]["num_priors"] == 6);
  CHECK(default_run_config("train-hipt", "forced_coordination")["hipt"]["num_priors"] == 5);
  CHECK(default_run_config("train-hipt", "cramped_room")["hipt"]["num_priors"] == 4);
  const auto ring = default_run_config("train-population", "coordination_ring");
  CHECK(ring["training"]["learning_rate"] == doctest::Approx(6e-4));
  CHECK(ring["training"]["lr_decay"] == doctest::Approx(1.5));
  CHECK(ring["ppo"]["clip"] == doctest::Approx(0.05));
  CHECK(ring["ppo"]["entropy_coef"] == doctest::Approx(0.01));
  CHECK(ring["ppo"]["value_coef"] == doctest::Approx(0.5));
  CHECK_THROWS_AS(default_run_config("bogus", "cramped_room"), ContractViolation);
}

TEST_CASE("layout flag drives the per-layout defaults") {
  const auto c = resolve_config("train-hipt", "", {"layout=\"counter_circuit\""});
  CHECK(c["hipt"]["num_priors"] == 6);
  const auto h = hipt_config(c);
  CHECK(h.num_priors == 6);
  CHECK(h.influence.horizon_steps == h.total_env_steps);
  CHECK(h.learning_rate == doctest::Approx(8e-4));
}

TEST_CASE("flags override the config file which overrides defaults") {
  const auto dir = fresh_dir("merge");
  const auto file = dir / "c.json";
  std::ofstream(file) << R"({"layout": "forced_coordination", "seed": 3, "population": {"size": 6, "jsd_coef": 0.2}})";
  const auto c = resolve_config("train-population", file.string(), {"population.size=2", "training.horizon=100"});
  CHECK(c["layout"] == "forced_coordination");
  CHECK(c["seed"] == 3);
  CHECK(c["population"]["size"] == 2);
  CHECK(c["population"]["jsd_coef"] == doctest::Approx(0.2));
  CHECK(c["population"]["checkpoint_every"] == 8);
  CHECK(c["training"]["horizon"] == 100);
  CHECK(c["training"]["learning_rate"] == doctest::Approx(8e-4));
  const auto p = population_config(c);
  CHECK(p.size == 2);
  CHECK(p.seed == 3);
}

TEST_CASE("missing config file names the path") {
  try {
    resolve_config("eval", "/nonexistent/hipt.json", {});
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("/nonexistent/hipt.json") != std::string::npos);
  }
}

TEST_CASE("overrides parse JSON values and fall back to strings") {
  RunConfig c = nlohmann::json::object();
  apply_override(c, "a.b=3");
  apply_override(c, "a.c=[1,2]");
  apply_override(c, "name=plain text");
  CHECK(c["a"]["b"] == 3);
  CHECK(c["a"]["c"].size() == 2);
  CHECK(c["name"] == "plain text");
  CHECK_THROWS_AS(apply_override(c, "novalue"), ContractViolation);
  auto bad = default_run_config("train-population", "cramped_room");
  bad["population"]["size"] = "four";
  CHECK_THROWS_AS(population_config(bad), ContractViolation);
}

TEST_CASE("run directory manifest covers every file") {
  const auto root = fresh_dir("rundir");
  const auto dir = create_run_dir(root, "train-population");
  const auto second = create_run_dir(root, "train-population");
  CHECK(dir != second);
  CHECK(dir.filename().string().rfind("train-population-", 0) == 0);

  const auto config = default_run_config("train-population", "cramped_room");
  save_run_config(dir, config);
  CHECK(load_run_config(dir) == config);

  nn::NetworkSpec spec;
  spec.input_dim = 5;
  spec.trunk_widths = {8};
  spec.recurrent_hidden = 0;
  const auto params = nn::Network(spec).init_params(3);
  fs::create_directories(dir / "models");
  nn::save_model((dir / "models" / "a.model").string(), params);
  write_manifest(dir);
  CHECK_NOTHROW(verify_run_dir(dir));

  std::set<std::string> listed;
  for (const auto& e : read_manifest(dir)) listed.insert(e.path);
  std::set<std::string> present;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().filename() != kManifestFile)
      present.insert(fs::relative(e.path(), dir).generic_string());
  CHECK(listed == present);

  SUBCASE("save load save is byte identical") {
    const auto bytes = read_bytes(dir / "models" / "a.model");
    nn::save_model((dir / "models" / "a.model").string(), nn::load_model((dir / "models" / "a.model").string()));
    CHECK(read_bytes(dir / "models" / "a.model") == bytes);
    CHECK_NOTHROW(verify_run_dir(dir));
  }
  SUBCASE("truncated file") {
    const auto bytes = read_bytes(dir / "models" / "a.model");
    std::ofstream(dir / "models" / "a.model", std::ios::binary)
        .write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size() / 2));
    CHECK_THROWS_AS(verify_run_dir(dir), ChecksumError);
  }
  SUBCASE("unlisted file") {
    std::ofstream(dir / "extra.txt") << "x";
    CHECK_THROWS_AS(verify_run_dir(dir), ChecksumError);
  }
  SUBCASE("missing file") {
    fs::remove(dir / kConfigFile);
    CHECK_THROWS_AS(verify_run_dir(dir), ChecksumError);
  }
}

TEST_CASE("client messages") {
  const auto j = parse_client_message(R"({"type":"join","session":"abc","seat":1})");
  REQUIRE(std::holds_alternative<JoinMessage>(j));
  CHECK(std::get<JoinMessage>(j).seat == 1);
  CHECK(std::get<InputMessage>(parse_client_message(R"({"type":"input","action":"E"})")).action == env::Action::East);
  CHECK(std::get<InputMessage>(parse_client_message(R"({"type":"input","action":5})")).action == env::Action::Interact);
  CHECK(std::get<PreferenceMessage>(parse_client_message(R"({"type":"preference","choice":-1})")).choice == -1);
  for (const char* bad : {"not json", R"({"type":"input","action":"jump"})", R"({"type":"preference","choice":0})",
                          R"({"type":"join"})", R"({"type":"dance"})", R"({"type":"input","action":9})"})
    CHECK_THROWS_AS(parse_client_message(bad), ContractViolation);
}

TEST_CASE("state message carries the full world") {
  const auto layout = env::bundled_layout("cramped_room");
  const auto s = env::reset(layout);
  const auto j = state_to_json(s, layout);
  CHECK(j["players"].size() == 2);
  CHECK(j["pots"].size() == s.pots.size());
  CHECK(j["digest"] == env::state_digest(s));
  CHECK(layout_to_json(layout)["grid"].size() == static_cast<std::size_t>(layout.height));
}

TEST_CASE("session plays a two-episode round then asks for a preference") {
  const auto dir = fresh_dir("session");
  SessionEngine s(small_session("s1", dir), two_agents());
  CHECK(s.phase() == Phase::Lobby);
  CHECK(s.tick().empty());

  auto hello = s.join();
  REQUIRE(hello.size() == 2);
  CHECK(type_of(hello[0]) == "hello");
  CHECK(hello[0]["tick_ms"] == 150);
  CHECK(hello[0]["seat"] == 0);
  CHECK(type_of(hello[1]) == "state");
  CHECK(hello[1]["partner"] == "Partner A");

  s.input(env::Action::North);
  s.input(env::Action::East);  // last writer wins
  auto out = s.tick();
  REQUIRE(out.size() == 1);
  CHECK(out[0]["tick"] == 1);
  for (int t = 1; t < 12; ++t) out = s.tick();
  CHECK(s.phase() == Phase::BetweenEpisodes);
  out = s.tick();
  CHECK(out[0]["partner"] == "Partner B");
  CHECK(out[0]["tick"] == 0);
  for (int t = 0; t < 12; ++t) out = s.tick();
  REQUIRE(out.size() == 3);
  CHECK(type_of(out[1]) == "round_end");
  CHECK(out[1]["scores"].size() == 2);
  CHECK(type_of(out[2]) == "prompt_preference");
  CHECK(s.phase() == Phase::Preference);
  CHECK(s.tick().empty());
  s.input(env::Action::North);  // ignored outside play

  auto done = s.preference(1);
  REQUIRE(done.size() == 1);
  CHECK(type_of(done[0]) == "done");
  CHECK(s.phase() == Phase::Done);
  CHECK_THROWS_AS(s.preference(-1), ContractViolation);

  const auto prefs = read_preferences(s.preferences_path());
  REQUIRE(prefs.size() == 1);
  CHECK(prefs[0].choice == 1);
  CHECK(std::set<std::string>(prefs[0].agents.begin(), prefs[0].agents.end()) == std::set<std::string>{"alpha", "beta"});
  CHECK(prefs[0].scores.size() == 2);
  CHECK(!prefs[0].answered.empty());

  const auto logs = env::read_jsonl_file(s.transcript_path().string());
  REQUIRE(logs.size() == 2);
  for (const auto& log : logs) {
    CHECK(env::replay(log, env::bundled_layout("cramped_room"), 12).ok);
    REQUIRE(log.steps.size() == 12);
  }
  CHECK(logs[0].steps[0].joint[0] == env::Action::East);
  for (std::size_t t = 1; t < logs[0].steps.size(); ++t) CHECK(logs[0].steps[t].joint[0] == env::Action::Stay);
  for (const auto& step : logs[1].steps) CHECK(step.joint[0] == env::Action::Stay);
}

TEST_CASE("partner order is randomized across sessions") {
  const auto dir = fresh_dir("order");
  std::set<std::string> firsts;
  for (int i = 0; i < 16; ++i) {
    auto cfg = small_session("o" + std::to_string(i), dir, 2);
    cfg.seed = static_cast<std::uint64_t>(100 + i);
    SessionEngine s(cfg, two_agents());
    s.join();
    for (int t = 0; t < 5; ++t) s.tick();
    s.preference(-1);
    firsts.insert(s.preferences().at(0).agents.at(0));
  }
  CHECK(firsts.size() == 2);
}

TEST_CASE("multiple rounds and resume") {
  const auto dir = fresh_dir("rounds");
  auto cfg = small_session("r", dir, 3, 2);
  cfg.tutorial_episodes = 1;
  SessionEngine s(cfg, two_agents(), load_agent("tutor=scripted"));
  auto hello = s.join(1);
  CHECK(hello[0]["seat"] == 1);
  CHECK(hello[1]["partner"] == "Tutorial");
  for (int t = 0; t < 3; ++t) s.tick();
  auto resumed = s.join(0);  // seat is fixed once play has started
  CHECK(resumed[0]["seat"] == 1);
  CHECK(resumed[1]["phase"] == "between_episodes");
  for (int t = 0; t < 8; ++t) s.tick();
  CHECK(s.phase() == Phase::Preference);
  CHECK(s.join().back()["type"] == "prompt_preference");
  CHECK(s.preference(-1).empty());
  CHECK(s.round() == 1);
  for (int t = 0; t < 8; ++t) s.tick();
  CHECK(type_of(s.preference(1).at(0)) == "done");
  CHECK(read_preferences(s.preferences_path()).size() == 2);
  CHECK(env::read_jsonl_file(s.transcript_path().string()).size() == 5);
}

TEST_CASE("agent failure aborts the session") {
  const auto dir = fresh_dir("abort");
  std::vector<AgentHandle> agents{{"bad", "test", [] { return std::make_unique<ThrowingPolicy>(); }},
                                  {"bad2", "test", [] { return std::make_unique<ThrowingPolicy>(); }}};
  SessionEngine s(small_session("a", dir), agents);
  s.join();
  const auto out = s.tick();
  REQUIRE(out.size() == 2);
  CHECK(type_of(out[0]) == "error");
  CHECK(type_of(out[1]) == "done");
  CHECK(s.phase() == Phase::Done);
}

TEST_CASE("session preconditions") {
  const auto dir = fresh_dir("pre");
  CHECK_THROWS_AS(SessionEngine(small_session("x", dir), {load_agent("scripted")}), ContractViolation);
  auto cfg = small_session("y", dir);
  cfg.tick_ms = 0;
  CHECK_THROWS_AS(SessionEngine(cfg, two_agents()), ContractViolation);
  cfg = small_session("z", dir);
  cfg.tutorial_episodes = 1;
  CHECK_THROWS_AS(SessionEngine(cfg, two_agents()), ContractViolation);
  CHECK_THROWS_AS(load_agent("/nonexistent/agent.model"), IoError);
}
