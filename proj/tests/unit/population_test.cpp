#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "hipt/env/layout.hpp"
#include "hipt/population/crossplay.hpp"
#include "hipt/population/diversity.hpp"
#include "hipt/population/network_policy.hpp"
#include "hipt/population/population.hpp"
#include "support/oracles.hpp"
#include "support/random_dists.hpp"

using namespace hipt;
using namespace hipt::population;

namespace {

nn::Matrix as_matrix(const std::vector<std::vector<double>>& columns) {
  nn::Matrix m(static_cast<Eigen::Index>(columns.front().size()), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t j = 0; j < columns.size(); ++j) {
    for (std::size_t i = 0; i < columns[j].size(); ++i) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = columns[j][i];
  }
  return m;
}

PopulationConfig tiny_population(int size, double jsd) {
  PopulationConfig c;
  c.size = size;
  c.trainer.network.trunk_widths = {16};
  c.trainer.network.recurrent_hidden = 0;
  c.trainer.episodes_per_update = 1;
  c.trainer.horizon = 60;
  c.trainer.total_env_steps = 180;
  c.trainer.ppo.minibatch_size = 64;
  c.trainer.ppo.epochs = 2;
  c.jsd_coef = jsd;
  c.checkpoint_every = 1;
  c.eval_episodes = 1;
  c.seed = 42;
  return c;
}

CrossplayMatrix matrix_of(const std::vector<std::vector<double>>& rows) {
  CrossplayMatrix m;
  const int n = static_cast<int>(rows.size());
  m.mean = nn::Matrix(n, n);
  m.stddev = nn::Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    m.names.push_back("a" + std::to_string(i));
    for (int j = 0; j < n; ++j) m.mean(i, j) = rows[i][j];
  }
  return m;
}

}  // namespace

TEST_CASE("jsd_term: bounds, identical members, disjoint pair") {
  Rng rng(21);
  double worst_oracle = 0.0;
  for (int draw = 0; draw < 10000; ++draw) {
    const int n = static_cast<int>(rng.uniform_int(2, 6));
    const int a = static_cast<int>(rng.uniform_int(2, 6));
    const int batch = static_cast<int>(rng.uniform_int(1, 3));
    std::vector<std::vector<std::vector<double>>> per_member(n);
    std::vector<nn::Matrix> members;
    for (int k = 0; k < n; ++k) {
      for (int b = 0; b < batch; ++b) per_member[k].push_back(testing::random_distribution(rng, a));
      members.push_back(as_matrix(per_member[k]));
    }
    const double v = jsd_term(members);
    REQUIRE(v >= 0.0);
    REQUIRE(v <= std::min(std::log(n), std::log(a)) + 1e-12);
    double oracle = 0.0;
    for (int b = 0; b < batch; ++b) {
      std::vector<std::vector<double>> at_state;
      for (int k = 0; k < n; ++k) at_state.push_back(per_member[k][b]);
      oracle += testing::jsd_direct(at_state) / batch;
    }
    worst_oracle = std::max(worst_oracle, std::abs(v - oracle));
  }
  CHECK(worst_oracle <= 1e-9);

  const nn::Matrix same = as_matrix({{0.2, 0.3, 0.5}, {0.6, 0.2, 0.2}});
  const std::vector<nn::Matrix> clones{same, same, same};
  CHECK(std::abs(jsd_term(clones)) <= 1e-12);

  const std::vector<nn::Matrix> disjoint{as_matrix({{1.0, 0.0}}), as_matrix({{0.0, 1.0}})};
  CHECK(jsd_term(disjoint) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("jsd_term rejects malformed input") {
  const nn::Matrix ok = as_matrix({{0.5, 0.5}});
  const std::vector<nn::Matrix> one{ok};
  CHECK_THROWS_AS(jsd_term(one), ContractViolation);
  const std::vector<nn::Matrix> not_normalized{ok, as_matrix({{0.5, 0.6}})};
  CHECK_THROWS_AS(jsd_term(not_normalized), ContractViolation);
  const std::vector<nn::Matrix> negative{ok, as_matrix({{1.5, -0.5}})};
  CHECK_THROWS_AS(jsd_term(negative), ContractViolation);
  const std::vector<nn::Matrix> ragged{ok, as_matrix({{0.2, 0.3, 0.5}})};
  CHECK_THROWS_AS(jsd_term(ragged), DimensionMismatch);
}

TEST_CASE("mid checkpoint selection") {
  std::vector<CheckpointRecord> recs(5);
  const double returns[] = {0.0, 20.0, 90.0, 130.0, 200.0};
  for (int i = 0; i < 5; ++i) recs[i].self_play_return = returns[i];
  bool in_band = false;
  CHECK(select_mid_checkpoint(recs, 200.0, 0.5, 0.35, 0.65, in_band) == 2);
  CHECK(in_band);
  recs[2].self_play_return = 40.0;
  recs[3].self_play_return = 160.0;
  const int idx = select_mid_checkpoint(recs, 200.0, 0.5, 0.35, 0.65, in_band);
  CHECK((idx == 2 || idx == 3));
  CHECK_FALSE(in_band);
  CHECK_THROWS_AS(select_mid_checkpoint({}, 1.0, 0.5, 0.35, 0.65, in_band), ContractViolation);
}

TEST_CASE("classify_play_styles on constructed matrices") {
  const auto identity_like = matrix_of({{100, 2, 1, 0}, {3, 90, 0, 1}, {0, 1, 110, 2}, {1, 0, 2, 95}});
  CHECK(class_count(classify_play_styles(identity_like, 0.2)) == 4);

  const auto uniform = matrix_of({{100, 100, 100}, {100, 100, 100}, {100, 100, 100}});
  CHECK(class_count(classify_play_styles(uniform, 0.1)) == 1);

  const auto blocks = matrix_of({{100, 95, 10, 5}, {97, 104, 8, 12}, {6, 9, 80, 84}, {11, 7, 78, 82}});
  const auto labels = classify_play_styles(blocks, 0.1);
  CHECK(class_count(labels) == 2);
  CHECK(labels[0] == labels[1]);
  CHECK(labels[2] == labels[3]);
  CHECK(labels[0] != labels[2]);

  CHECK_THROWS_AS(classify_play_styles(CrossplayMatrix{}, 0.1), ContractViolation);
}

TEST_CASE("crossplay matrix is deterministic, seat balanced and clone symmetric") {
  const auto layout = env::bundled_layout("cramped_room");
  nn::NetworkSpec spec = spec_for_layout(tiny_population(2, 0).trainer.network, layout);
  const nn::Network net(spec);
  auto perturbed = [&](std::uint64_t seed) {
    auto p = net.init_params(seed);
    Rng rng(seed);
    for (double& v : p.values) v += 0.5 * rng.normal();
    return p;
  };
  const auto a = perturbed(1);
  const auto b = perturbed(2);
  const std::vector<NamedPolicy> members{{"a", a}, {"b", b}, {"a_clone", a}};
  const auto m1 = crossplay_matrix(members, layout, 2, true, 9, 50);
  const auto m2 = crossplay_matrix(members, layout, 2, true, 9, 50);
  CHECK(m1.mean == m2.mean);
  CHECK(m1.episodes_per_cell == 4);
  CHECK(m1.mean.rows() == 3);

  const auto dir = std::filesystem::temp_directory_path() / "hipt_xp_test";
  std::filesystem::create_directories(dir);
  write_crossplay_csv(m1, (dir / "xp.csv").string());
  const auto back = read_crossplay_csv((dir / "xp.csv").string());
  CHECK(back.names == m1.names);
  CHECK(back.mean == m1.mean);
  write_crossplay_pgm(m1, (dir / "xp.pgm").string(), 4);
  CHECK(std::filesystem::file_size(dir / "xp.pgm") == std::string("P5\n12 12\n255\n").size() + 144);
  std::filesystem::remove_all(dir);
}

TEST_CASE("random tier policies start near uniform") {
  const auto layout = env::bundled_layout("coordination_ring");
  nn::NetworkSpec base;
  base.trunk_widths = {64, 64};
  const nn::Network net(spec_for_layout(base, layout));
  NetworkPolicy policy(net.init_params(3));
  auto state = env::reset(layout);
  Rng rng(4);
  for (int t = 0; t < 100; ++t) {
    const auto dist = policy.act(state, layout, t % 2);
    std::vector<double> p(dist.begin(), dist.end());
    REQUIRE(testing::entropy_direct(p) >= 0.99 * std::log(6.0));
    env::JointAction joint{static_cast<env::Action>(rng.uniform_int(0, 5)), static_cast<env::Action>(rng.uniform_int(0, 5))};
    state = env::step(state, joint, layout, env::no_shaping()).next_state;
  }
}

TEST_CASE("train_population produces tiers, round-trips its archive, and reduces to self-play without the diversity term") {
  const auto layout = env::bundled_layout("cramped_room");
  const auto config = tiny_population(3, 0.1);
  const auto pop = train_population(layout, config);
  REQUIRE(pop.size() == 3);
  CHECK(pop.entries().size() == 9);
  for (const auto& slot : pop.slots) {
    CHECK(slot.full_steps == 180);
    CHECK(slot.history.size() == 4);  // init plus one per update
    CHECK(slot.random != slot.full);
    CHECK(slot.attempts == 1);
  }
  CHECK(pop.slots[0].seed != pop.slots[1].seed);

  const auto dir = std::filesystem::temp_directory_path() / "hipt_pop_test";
  std::filesystem::remove_all(dir);
  save_population(pop, dir.string());
  CHECK(load_population(dir.string()) == pop);
  std::filesystem::resize_file(dir / "slot1_mid.model", 100);
  CHECK_THROWS_AS(load_population(dir.string()), ChecksumError);
  std::filesystem::remove_all(dir);

  const auto plain = train_population(layout, tiny_population(2, 0.0));
  for (int i = 0; i < 2; ++i) {
    SelfPlayTrainer solo(layout, tiny_population(2, 0.0).trainer, plain.slots[i].seed);
    while (!solo.finished()) solo.iterate();
    CHECK(solo.params() == plain.slots[i].full);
  }
  const auto diverse = train_population(layout, tiny_population(2, 0.5));
  CHECK(diverse.slots[0].full != plain.slots[0].full);
  CHECK(diverse.slots[0].random == plain.slots[0].random);
}

TEST_CASE("population config validation") {
  auto c = tiny_population(1, 0.1);
  CHECK_THROWS_AS(c.validate(), ContractViolation);
  c = tiny_population(2, 0.1);
  c.mid_low = 0.6;
  CHECK_THROWS_AS(c.validate(), ContractViolation);
}
