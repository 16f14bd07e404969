#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hipt/env/layout.hpp"
#include "hipt/nn/network.hpp"

namespace hipt::population {

struct CrossplayMatrix {
  std::vector<std::string> names;
  nn::Matrix mean;    // mean(i, j): member i with member j, seat-averaged when balanced
  nn::Matrix stddev;  // per-cell sample standard deviation over episodes
  int episodes_per_cell = 0;

  int size() const { return static_cast<int>(names.size()); }
};

struct NamedPolicy {
  std::string name;
  nn::ParamStore params;
};

// Pairwise mean returns. Diagonal cells are self-play of one member.
CrossplayMatrix crossplay_matrix(const std::vector<NamedPolicy>& members, const env::Layout& layout,
                                 int episodes_per_pair, bool seat_balancing, std::uint64_t seed,
                                 int horizon = 400);

// Agents i and j share a class when the symmetrized cross return is within
// tolerance x min(J_ii, J_jj) of both self-play returns and the self-play
// returns are within that margin of each other. Classes are the connected
// components; each agent's class id is returned (ids are 0..k-1 in first-seen order).
std::vector<int> classify_play_styles(const CrossplayMatrix& matrix, double tolerance);
int class_count(const std::vector<int>& labels);

void write_crossplay_csv(const CrossplayMatrix& matrix, const std::string& path);
CrossplayMatrix read_crossplay_csv(const std::string& path);
// Grayscale heatmap, black = 0, white = matrix maximum; `cell` pixels per entry.
void write_crossplay_pgm(const CrossplayMatrix& matrix, const std::string& path, int cell = 16);

}  // namespace hipt::population
