#include "hipt/population/crossplay.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "hipt/env/episode.hpp"
#include "hipt/population/network_policy.hpp"
#include "hipt/util/error.hpp"
#include "hipt/util/rng.hpp"

namespace hipt::population {

CrossplayMatrix crossplay_matrix(const std::vector<NamedPolicy>& members, const env::Layout& layout,
                                 int episodes_per_pair, bool seat_balancing, std::uint64_t seed, int horizon) {
  if (episodes_per_pair < 1) throw ContractViolation("crossplay_matrix: need at least one episode per pair");
  const int m = static_cast<int>(members.size());
  CrossplayMatrix out;
  out.mean = nn::Matrix::Zero(m, m);
  out.stddev = nn::Matrix::Zero(m, m);
  out.episodes_per_cell = episodes_per_pair * (seat_balancing ? 2 : 1);
  for (const auto& member : members) out.names.push_back(member.name);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      NetworkPolicy a(members[i].params);
      NetworkPolicy b(members[j].params);
      const auto stats = env::measure_returns(a, b, layout, episodes_per_pair, horizon,
                                              derive_seed(seed, static_cast<std::uint64_t>(i * m + j)), seat_balancing);
      out.mean(i, j) = stats.mean;
      out.stddev(i, j) = stats.stddev;
    }
  }
  return out;
}

namespace {

int find(std::vector<int>& parent, int x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

}  // namespace

std::vector<int> classify_play_styles(const CrossplayMatrix& matrix, double tolerance) {
  const int n = matrix.size();
  if (n == 0 || matrix.mean.rows() != n || matrix.mean.cols() != n) {
    throw ContractViolation("classify_play_styles: need a non-empty square matrix");
  }
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double jii = matrix.mean(i, i);
      const double jjj = matrix.mean(j, j);
      const double cross = 0.5 * (matrix.mean(i, j) + matrix.mean(j, i));
      const double margin = tolerance * std::min(jii, jjj);
      if (std::abs(cross - jii) <= margin && std::abs(cross - jjj) <= margin && std::abs(jii - jjj) <= margin) {
        parent[find(parent, i)] = find(parent, j);
      }
    }
  }
  std::vector<int> labels(n, -1);
  std::vector<int> root_label(n, -1);
  int next = 0;
  for (int i = 0; i < n; ++i) {
    const int r = find(parent, i);
    if (root_label[r] < 0) root_label[r] = next++;
    labels[i] = root_label[r];
  }
  return labels;
}

int class_count(const std::vector<int>& labels) {
  int k = 0;
  for (int l : labels) k = std::max(k, l + 1);
  return k;
}

void write_crossplay_csv(const CrossplayMatrix& matrix, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out.precision(17);
  out << "row,col,mean,std,episodes\n";
  for (int i = 0; i < matrix.size(); ++i) {
    for (int j = 0; j < matrix.size(); ++j) {
      out << matrix.names[i] << ',' << matrix.names[j] << ',' << matrix.mean(i, j) << ',' << matrix.stddev(i, j) << ','
          << matrix.episodes_per_cell << '\n';
    }
  }
}

CrossplayMatrix read_crossplay_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  std::string line;
  std::getline(in, line);
  struct Cell {
    std::string row, col;
    double mean, std;
    int episodes;
  };
  std::vector<Cell> cells;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    Cell c;
    std::string field;
    std::getline(ss, c.row, ',');
    std::getline(ss, c.col, ',');
    std::getline(ss, field, ',');
    c.mean = std::stod(field);
    std::getline(ss, field, ',');
    c.std = std::stod(field);
    std::getline(ss, field, ',');
    c.episodes = std::stoi(field);
    cells.push_back(c);
  }
  const auto n = static_cast<int>(std::lround(std::sqrt(static_cast<double>(cells.size()))));
  if (n * n != static_cast<int>(cells.size())) throw IoError("crossplay csv is not square: " + path);
  CrossplayMatrix m;
  m.mean = nn::Matrix::Zero(n, n);
  m.stddev = nn::Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) m.names.push_back(cells[static_cast<std::size_t>(i) * n].row);
  for (int k = 0; k < n * n; ++k) {
    m.mean(k / n, k % n) = cells[k].mean;
    m.stddev(k / n, k % n) = cells[k].std;
    m.episodes_per_cell = cells[k].episodes;
  }
  return m;
}

void write_crossplay_pgm(const CrossplayMatrix& matrix, const std::string& path, int cell) {
  const int n = matrix.size();
  const int side = n * cell;
  const double top = matrix.mean.size() > 0 ? std::max(matrix.mean.maxCoeff(), 1e-12) : 1.0;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << "P5\n" << side << ' ' << side << "\n255\n";
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      const double v = std::clamp(matrix.mean(y / cell, x / cell) / top, 0.0, 1.0);
      out.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * v))));
    }
  }
}

}  // namespace hipt::population
