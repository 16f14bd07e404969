#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "hipt/util/error.hpp"

namespace hipt::env {

enum class Cell : std::uint8_t { Floor, Counter, Pot, OnionDispenser, DishDispenser, ServingCounter };
inline constexpr int kNumCellKinds = 6;

enum class Direction : std::uint8_t { North, East, South, West };

struct Position {
  int x = 0;
  int y = 0;
  friend constexpr auto operator<=>(const Position&, const Position&) = default;
};

constexpr Position step_towards(Position p, Direction d) {
  switch (d) {
    case Direction::North: return {p.x, p.y - 1};
    case Direction::South: return {p.x, p.y + 1};
    case Direction::East: return {p.x + 1, p.y};
    case Direction::West: return {p.x - 1, p.y};
  }
  return p;
}

struct PlayerStart {
  Position position;
  Direction facing = Direction::North;
  friend bool operator==(const PlayerStart&, const PlayerStart&) = default;
};

inline constexpr int kDefaultCookTime = 20;

// Static kitchen terrain. Index 0 of `starts` is the blue seat, index 1 green.
struct Layout {
  std::string name;
  int width = 0;
  int height = 0;
  std::vector<Cell> terrain;  // row-major, width * height
  std::array<PlayerStart, 2> starts{};
  int cook_time = kDefaultCookTime;

  int cell_count() const { return width * height; }
  bool in_bounds(Position p) const { return p.x >= 0 && p.y >= 0 && p.x < width && p.y < height; }
  int index(Position p) const { return p.y * width + p.x; }
  Position position(int index) const { return {index % width, index / width}; }
  Cell at(Position p) const { return in_bounds(p) ? terrain[index(p)] : Cell::Counter; }
  // Pot cell indices in row-major order; WorldState::pots follows this order.
  std::vector<int> pot_cells() const;

  friend bool operator==(const Layout&, const Layout&) = default;
};

enum class LayoutErrorKind {
  Empty,
  MalformedCharacter,
  RaggedLines,
  StartCountMismatch,
  MissingCellKind,
  OpenBoundary,
};

std::string_view to_string(LayoutErrorKind kind);

class LayoutParseError : public Error {
 public:
  LayoutParseError(LayoutErrorKind kind, int line, int column, const std::string& detail);
  LayoutErrorKind kind() const { return kind_; }
  // 1-based; 0 when the error is not tied to a location.
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  LayoutErrorKind kind_;
  int line_;
  int column_;
};

// Grid text: X counter, space floor, P pot, O onion dispenser, D dish
// dispenser, S serving counter, 1/2 player starts on floor. LF line endings.
Layout parse_layout(std::string_view text, std::string name = "custom", int cook_time = kDefaultCookTime);

// Canonical text form: every row followed by a single LF.
std::string serialize_layout(const Layout& layout);

// Canonicalizes raw layout text (drops one trailing LF if missing, normalizes).
std::string canonical_layout_text(std::string_view text);

// The five standard kitchens.
const std::vector<std::string>& bundled_layout_names();
std::string_view bundled_layout_text(std::string_view name);
Layout bundled_layout(std::string_view name);

// Loads a bundled layout by name, or parses a file when `name_or_path` names one.
Layout load_layout(const std::string& name_or_path);

}  // namespace hipt::env
