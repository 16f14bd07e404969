#include "hipt/env/layout.hpp"

#include <array>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace hipt::env {
namespace {

struct BundledLayout {
  std::string_view name;
  std::string_view text;
};

// Grids follow the public Overcooked kitchens; 1 = blue start, 2 = green start.
constexpr std::array<BundledLayout, 5> kBundled = {{
    {"cramped_room",
     "XXPXX\n"
     "O  2O\n"
     "X1  X\n"
     "XDXSX\n"},
    {"asymmetric_advantages",
     "XXXXXXXXX\n"
     "O XSXOX S\n"
     "X   P 1 X\n"
     "X2  P   X\n"
     "XXXDXDXXX\n"},
    {"coordination_ring",
     "XXXPX\n"
     "X  1P\n"
     "D2X X\n"
     "O   X\n"
     "XOSXX\n"},
    {"forced_coordination",
     "XXXPX\n"
     "O X1P\n"
     "O2X X\n"
     "D X X\n"
     "XXXSX\n"},
    {"counter_circuit",
     "XXXPPXXX\n"
     "X      X\n"
     "D XXXX S\n"
     "X2    1X\n"
     "XXXOOXXX\n"},
}};

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    const auto end = text.find('\n', start);
    if (end == std::string_view::npos) {
      lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return lines;
}

}  // namespace

std::vector<int> Layout::pot_cells() const {
  std::vector<int> cells;
  for (int i = 0; i < cell_count(); ++i) {
    if (terrain[i] == Cell::Pot) cells.push_back(i);
  }
  return cells;
}

std::string_view to_string(LayoutErrorKind kind) {
  switch (kind) {
    case LayoutErrorKind::Empty: return "Empty";
    case LayoutErrorKind::MalformedCharacter: return "MalformedCharacter";
    case LayoutErrorKind::RaggedLines: return "RaggedLines";
    case LayoutErrorKind::StartCountMismatch: return "StartCountMismatch";
    case LayoutErrorKind::MissingCellKind: return "MissingCellKind";
    case LayoutErrorKind::OpenBoundary: return "OpenBoundary";
  }
  return "Unknown";
}

LayoutParseError::LayoutParseError(LayoutErrorKind kind, int line, int column, const std::string& detail)
    : Error("layout parse error (" + std::string(to_string(kind)) + ") at line " + std::to_string(line) +
            ", column " + std::to_string(column) + ": " + detail),
      kind_(kind),
      line_(line),
      column_(column) {}

Layout parse_layout(std::string_view text, std::string name, int cook_time) {
  const auto lines = split_lines(text);
  if (lines.empty() || lines.front().empty()) {
    throw LayoutParseError(LayoutErrorKind::Empty, 0, 0, "no grid rows");
  }
  Layout layout;
  layout.name = std::move(name);
  layout.cook_time = cook_time;
  layout.width = static_cast<int>(lines.front().size());
  layout.height = static_cast<int>(lines.size());
  layout.terrain.reserve(static_cast<std::size_t>(layout.width * layout.height));

  std::vector<std::pair<int, Position>> starts;
  for (int y = 0; y < layout.height; ++y) {
    const auto row = lines[y];
    if (static_cast<int>(row.size()) != layout.width) {
      throw LayoutParseError(LayoutErrorKind::RaggedLines, y + 1, static_cast<int>(row.size()) + 1,
                             "expected " + std::to_string(layout.width) + " columns");
    }
    for (int x = 0; x < layout.width; ++x) {
      Cell cell = Cell::Floor;
      switch (row[x]) {
        case 'X': cell = Cell::Counter; break;
        case ' ': cell = Cell::Floor; break;
        case 'P': cell = Cell::Pot; break;
        case 'O': cell = Cell::OnionDispenser; break;
        case 'D': cell = Cell::DishDispenser; break;
        case 'S': cell = Cell::ServingCounter; break;
        case '1': starts.push_back({0, {x, y}}); break;
        case '2': starts.push_back({1, {x, y}}); break;
        default: {
          std::ostringstream msg;
          msg << "unexpected byte 0x" << std::hex << static_cast<int>(static_cast<unsigned char>(row[x]));
          throw LayoutParseError(LayoutErrorKind::MalformedCharacter, y + 1, x + 1, msg.str());
        }
      }
      const bool boundary = x == 0 || y == 0 || x == layout.width - 1 || y == layout.height - 1;
      if (boundary && cell == Cell::Floor) {
        throw LayoutParseError(LayoutErrorKind::OpenBoundary, y + 1, x + 1, "walkable cell on the grid boundary");
      }
      layout.terrain.push_back(cell);
    }
  }

  const auto count_seat = [&](int seat) {
    int n = 0;
    for (const auto& s : starts) n += s.first == seat ? 1 : 0;
    return n;
  };
  if (starts.size() != 2 || count_seat(0) != 1 || count_seat(1) != 1) {
    const Position where = starts.size() > 2 ? starts[2].second : Position{-1, -1};
    throw LayoutParseError(LayoutErrorKind::StartCountMismatch, where.y + 1, where.x + 1,
                           "expected exactly one '1' and one '2', found " + std::to_string(starts.size()) +
                               " start markers");
  }
  for (const auto& [seat, pos] : starts) layout.starts[seat] = PlayerStart{pos, Direction::North};

  constexpr std::array<std::pair<Cell, std::string_view>, 4> kRequired = {{
      {Cell::Pot, "pot (P)"},
      {Cell::OnionDispenser, "onion dispenser (O)"},
      {Cell::DishDispenser, "dish dispenser (D)"},
      {Cell::ServingCounter, "serving counter (S)"},
  }};
  for (const auto& [kind, label] : kRequired) {
    bool found = false;
    for (Cell c : layout.terrain) found = found || c == kind;
    if (!found) throw LayoutParseError(LayoutErrorKind::MissingCellKind, 0, 0, "missing " + std::string(label));
  }
  return layout;
}

std::string serialize_layout(const Layout& layout) {
  std::string out;
  out.reserve(static_cast<std::size_t>((layout.width + 1) * layout.height));
  for (int y = 0; y < layout.height; ++y) {
    for (int x = 0; x < layout.width; ++x) {
      const Position p{x, y};
      char c = ' ';
      switch (layout.at(p)) {
        case Cell::Floor: c = ' '; break;
        case Cell::Counter: c = 'X'; break;
        case Cell::Pot: c = 'P'; break;
        case Cell::OnionDispenser: c = 'O'; break;
        case Cell::DishDispenser: c = 'D'; break;
        case Cell::ServingCounter: c = 'S'; break;
      }
      if (layout.starts[0].position == p) c = '1';
      if (layout.starts[1].position == p) c = '2';
      out.push_back(c);
    }
    out.push_back('\n');
  }
  return out;
}

std::string canonical_layout_text(std::string_view text) {
  std::string out(text);
  if (out.empty() || out.back() != '\n') out.push_back('\n');
  return out;
}

const std::vector<std::string>& bundled_layout_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& b : kBundled) v.emplace_back(b.name);
    return v;
  }();
  return names;
}

std::string_view bundled_layout_text(std::string_view name) {
  for (const auto& b : kBundled) {
    if (b.name == name) return b.text;
  }
  throw Error("unknown layout: " + std::string(name));
}

Layout bundled_layout(std::string_view name) {
  return parse_layout(bundled_layout_text(name), std::string(name));
}

Layout load_layout(const std::string& name_or_path) {
  for (const auto& b : kBundled) {
    if (b.name == name_or_path) return bundled_layout(name_or_path);
  }
  std::ifstream in(name_or_path, std::ios::binary);
  if (!in) throw IoError("cannot open layout '" + name_or_path + "' (not a bundled name or readable file)");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_layout(buf.str(), std::filesystem::path(name_or_path).stem().string());
}

}  // namespace hipt::env
