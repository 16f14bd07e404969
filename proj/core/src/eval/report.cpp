#include "hipt/eval/report.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <sstream>

#include "hipt/util/error.hpp"

namespace hipt::eval {

namespace {

constexpr std::array<const char*, 6> kColumns{"layout", "method", "partner_type", "mean", "std", "n"};

std::string format_double(double v) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

std::string fixed(double v) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(2);
  s << v;
  return s.str();
}

double parse_double(const std::string& field) {
  double v = 0.0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc{} || res.ptr != field.data() + field.size()) throw IoError("bad number in report: " + field);
  return v;
}

}  // namespace

std::string emit_report(const std::vector<EvalRow>& rows, ReportFormat format) {
  if (rows.empty()) throw ContractViolation("emit_report: no rows");
  std::ostringstream out;
  if (format == ReportFormat::Csv) {
    for (std::size_t i = 0; i < kColumns.size(); ++i) out << (i ? "," : "") << kColumns[i];
    out << '\n';
    for (const auto& r : rows) {
      out << r.layout << ',' << r.method << ',' << r.partner_type << ',' << format_double(r.mean) << ','
          << format_double(r.std) << ',' << r.n << '\n';
    }
    return out.str();
  }
  std::vector<std::array<std::string, 6>> cells;
  cells.push_back({kColumns[0], kColumns[1], kColumns[2], kColumns[3], kColumns[4], kColumns[5]});
  for (const auto& r : rows) {
    cells.push_back({r.layout, r.method, r.partner_type, fixed(r.mean), fixed(r.std), std::to_string(r.n)});
  }
  std::array<std::size_t, 6> width{};
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      const bool numeric = c >= 3;
      const std::string pad(width[c] - row[c].size(), ' ');
      if (c) out << "  ";
      out << (numeric ? pad + row[c] : row[c] + (c + 1 < row.size() ? pad : ""));
    }
    out << '\n';
  }
  return out.str();
}

std::vector<EvalRow> parse_report_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "layout,method,partner_type,mean,std,n") {
    throw IoError("report csv: unexpected header");
  }
  std::vector<EvalRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) f.push_back(field);
    if (f.size() != 6) throw IoError("report csv: expected 6 fields: " + line);
    rows.push_back({f[0], f[1], f[2], parse_double(f[3]), parse_double(f[4]), static_cast<int>(parse_double(f[5]))});
  }
  return rows;
}

}  // namespace hipt::eval
