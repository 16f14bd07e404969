#pragma once

#include <string>
#include <vector>

#include "hipt/eval/evaluate.hpp"

namespace hipt::eval {

enum class ReportFormat { Csv, Text };

// Columns: layout, method, partner_type, mean, std, n.
std::string emit_report(const std::vector<EvalRow>& rows, ReportFormat format);
std::vector<EvalRow> parse_report_csv(const std::string& text);

}  // namespace hipt::eval
