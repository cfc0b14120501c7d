#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace permsig {

// Splits one CSV record. Supports double-quoted fields with "" escapes.
std::vector<std::string> split_csv_line(std::string_view line);
// Quotes a field when it contains a comma, quote or newline.
std::string csv_quote(const std::string& field);
// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

}  // namespace permsig
