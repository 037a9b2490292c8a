#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace nafe::text {

/// Shortest decimal string that parses back to exactly `v` (never more
/// than 17 significant digits).
std::string format_double(double v);

/// Splits one CSV record on commas, honouring double-quoted fields.
std::vector<std::string> split_csv_line(std::string_view line);

std::string_view trim(std::string_view s);

/// Parses the whole of `s` as a decimal floating-point number.
std::optional<double> parse_double(std::string_view s);

}  // namespace nafe::text
