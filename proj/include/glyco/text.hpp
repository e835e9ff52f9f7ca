#pragma once

// Small text helpers shared by the line-oriented readers and writers.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace glyco::text {

std::string_view trim(std::string_view s);

/// Splits on runs of spaces and tabs.
std::vector<std::string_view> split_ws(std::string_view s);

/// Splits on every occurrence of `sep` (empty fields kept).
std::vector<std::string_view> split(std::string_view s, char sep);

/// Strict full-token numeric parsing; throws InputError naming `what`.
double parse_double(std::string_view s, std::string_view what = "number");
std::int64_t parse_int(std::string_view s, std::string_view what = "integer");

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double v);

bool starts_with(std::string_view s, std::string_view prefix);

/// True for tokens safe to embed in whitespace-delimited records.
bool is_token(std::string_view s);

} // namespace glyco::text
