#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace eitmem {

/// Shortest round-trip decimal representation, independent of locale.
std::string format_double(double x);

/// Locale-independent parse of a full string as a double. Throws InputError.
double parse_double(std::string_view s);

/// n evenly spaced values from start to stop inclusive (n ≥ 2), or {start}
/// when n == 1.
std::vector<double> linspace(double start, double stop, std::size_t n);

/// Parses "start:stop:n" into linspace(start, stop, n). Throws InputError.
std::vector<double> parse_range(std::string_view spec);

/// Writes a header line and rows of doubles as comma-separated text.
std::string to_csv(const std::vector<std::string>& header,
                   const std::vector<std::vector<double>>& columns);

}  // namespace eitmem
