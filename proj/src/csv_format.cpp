#include "eitmem/csv_format.hpp"

#include <array>
#include <charconv>
#include <cmath>

#include "eitmem/errors.hpp"

namespace eitmem {

std::string format_double(double x) {
  std::array<char, 64> buf{};
  const auto [p, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  return std::string(buf.data(), p);
}

double parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double x = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (s.empty() || ec != std::errc{} || p != s.data() + s.size())
    throw InputError("not a number: '" + std::string(s) + "'");
  return x;
}

std::vector<double> linspace(double start, double stop, std::size_t n) {
  if (n == 0) throw InputError("linspace needs at least one point");
  if (n == 1) return {start};
  std::vector<double> out(n);
  const double step = (stop - start) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) out[i] = start + step * static_cast<double>(i);
  out.back() = stop;
  return out;
}

std::vector<double> parse_range(std::string_view spec) {
  const auto a = spec.find(':');
  const auto b = a == std::string_view::npos ? a : spec.find(':', a + 1);
  if (a == std::string_view::npos || b == std::string_view::npos)
    throw InputError("expected start:stop:n, got '" + std::string(spec) + "'");
  const double start = parse_double(spec.substr(0, a));
  const double stop = parse_double(spec.substr(a + 1, b - a - 1));
  const double n = parse_double(spec.substr(b + 1));
  if (!(n >= 1.0) || n != std::floor(n) || n > 1e7)
    throw InputError("range count must be a positive integer in '" + std::string(spec) + "'");
  if (n > 1.0 && !(stop > start))
    throw InputError("range stop must exceed start in '" + std::string(spec) + "'");
  return linspace(start, stop, static_cast<std::size_t>(n));
}

std::string to_csv(const std::vector<std::string>& header,
                   const std::vector<std::vector<double>>& columns) {
  std::string out;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) out += ',';
    out += header[i];
  }
  out += '\n';
  const std::size_t rows = columns.empty() ? 0 : columns.front().size();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (c) out += ',';
      out += format_double(columns[c][r]);
    }
    out += '\n';
  }
  return out;
}

}  // namespace eitmem
