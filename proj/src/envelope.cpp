#include "eitmem/envelope.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "eitmem/errors.hpp"

namespace eitmem {

double EnvelopePiece::value(double t) const {
  if (kind == Kind::constant) return level;
  return level * std::exp((t - end) / time_constant);
}

Envelope Envelope::constant(double level) {
  Envelope e;
  const double inf = std::numeric_limits<double>::infinity();
  e.insert({-inf, inf, EnvelopePiece::Kind::constant, level, 0.0});
  return e;
}

Envelope& Envelope::add_constant(double start, double end, double level) {
  insert({start, end, EnvelopePiece::Kind::constant, level, 0.0});
  return *this;
}

Envelope& Envelope::add_exponential_rise(double start, double end, double peak,
                                         double time_constant) {
  if (!(time_constant > 0.0)) throw DomainError("envelope time constant must be > 0");
  insert({start, end, EnvelopePiece::Kind::exponential_rise, peak, time_constant});
  return *this;
}

void Envelope::insert(EnvelopePiece p) {
  if (!(p.end >= p.start)) throw DomainError("envelope piece ends before it starts");
  if (!(p.level >= 0.0 && p.level <= 1.0))
    throw DomainError("envelope level must lie in [0, 1]");
  if (p.end == p.start) return;
  for (const auto& q : pieces_) {
    if (p.start < q.end && q.start < p.end)
      throw DomainError("overlapping envelope pieces");
  }
  pieces_.push_back(p);
  std::sort(pieces_.begin(), pieces_.end(),
            [](const auto& a, const auto& b) { return a.start < b.start; });
}

const EnvelopePiece* Envelope::piece_at(double t) const {
  for (const auto& p : pieces_)
    if (t >= p.start && t < p.end) return &p;
  return nullptr;
}

double Envelope::operator()(double t) const {
  const auto* p = piece_at(t);
  return p ? p->value(t) : 0.0;
}

std::vector<double> Envelope::breakpoints() const {
  std::vector<double> out;
  for (const auto& p : pieces_) {
    if (std::isfinite(p.start)) out.push_back(p.start);
    if (std::isfinite(p.end)) out.push_back(p.end);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::optional<double> Envelope::constant_level_on(double a, double b) const {
  const auto* p = piece_at(0.5 * (a + b));
  if (!p) return 0.0;
  if (p->kind == EnvelopePiece::Kind::constant) return p->level;
  return std::nullopt;
}

double Envelope::max_level() const {
  double m = 0.0;
  for (const auto& p : pieces_) m = std::max(m, p.level);
  return m;
}

}  // namespace eitmem
