#pragma once

#include <optional>
#include <vector>

namespace eitmem {

/// One piece of a field envelope, active on the half-open interval
/// [start, end). Exponential pieces rise as level·exp((t − end)/time_constant)
/// and reach `level` at the end of the piece.
struct EnvelopePiece {
  enum class Kind { constant, exponential_rise };

  double start = 0.0;
  double end = 0.0;
  Kind kind = Kind::constant;
  double level = 0.0;
  double time_constant = 0.0;

  /// Piece formula, valid on the closed interval [start, end].
  double value(double t) const;
};

/// Dimensionless scaling in [0, 1] of a field amplitude versus time. Zero
/// outside every piece. Pieces must not overlap.
class Envelope {
 public:
  /// Level over all time.
  static Envelope constant(double level);

  Envelope& add_constant(double start, double end, double level);
  Envelope& add_exponential_rise(double start, double end, double peak,
                                 double time_constant);

  double operator()(double t) const;

  /// Piece active at t, or nullptr if the envelope is zero there.
  const EnvelopePiece* piece_at(double t) const;

  /// Finite piece boundaries, sorted and deduplicated.
  std::vector<double> breakpoints() const;

  /// If the envelope is constant on (a, b), its level; nullopt otherwise.
  /// (a, b) must not straddle a breakpoint.
  std::optional<double> constant_level_on(double a, double b) const;

  double max_level() const;

  const std::vector<EnvelopePiece>& pieces() const { return pieces_; }

 private:
  void insert(EnvelopePiece p);
  std::vector<EnvelopePiece> pieces_;
};

}  // namespace eitmem
