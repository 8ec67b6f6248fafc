#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace climatune {

/// Exact non-negative-denominator fraction, always stored in lowest terms.
class Rational {
 public:
  constexpr Rational() = default;
  Rational(std::int64_t num, std::int64_t den = 1);

  std::int64_t num() const noexcept { return num_; }
  std::int64_t den() const noexcept { return den_; }
  double to_double() const noexcept { return static_cast<double>(num_) / static_cast<double>(den_); }

  /// "3/2", "1", "0.5", "1.25". Decimals convert exactly (0.5 -> 1/2).
  static Rational parse(std::string_view text);
  /// "1/2" or "1" for integers.
  std::string to_string() const;

  friend Rational operator+(Rational a, Rational b);
  friend Rational operator-(Rational a, Rational b);
  friend Rational operator*(Rational a, Rational b);
  friend bool operator==(const Rational&, const Rational&) = default;
  friend std::strong_ordering operator<=>(const Rational& a, const Rational& b);

 private:
  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

/// A note duration in quarter lengths (1 = one quarter note). Always > 0.
class DurationToken {
 public:
  explicit DurationToken(Rational quarter_length);
  static DurationToken parse(std::string_view text) { return DurationToken(Rational::parse(text)); }

  const Rational& quarter_length() const noexcept { return ql_; }
  std::string to_string() const { return ql_.to_string(); }

  friend bool operator==(const DurationToken&, const DurationToken&) = default;
  friend auto operator<=>(const DurationToken& a, const DurationToken& b) { return a.ql_ <=> b.ql_; }

 private:
  Rational ql_;
};

/// Either a rest or a spelled pitch in scientific notation (A4 = MIDI 69).
class PitchToken {
 public:
  static PitchToken rest() { return PitchToken(); }
  /// step is one of A-G; alter in semitones (-2..2); any integer octave.
  static PitchToken note(char step, int alter, int octave);
  /// Sharp spelling for the given MIDI number (61 -> C#4).
  static PitchToken from_midi(int midi);
  /// "A4", "F#3", "Bb5", "C##4", "rest". Case-insensitive step letter.
  static PitchToken parse(std::string_view text);

  bool is_rest() const noexcept { return rest_; }
  char step() const noexcept { return step_; }
  int alter() const noexcept { return alter_; }
  int octave() const noexcept { return octave_; }
  /// MIDI note number; only meaningful for notes.
  int midi() const;
  /// Pitch class 0..11 (C = 0); only meaningful for notes.
  int pitch_class() const;
  std::string to_string() const;

  friend bool operator==(const PitchToken&, const PitchToken&) = default;

 private:
  PitchToken() = default;
  bool rest_ = true;
  char step_ = 0;
  int alter_ = 0;
  int octave_ = 0;
};

enum class Mode { major, minor };

struct Key {
  int tonic = 0;  // pitch class 0..11
  Mode mode = Mode::major;

  /// Tonic of a key signature given as circle-of-fifths position.
  static Key from_fifths(int fifths, Mode mode);
  /// Circle-of-fifths position in [-6, 5] that spells this key.
  int fifths() const;

  friend bool operator==(const Key&, const Key&) = default;
};

struct NoteEvent {
  PitchToken pitch;
  DurationToken duration;

  friend bool operator==(const NoteEvent&, const NoteEvent&) = default;
};

/// Monophonic sequence of (pitch, duration) events.
struct Melody {
  std::vector<NoteEvent> events;
  std::optional<Key> key;
  std::string source_id;

  std::size_t size() const noexcept { return events.size(); }
  bool empty() const noexcept { return events.empty(); }
  Rational total_quarter_length() const;

  friend bool operator==(const Melody&, const Melody&) = default;
};

/// Shift every note by `semitones`, respelling with sharps; rests and
/// durations untouched. A zero shift returns the input unchanged.
Melody transpose(const Melody& melody, int semitones);

}  // namespace climatune
