#include "climatune/music.hpp"

#include <cctype>
#include <charconv>
#include <numeric>

#include "climatune/error.hpp"

namespace climatune {

namespace {

constexpr int kStepPitchClass[7] = {9, 11, 0, 2, 4, 5, 7};  // A B C D E F G
constexpr const char* kSharpNames[12] = {"C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B"};

int floor_div(int a, int b) { return a / b - ((a % b != 0) && ((a < 0) != (b < 0))); }

int mod12(int v) { return ((v % 12) + 12) % 12; }

std::int64_t parse_int(std::string_view s, std::string_view whole) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw DataError("not a number: '" + std::string(whole) + "'");
  }
  return v;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

Rational::Rational(std::int64_t num, std::int64_t den) {
  if (den == 0) throw DataError("rational with zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  const std::int64_t g = std::gcd(num, den);
  num_ = num / (g == 0 ? 1 : g);
  den_ = den / (g == 0 ? 1 : g);
}

Rational Rational::parse(std::string_view text) {
  const std::string_view s = trim(text);
  if (auto slash = s.find('/'); slash != std::string_view::npos) {
    return Rational(parse_int(trim(s.substr(0, slash)), text), parse_int(trim(s.substr(slash + 1)), text));
  }
  const auto dot = s.find('.');
  if (dot == std::string_view::npos) return Rational(parse_int(s, text));

  std::string_view whole = s.substr(0, dot);
  std::string_view frac = s.substr(dot + 1);
  bool negative = false;
  if (!whole.empty() && (whole.front() == '-' || whole.front() == '+')) {
    negative = whole.front() == '-';
    whole.remove_prefix(1);
  }
  if (whole.empty() && frac.empty()) throw DataError("not a number: '" + std::string(text) + "'");
  if (frac.size() > 15) throw DataError("too many decimal places: '" + std::string(text) + "'");
  for (char c : frac) {
    if (!std::isdigit(static_cast<unsigned char>(c))) throw DataError("not a number: '" + std::string(text) + "'");
  }
  std::int64_t scale = 1;
  for (std::size_t i = 0; i < frac.size(); ++i) scale *= 10;
  const std::int64_t w = whole.empty() ? 0 : parse_int(whole, text);
  if (w < 0) throw DataError("not a number: '" + std::string(text) + "'");
  const std::int64_t f = frac.empty() ? 0 : parse_int(frac, text);
  const std::int64_t num = w * scale + f;
  return Rational(negative ? -num : num, scale);
}

std::string Rational::to_string() const {
  if (den_ == 1) return std::to_string(num_);
  return std::to_string(num_) + "/" + std::to_string(den_);
}

Rational operator+(Rational a, Rational b) { return Rational(a.num_ * b.den_ + b.num_ * a.den_, a.den_ * b.den_); }
Rational operator-(Rational a, Rational b) { return Rational(a.num_ * b.den_ - b.num_ * a.den_, a.den_ * b.den_); }
Rational operator*(Rational a, Rational b) { return Rational(a.num_ * b.num_, a.den_ * b.den_); }

std::strong_ordering operator<=>(const Rational& a, const Rational& b) {
  // denominators are positive, so cross-multiplication preserves order
  return a.num_ * b.den_ <=> b.num_ * a.den_;
}

DurationToken::DurationToken(Rational quarter_length) : ql_(quarter_length) {
  if (ql_.num() <= 0) throw DataError("duration must be positive, got " + ql_.to_string());
}

PitchToken PitchToken::note(char step, int alter, int octave) {
  const char upper = static_cast<char>(std::toupper(static_cast<unsigned char>(step)));
  if (upper < 'A' || upper > 'G') throw DataError(std::string("invalid note step '") + step + "'");
  if (alter < -2 || alter > 2) throw DataError("alteration out of range: " + std::to_string(alter));
  PitchToken p;
  p.rest_ = false;
  p.step_ = upper;
  p.alter_ = alter;
  p.octave_ = octave;
  return p;
}

PitchToken PitchToken::from_midi(int midi) {
  const std::string_view name = kSharpNames[mod12(midi)];
  return note(name[0], name.size() > 1 ? 1 : 0, floor_div(midi, 12) - 1);
}

PitchToken PitchToken::parse(std::string_view text) {
  const std::string_view s = trim(text);
  if (s.size() == 4 && (s == "rest" || s == "Rest" || s == "REST")) return rest();
  if (s.size() < 2) throw DataError("invalid pitch '" + std::string(text) + "'");
  std::size_t i = 1;
  int alter = 0;
  while (i < s.size() && (s[i] == '#' || s[i] == 'b')) {
    alter += s[i] == '#' ? 1 : -1;
    ++i;
  }
  if (i >= s.size()) throw DataError("invalid pitch '" + std::string(text) + "' (missing octave)");
  int octave = 0;
  auto [ptr, ec] = std::from_chars(s.data() + i, s.data() + s.size(), octave);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw DataError("invalid pitch '" + std::string(text) + "'");
  }
  return note(s[0], alter, octave);
}

int PitchToken::midi() const {
  if (rest_) throw DataError("rest has no MIDI number");
  return 12 * (octave_ + 1) + kStepPitchClass[step_ - 'A'] + alter_;
}

int PitchToken::pitch_class() const { return mod12(midi()); }

std::string PitchToken::to_string() const {
  if (rest_) return "rest";
  std::string out(1, step_);
  for (int a = alter_; a > 0; --a) out += '#';
  for (int a = alter_; a < 0; ++a) out += 'b';
  out += std::to_string(octave_);
  return out;
}

Key Key::from_fifths(int fifths, Mode mode) {
  const int major_tonic = mod12(7 * fifths);
  return Key{mode == Mode::major ? major_tonic : mod12(major_tonic + 9), mode};
}

int Key::fifths() const {
  const int major_tonic = mode == Mode::major ? tonic : mod12(tonic + 3);
  const int f = mod12(7 * major_tonic);  // 7 is its own inverse mod 12
  return f > 5 ? f - 12 : f;
}

Rational Melody::total_quarter_length() const {
  Rational total(0);
  for (const auto& e : events) total = total + e.duration.quarter_length();
  return total;
}

Melody transpose(const Melody& melody, int semitones) {
  if (semitones == 0) return melody;
  Melody out = melody;
  for (auto& e : out.events) {
    if (!e.pitch.is_rest()) e.pitch = PitchToken::from_midi(e.pitch.midi() + semitones);
  }
  if (out.key) out.key->tonic = mod12(out.key->tonic + semitones);
  return out;
}

}  // namespace climatune
