#include <cctype>

#include "climatune/cli.hpp"
#include "climatune/error.hpp"

namespace climatune {

namespace {

constexpr const char* kSeedRemedy = "expected a literal like [['A4','C5'],[1,0.5]] or [[],[]]";

class SeedParser {
 public:
  explicit SeedParser(std::string_view text) : s_(text) {}

  std::vector<NoteEvent> parse() {
    expect('[');
    std::vector<std::string> pitches = list([this] { return pitch_item(); });
    expect(',');
    std::vector<std::string> durations = list([this] { return duration_item(); });
    expect(']');
    skip_ws();
    if (pos_ != s_.size()) fail("unexpected text after the closing bracket");
    if (pitches.size() != durations.size()) {
      throw UsageError("seed has " + std::to_string(pitches.size()) + " pitches but " +
                       std::to_string(durations.size()) + " durations; give one quarter length per pitch");
    }
    std::vector<NoteEvent> out;
    for (std::size_t i = 0; i < pitches.size(); ++i) {
      try {
        out.push_back(NoteEvent{PitchToken::parse(pitches[i]), DurationToken::parse(durations[i])});
      } catch (const DataError& e) {
        throw UsageError(std::string("seed event ") + std::to_string(i) + ": " + e.what());
      }
    }
    return out;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw UsageError("malformed seed literal at column " + std::to_string(pos_ + 1) + ": " + what + "; " +
                     kSeedRemedy);
  }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool peek(char c) {
    skip_ws();
    return pos_ < s_.size() && s_[pos_] == c;
  }

  void expect(char c) {
    if (!peek(c)) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  template <typename Item>
  std::vector<std::string> list(Item item) {
    expect('[');
    std::vector<std::string> out;
    if (peek(']')) {
      ++pos_;
      return out;
    }
    while (true) {
      out.push_back(item());
      if (peek(',')) {
        ++pos_;
        continue;
      }
      expect(']');
      return out;
    }
  }

  static bool is_quote(char c) { return c == '\'' || c == '"' || c == '`'; }

  // Word characters up to a delimiter, optionally quoted. A backtick may be
  // closed by an apostrophe (`A4' as typeset in LaTeX).
  std::string word(bool (*allowed)(char)) {
    skip_ws();
    std::optional<char> open;
    if (pos_ < s_.size() && is_quote(s_[pos_])) open = s_[pos_++];
    const std::size_t start = pos_;
    while (pos_ < s_.size() && allowed(s_[pos_])) ++pos_;
    std::string w(s_.substr(start, pos_ - start));
    if (w.empty()) fail("expected a token");
    if (open) {
      const bool closes = pos_ < s_.size() && (s_[pos_] == *open || (*open == '`' && s_[pos_] == '\''));
      if (!closes) fail("unterminated quote");
      ++pos_;
    }
    return w;
  }

  std::string pitch_item() {
    return word([](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '#' || c == '-'; });
  }

  std::string duration_item() {
    return word([](char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0 || c == '.' || c == '/'; });
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<NoteEvent> parse_seed_literal(std::string_view text) { return SeedParser(text).parse(); }

}  // namespace climatune
