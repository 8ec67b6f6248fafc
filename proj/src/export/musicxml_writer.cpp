#include <numeric>
#include <sstream>

#include "climatune/error.hpp"
#include "climatune/export.hpp"

namespace climatune {

namespace {

struct NoteType {
  Rational length;
  const char* name;
  int dots;
};

// Plain, dotted and double-dotted values from whole note down to 128th.
std::vector<NoteType> note_types() {
  static const std::pair<Rational, const char*> bases[] = {
      {Rational(4), "whole"},    {Rational(2), "half"},     {Rational(1), "quarter"}, {Rational(1, 2), "eighth"},
      {Rational(1, 4), "16th"},  {Rational(1, 8), "32nd"},  {Rational(1, 16), "64th"}, {Rational(1, 32), "128th"}};
  std::vector<NoteType> out;
  for (const auto& [len, name] : bases) {
    out.push_back({len * Rational(7, 4), name, 2});
    out.push_back({len * Rational(3, 2), name, 1});
    out.push_back({len, name, 0});
  }
  return out;
}

bool dyadic(const Rational& r) {
  const auto d = r.den();
  return (d & (d - 1)) == 0;
}

/// Pieces that each map onto one written note value, or a single untyped
/// piece for tuplet lengths.
std::vector<std::pair<Rational, const NoteType*>> notate(Rational length) {
  static const std::vector<NoteType> types = note_types();
  std::vector<std::pair<Rational, const NoteType*>> out;
  if (!dyadic(length)) {
    out.emplace_back(length, nullptr);
    return out;
  }
  while (length > Rational(0)) {
    const NoteType* pick = nullptr;
    for (const auto& t : types) {
      if (t.length <= length) {
        pick = &t;
        break;
      }
    }
    if (!pick) {
      out.emplace_back(length, nullptr);
      break;
    }
    out.emplace_back(pick->length, pick);
    length = length - pick->length;
  }
  return out;
}

std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string to_musicxml(const Melody& melody) {
  if (melody.empty()) throw DataError("cannot write an empty melody as MusicXML");

  std::int64_t divisions = 1;
  for (const auto& e : melody.events) divisions = std::lcm(divisions, e.duration.quarter_length().den());
  const Rational bar(4);

  std::ostringstream x;
  x << "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"no\"?>\n"
    << "<!DOCTYPE score-partwise PUBLIC \"-//Recordare//DTD MusicXML 3.1 Partwise//EN\" "
       "\"http://www.musicxml.org/dtds/partwise.dtd\">\n"
    << "<score-partwise version=\"3.1\">\n";
  if (!melody.source_id.empty()) x << "  <movement-title>" << escape(melody.source_id) << "</movement-title>\n";
  x << "  <part-list>\n    <score-part id=\"P1\">\n      <part-name>Melody</part-name>\n    </score-part>\n"
    << "  </part-list>\n  <part id=\"P1\">\n";

  int measure = 1;
  Rational in_bar(0);
  x << "    <measure number=\"1\">\n      <attributes>\n        <divisions>" << divisions << "</divisions>\n";
  if (melody.key) {
    x << "        <key>\n          <fifths>" << melody.key->fifths() << "</fifths>\n          <mode>"
      << (melody.key->mode == Mode::minor ? "minor" : "major") << "</mode>\n        </key>\n";
  }
  x << "        <time>\n          <beats>4</beats>\n          <beat-type>4</beat-type>\n        </time>\n"
    << "        <clef>\n          <sign>G</sign>\n          <line>2</line>\n        </clef>\n      </attributes>\n";

  for (const auto& e : melody.events) {
    // pieces of this event, split at barlines and into written values
    std::vector<std::pair<Rational, const NoteType*>> pieces;
    std::vector<bool> ends_bar;
    Rational left = e.duration.quarter_length();
    Rational pos = in_bar;
    while (left > Rational(0)) {
      const Rational room = bar - pos;
      const Rational take = left < room ? left : room;
      auto part = notate(take);
      for (std::size_t i = 0; i < part.size(); ++i) {
        pieces.push_back(part[i]);
        ends_bar.push_back(i + 1 == part.size() && take == room);
      }
      left = left - take;
      pos = take == room ? Rational(0) : pos + take;
    }

    for (std::size_t i = 0; i < pieces.size(); ++i) {
      const bool tie_stop = i > 0;
      const bool tie_start = i + 1 < pieces.size();
      const auto& [len, type] = pieces[i];
      x << "      <note>\n";
      if (e.pitch.is_rest()) {
        x << "        <rest/>\n";
      } else {
        x << "        <pitch>\n          <step>" << e.pitch.step() << "</step>\n";
        if (e.pitch.alter() != 0) x << "          <alter>" << e.pitch.alter() << "</alter>\n";
        x << "          <octave>" << e.pitch.octave() << "</octave>\n        </pitch>\n";
      }
      const Rational ticks = len * Rational(divisions);
      x << "        <duration>" << ticks.num() << "</duration>\n";
      if (tie_stop) x << "        <tie type=\"stop\"/>\n";
      if (tie_start) x << "        <tie type=\"start\"/>\n";
      x << "        <voice>1</voice>\n";
      if (type) {
        x << "        <type>" << type->name << "</type>\n";
        for (int d = 0; d < type->dots; ++d) x << "        <dot/>\n";
      }
      if (!e.pitch.is_rest() && (tie_start || tie_stop)) {
        x << "        <notations>\n";
        if (tie_stop) x << "          <tied type=\"stop\"/>\n";
        if (tie_start) x << "          <tied type=\"start\"/>\n";
        x << "        </notations>\n";
      }
      x << "      </note>\n";

      in_bar = in_bar + len;
      if (ends_bar[i]) {
        in_bar = Rational(0);
        const bool more = i + 1 < pieces.size() || &e != &melody.events.back();
        if (more) x << "    </measure>\n    <measure number=\"" << ++measure << "\">\n";
      }
    }
  }
  x << "      <barline location=\"right\">\n        <bar-style>light-heavy</bar-style>\n      </barline>\n"
    << "    </measure>\n  </part>\n</score-partwise>\n";
  return x.str();
}

}  // namespace climatune
