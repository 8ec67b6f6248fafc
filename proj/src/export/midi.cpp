#include <cmath>
#include <map>

#include "climatune/error.hpp"
#include "climatune/export.hpp"

namespace climatune {

namespace {

void put_be(std::string& out, std::uint64_t v, int bytes) {
  for (int i = bytes - 1; i >= 0; --i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_varlen(std::string& out, std::uint32_t v) {
  char buf[5];
  int n = 0;
  buf[n++] = static_cast<char>(v & 0x7f);
  while ((v >>= 7) != 0) buf[n++] = static_cast<char>((v & 0x7f) | 0x80);
  while (n > 0) out.push_back(buf[--n]);
}

std::int64_t ticks_at(const Rational& quarters) {
  return std::llround(quarters.to_double() * kTicksPerQuarter);
}

}  // namespace

std::string to_midi(const Melody& melody, double tempo_bpm) {
  if (melody.empty()) throw DataError("cannot write an empty melody as MIDI");
  if (!(tempo_bpm > 0.0)) throw UsageError("tempo must be positive");

  // (tick, order, bytes): note-offs sort before note-ons at the same tick
  std::multimap<std::pair<std::int64_t, int>, std::string> events;
  Rational position(0);
  for (std::size_t i = 0; i < melody.events.size(); ++i) {
    const NoteEvent& e = melody.events[i];
    const Rational end = position + e.duration.quarter_length();
    if (!e.pitch.is_rest()) {
      const int key = e.pitch.midi();
      if (key < 0 || key > 127) {
        throw DataError("event " + std::to_string(i) + ": pitch " + e.pitch.to_string() + " (MIDI " +
                        std::to_string(key) + ") is outside 0-127");
      }
      events.emplace(std::pair{ticks_at(position), 1}, std::string{'\x90', static_cast<char>(key), '\x50'});
      events.emplace(std::pair{ticks_at(end), 0}, std::string{'\x80', static_cast<char>(key), '\x00'});
    }
    position = end;
  }
  const std::int64_t total = ticks_at(position);

  std::string track;
  if (!melody.source_id.empty()) {
    track += std::string{'\x00', '\xff', '\x03'};
    put_varlen(track, static_cast<std::uint32_t>(melody.source_id.size()));
    track += melody.source_id;
  }
  const auto usec = static_cast<std::uint32_t>(std::llround(60'000'000.0 / tempo_bpm));
  track += std::string{'\x00', '\xff', '\x51', '\x03'};
  put_be(track, usec, 3);
  track += std::string{'\x00', '\xff', '\x58', '\x04', '\x04', '\x02', '\x18', '\x08'};

  std::int64_t now = 0;
  for (const auto& [when, bytes] : events) {
    put_varlen(track, static_cast<std::uint32_t>(when.first - now));
    track += bytes;
    now = when.first;
  }
  put_varlen(track, static_cast<std::uint32_t>(total - now));
  track += std::string{'\xff', '\x2f', '\x00'};

  std::string out = "MThd";
  put_be(out, 6, 4);
  put_be(out, 0, 2);  // format 0
  put_be(out, 1, 2);  // one track
  put_be(out, kTicksPerQuarter, 2);
  out += "MTrk";
  put_be(out, track.size(), 4);
  out += track;
  return out;
}

}  // namespace climatune
