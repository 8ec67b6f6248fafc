// Shared fixtures for the unit and acceptance tests.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "climatune/climate.hpp"
#include "climatune/corpus.hpp"
#include "climatune/generation.hpp"
#include "climatune/model.hpp"

namespace testing {

using namespace climatune;

inline std::filesystem::path source_dir() { return CLIMATUNE_SOURCE_DIR; }
inline std::filesystem::path data_dir() { return source_dir() / "data"; }

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("climatune_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline NoteEvent ev(const char* pitch, const char* ql) {
  return NoteEvent{PitchToken::parse(pitch), DurationToken::parse(ql)};
}

inline Melody melody(std::initializer_list<NoteEvent> events, std::string id = "m") {
  Melody m;
  m.events = events;
  m.source_id = std::move(id);
  return m;
}

/// Vocabulary with `np` note pitches starting at C4 and `nd` durations 1/4, 1/2, 1, ...
inline Vocabulary small_vocab(std::size_t np, std::size_t nd) {
  std::vector<PitchToken> p;
  for (std::size_t i = 0; i < np; ++i) p.push_back(PitchToken::from_midi(60 + static_cast<int>(i)));
  std::vector<DurationToken> d;
  for (std::size_t i = 0; i < nd; ++i) d.push_back(DurationToken(Rational(1LL << i, 4)));
  return Vocabulary(p, d);
}

inline ModelParams random_model(const Vocabulary& vocab, std::size_t hidden, std::size_t sql, std::uint64_t seed,
                                std::size_t pe = 5, std::size_t de = 3) {
  ModelConfig c;
  c.pitch_vocab = vocab.pitch_size();
  c.duration_vocab = vocab.duration_size();
  c.pitch_embed = pe;
  c.duration_embed = de;
  c.hidden = hidden;
  c.sql = sql;
  Rng rng(seed);
  return ModelParams::initialize(c, rng);
}

/// Temperature vectors with pitch = duration = (y - 1876) / 145 for every year.
inline TemperatureVectors linear_vectors() {
  TemperatureVectors v;
  for (int y = kFirstYear; y <= kLastYear; ++y) {
    const double t = static_cast<double>(y - kFirstYear) / (kLastYear - kFirstYear);
    v.years[y] = YearTemperatures{t, t};
  }
  return v;
}

/// Greedy decoding written independently of generate(): argmax over the
/// non-PAD logits, lowest index on ties, then slide the window.
inline std::vector<TokenPair> greedy_decode(const ModelParams& params, std::vector<TokenPair> window,
                                            std::size_t steps) {
  auto argmax_non_pad = [](const std::vector<double>& z) {
    std::size_t best = 1;
    for (std::size_t i = 2; i < z.size(); ++i) {
      if (z[i] > z[best]) best = i;
    }
    return static_cast<int>(best);
  };
  std::vector<TokenPair> out;
  for (std::size_t s = 0; s < steps; ++s) {
    const ForwardResult f = model_forward(window, params);
    const TokenPair next{argmax_non_pad(f.pitch_logits), argmax_non_pad(f.duration_logits)};
    out.push_back(next);
    window.erase(window.begin());
    window.push_back(next);
  }
  return out;
}

/// Minimal standard-MIDI reader, independent of the writer: returns
/// (key, on tick, off tick) for every note and the end-of-track tick.
struct MidiNote {
  int key;
  std::int64_t on;
  std::int64_t off;
};

struct MidiDump {
  int format = -1;
  int tracks = 0;
  int division = 0;
  std::uint32_t tempo_usec = 0;
  std::vector<MidiNote> notes;
  std::int64_t end_tick = 0;
};

inline MidiDump read_midi(const std::string& bytes) {
  std::size_t pos = 0;
  auto u8 = [&]() -> std::uint32_t {
    if (pos >= bytes.size()) throw std::runtime_error("midi: unexpected end");
    return static_cast<unsigned char>(bytes[pos++]);
  };
  auto be = [&](int n) {
    std::uint32_t v = 0;
    for (int i = 0; i < n; ++i) v = (v << 8) | u8();
    return v;
  };
  auto var = [&]() {
    std::uint32_t v = 0, b;
    do {
      b = u8();
      v = (v << 7) | (b & 0x7f);
    } while (b & 0x80);
    return v;
  };
  MidiDump d;
  if (bytes.substr(0, 4) != "MThd") throw std::runtime_error("midi: no MThd");
  pos = 4;
  if (be(4) != 6) throw std::runtime_error("midi: header length");
  d.format = static_cast<int>(be(2));
  d.tracks = static_cast<int>(be(2));
  d.division = static_cast<int>(be(2));
  if (bytes.substr(pos, 4) != "MTrk") throw std::runtime_error("midi: no MTrk");
  pos += 4;
  const std::size_t track_length = be(4);
  const std::size_t end = pos + track_length;
  if (end != bytes.size()) throw std::runtime_error("midi: track length mismatch");
  std::int64_t tick = 0;
  std::uint32_t status = 0;
  std::vector<std::pair<int, std::int64_t>> open;
  while (pos < end) {
    tick += var();
    std::uint32_t b = u8();
    if (b == 0xff) {
      const std::uint32_t type = u8();
      const std::uint32_t len = var();
      if (type == 0x51) d.tempo_usec = be(3);
      else pos += len;
      if (type == 0x2f) {
        d.end_tick = tick;
        break;
      }
      continue;
    }
    std::uint32_t data1;
    if (b & 0x80) {
      status = b;
      data1 = u8();
    } else {
      data1 = b;  // running status
    }
    const std::uint32_t data2 = u8();
    const std::uint32_t kind = status & 0xf0;
    const bool on = kind == 0x90 && data2 > 0;
    const bool off = kind == 0x80 || (kind == 0x90 && data2 == 0);
    if (on) open.emplace_back(static_cast<int>(data1), tick);
    if (off) {
      for (auto it = open.begin(); it != open.end(); ++it) {
        if (it->first == static_cast<int>(data1)) {
          d.notes.push_back({it->first, it->second, tick});
          open.erase(it);
          break;
        }
      }
    }
  }
  return d;
}

/// Draws `n` logit vectors of size k with entries ~ N(0, scale).
inline std::vector<std::vector<double>> random_logits(std::size_t n, std::size_t k, double scale, unsigned seed) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> nd(0.0, scale);
  std::vector<std::vector<double>> out(n, std::vector<double>(k));
  for (auto& v : out)
    for (auto& x : v) x = nd(gen);
  return out;
}

inline double row_sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

}  // namespace testing

namespace testing {

struct GradientCheck {
  double worst = 0.0;  // largest relative error seen
  std::string where;
  std::size_t checked = 0;
};

/// Compare backward() against central differences for every parameter of
/// `params`. Relative error |a - n| / max(|a|, |n|, floor).
inline GradientCheck gradient_check(ModelParams params, const std::vector<TokenPair>& window, TokenPair target,
                                    double step = 1e-5, double floor = 1e-6) {
  const ForwardResult f = model_forward(window, params);
  ModelParams analytic = backward(f.trace, target, params);
  auto loss_at = [&](const ModelParams& p) {
    const ForwardResult r = model_forward(window, p);
    return loss(r.pitch_logits, r.duration_logits, target);
  };
  GradientCheck out;
  auto tensors = params.tensors();
  const auto grads = analytic.tensors();
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    auto values = tensors[t].second->values();
    const auto g = grads[t].second->values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + step;
      const double up = loss_at(params);
      values[i] = saved - step;
      const double down = loss_at(params);
      values[i] = saved;
      const double numeric = (up - down) / (2 * step);
      const double denom = std::max({std::abs(g[i]), std::abs(numeric), floor});
      const double rel = std::abs(g[i] - numeric) / denom;
      ++out.checked;
      if (rel > out.worst) {
        out.worst = rel;
        out.where = std::string(tensors[t].first) + "[" + std::to_string(i) + "] analytic " + std::to_string(g[i]) +
                    " numeric " + std::to_string(numeric);
      }
    }
  }
  return out;
}

}  // namespace testing
