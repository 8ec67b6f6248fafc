#include "climatune/generation.hpp"

#include <algorithm>
#include <cmath>

#include "climatune/error.hpp"

namespace climatune {

namespace {

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : ", ") + s;
  return out;
}

void check_temperature(double t, const char* which) {
  if (!(t >= 0.0 && t <= 1.0)) {
    throw UsageError(std::string(which) + " temperature " + std::to_string(t) + " is outside [0, 1]");
  }
}

}  // namespace

std::vector<NoteEvent> default_seed() {
  return {NoteEvent{PitchToken::note('A', 0, 4), DurationToken(Rational(1))}};
}

std::size_t GenerationQuery::new_event_count() const {
  if (mxx == 0) throw UsageError("max extra notes must be at least 1");
  if (mxl == 0) throw UsageError("max length must be at least 1");
  if (mxl < seed.size()) {
    throw UsageError("max length " + std::to_string(mxl) + " is shorter than the " + std::to_string(seed.size()) +
                     "-event seed");
  }
  return std::min(mxx, mxl - seed.size());
}

std::pair<double, double> resolve_temperatures(const GenerationQuery& query, const TemperatureVectors& vectors) {
  if (query.pitch_temperature) check_temperature(*query.pitch_temperature, "pitch");
  if (query.duration_temperature) check_temperature(*query.duration_temperature, "duration");
  if (query.pitch_temperature && query.duration_temperature) {
    return {*query.pitch_temperature, *query.duration_temperature};
  }
  if (vectors.years.empty()) throw DataError("no temperature vectors loaded");
  if (!vectors.contains(query.year)) {
    throw DataError("year " + std::to_string(query.year) + " is not in the data; valid years are " +
                    std::to_string(vectors.first_year()) + "-" + std::to_string(vectors.last_year()));
  }
  const YearTemperatures& y = vectors.at(query.year);
  return {query.pitch_temperature.value_or(y.pitch), query.duration_temperature.value_or(y.duration)};
}

std::vector<TokenPair> prime_window(std::span<const NoteEvent> seed, std::size_t sql, const Vocabulary& vocab) {
  if (sql == 0) throw UsageError("sequence length must be positive");
  std::vector<TokenPair> window(sql, TokenPair{kPadIndex, kPadIndex});
  const std::size_t keep = std::min(sql, seed.size());
  const auto tail = seed.subspan(seed.size() - keep);
  for (std::size_t i = 0; i < keep; ++i) {
    const NoteEvent& e = tail[i];
    const auto p = vocab.pitch_index(e.pitch);
    if (!p) {
      throw DataError("seed pitch '" + e.pitch.to_string() + "' is not in the vocabulary; nearest: " +
                      join(vocab.nearest_pitches(e.pitch)));
    }
    const auto d = vocab.duration_index(e.duration);
    if (!d) {
      throw DataError("seed duration '" + e.duration.to_string() + "' is not in the vocabulary; nearest: " +
                      join(vocab.nearest_durations(e.duration)));
    }
    window[sql - keep + i] = TokenPair{*p, *d};
  }
  return window;
}

std::vector<double> sampling_distribution(std::span<const double> logits, double temperature) {
  if (logits.size() < 2) throw ModelError("need at least one non-PAD class to sample from");
  std::vector<double> out{0.0};
  const auto q = temperature_softmax(logits.subspan(1), temperature);
  out.insert(out.end(), q.begin(), q.end());
  return out;
}

int sample_index(std::span<const double> probabilities, Rng& rng) {
  const double u = rng.uniform();
  double cumulative = 0.0;
  int last_positive = -1;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    if (probabilities[i] <= 0.0) continue;
    cumulative += probabilities[i];
    last_positive = static_cast<int>(i);
    if (u < cumulative) return last_positive;
  }
  if (last_positive < 0) throw ModelError("cannot sample from an all-zero distribution");
  return last_positive;  // rounding left the total just under 1
}

GenerationResult generate(const GenerationQuery& query, const ModelParams& params, const Vocabulary& vocab,
                          const TemperatureVectors& vectors) {
  const ModelConfig& cfg = params.config;
  if (query.sql != cfg.sql) {
    throw ModelError("query sequence length " + std::to_string(query.sql) + " does not match the checkpoint's " +
                     std::to_string(cfg.sql));
  }
  if (vocab.pitch_size() != cfg.pitch_vocab || vocab.duration_size() != cfg.duration_vocab) {
    throw ModelError("vocabulary sizes (" + std::to_string(vocab.pitch_size()) + ", " +
                     std::to_string(vocab.duration_size()) + ") do not match the checkpoint (" +
                     std::to_string(cfg.pitch_vocab) + ", " + std::to_string(cfg.duration_vocab) + ")");
  }
  const std::size_t steps = query.new_event_count();
  const auto [tp, td] = resolve_temperatures(query, vectors);

  GenerationResult r;
  r.query = query;
  r.pitch_temperature = tp;
  r.duration_temperature = td;
  r.seed_length = query.seed.size();
  r.melody.events = query.seed;
  r.melody.source_id = std::to_string(query.year) + "_" + std::to_string(query.rng_seed);

  std::vector<TokenPair> window = prime_window(query.seed, cfg.sql, vocab);
  Rng rng(query.rng_seed);
  for (std::size_t s = 0; s < steps; ++s) {
    ForwardResult f = model_forward(window, params);
    auto qp = sampling_distribution(f.pitch_logits, tp);
    auto qd = sampling_distribution(f.duration_logits, td);
    const TokenPair next{sample_index(qp, rng), sample_index(qd, rng)};

    r.sampled.push_back(next);
    r.melody.events.push_back(vocab.decode(next));
    r.attention.push_back(std::move(f.trace.attention_weights));
    r.pitch_candidates.push_back(std::move(qp));
    r.duration_candidates.push_back(std::move(qd));

    window.erase(window.begin());
    window.push_back(next);
  }
  return r;
}

RangeResult generate_range(int first, int last, const GenerationQuery& per_year, const ModelParams& params,
                           const Vocabulary& vocab, const TemperatureVectors& vectors) {
  if (first > last) {
    throw UsageError("range start " + std::to_string(first) + " is after its end " + std::to_string(last));
  }
  for (int y : {first, last}) {
    if (!vectors.contains(y)) {
      throw DataError("year " + std::to_string(y) + " is not in the data; valid years are " +
                      (vectors.years.empty() ? std::string("none")
                                             : std::to_string(vectors.first_year()) + "-" +
                                                   std::to_string(vectors.last_year())));
    }
  }
  RangeResult out;
  out.concatenated.source_id = std::to_string(first) + "-" + std::to_string(last) + "_" +
                               std::to_string(per_year.rng_seed);
  for (int y = first; y <= last; ++y) {
    GenerationQuery q = per_year;
    q.year = y;
    out.results.push_back(generate(q, params, vocab, vectors));
    const auto& ev = out.results.back().melody.events;
    out.concatenated.events.insert(out.concatenated.events.end(), ev.begin(), ev.end());
  }
  return out;
}

}  // namespace climatune
