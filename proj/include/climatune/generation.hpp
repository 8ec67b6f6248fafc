#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "climatune/climate.hpp"
#include "climatune/corpus.hpp"
#include "climatune/model.hpp"
#include "climatune/rng.hpp"

namespace climatune {

inline constexpr std::size_t kDefaultMaxExtraNotes = 16;
inline constexpr std::size_t kDefaultMaxLength = 16;
inline constexpr std::size_t kDefaultSequenceLength = 16;

/// The default priming seed: a single A4 quarter note.
std::vector<NoteEvent> default_seed();

struct GenerationQuery {
  int year = kReferenceYear;
  std::vector<NoteEvent> seed = default_seed();
  std::size_t mxx = kDefaultMaxExtraNotes;  // max new events
  std::size_t mxl = kDefaultMaxLength;      // cap on total events, seed included
  std::size_t sql = kDefaultSequenceLength;
  std::uint64_t rng_seed = 0;
  std::optional<double> pitch_temperature;
  std::optional<double> duration_temperature;

  /// min(mxx, mxl - len(seed)). Throws UsageError if mxx == 0 or mxl < len(seed).
  std::size_t new_event_count() const;

  friend bool operator==(const GenerationQuery&, const GenerationQuery&) = default;
};

struct GenerationResult {
  GenerationQuery query;
  Melody melody;  // seed events followed by generated events
  std::size_t seed_length = 0;
  double pitch_temperature = 0.0;
  double duration_temperature = 0.0;
  std::vector<TokenPair> sampled;
  /// One row per generated step.
  std::vector<std::vector<double>> attention;            // x sql
  std::vector<std::vector<double>> pitch_candidates;     // x |pitch vocab|
  std::vector<std::vector<double>> duration_candidates;  // x |duration vocab|
};

/// Year entries of the vectors unless overridden. Both results in [0, 1].
/// Throws DataError for an unknown year when an override is missing.
std::pair<double, double> resolve_temperatures(const GenerationQuery& query, const TemperatureVectors& vectors);

/// Left-PAD to sql, then the last min(sql, len) seed events.
std::vector<TokenPair> prime_window(std::span<const NoteEvent> seed, std::size_t sql, const Vocabulary& vocab);

/// Temperature softmax over the non-PAD logits with PAD fixed at 0.
std::vector<double> sampling_distribution(std::span<const double> logits, double temperature);

/// Inverse-CDF draw with one uniform variate.
int sample_index(std::span<const double> probabilities, Rng& rng);

GenerationResult generate(const GenerationQuery& query, const ModelParams& params, const Vocabulary& vocab,
                          const TemperatureVectors& vectors);

struct RangeResult {
  std::vector<GenerationResult> results;
  Melody concatenated;
};

/// One generate() per year from `first` to `last` inclusive, each using the
/// template's seed, lengths and rng seed.
RangeResult generate_range(int first, int last, const GenerationQuery& per_year, const ModelParams& params,
                           const Vocabulary& vocab, const TemperatureVectors& vectors);

}  // namespace climatune
