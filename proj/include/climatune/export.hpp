#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "climatune/corpus.hpp"
#include "climatune/generation.hpp"

namespace climatune {

inline constexpr int kTicksPerQuarter = 480;
inline constexpr double kDefaultTempoBpm = 90.0;

/// Standard MIDI file, format 0, one track. Rests become gaps.
/// Throws DataError for an empty melody or a pitch outside 0-127.
std::string to_midi(const Melody& melody, double tempo_bpm = kDefaultTempoBpm);

/// Single-part score in 4/4. Events crossing a barline are split and tied.
/// The last measure is left short rather than padded, so parsing the output
/// gives back the same melody.
std::string to_musicxml(const Melody& melody);

nlohmann::json to_json(const GenerationQuery& query);
/// Inverse of to_json(GenerationQuery). Throws UsageError on a bad document.
GenerationQuery query_from_json(const nlohmann::json& j);

/// Melody as parallel arrays: {"pitch": ["A4", ...], "duration": ["1", ...]}.
nlohmann::json melody_to_json(const Melody& melody);

/// Everything in a result, with token labels for the candidate matrices.
nlohmann::json result_to_json(const GenerationResult& result, const Vocabulary& vocab);

/// Rows = generated steps; a leading step column, then one column per window position.
std::string attention_csv(const GenerationResult& result);
/// Rows = generated steps; a leading step column, then one column per pitch token.
std::string candidates_csv(const GenerationResult& result, const Vocabulary& vocab);

struct ExportContext {
  std::string checkpoint_hash;
  std::string snapshot_hash;
  std::string vocab_hash;
  double tempo_bpm = kDefaultTempoBpm;
};

/// `<year>_<rngseed>`.
std::string bundle_stem(const GenerationQuery& query);

/// Query echo, hashes, temperatures, melody and the JSON mirror of both
/// candidate matrices and the attention matrix.
nlohmann::json manifest(const GenerationResult& result, const Vocabulary& vocab, const ExportContext& context);

/// Writes the .mid, .musicxml, .attention.csv, .candidates.csv and
/// .manifest.json files into `dir` and returns their paths in that order.
std::vector<std::filesystem::path> write_bundle(const GenerationResult& result, const Vocabulary& vocab,
                                                const ExportContext& context, const std::filesystem::path& dir);

/// Per-year bundles plus `<first>-<last>_<rngseed>.{mid,musicxml}` for the
/// concatenated melody.
std::vector<std::filesystem::path> write_range(const RangeResult& range, const Vocabulary& vocab,
                                               const ExportContext& context, const std::filesystem::path& dir);

/// Write bytes to a file, creating parent directories. Throws IoError.
void write_file(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

}  // namespace climatune
