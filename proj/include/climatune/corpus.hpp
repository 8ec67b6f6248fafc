#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "climatune/music.hpp"

namespace climatune {

/// Extract the first part's first voice as a monophonic melody.
///
/// Chords collapse to their highest pitch, tied notes merge into one event,
/// grace notes are dropped. The key signature (if any) is kept on the melody
/// and `movement-title`/`work-title` becomes the source id.
/// Throws DataError for malformed XML (with line number) or a part without notes.
Melody parse_musicxml(std::string_view document);

/// Read and parse one file; the source id is the file stem.
Melody load_musicxml_file(const std::filesystem::path& path);

struct KeyNormalization {
  Melody melody;
  int shift = 0;                       // semitones applied
  std::optional<std::string> warning;  // set when the tonic was guessed
};

/// Transpose so the detected tonic lands on `target_tonic` (pitch class),
/// taking the smaller of the two candidate shifts (ties go down).
/// Tonic comes from the key signature, else from the last sounding note.
KeyNormalization normalize_key(const Melody& melody, int target_tonic = 0);

/// Twelve transpositions per input melody (shifts 0..+6 and -5..-1 in that
/// order), so the first member of every group is the original.
std::vector<Melody> augment_all_keys(const std::vector<Melody>& corpus);

/// One (pitch index, duration index) pair.
struct TokenPair {
  int pitch = 0;
  int duration = 0;
  friend bool operator==(const TokenPair&, const TokenPair&) = default;
};

inline constexpr int kPadIndex = 0;
inline constexpr std::string_view kPadText = "PAD";

/// Dense, deterministic token <-> index maps. Index 0 is PAD in both.
class Vocabulary {
 public:
  Vocabulary() = default;
  /// Token lists in index order, without the leading PAD.
  Vocabulary(std::vector<PitchToken> pitches, std::vector<DurationToken> durations);

  std::size_t pitch_size() const noexcept { return pitches_.size() + 1; }
  std::size_t duration_size() const noexcept { return durations_.size() + 1; }

  std::optional<int> pitch_index(const PitchToken& p) const;
  std::optional<int> duration_index(const DurationToken& d) const;
  /// Index must be >= 1 (PAD has no token).
  const PitchToken& pitch_at(int index) const;
  const DurationToken& duration_at(int index) const;
  /// Token text including "PAD" for index 0.
  std::string pitch_text(int index) const;
  std::string duration_text(int index) const;

  /// Closest in-vocabulary spellings, for error messages.
  std::vector<std::string> nearest_pitches(const PitchToken& p, std::size_t n = 3) const;
  std::vector<std::string> nearest_durations(const DurationToken& d, std::size_t n = 3) const;

  /// `{"duration": [...], "pitch": [...]}` with token strings in index order.
  std::string to_json() const;
  static Vocabulary from_json(std::string_view text);
  /// Fingerprint of to_json().
  std::uint64_t hash() const;

  TokenPair encode(const NoteEvent& e) const;
  NoteEvent decode(TokenPair t) const;

  friend bool operator==(const Vocabulary&, const Vocabulary&) = default;

 private:
  std::vector<PitchToken> pitches_;
  std::vector<DurationToken> durations_;
};

/// Distinct tokens of the corpus. Pitch order: rest first, then notes by
/// (MIDI number, spelling); durations ascending.
Vocabulary build_vocab(const std::vector<Melody>& corpus);

struct TrainingWindow {
  std::vector<TokenPair> input;
  TokenPair target;
  std::size_t melody = 0;    // index of the source melody
  std::size_t position = 0;  // index of the target event in it
};

/// One window per position where `sql` inputs plus a target fit; melodies of
/// length <= sql yield a single left-padded window targeting their last event.
std::vector<TrainingWindow> windowize(const std::vector<Melody>& corpus, const Vocabulary& vocab, std::size_t sql);

struct CorpusOptions {
  int target_tonic = 0;
  bool augment = false;
};

struct LoadedCorpus {
  std::vector<Melody> melodies;
  std::vector<std::string> warnings;
};

/// Parse every .musicxml/.xml file in `dir` (sorted by name), normalize keys
/// and optionally augment.
LoadedCorpus load_corpus(const std::filesystem::path& dir, const CorpusOptions& options = {});

}  // namespace climatune
