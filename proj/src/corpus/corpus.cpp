#include "climatune/corpus.hpp"

#include <algorithm>
#include <cstdlib>
#include <nlohmann/json.hpp>

#include "climatune/error.hpp"
#include "climatune/hash.hpp"

namespace climatune {

namespace {

int mod12(int v) { return ((v % 12) + 12) % 12; }

}  // namespace

KeyNormalization normalize_key(const Melody& melody, int target_tonic) {
  if (melody.empty()) throw DataError("normalize_key: empty melody");
  KeyNormalization out;
  std::optional<int> tonic;
  if (melody.key) {
    tonic = melody.key->tonic;
  } else {
    for (auto it = melody.events.rbegin(); it != melody.events.rend(); ++it) {
      if (!it->pitch.is_rest()) {
        tonic = it->pitch.pitch_class();
        break;
      }
    }
    out.warning = "no key signature in '" + melody.source_id + "'; using the final note as tonic";
  }
  if (!tonic) {
    out.warning = "no key signature and no sounding notes in '" + melody.source_id + "'; left untransposed";
    out.melody = melody;
    return out;
  }
  const int up = mod12(target_tonic - *tonic);
  const int down = up - 12;
  out.shift = (up < -down) ? up : down;  // equal distance (6) goes down
  out.melody = transpose(melody, out.shift);
  return out;
}

std::vector<Melody> augment_all_keys(const std::vector<Melody>& corpus) {
  if (corpus.empty()) throw DataError("augment_all_keys: empty corpus");
  std::vector<Melody> out;
  out.reserve(corpus.size() * 12);
  for (const auto& m : corpus) {
    for (int s = 0; s < 12; ++s) out.push_back(transpose(m, s <= 6 ? s : s - 12));
  }
  return out;
}

Vocabulary::Vocabulary(std::vector<PitchToken> pitches, std::vector<DurationToken> durations)
    : pitches_(std::move(pitches)), durations_(std::move(durations)) {
  for (std::size_t i = 0; i < pitches_.size(); ++i) {
    for (std::size_t j = i + 1; j < pitches_.size(); ++j) {
      if (pitches_[i] == pitches_[j]) throw DataError("duplicate pitch token " + pitches_[i].to_string());
    }
  }
  for (std::size_t i = 0; i + 1 < durations_.size(); ++i) {
    for (std::size_t j = i + 1; j < durations_.size(); ++j) {
      if (durations_[i] == durations_[j]) throw DataError("duplicate duration token " + durations_[i].to_string());
    }
  }
}

std::optional<int> Vocabulary::pitch_index(const PitchToken& p) const {
  const auto it = std::find(pitches_.begin(), pitches_.end(), p);
  if (it == pitches_.end()) return std::nullopt;
  return static_cast<int>(it - pitches_.begin()) + 1;
}

std::optional<int> Vocabulary::duration_index(const DurationToken& d) const {
  const auto it = std::find(durations_.begin(), durations_.end(), d);
  if (it == durations_.end()) return std::nullopt;
  return static_cast<int>(it - durations_.begin()) + 1;
}

const PitchToken& Vocabulary::pitch_at(int index) const {
  if (index < 1 || static_cast<std::size_t>(index) > pitches_.size()) {
    throw ModelError("pitch index " + std::to_string(index) + " has no token");
  }
  return pitches_[static_cast<std::size_t>(index) - 1];
}

const DurationToken& Vocabulary::duration_at(int index) const {
  if (index < 1 || static_cast<std::size_t>(index) > durations_.size()) {
    throw ModelError("duration index " + std::to_string(index) + " has no token");
  }
  return durations_[static_cast<std::size_t>(index) - 1];
}

std::string Vocabulary::pitch_text(int index) const {
  return index == kPadIndex ? std::string(kPadText) : pitch_at(index).to_string();
}

std::string Vocabulary::duration_text(int index) const {
  return index == kPadIndex ? std::string(kPadText) : duration_at(index).to_string();
}

std::vector<std::string> Vocabulary::nearest_pitches(const PitchToken& p, std::size_t n) const {
  std::vector<std::pair<int, std::string>> scored;
  for (const auto& q : pitches_) {
    int distance = 0;
    if (p.is_rest() != q.is_rest()) {
      distance = 1000;
    } else if (!p.is_rest()) {
      distance = std::abs(p.midi() - q.midi());
    }
    scored.emplace_back(distance, q.to_string());
  }
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < scored.size() && i < n; ++i) out.push_back(scored[i].second);
  return out;
}

std::vector<std::string> Vocabulary::nearest_durations(const DurationToken& d, std::size_t n) const {
  std::vector<std::pair<double, std::string>> scored;
  for (const auto& q : durations_) {
    scored.emplace_back(std::abs(q.quarter_length().to_double() - d.quarter_length().to_double()), q.to_string());
  }
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < scored.size() && i < n; ++i) out.push_back(scored[i].second);
  return out;
}

std::string Vocabulary::to_json() const {
  nlohmann::json j;
  auto& pitch = j["pitch"] = nlohmann::json::array({std::string(kPadText)});
  for (const auto& p : pitches_) pitch.push_back(p.to_string());
  auto& duration = j["duration"] = nlohmann::json::array({std::string(kPadText)});
  for (const auto& d : durations_) duration.push_back(d.to_string());
  return j.dump(2) + "\n";
}

Vocabulary Vocabulary::from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("vocab.json: ") + e.what());
  }
  const auto read_list = [&](const char* key) {
    if (!j.contains(key) || !j[key].is_array() || j[key].empty() || j[key][0] != kPadText) {
      throw DataError(std::string("vocab.json: '") + key + "' must be an array starting with \"PAD\"");
    }
    std::vector<std::string> out;
    for (std::size_t i = 1; i < j[key].size(); ++i) out.push_back(j[key][i].get<std::string>());
    return out;
  };
  std::vector<PitchToken> pitches;
  for (const auto& s : read_list("pitch")) pitches.push_back(PitchToken::parse(s));
  std::vector<DurationToken> durations;
  for (const auto& s : read_list("duration")) durations.push_back(DurationToken::parse(s));
  return Vocabulary(std::move(pitches), std::move(durations));
}

std::uint64_t Vocabulary::hash() const { return fnv1a64(to_json()); }

TokenPair Vocabulary::encode(const NoteEvent& e) const {
  const auto p = pitch_index(e.pitch);
  const auto d = duration_index(e.duration);
  if (!p) throw DataError("pitch " + e.pitch.to_string() + " is not in the vocabulary");
  if (!d) throw DataError("duration " + e.duration.to_string() + " is not in the vocabulary");
  return TokenPair{*p, *d};
}

NoteEvent Vocabulary::decode(TokenPair t) const { return NoteEvent{pitch_at(t.pitch), duration_at(t.duration)}; }

Vocabulary build_vocab(const std::vector<Melody>& corpus) {
  if (corpus.empty()) throw DataError("build_vocab: empty corpus");
  std::vector<PitchToken> pitches;
  std::vector<DurationToken> durations;
  for (const auto& m : corpus) {
    for (const auto& e : m.events) {
      if (std::find(pitches.begin(), pitches.end(), e.pitch) == pitches.end()) pitches.push_back(e.pitch);
      if (std::find(durations.begin(), durations.end(), e.duration) == durations.end()) durations.push_back(e.duration);
    }
  }
  std::sort(pitches.begin(), pitches.end(), [](const PitchToken& a, const PitchToken& b) {
    if (a.is_rest() != b.is_rest()) return a.is_rest();
    if (a.is_rest()) return false;
    if (a.midi() != b.midi()) return a.midi() < b.midi();
    return a.to_string() < b.to_string();
  });
  std::sort(durations.begin(), durations.end());
  return Vocabulary(std::move(pitches), std::move(durations));
}

std::vector<TrainingWindow> windowize(const std::vector<Melody>& corpus, const Vocabulary& vocab, std::size_t sql) {
  if (sql == 0) throw DataError("windowize: window length must be >= 1");
  std::vector<TrainingWindow> out;
  for (std::size_t mi = 0; mi < corpus.size(); ++mi) {
    std::vector<TokenPair> encoded;
    encoded.reserve(corpus[mi].size());
    for (const auto& e : corpus[mi].events) encoded.push_back(vocab.encode(e));
    if (encoded.empty()) continue;

    if (encoded.size() <= sql) {
      TrainingWindow w;
      w.melody = mi;
      w.position = encoded.size() - 1;
      w.input.assign(sql - (encoded.size() - 1), TokenPair{kPadIndex, kPadIndex});
      w.input.insert(w.input.end(), encoded.begin(), encoded.end() - 1);
      w.target = encoded.back();
      out.push_back(std::move(w));
      continue;
    }
    for (std::size_t start = 0; start + sql < encoded.size(); ++start) {
      TrainingWindow w;
      w.melody = mi;
      w.position = start + sql;
      w.input.assign(encoded.begin() + static_cast<std::ptrdiff_t>(start),
                     encoded.begin() + static_cast<std::ptrdiff_t>(start + sql));
      w.target = encoded[start + sql];
      out.push_back(std::move(w));
    }
  }
  return out;
}

LoadedCorpus load_corpus(const std::filesystem::path& dir, const CorpusOptions& options) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError("corpus directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto ext = entry.path().extension();
    if (entry.is_regular_file() && (ext == ".musicxml" || ext == ".xml")) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no .musicxml/.xml files in " + dir.string());

  LoadedCorpus out;
  for (const auto& f : files) {
    KeyNormalization n = normalize_key(load_musicxml_file(f), options.target_tonic);
    if (n.warning) out.warnings.push_back(*n.warning);
    out.melodies.push_back(std::move(n.melody));
  }
  if (options.augment) out.melodies = augment_all_keys(out.melodies);
  return out;
}

}  // namespace climatune
