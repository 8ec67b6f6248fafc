#include <cstdio>
#include <fstream>
#include <sstream>

#include "climatune/error.hpp"
#include "climatune/export.hpp"

namespace climatune {

namespace {

std::string number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

nlohmann::json labelled(const std::vector<std::vector<double>>& rows, std::vector<std::string> tokens) {
  return {{"tokens", std::move(tokens)}, {"rows", rows}};
}

template <typename T>
std::optional<T> optional_field(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

}  // namespace

nlohmann::json to_json(const GenerationQuery& q) {
  nlohmann::json seed_pitch = nlohmann::json::array(), seed_duration = nlohmann::json::array();
  for (const auto& e : q.seed) {
    seed_pitch.push_back(e.pitch.to_string());
    seed_duration.push_back(e.duration.to_string());
  }
  return {{"year", q.year},
          {"seed", {{"pitch", seed_pitch}, {"duration", seed_duration}}},
          {"mxx", q.mxx},
          {"mxl", q.mxl},
          {"sql", q.sql},
          {"rng_seed", q.rng_seed},
          {"pitch_temperature", q.pitch_temperature ? nlohmann::json(*q.pitch_temperature) : nlohmann::json()},
          {"duration_temperature",
           q.duration_temperature ? nlohmann::json(*q.duration_temperature) : nlohmann::json()}};
}

GenerationQuery query_from_json(const nlohmann::json& j) {
  try {
    GenerationQuery q;
    q.year = j.at("year").get<int>();
    const auto& pitches = j.at("seed").at("pitch");
    const auto& durations = j.at("seed").at("duration");
    if (pitches.size() != durations.size()) throw UsageError("seed pitch and duration lists differ in length");
    q.seed.clear();
    for (std::size_t i = 0; i < pitches.size(); ++i) {
      const auto& d = durations[i];
      q.seed.push_back(NoteEvent{PitchToken::parse(pitches[i].get<std::string>()),
                                 d.is_string() ? DurationToken::parse(d.get<std::string>())
                                               : DurationToken::parse(number(d.get<double>()))});
    }
    q.mxx = j.at("mxx").get<std::size_t>();
    q.mxl = j.at("mxl").get<std::size_t>();
    q.sql = j.at("sql").get<std::size_t>();
    q.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    q.pitch_temperature = optional_field<double>(j, "pitch_temperature");
    q.duration_temperature = optional_field<double>(j, "duration_temperature");
    return q;
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("invalid query document: ") + e.what());
  } catch (const DataError& e) {
    throw UsageError(std::string("invalid query document: ") + e.what());
  }
}

nlohmann::json melody_to_json(const Melody& melody) {
  nlohmann::json pitch = nlohmann::json::array(), duration = nlohmann::json::array();
  for (const auto& e : melody.events) {
    pitch.push_back(e.pitch.to_string());
    duration.push_back(e.duration.to_string());
  }
  return {{"pitch", pitch}, {"duration", duration}};
}

nlohmann::json result_to_json(const GenerationResult& r, const Vocabulary& vocab) {
  std::vector<std::string> ptok, dtok;
  for (std::size_t i = 0; i < vocab.pitch_size(); ++i) ptok.push_back(vocab.pitch_text(static_cast<int>(i)));
  for (std::size_t i = 0; i < vocab.duration_size(); ++i) dtok.push_back(vocab.duration_text(static_cast<int>(i)));
  return {{"query", to_json(r.query)},
          {"temperatures", {{"pitch", r.pitch_temperature}, {"duration", r.duration_temperature}}},
          {"melody", melody_to_json(r.melody)},
          {"seed_length", r.seed_length},
          {"generated", r.sampled.size()},
          {"attention", r.attention},
          {"pitch_candidates", labelled(r.pitch_candidates, ptok)},
          {"duration_candidates", labelled(r.duration_candidates, dtok)}};
}

std::string attention_csv(const GenerationResult& r) {
  std::string out = "step";
  for (std::size_t i = 0; i < r.query.sql; ++i) out += ",w" + std::to_string(i);
  out += '\n';
  for (std::size_t s = 0; s < r.attention.size(); ++s) {
    out += std::to_string(s);
    for (double v : r.attention[s]) out += ',' + number(v);
    out += '\n';
  }
  return out;
}

std::string candidates_csv(const GenerationResult& r, const Vocabulary& vocab) {
  std::string out = "step";
  for (std::size_t i = 0; i < vocab.pitch_size(); ++i) out += ',' + vocab.pitch_text(static_cast<int>(i));
  out += '\n';
  for (std::size_t s = 0; s < r.pitch_candidates.size(); ++s) {
    out += std::to_string(s);
    for (double v : r.pitch_candidates[s]) out += ',' + number(v);
    out += '\n';
  }
  return out;
}

std::string bundle_stem(const GenerationQuery& q) {
  return std::to_string(q.year) + "_" + std::to_string(q.rng_seed);
}

nlohmann::json manifest(const GenerationResult& r, const Vocabulary& vocab, const ExportContext& ctx) {
  nlohmann::json m = result_to_json(r, vocab);
  const std::string stem = bundle_stem(r.query);
  m["format"] = "climatune-export";
  m["version"] = 1;
  m["checkpoint_hash"] = ctx.checkpoint_hash;
  m["snapshot_hash"] = ctx.snapshot_hash;
  m["vocab_hash"] = ctx.vocab_hash;
  m["tempo_bpm"] = ctx.tempo_bpm;
  m["files"] = {{"midi", stem + ".mid"},
                {"musicxml", stem + ".musicxml"},
                {"attention", stem + ".attention.csv"},
                {"candidates", stem + ".candidates.csv"}};
  return m;
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("short write to " + path.string());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::vector<std::filesystem::path> write_bundle(const GenerationResult& r, const Vocabulary& vocab,
                                                const ExportContext& ctx, const std::filesystem::path& dir) {
  const std::string stem = bundle_stem(r.query);
  std::vector<std::filesystem::path> paths = {dir / (stem + ".mid"), dir / (stem + ".musicxml"),
                                              dir / (stem + ".attention.csv"), dir / (stem + ".candidates.csv"),
                                              dir / (stem + ".manifest.json")};
  write_file(paths[0], to_midi(r.melody, ctx.tempo_bpm));
  write_file(paths[1], to_musicxml(r.melody));
  write_file(paths[2], attention_csv(r));
  write_file(paths[3], candidates_csv(r, vocab));
  write_file(paths[4], manifest(r, vocab, ctx).dump(2) + "\n");
  return paths;
}

std::vector<std::filesystem::path> write_range(const RangeResult& range, const Vocabulary& vocab,
                                               const ExportContext& ctx, const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> paths;
  for (const auto& r : range.results) {
    auto p = write_bundle(r, vocab, ctx, dir);
    paths.insert(paths.end(), p.begin(), p.end());
  }
  const std::string stem = range.concatenated.source_id;
  paths.push_back(dir / (stem + ".mid"));
  write_file(paths.back(), to_midi(range.concatenated, ctx.tempo_bpm));
  paths.push_back(dir / (stem + ".musicxml"));
  write_file(paths.back(), to_musicxml(range.concatenated));
  return paths;
}

}  // namespace climatune
