#include <doctest.h>

#include <nlohmann/json.hpp>
#include <sstream>

#include "climatune/error.hpp"
#include "climatune/export.hpp"
#include "climatune/hash.hpp"
#include "support.hpp"

using namespace climatune;

namespace {

std::vector<std::string> split_lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::size_t columns(const std::string& line) { return static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1; }

GenerationResult sample_result(std::uint64_t rng_seed = 5) {
  const Vocabulary v = testing::small_vocab(10, 4);
  const ModelParams p = testing::random_model(v, 8, 16, 3);
  GenerationQuery q;
  q.year = 1984;
  q.mxx = 8;
  q.rng_seed = rng_seed;
  return generate(q, p, v, testing::linear_vectors());
}

}  // namespace

TEST_CASE("MIDI: a single A4 quarter") {
  const auto d = testing::read_midi(to_midi(testing::melody({testing::ev("A4", "1")})));
  CHECK(d.format == 0);
  CHECK(d.tracks == 1);
  CHECK(d.division == kTicksPerQuarter);
  CHECK(d.tempo_usec == 666667);  // 90 bpm
  REQUIRE(d.notes.size() == 1);
  CHECK(d.notes[0].key == 69);
  CHECK(d.notes[0].on == 0);
  CHECK(d.notes[0].off == 480);
  CHECK(d.end_tick == 480);
}

TEST_CASE("MIDI: rests become gaps, repeated pitches stay separate, ticks accumulate") {
  const Melody m = testing::melody({testing::ev("C4", "1/2"), testing::ev("C4", "1/2"), testing::ev("rest", "1"),
                                    testing::ev("E4", "3/2"), testing::ev("G4", "1/3")});
  const auto d = testing::read_midi(to_midi(m, 120.0));
  CHECK(d.tempo_usec == 500000);
  REQUIRE(d.notes.size() == 4);
  CHECK(d.notes[0].on == 0);
  CHECK(d.notes[0].off == 240);
  CHECK(d.notes[1].on == 240);
  CHECK(d.notes[1].off == 480);
  CHECK(d.notes[2].key == 64);
  CHECK(d.notes[2].on == 960);
  CHECK(d.notes[2].off == 1680);
  CHECK(d.notes[3].off - d.notes[3].on == 160);
  CHECK(d.end_tick == 1840);

  CHECK_THROWS_AS(to_midi(Melody{}), DataError);
}

TEST_CASE("MIDI: total ticks equal the summed quarter lengths of a generated melody") {
  const GenerationResult r = sample_result();
  const auto d = testing::read_midi(to_midi(r.melody));
  const Rational total = r.melody.total_quarter_length();
  CHECK(d.end_tick == total.num() * 480 / total.den());
  std::size_t notes = 0;
  for (const auto& e : r.melody.events) notes += e.pitch.is_rest() ? 0 : 1;
  CHECK(d.notes.size() == notes);
}

TEST_CASE("MusicXML round trip over the bundled corpus") {
  const LoadedCorpus c = load_corpus(testing::data_dir() / "corpus");
  REQUIRE(!c.melodies.empty());
  for (const auto& m : c.melodies) {
    const Melody back = parse_musicxml(to_musicxml(m));
    CHECK(back == m);
  }
}

TEST_CASE("MusicXML round trip: barline splits, odd lengths and a 3-quarter melody") {
  const std::vector<Melody> cases = {
      testing::melody({testing::ev("C4", "1"), testing::ev("D4", "1"), testing::ev("E4", "1")}, "three"),
      testing::melody({testing::ev("C4", "3"), testing::ev("D4", "3"), testing::ev("rest", "5/2"), testing::ev("F#5", "1/2")}),
      testing::melody({testing::ev("C4", "1/3"), testing::ev("D4", "1/3"), testing::ev("E4", "1/3"), testing::ev("G4", "7/4")}),
      testing::melody({testing::ev("Bb3", "9"), testing::ev("C4", "1/5")}),
      testing::melody({testing::ev("rest", "1/8"), testing::ev("A4", "15/8")}, ""),
  };
  for (const auto& m : cases) {
    const std::string xml = to_musicxml(m);
    const Melody back = parse_musicxml(xml);
    CHECK(back.events == m.events);
    CHECK(back.source_id == m.source_id);
  }
  CHECK_THROWS_AS(to_musicxml(Melody{}), DataError);
}

TEST_CASE("MusicXML round trip over generated melodies") {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const GenerationResult r = sample_result(s);
    CHECK(parse_musicxml(to_musicxml(r.melody)) == r.melody);
  }
}

TEST_CASE("CSV shapes match the matrices") {
  const GenerationResult r = sample_result();
  const Vocabulary v = testing::small_vocab(10, 4);
  const auto att = split_lines(attention_csv(r));
  REQUIRE(att.size() == r.attention.size() + 1);
  CHECK(att[0].rfind("step,w0,w1", 0) == 0);
  for (const auto& line : att) CHECK(columns(line) == 1 + r.query.sql);
  const auto cand = split_lines(candidates_csv(r, v));
  REQUIRE(cand.size() == r.pitch_candidates.size() + 1);
  CHECK(cand[0].rfind("step,PAD,C4", 0) == 0);
  for (const auto& line : cand) CHECK(columns(line) == 1 + v.pitch_size());
}

TEST_CASE("query JSON round trip") {
  GenerationQuery q;
  q.year = 1999;
  q.seed = {testing::ev("A4", "1/2"), testing::ev("rest", "1/3")};
  q.mxx = 3;
  q.rng_seed = 77;
  q.duration_temperature = 0.25;
  CHECK(query_from_json(to_json(q)) == q);
  CHECK(to_json(q)["pitch_temperature"].is_null());
  CHECK_THROWS_AS(query_from_json(nlohmann::json::parse(R"({"year": 1})")), UsageError);
}

TEST_CASE("bundle files and a manifest that regenerates the same melody") {
  const Vocabulary v = testing::small_vocab(10, 4);
  const ModelParams p = testing::random_model(v, 8, 16, 3);
  const TemperatureVectors vectors = testing::linear_vectors();
  GenerationQuery q;
  q.year = 2004;
  q.rng_seed = 31;
  const GenerationResult r = generate(q, p, v, vectors);
  const auto dir = testing::temp_dir("bundle");
  const auto files = write_bundle(r, v, ExportContext{"c", "s", hex64(v.hash()), 90.0}, dir);
  REQUIRE(files.size() == 5);
  CHECK(files[0].filename() == "2004_31.mid");
  CHECK(files[4].filename() == "2004_31.manifest.json");
  for (const auto& f : files) CHECK(std::filesystem::file_size(f) > 0);

  const auto m = nlohmann::json::parse(read_file(files[4]));
  CHECK(m["format"] == "climatune-export");
  CHECK(m["vocab_hash"] == hex64(v.hash()));
  CHECK(m["attention"].size() == r.attention.size());
  const GenerationResult again = generate(query_from_json(m["query"]), p, v, vectors);
  CHECK(again.melody == r.melody);
  CHECK(melody_to_json(again.melody) == m["melody"]);
  CHECK(parse_musicxml(read_file(files[1])) == r.melody);
}

TEST_CASE("range export writes per-year bundles and the concatenation") {
  const Vocabulary v = testing::small_vocab(10, 4);
  const ModelParams p = testing::random_model(v, 8, 16, 3);
  GenerationQuery t;
  t.seed.clear();
  t.mxx = t.mxl = 4;
  const RangeResult range = generate_range(1990, 1992, t, p, v, testing::linear_vectors());
  const auto dir = testing::temp_dir("range");
  const auto files = write_range(range, v, ExportContext{}, dir);
  CHECK(files.size() == 3 * 5 + 2);
  CHECK(std::filesystem::exists(dir / "1990-1992_0.mid"));
  CHECK(parse_musicxml(read_file(dir / "1990-1992_0.musicxml")).events == range.concatenated.events);
}
