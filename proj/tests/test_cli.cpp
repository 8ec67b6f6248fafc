#include <doctest.h>

#include <sstream>

#include "climatune/cli.hpp"
#include "support.hpp"

using namespace climatune;

namespace {

ParseOutcome parse(std::vector<std::string> args) {
  args.insert(args.begin(), "climatune");
  return parse_args(args);
}

CliInvocation ok(std::vector<std::string> args) {
  const ParseOutcome p = parse(std::move(args));
  if (const auto* d = std::get_if<Diagnostic>(&p)) FAIL("unexpected diagnostic: " << d->message);
  return std::get<CliInvocation>(p);
}

Diagnostic diag(std::vector<std::string> args) {
  const ParseOutcome p = parse(std::move(args));
  REQUIRE(std::holds_alternative<Diagnostic>(p));
  return std::get<Diagnostic>(p);
}

struct Ran {
  int code;
  std::string out, err;
};

Ran run_args(std::vector<std::string> args) {
  const ParseOutcome p = parse(std::move(args));
  if (const auto* d = std::get_if<Diagnostic>(&p)) return {d->exit_code, "", d->message};
  std::ostringstream out, err;
  const int code = run(std::get<CliInvocation>(p), out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

TEST_CASE("seed literal grammar") {
  auto s = parse_seed_literal("[[`A4'],[0.5]]");
  REQUIRE(s.size() == 1);
  CHECK(s[0] == testing::ev("A4", "1/2"));
  CHECK(parse_seed_literal("[[],[]]").empty());
  CHECK(parse_seed_literal(" [ [ 'C#4' , \"rest\" ] , [ 1/3 , 2 ] ] ").size() == 2);
  CHECK(parse_seed_literal("[[Bb3],[1.5]]")[0] == testing::ev("Bb3", "3/2"));
  for (const char* bad : {"", "[[A4],[1,2]]", "[[A4]]", "[[A4],[0]]", "[[H4],[1]]", "[[A4],[1]] x", "[[`A4],[1]]",
                          "[[A4],[-1]]", "[[A4],[1/0]]"}) {
    CAPTURE(std::string(bad));
    CHECK_THROWS_AS(parse_seed_literal(bad), UsageError);
  }
  try {
    parse_seed_literal("[[A4],[1,2]]");
  } catch (const UsageError& e) {
    CHECK(std::string(e.what()).find("1 pitch") != std::string::npos);
  }
}

TEST_CASE("the example invocation with single-dash long flags") {
  const CliInvocation inv = ok({"-y", "1984", "-s", "[[`A4'],[0.5]]", "-mxx", "8", "-mxl", "16", "-sql", "16"});
  CHECK(inv.command == Subcommand::generate);
  CHECK(inv.query.year == 1984);
  REQUIRE(inv.query.seed.size() == 1);
  CHECK(inv.query.seed[0] == testing::ev("A4", "1/2"));
  CHECK(inv.query.mxx == 8);
  CHECK(inv.query.mxl == 16);
  CHECK(inv.query.sql == 16);
  CHECK(inv.query.new_event_count() == 8);

  const CliInvocation same = ok({"generate", "--year", "1984", "--seed", "[[`A4'],[0.5]]", "--max-extra-notes", "8"});
  CHECK(same.query == inv.query);
}

TEST_CASE("defaults: A4 quarter seed, 16-event cap, empty seed and override flags") {
  const CliInvocation d = ok({"-y", "2004"});
  CHECK(d.query.seed == default_seed());
  CHECK(d.query.mxx == kDefaultMaxExtraNotes);
  CHECK(d.query.mxl == 16);
  CHECK(d.query.new_event_count() == 15);

  const CliInvocation empty = ok({"-y", "2021", "-s", "[[],[]]"});
  CHECK(empty.query.seed.empty());
  CHECK(empty.query.new_event_count() == 16);

  const CliInvocation capped = ok({"-y", "2004", "-mxx", "32"});
  CHECK(capped.query.new_event_count() == 15);

  const CliInvocation t = ok({"-y", "1950", "--pitch-temperature", "0.3", "--rng-seed", "9"});
  CHECK(t.query.pitch_temperature == 0.3);
  CHECK(!t.query.duration_temperature);
  CHECK(t.query.rng_seed == 9);
}

TEST_CASE("usage errors carry exit code 2 and a remedy") {
  const Diagnostic year = diag({"-y", "1800"});
  CHECK(year.exit_code == kExitUsage);
  CHECK(year.message.find("1876") != std::string::npos);
  CHECK(diag({"generate"}).exit_code == kExitUsage);  // -y is required
  CHECK(diag({"-y", "1984", "-s", "[[A4],[1,2]]"}).exit_code == kExitUsage);
  CHECK(diag({"-y", "1984", "-s", "[[A4, B4],[1, 1]]", "-mxl", "1"}).exit_code == kExitUsage);
  CHECK(diag({"-y", "1984", "-mxx", "0"}).exit_code == kExitUsage);
  CHECK(diag({"-y", "1984", "--pitch-temperature", "1.5"}).exit_code == kExitUsage);
  CHECK(diag({"-y", "1984", "--bogus"}).message.find("--help") != std::string::npos);
  CHECK(diag({"frobnicate"}).exit_code == kExitUsage);
  CHECK(diag({}).exit_code == kExitUsage);
  CHECK(diag({"train", "--patience", "0"}).exit_code == kExitUsage);
  CHECK(diag({"train", "--optimizer", "sgd"}).exit_code == kExitUsage);
  CHECK(diag({"range", "1990", "1980"}).exit_code == kExitUsage);
  CHECK(diag({"serve", "--port", "70000"}).exit_code == kExitUsage);
}

TEST_CASE("range flags") {
  const CliInvocation r = ok({"range", "1876", "1886"});
  CHECK(r.command == Subcommand::range);
  CHECK(r.from_year == 1876);
  CHECK(r.to_year == 1886);
  CHECK(r.query.mxl == 4);
  CHECK(r.query.mxx == 4);
  CHECK(r.query.seed.empty());
  const CliInvocation f = ok({"range", "--from-year", "2011", "--to-year", "2021", "--length", "6"});
  CHECK(f.from_year == 2011);
  CHECK(f.query.new_event_count() == 6);
}

TEST_CASE("help documents the defaults") {
  const Diagnostic top = diag({"--help"});
  CHECK(top.exit_code == kExitOk);
  CHECK(top.message.find("generate") != std::string::npos);
  const Diagnostic gen = diag({"generate", "--help"});
  CHECK(gen.exit_code == kExitOk);
  for (const char* needle : {"--max-extra-notes", "-mxx", "16", "A4", "--rng-seed", "--pitch-temperature"}) {
    CAPTURE(needle);
    CHECK(gen.message.find(needle) != std::string::npos);
  }
  const Diagnostic tr = diag({"train", "--help"});
  for (const char* needle : {"--patience", "10", "--hidden", "256", "--lr"}) {
    CAPTURE(needle);
    CHECK(tr.message.find(needle) != std::string::npos);
  }
}

TEST_CASE("parse_args never throws on arbitrary token sequences") {
  const std::vector<std::string> pool = {"generate", "range", "train", "serve", "inspect", "preprocess", "-y", "--year",
                                         "1984", "-1", "99999999999999999999", "-s", "[[A4],[1]]", "[[", "-mxx", "-mxl",
                                         "-sql", "--help", "--port", "abc", "0", "--lr", "nan", "--", "-", "", "=",
                                         "--seed=3", "-yy", "1876", "2021", "--length", "--data-dir", "/nonexistent"};
  Rng rng(2024);
  std::size_t parsed = 0;
  for (int trial = 0; trial < 3000; ++trial) {
    std::vector<std::string> args;
    const auto n = rng.below(7);
    for (std::uint64_t i = 0; i < n; ++i) args.push_back(pool[rng.below(pool.size())]);
    ParseOutcome p{Diagnostic{}};
    CHECK_NOTHROW(p = parse(args));
    if (const auto* d = std::get_if<Diagnostic>(&p)) {
      CHECK((d->exit_code == kExitOk || d->exit_code == kExitUsage || d->exit_code == kExitData));
      CHECK(!d->message.empty());
    } else {
      ++parsed;
    }
  }
  CHECK(parsed > 0);
}

TEST_CASE("run: missing artifacts give guidance and distinct exit codes") {
  const auto empty = testing::temp_dir("cli_empty");
  const Ran no_data = run_args({"-y", "1984", "--data-dir", empty.string()});
  CHECK(no_data.code == kExitData);
  CHECK(no_data.err.find("climatune preprocess") != std::string::npos);

  const auto dir = testing::temp_dir("cli_run");
  const std::string data = testing::data_dir().string();
  const Ran pre = run_args({"preprocess", "--data-dir", dir.string(), "--climate-csv", data + "/tokyo_tmax_monthly.csv",
                            "--corpus-dir", data + "/corpus"});
  REQUIRE(pre.code == kExitOk);
  CHECK(std::filesystem::exists(dir / "temperatures.json"));
  CHECK(std::filesystem::exists(dir / "vocab.json"));

  const Ran no_model = run_args({"-y", "1984", "--data-dir", dir.string()});
  CHECK(no_model.code == kExitModel);
  CHECK(no_model.err.find("climatune train") != std::string::npos);

  const Ran trained = run_args({"train", "--data-dir", dir.string(), "--corpus-dir", data + "/corpus", "--hidden", "6", "--pitch-embed", "3",
                                "--duration-embed", "2", "--epochs", "1", "-q"});
  INFO(trained.err);
  REQUIRE(trained.code == kExitOk);
  CHECK(std::filesystem::exists(dir / "model" / "climatune.ckpt"));

  const auto out = dir / "out";
  const Ran gen = run_args({"-y", "1984", "-s", "[[`A4'],[0.5]]", "-mxx", "8", "-mxl", "16", "-sql", "16",
                            "--data-dir", dir.string(), "-o", out.string()});
  REQUIRE(gen.code == kExitOk);
  std::size_t files = 0;
  for (const auto& e : std::filesystem::directory_iterator(out)) files += e.is_regular_file() ? 1 : 0;
  CHECK(files == 5);
  CHECK(gen.out.find("9 events") != std::string::npos);
  const Melody back = parse_musicxml(read_file(out / "1984_0.musicxml"));
  CHECK(back.size() == 9);
  CHECK(back.events[0] == testing::ev("A4", "1/2"));

  const Ran oov = run_args({"-y", "1984", "-s", "[[C9],[1]]", "--data-dir", dir.string(), "-o", out.string()});
  CHECK(oov.code == kExitData);
  CHECK(oov.err.find("C9") != std::string::npos);

  const Ran wrong_sql = run_args({"-y", "1984", "-sql", "8", "--data-dir", dir.string(), "-o", out.string()});
  CHECK(wrong_sql.code == kExitModel);

  std::string bytes = read_file(dir / "model" / "climatune.ckpt");
  bytes.back() = static_cast<char>(bytes.back() ^ 1);
  write_file(dir / "model" / "climatune.ckpt", bytes);
  const Ran corrupt = run_args({"-y", "1984", "--data-dir", dir.string(), "-o", out.string()});
  CHECK(corrupt.code == kExitModel);
  CHECK(corrupt.err.find("corrupt") != std::string::npos);
}
