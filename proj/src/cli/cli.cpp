#include "climatune/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <sstream>

#include "climatune/error.hpp"
#include "climatune/hash.hpp"
#include "climatune/service.hpp"

namespace climatune {

namespace fs = std::filesystem;

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::usage: return kExitUsage;
    case ErrorKind::data: return kExitData;
    case ErrorKind::model: return kExitModel;
    case ErrorKind::io: return kExitIo;
  }
  return 1;
}

fs::path default_data_dir() {
  if (const char* env = std::getenv("CLIMATUNE_DATA_DIR"); env && *env) return env;
  return "data";
}

namespace {

constexpr const char* kDefaultSeedText = "[['A4'],[1]]";
constexpr const char* kRangeSeedText = "[[],[]]";
constexpr std::size_t kRangeLength = 4;

std::string fixed6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

/// Listing-style single-dash long flags become CLI11 long options.
std::vector<std::string> normalize_flags(std::vector<std::string> args) {
  static const std::pair<std::string, std::string> aliases[] = {
      {"-mxx", "--max-extra-notes"}, {"-mxl", "--max-length"}, {"-sql", "--sequence-length"}};
  for (auto& a : args) {
    for (const auto& [from, to] : aliases) {
      if (a == from) {
        a = to;
      } else if (a.rfind(from + "=", 0) == 0) {
        a = to + a.substr(from.size());
      }
    }
  }
  return args;
}

struct GenerationFlags {
  std::string seed_text;
  double pitch_t = -1.0;
  double duration_t = -1.0;
  CLI::Option* seed = nullptr;
  CLI::Option* mxx = nullptr;
  CLI::Option* mxl = nullptr;
  CLI::Option* pitch = nullptr;
  CLI::Option* duration = nullptr;
};

void add_paths(CLI::App& app, CliInvocation& inv, bool with_checkpoint) {
  app.add_option("--data-dir", inv.data_dir, "Data directory (default $CLIMATUNE_DATA_DIR or ./data)");
  if (with_checkpoint) {
    app.add_option("--checkpoint", inv.checkpoint, "Model checkpoint (default <data-dir>/model/climatune.ckpt)");
  }
}

void add_generation_flags(CLI::App& app, CliInvocation& inv, GenerationFlags& f, bool range) {
  f.seed = app.add_option("-s,--seed", f.seed_text,
                          "Priming seed: [[pitches],[quarter lengths]], e.g. [['A4'],[0.5]]; [[],[]] for none")
               ->default_str(range ? kRangeSeedText : kDefaultSeedText);
  f.mxx = app.add_option("--max-extra-notes", inv.query.mxx, "Maximum new events to sample (-mxx)")
              ->check(CLI::PositiveNumber);
  f.mxl = app.add_option("--max-length", inv.query.mxl, "Maximum total events including the seed (-mxl)")
              ->check(CLI::PositiveNumber);
  app.add_option("--sequence-length", inv.query.sql, "Model window length; must match the checkpoint (-sql)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_option("--rng-seed", inv.query.rng_seed, "Sampling RNG seed")->capture_default_str();
  f.pitch = app.add_option("--pitch-temperature", f.pitch_t, "Override the year's pitch temperature [0,1]")
                ->check(CLI::Range(0.0, 1.0));
  f.duration = app.add_option("--duration-temperature", f.duration_t, "Override the year's duration temperature [0,1]")
                   ->check(CLI::Range(0.0, 1.0));
  app.add_option("-o,--out-dir", inv.out_dir, "Output directory")->capture_default_str();
  app.add_option("--tempo", inv.tempo_bpm, "MIDI tempo in bpm")->check(CLI::PositiveNumber)->capture_default_str();
  add_paths(app, inv, true);
}

void finish_generation_flags(CliInvocation& inv, const GenerationFlags& f, bool range) {
  if (f.seed->count() > 0) {
    inv.query.seed = parse_seed_literal(f.seed_text);
  } else if (range) {
    inv.query.seed.clear();
  }
  if (f.pitch->count() > 0) inv.query.pitch_temperature = f.pitch_t;
  if (f.duration->count() > 0) inv.query.duration_temperature = f.duration_t;
  if (inv.query.mxl < inv.query.seed.size()) {
    throw UsageError("--max-length " + std::to_string(inv.query.mxl) + " is shorter than the " +
                     std::to_string(inv.query.seed.size()) + "-event seed; raise -mxl or shorten the seed");
  }
}

void check_year(int year, const char* flag) {
  if (year < kFirstYear || year > kLastYear) {
    throw UsageError(std::string(flag) + " " + std::to_string(year) + " is outside the data; use a year between " +
                     std::to_string(kFirstYear) + " and " + std::to_string(kLastYear));
  }
}

Vocabulary load_vocab_file(const fs::path& path) {
  if (!fs::exists(path)) {
    throw DataError("missing vocabulary " + path.string() + "; run `climatune preprocess` first");
  }
  return Vocabulary::from_json(read_file(path));
}

struct Loaded {
  TemperatureVectors vectors;
  std::string snapshot_hash;
  Vocabulary vocab;
  Checkpoint checkpoint;
  std::string checkpoint_hash;
};

Loaded load_for_generation(const CliInvocation& inv) {
  const DataPaths paths{inv.data_dir};
  if (!fs::exists(paths.temperatures())) {
    throw DataError("missing climate snapshot " + paths.temperatures().string() +
                    "; run `climatune preprocess` first");
  }
  Loaded l;
  const std::string snapshot = read_file(paths.temperatures());
  l.vectors = TemperatureVectors::from_json(snapshot);
  l.snapshot_hash = hex64(fnv1a64(snapshot));
  l.vocab = load_vocab_file(paths.vocab());

  const fs::path ck = inv.checkpoint_path();
  if (!fs::exists(ck)) throw ModelError("missing checkpoint " + ck.string() + "; run `climatune train` first");
  const std::string bytes = read_file(ck);
  l.checkpoint = parse_checkpoint(bytes, l.vocab.hash());
  l.checkpoint_hash = hex64(fnv1a64(bytes));
  return l;
}

ExportContext context_of(const Loaded& l, const CliInvocation& inv) {
  return ExportContext{l.checkpoint_hash, l.snapshot_hash, hex64(l.vocab.hash()), inv.tempo_bpm};
}

int run_generate(const CliInvocation& inv, std::ostream& out) {
  const Loaded l = load_for_generation(inv);
  const GenerationResult r = generate(inv.query, l.checkpoint.params, l.vocab, l.vectors);
  for (const auto& p : write_bundle(r, l.vocab, context_of(l, inv), inv.out_dir)) out << p.string() << '\n';
  out << "year " << inv.query.year << ": T_pitch=" << fixed6(r.pitch_temperature)
      << " T_dur=" << fixed6(r.duration_temperature) << ", " << r.melody.size() << " events\n";
  return kExitOk;
}

int run_range(const CliInvocation& inv, std::ostream& out) {
  const Loaded l = load_for_generation(inv);
  const RangeResult r = generate_range(inv.from_year, inv.to_year, inv.query, l.checkpoint.params, l.vocab, l.vectors);
  for (const auto& p : write_range(r, l.vocab, context_of(l, inv), inv.out_dir)) out << p.string() << '\n';
  for (const auto& g : r.results) {
    out << "year " << g.query.year << ": T_pitch=" << fixed6(g.pitch_temperature)
        << " T_dur=" << fixed6(g.duration_temperature) << ", " << g.melody.size() << " events\n";
  }
  return kExitOk;
}

LoadedCorpus load_corpus_for(const CliInvocation& inv) {
  const fs::path dir = inv.corpus_dir.value_or(DataPaths{inv.data_dir}.corpus_dir());
  return load_corpus(dir, CorpusOptions{0, inv.augment});
}

int run_preprocess(const CliInvocation& inv, std::ostream& out, std::ostream& err) {
  const DataPaths paths{inv.data_dir};
  const fs::path csv = inv.climate_csv.value_or(paths.climate_csv());
  if (!fs::exists(csv)) throw DataError("missing climate table " + csv.string());
  const ClimateTable table = load_climate_csv(csv);
  const TemperatureVectors vectors = build_temperature_vectors(table);
  write_file(paths.temperatures(), vectors.to_json());
  out << paths.temperatures().string() << '\n';

  const LoadedCorpus corpus = load_corpus_for(inv);
  for (const auto& w : corpus.warnings) err << "warning: " << w << '\n';
  const Vocabulary vocab = build_vocab(corpus.melodies);
  write_file(paths.vocab(), vocab.to_json());
  out << paths.vocab().string() << '\n';
  out << vectors.years.size() << " years (" << vectors.first_year() << "-" << vectors.last_year() << "), "
      << corpus.melodies.size() << " melodies, pitch vocab " << vocab.pitch_size() << ", duration vocab "
      << vocab.duration_size() << ", vocab hash " << hex64(vocab.hash()) << '\n';
  return kExitOk;
}

int run_train(const CliInvocation& inv, std::ostream& out, std::ostream& err) {
  const LoadedCorpus corpus = load_corpus_for(inv);
  for (const auto& w : corpus.warnings) err << "warning: " << w << '\n';
  const Vocabulary vocab = build_vocab(corpus.melodies);
  const auto windows = windowize(corpus.melodies, vocab, inv.train.sql);
  const Split split = split_train_val(windows, inv.train.validation_fraction, inv.train.seed);
  out << corpus.melodies.size() << " melodies, " << windows.size() << " windows (" << split.train.size()
      << " train / " << split.validation.size() << " validation)\n";

  EpochCallback progress;
  if (!inv.quiet) {
    progress = [&out](std::size_t epoch, double tl, double vl) {
      out << "epoch " << epoch << " train " << fixed6(tl) << " val " << fixed6(vl) << std::endl;
    };
  }
  TrainResult result = train(split, vocab, inv.train, progress);

  Checkpoint ck{std::move(result.params), vocab.hash(), vocab.to_json(), inv.train, result.history};
  const fs::path path = inv.checkpoint_path();
  save_checkpoint(ck, path);
  const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  write_file(dir / "history.json", to_json(ck.history).dump(2) + "\n");
  write_file(dir / "vocab.json", vocab.to_json());
  out << path.string() << '\n' << (dir / "history.json").string() << '\n' << (dir / "vocab.json").string() << '\n';
  out << "best epoch " << ck.history.best_epoch << " (val " << fixed6(ck.history.best_val_loss()) << "), stopped at "
      << ck.history.stopped_epoch << (ck.history.stopped_early ? " by early stopping" : "") << '\n';
  return kExitOk;
}

int run_inspect(const CliInvocation& inv, std::ostream& out) {
  const fs::path path = inv.checkpoint_path();
  if (!fs::exists(path)) throw ModelError("missing checkpoint " + path.string() + "; run `climatune train` first");
  const std::string bytes = read_file(path);
  const Checkpoint ck = parse_checkpoint(bytes);
  const ModelConfig& c = ck.params.config;
  out << "checkpoint " << path.string() << " (hash " << hex64(fnv1a64(bytes)) << ")\n";
  out << "pitch vocab " << c.pitch_vocab << ", duration vocab " << c.duration_vocab << ", vocab hash "
      << hex64(ck.vocab_hash) << '\n';
  out << "hidden " << c.hidden << ", sql " << c.sql << ", embeddings " << c.pitch_embed << "+" << c.duration_embed
      << ", parameters " << ck.params.parameter_count() << '\n';
  for (const auto& [name, m] : ck.params.tensors()) {
    out << "  " << name << " " << m->rows() << "x" << m->cols() << '\n';
  }
  out << "best epoch " << ck.history.best_epoch << ", stopped epoch " << ck.history.stopped_epoch << ", best val loss "
      << fixed6(ck.history.best_val_loss()) << '\n';
  return kExitOk;
}

int run_serve(const CliInvocation& inv, std::ostream& out, std::ostream& err) {
  auto state = std::make_shared<const ServiceState>(load_service_state(inv.data_dir, inv.checkpoint_path()));
  if (!state->temperatures) err << "warning: " << state->data_problem << '\n';
  if (!state->checkpoint) err << "warning: " << state->model_problem << '\n';
  HttpService service(state, ServeOptions{inv.host, inv.port, inv.static_dir});
  const int port = service.bind();
  out << "listening on http://" << inv.host << ":" << port << std::endl;
  service.listen();
  return kExitOk;
}

}  // namespace

ParseOutcome parse_args(const std::vector<std::string>& argv_in) {
  std::vector<std::string> args(argv_in.begin() + (argv_in.empty() ? 0 : 1), argv_in.end());
  if (args.empty()) {
    return Diagnostic{kExitUsage, "missing subcommand; run `climatune --help` for usage"};
  }
  if (args.front().size() > 1 && args.front()[0] == '-' && args.front() != "--help" && args.front() != "-h" &&
      args.front() != "--version") {
    args.insert(args.begin(), "generate");
  }
  args = normalize_flags(std::move(args));

  CliInvocation inv;
  inv.data_dir = default_data_dir();

  CLI::App app{"Climate-data sonification: sample melodies whose randomness follows Tokyo's temperature record",
               "climatune"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::simple);

  GenerationFlags gen_flags, range_flags;
  auto* gen = app.add_subcommand("generate", "Generate one melody for a year (default when the first argument is a flag)");
  gen->add_option("-y,--year", inv.query.year, "Year to sonify (1876-2021)")->required();
  add_generation_flags(*gen, inv, gen_flags, false);
  gen->get_option("--max-extra-notes")->default_str(std::to_string(kDefaultMaxExtraNotes));
  gen->get_option("--max-length")->default_str(std::to_string(kDefaultMaxLength));

  auto* range = app.add_subcommand("range", "Generate one melody per year over a range and concatenate them");
  std::vector<int> range_years;
  range->add_option("years", range_years, "FROM TO (alternative to --from-year/--to-year)")->expected(0, 2);
  auto* from_opt = range->add_option("--from-year", inv.from_year, "First year");
  auto* to_opt = range->add_option("--to-year", inv.to_year, "Last year");
  std::size_t range_length = kRangeLength;
  auto* length_opt = range->add_option("--length", range_length, "Events per year (sets -mxl, and -mxx unless given)")
                         ->check(CLI::PositiveNumber)
                         ->capture_default_str();
  add_generation_flags(*range, inv, range_flags, true);

  auto* train_cmd = app.add_subcommand("train", "Train the model on the melody corpus");
  train_cmd->add_option("--corpus-dir", inv.corpus_dir, "Corpus directory (default <data-dir>/corpus)");
  train_cmd->add_option("--sql,--sequence-length", inv.train.sql, "Window length")->capture_default_str();
  train_cmd->add_option("--hidden", inv.train.hidden, "LSTM hidden units")->capture_default_str();
  train_cmd->add_option("--pitch-embed", inv.train.pitch_embed, "Pitch embedding size")->capture_default_str();
  train_cmd->add_option("--duration-embed", inv.train.duration_embed, "Duration embedding size")->capture_default_str();
  train_cmd->add_option("--epochs", inv.train.max_epochs, "Maximum epochs")->capture_default_str();
  train_cmd->add_option("--patience", inv.train.patience, "Early-stopping patience")->capture_default_str();
  train_cmd->add_option("--min-delta", inv.train.min_delta, "Improvement needed to reset patience")
      ->capture_default_str();
  train_cmd->add_option("--lr", inv.train.learning_rate, "Learning rate")->capture_default_str();
  std::string optimizer = "adam";
  train_cmd->add_option("--optimizer", optimizer, "adam or momentum")
      ->check(CLI::IsMember({"adam", "momentum"}))
      ->capture_default_str();
  train_cmd->add_option("--batch-size", inv.train.batch_size, "Examples per update")->capture_default_str();
  train_cmd->add_option("--validation-fraction", inv.train.validation_fraction, "Share of windows held out")
      ->capture_default_str();
  train_cmd->add_option("--seed", inv.train.seed, "RNG seed for init, split and shuffling")->capture_default_str();
  train_cmd->add_option("--out", inv.checkpoint, "Checkpoint path (default <data-dir>/model/climatune.ckpt)");
  train_cmd->add_flag("--augment", inv.augment, "Add all twelve transpositions of every melody");
  train_cmd->add_flag("-q,--quiet", inv.quiet, "No per-epoch output");
  train_cmd->add_option("--data-dir", inv.data_dir, "Data directory (default $CLIMATUNE_DATA_DIR or ./data)");

  auto* pre = app.add_subcommand("preprocess", "Build temperatures.json and vocab.json from the raw data");
  pre->add_option("--climate-csv", inv.climate_csv, "Monthly table (default <data-dir>/tokyo_tmax_monthly.csv)");
  pre->add_option("--corpus-dir", inv.corpus_dir, "Corpus directory (default <data-dir>/corpus)");
  pre->add_flag("--augment", inv.augment, "Build the vocabulary over all twelve transpositions");
  add_paths(*pre, inv, false);

  auto* serve = app.add_subcommand("serve", "Serve the HTTP API (and optionally the explorer UI)");
  serve->add_option("--port", inv.port, "TCP port")->capture_default_str();
  serve->add_option("--host", inv.host, "Bind address")->capture_default_str();
  serve->add_option("--static-dir", inv.static_dir, "Directory served at /");
  add_paths(*serve, inv, true);

  auto* inspect = app.add_subcommand("inspect", "Print checkpoint tensors, vocabulary sizes and training summary");
  add_paths(*inspect, inv, true);

  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, er;
    const int code = app.exit(e, o, er);
    if (code == 0) return Diagnostic{kExitOk, o.str()};
    const std::string msg = e.what();
    const std::string sub = app.get_subcommands().empty() ? "" : app.get_subcommands().front()->get_name() + " ";
    return Diagnostic{kExitUsage, msg + "; run `climatune " + sub + "--help` for the accepted flags"};
  }

  try {
    if (gen->parsed()) {
      inv.command = Subcommand::generate;
      check_year(inv.query.year, "--year");
      finish_generation_flags(inv, gen_flags, false);
    } else if (range->parsed()) {
      inv.command = Subcommand::range;
      if (!range_years.empty()) {
        if (range_years.size() != 2 || from_opt->count() > 0 || to_opt->count() > 0) {
          throw UsageError("give the range either as FROM TO or with --from-year/--to-year");
        }
        inv.from_year = range_years[0];
        inv.to_year = range_years[1];
      } else if (from_opt->count() == 0 || to_opt->count() == 0) {
        throw UsageError("range needs both years, e.g. `climatune range 1876 1886`");
      }
      check_year(inv.from_year, "--from-year");
      check_year(inv.to_year, "--to-year");
      if (inv.from_year > inv.to_year) throw UsageError("--from-year must not be after --to-year");
      if (range_flags.mxl->count() == 0 || length_opt->count() > 0) inv.query.mxl = range_length;
      if (range_flags.mxx->count() == 0) inv.query.mxx = inv.query.mxl;
      finish_generation_flags(inv, range_flags, true);
    } else if (train_cmd->parsed()) {
      inv.command = Subcommand::train;
      inv.train.optimizer = optimizer == "momentum" ? Optimizer::momentum : Optimizer::adam;
      inv.train.validate();
    } else if (pre->parsed()) {
      inv.command = Subcommand::preprocess;
    } else if (serve->parsed()) {
      inv.command = Subcommand::serve;
      if (inv.port < 0 || inv.port > 65535) throw UsageError("--port must be in 0-65535");
    } else {
      inv.command = Subcommand::inspect;
    }
  } catch (const Error& e) {
    return Diagnostic{exit_code_for(e.kind()), e.what()};
  } catch (const std::exception& e) {
    return Diagnostic{kExitUsage, e.what()};
  }
  return inv;
}

int run(const CliInvocation& inv, std::ostream& out, std::ostream& err) {
  try {
    switch (inv.command) {
      case Subcommand::generate: return run_generate(inv, out);
      case Subcommand::range: return run_range(inv, out);
      case Subcommand::train: return run_train(inv, out, err);
      case Subcommand::preprocess: return run_preprocess(inv, out, err);
      case Subcommand::serve: return run_serve(inv, out, err);
      case Subcommand::inspect: return run_inspect(inv, out);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  }
  return kExitUsage;
}

int cli_main(int argc, char** argv) {
  const std::vector<std::string> args(argv, argv + argc);
  const ParseOutcome parsed = parse_args(args);
  if (const auto* d = std::get_if<Diagnostic>(&parsed)) {
    (d->exit_code == kExitOk ? std::cout : std::cerr) << d->message << (d->message.ends_with('\n') ? "" : "\n");
    return d->exit_code;
  }
  return run(std::get<CliInvocation>(parsed), std::cout, std::cerr);
}

}  // namespace climatune
