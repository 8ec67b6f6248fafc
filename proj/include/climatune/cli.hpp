#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "climatune/error.hpp"
#include "climatune/export.hpp"
#include "climatune/generation.hpp"
#include "climatune/training.hpp"

namespace climatune {

enum class Subcommand { generate, range, train, preprocess, serve, inspect };

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitModel = 4;
inline constexpr int kExitIo = 5;

int exit_code_for(ErrorKind kind);

/// Default data directory: $CLIMATUNE_DATA_DIR, else ./data.
std::filesystem::path default_data_dir();

/// Files under a data directory.
struct DataPaths {
  std::filesystem::path root;
  std::filesystem::path climate_csv() const { return root / "tokyo_tmax_monthly.csv"; }
  std::filesystem::path corpus_dir() const { return root / "corpus"; }
  std::filesystem::path temperatures() const { return root / "temperatures.json"; }
  std::filesystem::path vocab() const { return root / "vocab.json"; }
  std::filesystem::path checkpoint() const { return root / "model" / "climatune.ckpt"; }
};

struct CliInvocation {
  Subcommand command = Subcommand::generate;
  GenerationQuery query;

  // range
  int from_year = kFirstYear;
  int to_year = kFirstYear;

  // files
  std::filesystem::path data_dir;
  std::optional<std::filesystem::path> checkpoint;
  std::filesystem::path out_dir = "out";
  std::optional<std::filesystem::path> corpus_dir;
  std::optional<std::filesystem::path> climate_csv;
  double tempo_bpm = kDefaultTempoBpm;

  // train / preprocess
  TrainConfig train;
  bool augment = false;
  bool quiet = false;

  // serve
  std::string host = "127.0.0.1";
  int port = 8080;
  std::optional<std::filesystem::path> static_dir;

  std::filesystem::path checkpoint_path() const { return checkpoint.value_or(DataPaths{data_dir}.checkpoint()); }
};

/// Help text, or an error with the exit code to use.
struct Diagnostic {
  int exit_code = kExitUsage;
  std::string message;
};

using ParseOutcome = std::variant<CliInvocation, Diagnostic>;

/// Never throws. A leading flag (no subcommand) means `generate`.
ParseOutcome parse_args(const std::vector<std::string>& argv);

/// `[['A4'],[0.5]]`-style literal: a list of pitch names (bare or quoted
/// with ', " or `) and a list of quarter lengths (decimal or n/d) of equal
/// length. `[[],[]]` is the empty seed. Throws UsageError.
std::vector<NoteEvent> parse_seed_literal(std::string_view text);

/// Executes a parsed invocation and returns the process exit code.
int run(const CliInvocation& invocation, std::ostream& out, std::ostream& err);

/// parse_args + run, printing diagnostics.
int cli_main(int argc, char** argv);

}  // namespace climatune
