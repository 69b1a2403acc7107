#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "kronprec/deblur.hpp"
#include "kronprec/krylov.hpp"
#include "kronprec/regparam.hpp"

namespace kronprec::cli {

// Bad or contradictory configuration; the message names the offending key.
// Exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Filesystem trouble while reading or writing experiment files. Exit code 3.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flat experiment description shared by every verb. All values arrive as
// key=value text, from a config file or from --key flags, through apply_key,
// so parsing and validation live in one place and the two sources cannot
// drift. Range and cross-field checks run in validate() before any
// computation.
struct ExperimentConfig {
  std::string blur = "gaussian";
  int n = 32;
  double noise = 0.01;
  std::uint64_t seed = 1;
  int psf_size = 9;
  std::uint64_t psf_seed = 0;
  double psf_sigma = 2.0;
  double psf_radius = 3.0;
  int psf_length = 5;
  int psf_steps = 64;
  int psf_blob_count = 10;
  double psf_blob_sigma = 1.0;
  std::string fmt = "fp16";
  std::string solver = "pcg";
  std::string param = "opt";
  double omega = 1.0;
  double eta = 1.0;
  double lambda = 0.0;  // used when param = fixed
  // When set, the preconditioner is built at this lambda instead of the one
  // the parameter stage chose; the solve itself keeps the chosen lambda.
  std::optional<double> precond_lambda;
  int maxit = 50;
  double tol = 1e-8;
  std::string out = "out";
  bool include_fpcg = false;
  std::string sweep_key;
  std::vector<std::string> sweep_values;
};

// Sets one key from its text form. Unknown keys and unparseable values throw
// ConfigError naming the key.
void apply_key(ExperimentConfig& cfg, const std::string& key,
               const std::string& value);

// Flat key=value lines, '#' starts a comment, blank lines ignored, later
// assignments win.
void load_config_file(ExperimentConfig& cfg, const std::string& path);

// Cross-field checks shared by every verb; throws ConfigError.
void validate(const ExperimentConfig& cfg);

// Validated typed views of the string-valued fields.
BlurKind blur_kind(const ExperimentConfig& cfg);
PrecisionFormat precision(const ExperimentConfig& cfg);
PsfParams psf_params(const ExperimentConfig& cfg);

// Deterministic problem construction: PSF from the psf_* keys, exact blur
// operator, default test image, seeded noise.
TestProblem build_problem(const ExperimentConfig& cfg);

// Effective config as a JSON object; echoed into summaries for provenance.
nlohmann::json config_json(const ExperimentConfig& cfg);

// Reads a JSON file and checks its "schema" field against name/major;
// rejects missing schemas and unknown major versions.
nlohmann::json load_json(const std::filesystem::path& path,
                         const std::string& name, int major);

// What the parameter stage decided. For param = fixed only method and lambda
// are meaningful. A failed discrepancy search sets no_root and carries the
// diagnostic; the solve stage is then skipped.
struct Selection {
  std::string method;
  double lambda = 0.0;
  double objective_value = 0.0;
  double bracket_lo = 0.0;
  double bracket_hi = 0.0;
  bool flat_objective = false;
  double omega = 0.0;
  double eta = 0.0;
  double noise_norm = 0.0;
  bool no_root = false;
  std::string diagnostic;
};

struct RunOutcome {
  Selection selection;
  bool solved = false;  // false when the parameter search failed
  SolveResult result;
  int plateau = 0;
  double final_relative_error = 0.0;
};

// Full single-solver pipeline in memory: problem, one-term factorization,
// parameter choice, solve. Writes nothing.
RunOutcome run_single(const ExperimentConfig& cfg);

struct CompareOutcome {
  Selection selection;
  bool solved = false;
  SolveResult baseline;  // cgls
  SolveResult precond;   // pcg
  std::optional<SolveResult> flexible;
  WorkReport report;
  int plateau_flexible = 0;
};

// Same problem and chosen lambda for all solvers.
CompareOutcome run_compare(const ExperimentConfig& cfg);

struct DecomposeRow {
  int terms = 0;                  // exact Kronecker rank of the blur operator
  double rel_error = 0.0;         // one-term distance / operator norm
  double rel_error_rounded = 0.0;  // same with factors rounded to fmt
};

DecomposeRow decompose_row(const ExperimentConfig& cfg);

// Verbs. Each validates its config, writes files under cfg.out, and prints a
// one-line result. ConfigError / IoError / other exceptions map to exit
// codes 2 / 3 / 4 in dispatch; a failed parameter search is a recorded
// outcome, not an error.
void cmd_generate(const ExperimentConfig& cfg);
void cmd_decompose(const ExperimentConfig& cfg);
void cmd_solve(const ExperimentConfig& cfg);
void cmd_compare(const ExperimentConfig& cfg);
void cmd_sweep(const ExperimentConfig& cfg);

// Full command line: parse argv, build the config (file first, then flag
// overrides), route to the verb, map exceptions to exit codes.
int dispatch(int argc, const char* const* argv);

}  // namespace kronprec::cli
