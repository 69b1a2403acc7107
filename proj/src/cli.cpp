#include "kronprec/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cctype>
#include <climits>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <utility>

#include "kronprec/factor.hpp"
#include "kronprec/kron.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace kronprec::cli {

namespace {

std::string trim(const std::string& s) {
  auto issp = [](unsigned char c) { return std::isspace(c) != 0; };
  auto b = s.begin();
  auto e = s.end();
  while (b != e && issp(*b)) ++b;
  while (e != b && issp(*(e - 1))) --e;
  return std::string(b, e);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const char* want) {
  throw ConfigError("config key " + key + ": cannot parse \"" + value +
                    "\" as " + want);
}

double parse_double_value(const std::string& key, const std::string& value) {
  const std::string t = trim(value);
  if (t.empty()) bad_value(key, value, "a number");
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size()) bad_value(key, value, "a number");
  if (!std::isfinite(v)) bad_value(key, value, "a finite number");
  return v;
}

int parse_int_value(const std::string& key, const std::string& value) {
  const std::string t = trim(value);
  if (t.empty()) bad_value(key, value, "an integer");
  char* end = nullptr;
  const long v = std::strtol(t.c_str(), &end, 10);
  if (end != t.c_str() + t.size()) bad_value(key, value, "an integer");
  if (v < INT_MIN || v > INT_MAX) bad_value(key, value, "an integer in range");
  return int(v);
}

std::uint64_t parse_u64_value(const std::string& key,
                              const std::string& value) {
  const std::string t = trim(value);
  if (t.empty() || t[0] == '-') bad_value(key, value, "a nonnegative integer");
  char* end = nullptr;
  const unsigned long long v = std::strtoull(t.c_str(), &end, 10);
  if (end != t.c_str() + t.size()) bad_value(key, value, "a nonnegative integer");
  return std::uint64_t(v);
}

bool parse_bool_value(const std::string& key, const std::string& value) {
  const std::string t = trim(value);
  if (t == "1" || t == "true") return true;
  if (t == "0" || t == "false") return false;
  bad_value(key, value, "a boolean (0/1/true/false)");
}

std::vector<std::string> split_values(const std::string& key,
                                      const std::string& value) {
  std::vector<std::string> items;
  std::string cur;
  for (char c : value) {
    if (c == ',') {
      items.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  items.push_back(trim(cur));
  if (items.size() == 1 && items[0].empty()) return {};
  for (const auto& it : items)
    if (it.empty())
      throw ConfigError("config key " + key + ": empty item in \"" + value +
                        "\"");
  return items;
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string num(int v) { return std::to_string(v); }

// RFC 4180: CRLF rows, cells quoted when they contain a comma, a quote, or a
// line break.
class CsvFile {
 public:
  CsvFile(const fs::path& path, const std::vector<std::string>& header)
      : out_(path, std::ios::binary), path_(path) {
    if (!out_) throw IoError("cannot write " + path.string());
    row(header);
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << quote(cells[i]);
    }
    out_ << "\r\n";
    if (!out_) throw IoError("short write to " + path_.string());
  }

 private:
  static std::string quote(const std::string& cell) {
    if (cell.find_first_of(",\"\r\n") == std::string::npos) return cell;
    std::string q = "\"";
    for (char c : cell) {
      if (c == '"') q += '"';
      q += c;
    }
    q += '"';
    return q;
  }

  std::ofstream out_;
  fs::path path_;
};

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << "\n";
  if (!out) throw IoError("short write to " + path.string());
}

json selection_json(const Selection& sel) {
  json j;
  j["method"] = sel.method;
  j["no_root"] = sel.no_root;
  if (sel.no_root) {
    j["diagnostic"] = sel.diagnostic;
    return j;
  }
  j["lambda"] = sel.lambda;
  if (sel.method == "fixed") return j;
  j["objective_value"] = sel.objective_value;
  j["bracket_lo"] = sel.bracket_lo;
  j["bracket_hi"] = sel.bracket_hi;
  j["flat_objective"] = sel.flat_objective;
  if (sel.method == "wgcv") j["omega"] = sel.omega;
  if (sel.method == "discrepancy") {
    j["eta"] = sel.eta;
    j["noise_norm"] = sel.noise_norm;
  }
  return j;
}

json solver_json(const std::string& name, const SolveResult& r, int plateau) {
  const ConvergenceHistory& h = r.history;
  json j;
  j["name"] = name;
  j["iterations"] = h.iterations_used;
  j["converged"] = h.converged;
  j["abort_reason"] = h.abort_reason;
  j["final_relative_error"] = h.relative_error.back();
  j["final_residual_norm"] = h.residual_norm.back();
  j["plateau_iteration"] = plateau;
  j["msolve_count"] = h.msolve_count;
  j["work_units_total"] = h.work_units.back();
  return j;
}

struct Prepared {
  TestProblem tp;
  KronTerm term;
  KronSvdPreconditioner m0;  // built at lambda = 1, rescaled later
};

Prepared prepare(const ExperimentConfig& cfg) {
  Prepared p{build_problem(cfg), {}, {}};
  p.term = nearest_kron(p.tp.psf, cfg.n);
  p.m0 = build_preconditioner(p.term.row_factor, p.term.col_factor, 1.0,
                              precision(cfg));
  return p;
}

Selection select_lambda(const ExperimentConfig& cfg,
                        const KronSvdPreconditioner& m0,
                        const TestProblem& tp) {
  Selection sel;
  sel.method = cfg.param;
  if (cfg.param == "fixed") {
    sel.lambda = cfg.lambda;
    return sel;
  }
  try {
    ParamChoice pc;
    if (cfg.param == "opt") {
      pc = lambda_opt(make_spectral_data(m0, tp.b, tp.x_true));
    } else if (cfg.param == "gcv") {
      pc = gcv(make_spectral_data(m0, tp.b));
    } else if (cfg.param == "wgcv") {
      pc = wgcv(make_spectral_data(m0, tp.b), cfg.omega);
    } else {
      pc = discrepancy(make_spectral_data(m0, tp.b), tp.noise.norm(), cfg.eta);
    }
    sel.lambda = pc.lambda;
    sel.objective_value = pc.objective_value;
    sel.bracket_lo = pc.bracket_lo;
    sel.bracket_hi = pc.bracket_hi;
    sel.flat_objective = pc.flat_objective;
    sel.omega = pc.omega;
    sel.eta = pc.eta;
    sel.noise_norm = pc.noise_norm;
  } catch (const NoRootError& e) {
    sel.no_root = true;
    sel.diagnostic = e.what();
  }
  return sel;
}

SolverOptions solver_options(const ExperimentConfig& cfg, double lambda,
                             const TestProblem& tp) {
  SolverOptions opts;
  opts.lambda = lambda;
  opts.max_iterations = cfg.maxit;
  opts.rel_residual_tol = cfg.tol;
  opts.x_true = tp.x_true;
  return opts;
}

KronSvdPreconditioner precond_for(const ExperimentConfig& cfg,
                                  const Prepared& p, double chosen_lambda) {
  const double ml =
      cfg.precond_lambda ? *cfg.precond_lambda : chosen_lambda;
  if (ml == 0.0 && p.m0.svd_r.s.minCoeff() * p.m0.svd_c.s.minCoeff() == 0.0)
    throw ConfigError(
        "preconditioner lambda is 0 but the approximate operator is "
        "singular; set lambda or precond_lambda > 0");
  return with_lambda(p.m0, ml);
}

void finish_outcome(RunOutcome& oc) {
  oc.solved = true;
  oc.final_relative_error = oc.result.history.relative_error.back();
  oc.plateau = plateau_iteration(oc.result.history);
}

void write_solve_outputs(const ExperimentConfig& cfg, const RunOutcome& oc) {
  fs::create_directories(cfg.out);
  const fs::path out(cfg.out);
  json summary;
  summary["schema"] = "kronprec.summary/1";
  summary["config"] = config_json(cfg);
  summary["selection"] = selection_json(oc.selection);
  if (oc.solved) {
    summary["solver"] = solver_json(cfg.solver, oc.result, oc.plateau);
    const ConvergenceHistory& h = oc.result.history;
    CsvFile csv(out / "convergence.csv",
                {"schema", "iteration", "relative_error", "residual_norm",
                 "cumulative_work_units"});
    for (std::size_t k = 0; k < h.residual_norm.size(); ++k)
      csv.row({"kronprec.convergence/1", num(int(k)), num(h.relative_error[k]),
               num(h.residual_norm[k]), num(h.work_units[k])});
    save_pgm(unvec(oc.result.x, cfg.n),
             (out / "reconstruction.pgm").string());
  }
  write_json_file(out / "summary.json", summary);
}

// True when the sweep key may vary per run. Output location and the sweep
// spec itself stay fixed.
bool sweepable_key(const std::string& key) {
  return key != "out" && key != "sweep_key" && key != "sweep_values";
}

}  // namespace

void apply_key(ExperimentConfig& cfg, const std::string& key,
               const std::string& value) {
  if (key == "blur") cfg.blur = trim(value);
  else if (key == "n") cfg.n = parse_int_value(key, value);
  else if (key == "noise") cfg.noise = parse_double_value(key, value);
  else if (key == "seed") cfg.seed = parse_u64_value(key, value);
  else if (key == "psf_size") cfg.psf_size = parse_int_value(key, value);
  else if (key == "psf_seed") cfg.psf_seed = parse_u64_value(key, value);
  else if (key == "psf_sigma") cfg.psf_sigma = parse_double_value(key, value);
  else if (key == "psf_radius") cfg.psf_radius = parse_double_value(key, value);
  else if (key == "psf_length") cfg.psf_length = parse_int_value(key, value);
  else if (key == "psf_steps") cfg.psf_steps = parse_int_value(key, value);
  else if (key == "psf_blob_count")
    cfg.psf_blob_count = parse_int_value(key, value);
  else if (key == "psf_blob_sigma")
    cfg.psf_blob_sigma = parse_double_value(key, value);
  else if (key == "fmt") cfg.fmt = trim(value);
  else if (key == "solver") cfg.solver = trim(value);
  else if (key == "param") cfg.param = trim(value);
  else if (key == "omega") cfg.omega = parse_double_value(key, value);
  else if (key == "eta") cfg.eta = parse_double_value(key, value);
  else if (key == "lambda") cfg.lambda = parse_double_value(key, value);
  else if (key == "precond_lambda")
    cfg.precond_lambda = parse_double_value(key, value);
  else if (key == "maxit") cfg.maxit = parse_int_value(key, value);
  else if (key == "tol") cfg.tol = parse_double_value(key, value);
  else if (key == "out") cfg.out = trim(value);
  else if (key == "include_fpcg")
    cfg.include_fpcg = parse_bool_value(key, value);
  else if (key == "sweep_key") cfg.sweep_key = trim(value);
  else if (key == "sweep_values") cfg.sweep_values = split_values(key, value);
  else throw ConfigError("unknown config key: " + key);
}

void load_config_file(ExperimentConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(lineno) +
                        ": expected key=value");
    const std::string key = trim(stripped.substr(0, eq));
    if (key.empty())
      throw ConfigError(path + ":" + std::to_string(lineno) + ": empty key");
    apply_key(cfg, key, stripped.substr(eq + 1));
  }
}

void validate(const ExperimentConfig& cfg) {
  try {
    parse_blur_kind(cfg.blur);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config key blur: ") + e.what());
  }
  try {
    PrecisionFormat::parse(cfg.fmt);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config key fmt: ") + e.what());
  }
  if (cfg.solver != "cgls" && cfg.solver != "pcg" && cfg.solver != "fpcg")
    throw ConfigError("config key solver: unknown solver " + cfg.solver);
  if (cfg.param != "opt" && cfg.param != "gcv" && cfg.param != "wgcv" &&
      cfg.param != "discrepancy" && cfg.param != "fixed")
    throw ConfigError("config key param: unknown method " + cfg.param);
  if (cfg.n < 2) throw ConfigError("config key n: need n >= 2");
  if (cfg.psf_size < 1 || cfg.psf_size % 2 == 0)
    throw ConfigError("config key psf_size: need a positive odd size");
  if (cfg.psf_size > cfg.n)
    throw ConfigError("config key psf_size: PSF larger than the image");
  if (cfg.noise < 0.0) throw ConfigError("config key noise: must be >= 0");
  if (cfg.omega <= 0.0) throw ConfigError("config key omega: must be > 0");
  if (cfg.eta <= 0.0) throw ConfigError("config key eta: must be > 0");
  if (cfg.lambda < 0.0) throw ConfigError("config key lambda: must be >= 0");
  if (cfg.precond_lambda && *cfg.precond_lambda < 0.0)
    throw ConfigError("config key precond_lambda: must be >= 0");
  if (cfg.maxit < 1) throw ConfigError("config key maxit: must be >= 1");
  if (cfg.tol <= 0.0) throw ConfigError("config key tol: must be > 0");
  if (cfg.out.empty()) throw ConfigError("config key out: must not be empty");
}

BlurKind blur_kind(const ExperimentConfig& cfg) {
  try {
    return parse_blur_kind(cfg.blur);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config key blur: ") + e.what());
  }
}

PrecisionFormat precision(const ExperimentConfig& cfg) {
  try {
    return PrecisionFormat::parse(cfg.fmt);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config key fmt: ") + e.what());
  }
}

PsfParams psf_params(const ExperimentConfig& cfg) {
  PsfParams p;
  p.sigma = cfg.psf_sigma;
  p.radius = cfg.psf_radius;
  p.length = cfg.psf_length;
  p.steps = cfg.psf_steps;
  p.blob_count = cfg.psf_blob_count;
  p.blob_sigma = cfg.psf_blob_sigma;
  return p;
}

TestProblem build_problem(const ExperimentConfig& cfg) {
  // Everything reaching the generators comes straight from config, so their
  // argument complaints are config errors here.
  try {
    const Psf psf =
        make_psf(blur_kind(cfg), cfg.psf_size, psf_params(cfg), cfg.psf_seed);
    return make_test_problem(default_test_image(cfg.n), psf, cfg.noise,
                             cfg.seed);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

json config_json(const ExperimentConfig& cfg) {
  json j;
  j["blur"] = cfg.blur;
  j["n"] = cfg.n;
  j["noise"] = cfg.noise;
  j["seed"] = cfg.seed;
  j["psf_size"] = cfg.psf_size;
  j["psf_seed"] = cfg.psf_seed;
  j["psf_sigma"] = cfg.psf_sigma;
  j["psf_radius"] = cfg.psf_radius;
  j["psf_length"] = cfg.psf_length;
  j["psf_steps"] = cfg.psf_steps;
  j["psf_blob_count"] = cfg.psf_blob_count;
  j["psf_blob_sigma"] = cfg.psf_blob_sigma;
  j["fmt"] = cfg.fmt;
  j["solver"] = cfg.solver;
  j["param"] = cfg.param;
  j["omega"] = cfg.omega;
  j["eta"] = cfg.eta;
  j["lambda"] = cfg.lambda;
  j["precond_lambda"] =
      cfg.precond_lambda ? json(*cfg.precond_lambda) : json(nullptr);
  j["maxit"] = cfg.maxit;
  j["tol"] = cfg.tol;
  j["out"] = cfg.out;
  j["include_fpcg"] = cfg.include_fpcg;
  j["sweep_key"] = cfg.sweep_key;
  j["sweep_values"] = cfg.sweep_values;
  return j;
}

json load_json(const fs::path& path, const std::string& name, int major) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  if (!j.is_object() || !j.contains("schema") || !j["schema"].is_string())
    throw IoError(path.string() + ": missing schema field");
  const std::string schema = j["schema"].get<std::string>();
  const std::string want = name + "/" + std::to_string(major);
  if (schema != want)
    throw IoError(path.string() + ": schema " + schema + ", expected " + want);
  return j;
}

RunOutcome run_single(const ExperimentConfig& cfg) {
  validate(cfg);
  const Prepared p = prepare(cfg);
  RunOutcome oc;
  oc.selection = select_lambda(cfg, p.m0, p.tp);
  if (oc.selection.no_root) return oc;
  const SolverOptions opts = solver_options(cfg, oc.selection.lambda, p.tp);
  if (cfg.solver == "cgls") {
    oc.result = cgls(p.tp.a, p.tp.b, opts);
  } else {
    const KronSvdPreconditioner m =
        precond_for(cfg, p, oc.selection.lambda);
    oc.result = cfg.solver == "fpcg" ? fpcg(p.tp.a, p.tp.b, m, opts)
                                     : pcg(p.tp.a, p.tp.b, m, opts);
  }
  finish_outcome(oc);
  return oc;
}

CompareOutcome run_compare(const ExperimentConfig& cfg) {
  validate(cfg);
  const Prepared p = prepare(cfg);
  CompareOutcome oc;
  oc.selection = select_lambda(cfg, p.m0, p.tp);
  if (oc.selection.no_root) return oc;
  const SolverOptions opts = solver_options(cfg, oc.selection.lambda, p.tp);
  const KronSvdPreconditioner m = precond_for(cfg, p, oc.selection.lambda);
  oc.baseline = cgls(p.tp.a, p.tp.b, opts);
  oc.precond = pcg(p.tp.a, p.tp.b, m, opts);
  if (cfg.include_fpcg) {
    oc.flexible = fpcg(p.tp.a, p.tp.b, m, opts);
    oc.plateau_flexible = plateau_iteration(oc.flexible->history);
  }
  oc.report = work_report(oc.precond.history, oc.baseline.history);
  oc.solved = true;
  return oc;
}

DecomposeRow decompose_row(const ExperimentConfig& cfg) {
  validate(cfg);
  const Psf psf = [&] {
    try {
      return make_psf(blur_kind(cfg), cfg.psf_size, psf_params(cfg),
                      cfg.psf_seed);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }();
  const KroneckerSum a = psf_to_kronsum(psf, cfg.n);
  const KronTerm term = nearest_kron(psf, cfg.n);
  const double norm = kronsum_frobenius_norm(a);
  const PrecisionFormat fmt = precision(cfg);
  const KroneckerSum one{{term}, cfg.n};
  const KroneckerSum rounded{{KronTerm{round_array(term.row_factor, fmt),
                                       round_array(term.col_factor, fmt)}},
                             cfg.n};
  DecomposeRow row;
  row.terms = int(a.terms.size());
  row.rel_error = kronsum_frobenius_distance(a, one) / norm;
  row.rel_error_rounded = kronsum_frobenius_distance(a, rounded) / norm;
  return row;
}

void cmd_generate(const ExperimentConfig& cfg) {
  validate(cfg);
  const TestProblem tp = build_problem(cfg);
  const fs::path out(cfg.out);
  try {
    save_problem(tp, cfg.out);
    save_pgm(unvec(tp.x_true, cfg.n), (out / "xtrue.pgm").string());
    save_pgm(unvec(tp.b_true, cfg.n), (out / "btrue.pgm").string());
    save_pgm(unvec(tp.b, cfg.n), (out / "b.pgm").string());
  } catch (const std::runtime_error& e) {
    throw IoError(e.what());
  }
  std::cout << "wrote problem bundle to " << cfg.out << "\n";
}

void cmd_decompose(const ExperimentConfig& cfg) {
  const DecomposeRow row = decompose_row(cfg);
  fs::create_directories(cfg.out);
  json j;
  j["schema"] = "kronprec.decompose/1";
  j["config"] = config_json(cfg);
  j["terms"] = row.terms;
  j["rel_error"] = row.rel_error;
  j["rel_error_rounded"] = row.rel_error_rounded;
  write_json_file(fs::path(cfg.out) / "decompose.json", j);
  std::cout << "blur=" << cfg.blur << " n=" << cfg.n << " terms=" << row.terms
            << " rel_error=" << num(row.rel_error)
            << " rel_error_rounded=" << num(row.rel_error_rounded) << "\n";
}

void cmd_solve(const ExperimentConfig& cfg) {
  const RunOutcome oc = run_single(cfg);
  write_solve_outputs(cfg, oc);
  if (oc.solved) {
    std::cout << "solver=" << cfg.solver
              << " lambda=" << num(oc.selection.lambda)
              << " iterations=" << oc.result.history.iterations_used
              << " final_relative_error=" << num(oc.final_relative_error)
              << "\n";
  } else {
    std::cout << "parameter search failed: " << oc.selection.diagnostic
              << "\n";
  }
}

void cmd_compare(const ExperimentConfig& cfg) {
  const CompareOutcome oc = run_compare(cfg);
  fs::create_directories(cfg.out);
  const fs::path out(cfg.out);
  json j;
  j["schema"] = "kronprec.work_report/1";
  j["config"] = config_json(cfg);
  j["selection"] = selection_json(oc.selection);
  std::vector<std::string> header = {"schema",
                                     "iteration",
                                     "cgls_relative_error",
                                     "cgls_residual_norm",
                                     "cgls_work_units",
                                     "pcg_relative_error",
                                     "pcg_residual_norm",
                                     "pcg_work_units"};
  if (cfg.include_fpcg) {
    header.insert(header.end(), {"fpcg_relative_error", "fpcg_residual_norm",
                                 "fpcg_work_units"});
  }
  CsvFile csv(out / "comparison.csv", header);
  if (oc.solved) {
    j["baseline"] = solver_json("cgls", oc.baseline, oc.report.m_baseline);
    j["precond"] = solver_json("pcg", oc.precond, oc.report.m_precond);
    if (oc.flexible)
      j["flexible"] =
          solver_json("fpcg", *oc.flexible, oc.plateau_flexible);
    j["m_baseline"] = oc.report.m_baseline;
    j["m_precond"] = oc.report.m_precond;
    j["threshold"] = oc.report.threshold;
    j["preconditioning_pays"] = oc.report.preconditioning_pays;
    j["plateau_tolerance"] = oc.report.plateau_tolerance;

    auto cells = [](const ConvergenceHistory& h, std::size_t k,
                    std::vector<std::string>& row) {
      if (k < h.residual_norm.size()) {
        row.push_back(num(h.relative_error[k]));
        row.push_back(num(h.residual_norm[k]));
        row.push_back(num(h.work_units[k]));
      } else {
        row.insert(row.end(), {"", "", ""});
      }
    };
    std::size_t rows = std::max(oc.baseline.history.residual_norm.size(),
                                oc.precond.history.residual_norm.size());
    if (oc.flexible)
      rows = std::max(rows, oc.flexible->history.residual_norm.size());
    for (std::size_t k = 0; k < rows; ++k) {
      std::vector<std::string> row = {"kronprec.comparison/1", num(int(k))};
      cells(oc.baseline.history, k, row);
      cells(oc.precond.history, k, row);
      if (oc.flexible) cells(oc.flexible->history, k, row);
      csv.row(row);
    }
    std::cout << "m_baseline=" << oc.report.m_baseline
              << " m_precond=" << oc.report.m_precond
              << " preconditioning_pays="
              << (oc.report.preconditioning_pays ? "true" : "false") << "\n";
  } else {
    std::cout << "parameter search failed: " << oc.selection.diagnostic
              << "\n";
  }
  write_json_file(out / "work_report.json", j);
}

void cmd_sweep(const ExperimentConfig& cfg) {
  validate(cfg);
  if (cfg.sweep_key.empty())
    throw ConfigError("sweep needs sweep_key");
  if (!sweepable_key(cfg.sweep_key))
    throw ConfigError("config key sweep_key: cannot sweep " + cfg.sweep_key);
  if (cfg.sweep_values.empty())
    throw ConfigError("sweep needs a nonempty sweep_values list");
  fs::create_directories(cfg.out);
  const fs::path out(cfg.out);
  CsvFile csv(out / "sweep.csv",
              {"schema", "value", "lambda", "final_relative_error",
               "plateau_iteration", "status"});
  for (std::size_t i = 0; i < cfg.sweep_values.size(); ++i) {
    const std::string& value = cfg.sweep_values[i];
    ExperimentConfig sub = cfg;
    sub.sweep_key.clear();
    sub.sweep_values.clear();
    sub.out = (out / ("run_" + std::to_string(i))).string();
    std::string status = "ok";
    RunOutcome oc;
    try {
      apply_key(sub, cfg.sweep_key, value);
      oc = run_single(sub);
      write_solve_outputs(sub, oc);
      if (!oc.solved) status = oc.selection.diagnostic;
      else if (!oc.result.history.abort_reason.empty())
        status = oc.result.history.abort_reason;
    } catch (const std::exception& e) {
      status = e.what();
    }
    if (oc.solved) {
      csv.row({"kronprec.sweep/1", value, num(oc.selection.lambda),
               num(oc.final_relative_error), num(oc.plateau), status});
    } else {
      csv.row({"kronprec.sweep/1", value, "", "", "", status});
    }
  }
  std::cout << "swept " << cfg.sweep_key << " over "
            << cfg.sweep_values.size() << " values into " << cfg.out << "\n";
}

namespace {

struct FlagSpec {
  const char* flag;
  const char* key;
  const char* desc;
};

constexpr FlagSpec kFlags[] = {
    {"--blur", "blur", "PSF kind: gaussian|defocus|motion|shake|speckle"},
    {"--n", "n", "image side length"},
    {"--noise", "noise", "relative noise level"},
    {"--seed", "seed", "noise seed"},
    {"--fmt", "fmt", "preconditioner storage format, e.g. fp16, fp64"},
    {"--solver", "solver", "cgls|pcg|fpcg"},
    {"--param", "param", "lambda rule: opt|gcv|wgcv|discrepancy|fixed"},
    {"--omega", "omega", "wgcv weight"},
    {"--eta", "eta", "discrepancy safety factor"},
    {"--lambda", "lambda", "regularization parameter for param=fixed"},
    {"--maxit", "maxit", "iteration cap"},
    {"--tol", "tol", "relative residual stopping tolerance"},
    {"--precond-lambda", "precond_lambda",
     "build the preconditioner at this lambda instead of the chosen one"},
    {"--out", "out", "output directory"},
    {"--psf-size", "psf_size", "PSF array side (odd)"},
    {"--psf-seed", "psf_seed", "PSF seed (shake, speckle)"},
    {"--psf-sigma", "psf_sigma", "gaussian PSF width"},
    {"--psf-radius", "psf_radius", "defocus PSF radius"},
    {"--psf-length", "psf_length", "motion PSF length"},
    {"--psf-steps", "psf_steps", "shake PSF steps"},
    {"--psf-blob-count", "psf_blob_count", "speckle blob count"},
    {"--psf-blob-sigma", "psf_blob_sigma", "speckle blob width"},
    {"--sweep-key", "sweep_key", "config key varied by sweep"},
    {"--sweep-values", "sweep_values", "comma-separated sweep values"},
};

}  // namespace

int dispatch(int argc, const char* const* argv) {
  CLI::App app{"Kronecker-SVD preconditioned image deblurring experiments"};
  app.require_subcommand(1);
  std::map<std::string, std::string> raw;
  std::string config_path;
  bool fpcg_flag = false;
  const char* verbs[] = {"generate", "decompose", "solve", "compare", "sweep"};
  const char* descs[] = {
      "write a deterministic test problem bundle with PGM previews",
      "report the Kronecker rank and one-term approximation error",
      "run one solver with one parameter rule",
      "run cgls and pcg (optionally fpcg) on the same problem",
      "run solve once per value of one config key"};
  for (int v = 0; v < 5; ++v) {
    CLI::App* sub = app.add_subcommand(verbs[v], descs[v]);
    sub->add_option("--config", config_path, "key=value config file")
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    for (const FlagSpec& f : kFlags)
      sub->add_option(f.flag, raw[f.key], f.desc)
          ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    sub->add_flag("--include-fpcg", fpcg_flag,
                  "also run the flexible variant in compare");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  CLI::App* sub = app.get_subcommands().front();
  try {
    ExperimentConfig cfg;
    if (sub->count("--config")) load_config_file(cfg, config_path);
    for (const FlagSpec& f : kFlags)
      if (sub->count(f.flag)) apply_key(cfg, f.key, raw[f.key]);
    if (fpcg_flag) cfg.include_fpcg = true;
    const std::string verb = sub->get_name();
    if (verb == "generate") cmd_generate(cfg);
    else if (verb == "decompose") cmd_decompose(cfg);
    else if (verb == "solve") cmd_solve(cfg);
    else if (verb == "compare") cmd_compare(cfg);
    else cmd_sweep(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 3;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}

}  // namespace kronprec::cli
