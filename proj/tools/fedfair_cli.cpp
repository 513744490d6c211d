// fedfair: validate configs, run fairness-instrumented federated experiments, summarize and
// export results.
//
// Exit codes
//   0  success
//   1  config failed validation (every violation is listed)
//   2  config unreadable or not valid JSON
//   3  output directory cannot be created or written
//   4  results schema version mismatch
//   5  results file exists and --force was not given
//   6  runtime failure during a run (partial files removed)
//   7  no input files matched
//  64  command-line usage error

#include <glob.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fedfair/fedfair.hpp"

namespace fs = std::filesystem;
using namespace fedfair;

namespace {

enum Exit : int {
  exit_ok = 0,
  exit_invalid = 1,
  exit_parse = 2,
  exit_output = 3,
  exit_schema = 4,
  exit_overwrite = 5,
  exit_runtime = 6,
  exit_no_input = 7,
  exit_usage = 64,
};

#ifndef FEDFAIR_PRESET_DIR
#define FEDFAIR_PRESET_DIR "presets"
#endif

int verbosity = 0;

/// Loads a config file, or a builtin preset when `arg` names one and no such file exists.
ConfigParse resolve_config(const std::string &arg) {
  if (!fs::exists(arg)) {
    if (auto preset = find_preset(arg)) return parse_config(to_json(*preset), FEDFAIR_PRESET_DIR);
  }
  return load_config_file(arg);
}

int report_invalid(const std::string &source, const std::vector<std::string> &errors) {
  std::cerr << source << ": " << errors.size() << " problem" << (errors.size() == 1 ? "" : "s") << "\n";
  for (const auto &e : errors) std::cerr << "  - " << e << "\n";
  return exit_invalid;
}

std::vector<std::string> expand_globs(const std::vector<std::string> &patterns) {
  std::vector<std::string> out;
  for (const auto &p : patterns) {
    glob_t g{};
    if (::glob(p.c_str(), 0, nullptr, &g) == 0)
      for (std::size_t i = 0; i < g.gl_pathc; ++i) out.emplace_back(g.gl_pathv[i]);
    else if (fs::exists(p))
      out.push_back(p);
    ::globfree(&g);
  }
  return out;
}

json read_json_file(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw ConfigParseError(path + ": cannot open file");
  try {
    return json::parse(in);
  } catch (const json::parse_error &e) {
    throw ConfigParseError(path + ": " + e.what());
  }
}

bool is_aggregate(const json &j) {
  return j.contains("meta") && j["meta"].contains("kind") && j["meta"]["kind"] == "aggregate";
}

int cmd_validate(const std::string &path) {
  ConfigParse parsed;
  try {
    parsed = resolve_config(path);
  } catch (const ConfigParseError &e) {
    std::cerr << e.what() << "\n";
    return exit_parse;
  }
  auto errors = parsed.errors;
  if (errors.empty()) errors = validate(parsed.config);
  if (!errors.empty()) return report_invalid(path, errors);
  const auto &c = parsed.config;
  std::cout << path << ": valid (" << to_string(c.strategy.kind) << ", C=" << c.total_clients
            << ", |S_k|=" << c.clients_per_round << ", participation " << c.participation_rate() * 100.0
            << "%, K=" << c.rounds << ", E=" << c.local_epochs << ")\n";
  return exit_ok;
}

struct RunArgs {
  std::string config;
  std::string out = "results";
  std::vector<std::uint64_t> seeds;
  int repeats = 0;
  bool force = false;
  bool timing = false;
  int threads = 0;
};

bool write_text(const fs::path &path, const std::string &text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) return false;
  os << text;
  return static_cast<bool>(os.flush());
}

int cmd_run(const RunArgs &args) {
  ConfigParse parsed;
  try {
    parsed = resolve_config(args.config);
  } catch (const ConfigParseError &e) {
    std::cerr << e.what() << "\n";
    return exit_parse;
  }
  if (!parsed.errors.empty()) return report_invalid(args.config, parsed.errors);
  if (auto errs = validate(parsed.config); !errs.empty()) return report_invalid(args.config, errs);
  const auto &cfg = parsed.config;

  std::vector<std::uint64_t> seeds = args.seeds.empty() ? cfg.seeds : args.seeds;
  if (args.repeats > 0) {
    while (seeds.size() < static_cast<std::size_t>(args.repeats)) seeds.push_back(seeds.back() + 1);
    seeds.resize(static_cast<std::size_t>(args.repeats));
  }

  const fs::path out(args.out);
  const fs::path runs_dir = out / "runs";
  std::error_code ec;
  fs::create_directories(runs_dir, ec);
  const fs::path probe = out / ".fedfair-write-probe";
  if (ec || !write_text(probe, "")) {
    std::cerr << "cannot write to output directory '" << out.string() << "'"
              << (ec ? ": " + ec.message() : std::string()) << "\n";
    return exit_output;
  }
  fs::remove(probe, ec);

  std::vector<fs::path> targets;
  for (auto s : seeds) targets.push_back(runs_dir / ("seed" + std::to_string(s) + ".json"));
  targets.push_back(out / "aggregate.json");
  if (!args.force)
    for (const auto &t : targets)
      if (fs::exists(t)) {
        std::cerr << t.string() << " exists; pass --force to overwrite\n";
        return exit_overwrite;
      }

  RunOptions opt;
  if (args.threads > 0) opt.threads = static_cast<unsigned>(args.threads);
  opt.record_timing = args.timing;

  std::vector<fs::path> written;
  auto cleanup = [&] {
    for (const auto &w : written) fs::remove(w, ec);
  };
  try {
    std::vector<RunResult> runs;
    std::vector<RunTable> tables;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      if (verbosity > 0) std::cerr << "running seed " << seeds[i] << "\n";
      runs.push_back(run_single(cfg, seeds[i], opt));
      const auto j = to_json(runs.back());
      if (!write_text(targets[i], j.dump(2) + "\n")) throw std::runtime_error("cannot write " + targets[i].string());
      written.push_back(targets[i]);
      tables.push_back(run_table_from_json(j, targets[i].stem().string()));
    }
    const auto agg = aggregate_runs(runs);
    if (!write_text(targets.back(), to_json(agg, cfg).dump(2) + "\n"))
      throw std::runtime_error("cannot write " + targets.back().string());
    written.push_back(targets.back());
    std::cout << cfg.name << ": " << runs.size() << " run(s), summary window [" << cfg.summary_window.first << ","
              << cfg.summary_window.second << "]\n"
              << summarize_tables(tables);
    std::cout << "wrote " << written.size() << " file(s) under " << out.string() << "\n";
  } catch (const std::exception &e) {
    cleanup();
    std::cerr << "run failed: " << e.what() << "\n";
    return exit_runtime;
  }
  return exit_ok;
}

/// Loads run tables from results JSON (aggregate files are skipped) or per-round CSV exports.
int load_tables(const std::vector<std::string> &patterns, std::vector<RunTable> &tables, bool allow_csv) {
  const auto files = expand_globs(patterns);
  for (const auto &f : files) {
    try {
      if (allow_csv && fs::path(f).extension() == ".csv") {
        std::ifstream in(f);
        auto more = run_tables_from_csv(in, f);
        tables.insert(tables.end(), more.begin(), more.end());
        continue;
      }
      const auto j = read_json_file(f);
      if (is_aggregate(j)) {
        if (verbosity > 0) std::cerr << f << ": aggregate file skipped\n";
        continue;
      }
      tables.push_back(run_table_from_json(j, fs::path(f).stem().string()));
    } catch (const SchemaMismatch &e) {
      std::cerr << e.what() << "\n";
      return exit_schema;
    } catch (const ConfigParseError &e) {
      std::cerr << e.what() << "\n";
      return exit_parse;
    } catch (const json::exception &e) {
      std::cerr << f << ": " << e.what() << "\n";
      return exit_schema;
    }
  }
  if (tables.empty()) {
    std::cerr << "no results files matched\n";
    return exit_no_input;
  }
  return exit_ok;
}

int cmd_summarize(const std::vector<std::string> &patterns) {
  std::vector<RunTable> tables;
  if (int rc = load_tables(patterns, tables, true); rc != exit_ok) return rc;
  std::cout << summarize_tables(tables);
  return exit_ok;
}

int cmd_export(const std::vector<std::string> &patterns, const std::string &format, const std::string &out_dir) {
  if (format != "csv") {
    std::cerr << "unsupported export format '" << format << "'\n";
    return exit_usage;
  }
  std::vector<RunTable> tables;
  if (int rc = load_tables(patterns, tables, false); rc != exit_ok) return rc;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  std::ostringstream per_round, per_client;
  write_per_round_csv(per_round, tables);
  write_per_client_csv(per_client, tables);
  const auto a = fs::path(out_dir) / "per_round.csv";
  const auto b = fs::path(out_dir) / "per_client.csv";
  if (ec || !write_text(a, per_round.str()) || !write_text(b, per_client.str())) {
    std::cerr << "cannot write to '" << out_dir << "'\n";
    return exit_output;
  }
  std::cout << "wrote " << a.string() << " and " << b.string() << "\n";
  return exit_ok;
}

int cmd_presets(const std::string &name) {
  if (name.empty()) {
    for (const auto &[n, c] : builtin_presets())
      std::cout << n << "  (C=" << c.total_clients << ", |S_k|=" << c.clients_per_round
                << ", participation " << c.participation_rate() * 100.0 << "%)\n";
    return exit_ok;
  }
  auto preset = find_preset(name);
  if (!preset) {
    std::cerr << "unknown preset '" << name << "'\n";
    return exit_invalid;
  }
  std::cout << to_json(*preset).dump(2) << "\n";
  return exit_ok;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"fedfair: fairness analytics for simulated federated learning"};
  app.require_subcommand(1);
  app.add_flag("-v,--verbose", verbosity, "More diagnostics on stderr");

  std::string validate_path;
  auto *validate_cmd = app.add_subcommand("validate", "Check a config file against the schema and invariants");
  validate_cmd->add_option("config", validate_path, "Config file or preset name")->required();

  RunArgs run_args;
  std::string seeds_csv;
  auto *run_cmd = app.add_subcommand("run", "Run an experiment and write per-seed and aggregate results");
  run_cmd->add_option("config", run_args.config, "Config file or preset name")->required();
  run_cmd->add_option("--out", run_args.out, "Output directory")->capture_default_str();
  run_cmd->add_option("--seeds", seeds_csv, "Comma-separated seeds overriding the config");
  run_cmd->add_option("--repeats", run_args.repeats, "Number of runs (extends the seed list by +1 steps)")
      ->check(CLI::PositiveNumber);
  run_cmd->add_flag("--force", run_args.force, "Overwrite existing results files");
  run_cmd->add_flag("--timing", run_args.timing, "Record wall-clock times (results are then not bit-reproducible)");
  run_cmd->add_option("--threads", run_args.threads, "Worker threads (default: FEDFAIR_THREADS or all cores)");

  std::vector<std::string> summarize_globs;
  auto *summarize_cmd = app.add_subcommand("summarize", "Summary-window means and verdicts for results files");
  summarize_cmd->add_option("inputs", summarize_globs, "Results JSON or per-round CSV (globs allowed)")->required();

  std::vector<std::string> export_globs;
  std::string export_format = "csv";
  std::string export_out = "export";
  auto *export_cmd = app.add_subcommand("export", "Flatten results into long-format CSV tables");
  export_cmd->add_option("inputs", export_globs, "Results JSON files (globs allowed)")->required();
  export_cmd->add_option("--format", export_format, "Output format")->capture_default_str();
  export_cmd->add_option("--out", export_out, "Output directory")->capture_default_str();

  std::string preset_name;
  auto *presets_cmd = app.add_subcommand("presets", "List builtin presets or print one as JSON");
  presets_cmd->add_option("name", preset_name, "Preset to print");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int rc = app.exit(e);
    return rc == 0 ? exit_ok : exit_usage;
  }

  if (!seeds_csv.empty()) {
    std::stringstream ss(seeds_csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        run_args.seeds.push_back(std::stoull(item));
      } catch (const std::exception &) {
        std::cerr << "--seeds: '" << item << "' is not a seed\n";
        return exit_usage;
      }
    }
  }

  if (*validate_cmd) return cmd_validate(validate_path);
  if (*run_cmd) return cmd_run(run_args);
  if (*summarize_cmd) return cmd_summarize(summarize_globs);
  if (*export_cmd) return cmd_export(export_globs, export_format, export_out);
  if (*presets_cmd) return cmd_presets(preset_name);
  return exit_usage;
}
