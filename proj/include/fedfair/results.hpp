#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fedfair/config.hpp"
#include "fedfair/engine.hpp"

namespace fedfair {

inline constexpr const char *results_schema_version = "fedfair-results/1";
inline constexpr const char *library_version = "0.1.0";

class SchemaMismatch : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// RunResult -> JSON

namespace detail {

/// Writes `value` under `key`, or null plus a "<key>_reason" sibling.
inline void put_optional(json &j, const std::string &key, const std::optional<double> &value,
                         const std::string &reason) {
  if (value) {
    j[key] = *value;
  } else {
    j[key] = nullptr;
    j[key + "_reason"] = reason;
  }
}

inline json id_map(const std::map<std::size_t, double> &m) {
  json j = json::object();
  for (const auto &[n, v] : m) j[std::to_string(n)] = v;
  return j;
}

inline json eqodds_json(const EqOddsRecord &r, const ExperimentConfig &cfg) {
  auto attr_name = [&](std::size_t a) { return a < cfg.attributes.size() ? cfg.attributes[a].name : std::to_string(a); };
  json per = json::object();
  for (const auto &[a, v] : r.per_attribute) per[attr_name(a)] = v;
  json skipped = json::array();
  for (const auto &[a, why] : r.skipped) skipped.push_back({{"attribute", attr_name(a)}, {"reason", why}});
  json j = {{"per_attribute", per}, {"skipped", skipped}};
  put_optional(j, "mean", r.mean(), "no computable attribute");
  return j;
}

inline json timing_json(json j, const std::optional<double> &seconds) {
  put_optional(j, "wall_clock", seconds, "timing disabled");
  return j;
}

} // namespace detail

inline json to_json(const Summary &s, double threshold) {
  json j;
  j["window"] = {s.window.first, s.window.second};
  for (std::size_t i = 0; i < notion_names.size(); ++i) {
    json n = json::object();
    detail::put_optional(n, "mean", s.notions[i].mean, s.notions[i].reason);
    n["defined_rounds"] = s.notions[i].defined_rounds;
    j[notion_names[i]] = n;
  }
  const auto v = threshold_check(s, threshold);
  json verdicts;
  for (std::size_t i = 0; i < notion_names.size(); ++i) verdicts[notion_names[i]] = to_string(v.notions[i]);
  verdicts["overall"] = to_string(v.overall);
  j["threshold"] = threshold;
  j["verdicts"] = verdicts;
  return j;
}

inline json to_json(const RunResult &r) {
  const auto &cfg = r.config;
  json j;
  j["config"] = to_json(cfg);
  json rounds = json::array();
  for (const auto &ro : r.rounds) {
    json fr = json::object();
    const auto &f = ro.fairness;
    for (std::size_t i = 0; i < notion_names.size(); ++i)
      detail::put_optional(fr, notion_names[i], notion(f, i).value, notion(f, i).reason);
    fr["gains_G"] = detail::id_map(f.gains_G);
    fr["gains_R"] = detail::id_map(f.gains_R);
    json excl = json::array();
    for (const auto &e : f.excluded_clients) excl.push_back({{"client", e.client_id}, {"reason", e.reason}});
    fr["excluded_clients"] = excl;
    fr["negative_gains_clamped"] = f.negative_gains_clamped;

    json clients = json::array();
    for (const auto &c : ro.clients) {
      clients.push_back({{"client_id", c.client_id},
                         {"round", c.round},
                         {"performance", c.performance},
                         {"reward", c.reward},
                         {"eqodds", detail::eqodds_json(c.eqodds, cfg)},
                         {"eqodds_pre", detail::eqodds_json(c.eqodds_pre, cfg)},
                         {"train_size", c.train_size},
                         {"test_size", c.test_size},
                         {"local_loss_before", c.local_loss_before}});
    }
    json rj = {{"k", ro.round},
               {"selected", ro.selected},
               {"fairness", fr},
               {"clients", clients},
               {"shapley", {{"per_round", detail::id_map(ro.shapley)}}},
               {"aux_accuracy", ro.aux_accuracy},
               {"qffl_fallback", ro.qffl_fallback}};
    rounds.push_back(detail::timing_json(rj, ro.wall_clock_seconds));
  }
  j["rounds"] = rounds;
  j["cumulative_shapley"] = detail::id_map(r.ledger.cumulative());
  j["summary"] = to_json(r.summary, cfg.fairness_threshold);
  json meta = {{"kind", "run"},
               {"name", cfg.name},
               {"seed", r.seed},
               {"versions", {{"schema", results_schema_version}, {"fedfair", library_version}}},
               {"participation_rate", cfg.participation_rate()},
               {"partition_attempts", r.partition_attempts}};
  j["meta"] = detail::timing_json(meta, r.wall_clock_seconds);
  return j;
}

inline json to_json(const AggregateReport &a, const ExperimentConfig &cfg) {
  auto moments_json = [](const Moments &m) {
    json j = json::object();
    detail::put_optional(j, "mean", m.mean, "undefined in every run");
    j["std"] = m.stddev;
    j["n"] = m.count;
    return j;
  };
  json j;
  j["config"] = to_json(cfg);
  json rounds = json::array();
  for (std::size_t k = 0; k < a.per_round.size(); ++k) {
    json r = {{"k", k + 1}};
    for (std::size_t i = 0; i < notion_names.size(); ++i) r[notion_names[i]] = moments_json(a.per_round[k][i]);
    r["aux_accuracy"] = moments_json(a.aux_accuracy[k]);
    rounds.push_back(r);
  }
  j["per_round"] = rounds;
  json summary;
  summary["window"] = {a.window.first, a.window.second};
  for (std::size_t i = 0; i < notion_names.size(); ++i) summary[notion_names[i]] = moments_json(a.summary[i]);
  json verdicts;
  for (std::size_t i = 0; i < notion_names.size(); ++i) verdicts[notion_names[i]] = to_string(a.verdicts.notions[i]);
  verdicts["overall"] = to_string(a.verdicts.overall);
  summary["threshold"] = a.threshold;
  summary["verdicts"] = verdicts;
  j["summary"] = summary;
  j["meta"] = {{"kind", "aggregate"},
               {"name", cfg.name},
               {"seeds", a.seeds},
               {"versions", {{"schema", results_schema_version}, {"fedfair", library_version}}}};
  return j;
}

// ---------------------------------------------------------------------------
// Reading results back

/// Per-round notion values of one run, as needed by summarize/export.
struct RunTable {
  std::string run;
  std::pair<int, int> window{1, 1};
  double threshold = 0.8;
  struct Round {
    int k = 0;
    std::map<std::string, std::optional<double>> values; // notions + aux_accuracy
    std::map<std::string, std::string> reasons;
  };
  std::vector<Round> rounds;
  struct Client {
    int k = 0;
    std::size_t client = 0;
    double x = 0.0, r = 0.0, s = 0.0, s_cumulative = 0.0;
    std::optional<double> mean_eqodds;
  };
  std::vector<Client> clients;
};

inline const std::vector<std::string> &exported_metrics() {
  static const std::vector<std::string> m{"f_j", "f_g", "f_r", "f_o", "F_T", "aux_accuracy"};
  return m;
}

inline void check_schema(const json &j, const std::string &source) {
  const json *meta = j.contains("meta") ? &j["meta"] : nullptr;
  std::string found = "<missing>";
  if (meta && meta->contains("versions") && (*meta)["versions"].contains("schema"))
    found = (*meta)["versions"]["schema"].get<std::string>();
  if (found != results_schema_version)
    throw SchemaMismatch(source + ": results schema '" + found + "' does not match '" + results_schema_version + "'");
}

inline RunTable run_table_from_json(const json &j, const std::string &run_label) {
  check_schema(j, run_label);
  RunTable t;
  t.run = run_label;
  const auto &win = j.at("config").at("summary_window");
  t.window = {win.at(0).get<int>(), win.at(1).get<int>()};
  t.threshold = j.at("config").at("fairness_threshold").get<double>();
  std::map<std::size_t, double> running;
  for (const auto &r : j.at("rounds")) {
    RunTable::Round row;
    row.k = r.at("k").get<int>();
    const auto &f = r.at("fairness");
    for (const auto &m : exported_metrics()) {
      const json &v = m == "aux_accuracy" ? r.at("aux_accuracy") : f.at(m);
      if (v.is_null()) {
        row.values[m] = std::nullopt;
        const auto key = m + "_reason";
        row.reasons[m] = f.contains(key) ? f.at(key).get<std::string>() : "undefined";
      } else {
        row.values[m] = v.get<double>();
      }
    }
    t.rounds.push_back(std::move(row));
    const auto &sh = r.at("shapley").at("per_round");
    for (const auto &c : r.at("clients")) {
      RunTable::Client cl;
      cl.k = r.at("k").get<int>();
      cl.client = c.at("client_id").get<std::size_t>();
      cl.x = c.at("performance").get<double>();
      cl.r = c.at("reward").get<double>();
      const auto key = std::to_string(cl.client);
      cl.s = sh.contains(key) ? sh.at(key).get<double>() : 0.0;
      cl.s_cumulative = (running[cl.client] += cl.s);
      const auto &m = c.at("eqodds").at("mean");
      if (!m.is_null()) cl.mean_eqodds = m.get<double>();
      t.clients.push_back(cl);
    }
  }
  return t;
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline std::string csv_escape(const std::string &s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

} // namespace detail

inline const char *per_round_csv_header = "run,round,metric,value,reason,window_start,window_end,threshold";
inline const char *per_client_csv_header = "run,round,client,x,r,s,mean_eqodds,s_cumulative";

/// Long-format rows: one per (run, round, metric). Undefined values leave `value` empty and fill `reason`.
inline void write_per_round_csv(std::ostream &os, const std::vector<RunTable> &tables) {
  os << per_round_csv_header << "\n";
  for (const auto &t : tables)
    for (const auto &r : t.rounds)
      for (const auto &m : exported_metrics()) {
        const auto &v = r.values.at(m);
        os << detail::csv_escape(t.run) << "," << r.k << "," << m << "," << (v ? format_double(*v) : "") << ","
           << (v ? "" : detail::csv_escape(r.reasons.at(m))) << "," << t.window.first << "," << t.window.second << ","
           << format_double(t.threshold) << "\n";
      }
}

inline void write_per_client_csv(std::ostream &os, const std::vector<RunTable> &tables) {
  os << per_client_csv_header << "\n";
  for (const auto &t : tables)
    for (const auto &c : t.clients)
      os << detail::csv_escape(t.run) << "," << c.k << "," << c.client << "," << format_double(c.x) << ","
         << format_double(c.r) << "," << format_double(c.s) << ","
         << (c.mean_eqodds ? format_double(*c.mean_eqodds) : "") << "," << format_double(c.s_cumulative) << "\n";
}

/// Reads a per-round CSV written by write_per_round_csv.
inline std::vector<RunTable> run_tables_from_csv(std::istream &in, const std::string &source) {
  std::string line;
  if (!std::getline(in, line) || line != per_round_csv_header)
    throw SchemaMismatch(source + ": not a per-round export (header mismatch)");
  std::vector<RunTable> tables;
  std::map<std::string, std::size_t> index;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != 8) throw SchemaMismatch(source + ": malformed row '" + line + "'");
    auto [it, fresh] = index.emplace(cells[0], tables.size());
    if (fresh) {
      RunTable t;
      t.run = cells[0];
      t.window = {std::stoi(cells[5]), std::stoi(cells[6])};
      t.threshold = std::stod(cells[7]);
      tables.push_back(std::move(t));
    }
    auto &t = tables[it->second];
    const int k = std::stoi(cells[1]);
    if (t.rounds.empty() || t.rounds.back().k != k) t.rounds.push_back({k, {}, {}});
    auto &row = t.rounds.back();
    if (cells[3].empty()) {
      row.values[cells[2]] = std::nullopt;
      row.reasons[cells[2]] = cells[4];
    } else {
      row.values[cells[2]] = std::stod(cells[3]);
    }
  }
  return tables;
}

/// Plain-text table of summary-window means per run, the across-run mean, and threshold
/// verdicts on the across-run means.
inline std::string summarize_tables(const std::vector<RunTable> &tables) {
  std::ostringstream os;
  os << std::left << std::setw(24) << "run";
  for (auto n : notion_names) os << std::right << std::setw(12) << n;
  os << "\n";
  std::array<std::vector<std::optional<double>>, notion_names.size()> per_notion;
  auto cell = [&](const std::optional<double> &v) {
    std::ostringstream c;
    if (v) c << std::fixed << std::setprecision(6) << *v;
    else c << "n/a";
    return c.str();
  };
  for (const auto &t : tables) {
    os << std::left << std::setw(24) << t.run;
    for (std::size_t i = 0; i < notion_names.size(); ++i) {
      double sum = 0.0;
      int n = 0;
      for (const auto &r : t.rounds) {
        if (r.k < t.window.first || r.k > t.window.second) continue;
        if (const auto &v = r.values.at(notion_names[i])) {
          sum += *v;
          ++n;
        }
      }
      std::optional<double> mean;
      if (n > 0) mean = sum / n;
      per_notion[i].push_back(mean);
      os << std::right << std::setw(12) << cell(mean);
    }
    os << "  window [" << t.window.first << "," << t.window.second << "]\n";
  }
  std::array<std::optional<double>, notion_names.size()> means;
  os << std::left << std::setw(24) << "mean";
  for (std::size_t i = 0; i < notion_names.size(); ++i) {
    means[i] = moments(per_notion[i]).mean;
    os << std::right << std::setw(12) << cell(means[i]);
  }
  os << "\n";
  const double threshold = tables.empty() ? 0.8 : tables.front().threshold;
  const auto v = threshold_check(means, threshold);
  os << std::left << std::setw(24) << ("verdict (>= " + cell(threshold).substr(0, 4) + ")");
  for (std::size_t i = 0; i < notion_names.size(); ++i) os << std::right << std::setw(12) << to_string(v.notions[i]);
  os << "\noverall: " << to_string(v.overall) << "\n";
  return os.str();
}

inline std::string summarize_result(const RunResult &r) {
  return summarize_tables({run_table_from_json(to_json(r), "seed" + std::to_string(r.seed))});
}

} // namespace fedfair
