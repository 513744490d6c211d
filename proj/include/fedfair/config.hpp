#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "fedfair/datakit.hpp"
#include "fedfair/error.hpp"
#include "fedfair/fairness.hpp"
#include "fedfair/numkit.hpp"
#include "fedfair/shapley.hpp"
#include "fedfair/strategies.hpp"

namespace fedfair {

using json = nlohmann::ordered_json;

static_assert(std::is_same_v<std::uint64_t, std::size_t>, "seed parsing assumes a 64-bit size_t");

enum class DatasetKind { synthetic, csv };

struct DatasetSpec {
  DatasetKind kind = DatasetKind::synthetic;
  SyntheticSpec synthetic;
  std::string path; // csv only; relative paths resolve against the config file's directory
  CsvSchema schema;
};

struct ModelSpec {
  ModelKind kind = ModelKind::logistic;
  std::size_t hidden = 32;
};

struct ExperimentConfig {
  std::string name = "experiment";
  StrategyConfig strategy;
  DatasetSpec dataset;
  ModelSpec model;
  PartitionSpec partition;
  std::vector<SensitiveAttributeSpec> attributes;
  std::size_t total_clients = 10;
  std::size_t clients_per_round = 5;
  int rounds = 30;
  int local_epochs = 5;
  double local_lr = 0.1;
  std::size_t batch_size = 32;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  FairnessWeights fairness_weights;
  ShapleyWeighting shapley_weighting = ShapleyWeighting::paper;
  EqOddsMode eqodds_mode = EqOddsMode::bounded;
  std::pair<int, int> summary_window{15, 30};
  double fairness_threshold = 0.8;
  int positive_class = 1;
  std::size_t shapley_cap = default_shapley_cap;

  /// Participation rate |S_k| / C.
  double participation_rate() const {
    return static_cast<double>(clients_per_round) / static_cast<double>(total_clients);
  }
};

/// Malformed config document (syntax or type errors). `what()` carries the location.
class ConfigParseError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// JSON -> config

namespace detail {

/// Walks a JSON object, consuming known keys and recording every problem with its path.
class ObjectReader {
public:
  ObjectReader(const json &j, std::string path, std::vector<std::string> &errors)
      : j_(j), path_(std::move(path)), errors_(errors) {
    if (!j_.is_object()) errors_.push_back(where() + "expected an object");
  }

  ~ObjectReader() {
    if (!j_.is_object()) return;
    for (const auto &[key, _] : j_.items())
      if (!seen_.contains(key)) errors_.push_back("unknown key '" + prefix() + key + "'");
  }

  bool has(const std::string &key) {
    seen_.insert(key);
    return j_.is_object() && j_.contains(key);
  }

  const json *get(const std::string &key) { return has(key) ? &j_.at(key) : nullptr; }

  template <typename T> void read(const std::string &key, T &out) {
    const json *v = get(key);
    if (!v) return;
    convert(*v, prefix() + key, out);
  }

  template <typename E>
  void read_enum(const std::string &key, E &out, std::initializer_list<std::pair<const char *, E>> names) {
    const json *v = get(key);
    if (!v) return;
    if (!v->is_string()) {
      errors_.push_back(prefix() + key + ": expected a string");
      return;
    }
    const auto s = v->get<std::string>();
    for (const auto &[n, e] : names)
      if (s == n) {
        out = e;
        return;
      }
    std::string allowed;
    for (const auto &[n, e] : names) allowed += (allowed.empty() ? "" : ", ") + std::string(n);
    errors_.push_back(prefix() + key + ": '" + s + "' is not one of {" + allowed + "}");
  }

  std::string prefix() const { return path_.empty() ? "" : path_ + "."; }
  std::vector<std::string> &errors() { return errors_; }

  void convert(const json &v, const std::string &path, double &out) {
    if (v.is_number()) out = v.get<double>();
    else errors_.push_back(path + ": expected a number");
  }
  void convert(const json &v, const std::string &path, int &out) {
    if (v.is_number_integer()) out = v.get<int>();
    else errors_.push_back(path + ": expected an integer");
  }
  void convert(const json &v, const std::string &path, std::size_t &out) {
    if (v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0)) out = v.get<std::size_t>();
    else errors_.push_back(path + ": expected a non-negative integer");
  }
  void convert(const json &v, const std::string &path, std::string &out) {
    if (v.is_string()) out = v.get<std::string>();
    else errors_.push_back(path + ": expected a string");
  }
  template <typename T> void convert(const json &v, const std::string &path, std::vector<T> &out) {
    if (!v.is_array()) {
      errors_.push_back(path + ": expected an array");
      return;
    }
    out.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      T item{};
      convert(v[i], path + "[" + std::to_string(i) + "]", item);
      out.push_back(item);
    }
  }

private:
  std::string where() const { return path_.empty() ? "config: " : path_ + ": "; }

  const json &j_;
  std::string path_;
  std::vector<std::string> &errors_;
  std::set<std::string> seen_;
};

inline void read_strategy(const json &j, StrategyConfig &s, std::vector<std::string> &errors) {
  ObjectReader r(j, "strategy", errors);
  if (!r.has("kind")) errors.push_back("strategy.kind is required");
  r.read_enum("kind", s.kind,
              {{"fedavg", StrategyKind::fedavg}, {"qfedavg", StrategyKind::qfedavg}, {"ditto", StrategyKind::ditto}});
  r.read("q", s.q);
  r.read("eta_q", s.eta_q);
  r.read("lambda", s.lambda);
  r.read("eta_l", s.eta_l);
  r.read("personal_epochs", s.personal_epochs);
}

inline void read_dataset(const json &j, DatasetSpec &d, std::vector<std::string> &errors) {
  ObjectReader r(j, "dataset", errors);
  if (!r.has("kind")) errors.push_back("dataset.kind is required");
  r.read_enum("kind", d.kind, {{"synthetic", DatasetKind::synthetic}, {"csv", DatasetKind::csv}});
  if (d.kind == DatasetKind::synthetic) {
    auto &s = d.synthetic;
    r.read("n_samples", s.n_samples);
    r.read("n_classes", s.n_classes);
    r.read("n_features", s.n_features);
    r.read("class_skew", s.class_skew);
    r.read("separation", s.separation);
    r.read("group_fraction", s.group_fraction);
    r.read("group_noise", s.group_noise);
  } else {
    r.read("path", d.path);
    if (const json *cols = r.get("columns")) {
      if (!cols->is_array()) {
        errors.push_back("dataset.columns: expected an array");
      } else {
        for (std::size_t i = 0; i < cols->size(); ++i) {
          CsvColumn c;
          ObjectReader cr((*cols)[i], "dataset.columns[" + std::to_string(i) + "]", errors);
          cr.read("name", c.name);
          cr.read_enum("role", c.role,
                       {{"continuous", ColumnRole::continuous},
                        {"categorical", ColumnRole::categorical},
                        {"label", ColumnRole::label},
                        {"ignore", ColumnRole::ignore}});
          cr.read("categories", c.categories);
          d.schema.columns.push_back(std::move(c));
        }
      }
    }
  }
}

inline void read_attribute(const json &j, std::size_t index, SensitiveAttributeSpec &a,
                           std::vector<std::string> &errors) {
  const std::string path = "attributes[" + std::to_string(index) + "]";
  ObjectReader r(j, path, errors);
  a.attribute_id = index;
  r.read("attribute_id", a.attribute_id);
  r.read("name", a.name);
  if (const json *p = r.get("predicate")) {
    ObjectReader pr(*p, path + ".predicate", errors);
    pr.read_enum("kind", a.predicate.kind,
                 {{"label_equals", PredicateKind::label_equals},
                  {"feature_at_least", PredicateKind::feature_at_least},
                  {"feature_below", PredicateKind::feature_below},
                  {"column_equals", PredicateKind::column_equals}});
    pr.read("label", a.predicate.label);
    pr.read("feature", a.predicate.feature);
    pr.read("threshold", a.predicate.threshold);
    pr.read("column", a.predicate.column);
    pr.read("value", a.predicate.value);
  } else {
    errors.push_back(path + ".predicate is required");
  }
}

} // namespace detail

struct ConfigParse {
  ExperimentConfig config;
  std::vector<std::string> errors;
};

/// Schema-level parse. Unknown keys and type errors are collected, not thrown.
inline ConfigParse parse_config(const json &j, const std::filesystem::path &base_dir = {}) {
  ConfigParse out;
  auto &c = out.config;
  auto &errors = out.errors;
  {
    detail::ObjectReader r(j, "", errors);
    r.read("name", c.name);
    if (const json *s = r.get("strategy")) detail::read_strategy(*s, c.strategy, errors);
    else errors.push_back("strategy is required");
    if (const json *d = r.get("dataset")) detail::read_dataset(*d, c.dataset, errors);
    else errors.push_back("dataset is required");
    if (const json *m = r.get("model")) {
      detail::ObjectReader mr(*m, "model", errors);
      mr.read_enum("kind", c.model.kind, {{"logistic", ModelKind::logistic}, {"mlp", ModelKind::mlp}});
      mr.read("hidden", c.model.hidden);
    }
    r.read("total_clients", c.total_clients);
    c.partition.clients = c.total_clients;
    if (const json *p = r.get("partition")) {
      detail::ObjectReader pr(*p, "partition", errors);
      pr.read_enum("mode", c.partition.mode, {{"iid", PartitionMode::iid}, {"dirichlet", PartitionMode::dirichlet}});
      pr.read("alpha", c.partition.alpha);
      pr.read("clients", c.partition.clients);
      pr.read("train_fraction", c.partition.train_fraction);
      pr.read("auxiliary_fraction", c.partition.auxiliary_fraction);
      pr.read("max_attempts", c.partition.max_attempts);
    }
    if (const json *a = r.get("attributes")) {
      if (!a->is_array()) errors.push_back("attributes: expected an array");
      else
        for (std::size_t i = 0; i < a->size(); ++i) {
          SensitiveAttributeSpec spec;
          detail::read_attribute((*a)[i], i, spec, errors);
          c.attributes.push_back(std::move(spec));
        }
    }
    r.read("clients_per_round", c.clients_per_round);
    r.read("rounds", c.rounds);
    r.read("local_epochs", c.local_epochs);
    r.read("local_lr", c.local_lr);
    r.read("batch_size", c.batch_size);
    r.read("seeds", c.seeds);
    if (const json *w = r.get("fairness_weights")) {
      detail::ObjectReader wr(*w, "fairness_weights", errors);
      wr.read("w_j", c.fairness_weights.w_j);
      wr.read("w_g", c.fairness_weights.w_g);
      wr.read("w_r", c.fairness_weights.w_r);
      wr.read("w_o", c.fairness_weights.w_o);
    }
    r.read_enum("shapley_weighting", c.shapley_weighting,
                {{"paper", ShapleyWeighting::paper}, {"classic", ShapleyWeighting::classic}});
    r.read_enum("eqodds_mode", c.eqodds_mode,
                {{"bounded", EqOddsMode::bounded}, {"paper_literal", EqOddsMode::paper_literal}});
    if (const json *w = r.get("summary_window")) {
      std::vector<int> win;
      r.convert(*w, "summary_window", win);
      if (win.size() == 2) c.summary_window = {win[0], win[1]};
      else if (w->is_array()) errors.push_back("summary_window: expected [start_round, end_round]");
    }
    r.read("fairness_threshold", c.fairness_threshold);
    r.read("positive_class", c.positive_class);
    r.read("shapley_cap", c.shapley_cap);
  }
  if (c.dataset.kind == DatasetKind::csv && !c.dataset.path.empty() && !base_dir.empty() &&
      std::filesystem::path(c.dataset.path).is_relative())
    c.dataset.path = (base_dir / c.dataset.path).lexically_normal().string();
  return out;
}

/// Invariant checks on a parsed config. Every violation is reported.
inline std::vector<std::string> validate(const ExperimentConfig &c) {
  std::vector<std::string> errs = validate(c.strategy);
  auto add = [&](std::vector<std::string> more) { errs.insert(errs.end(), more.begin(), more.end()); };
  add(validate(c.fairness_weights));

  if (c.total_clients < 2) errs.push_back("total_clients (C) must be >= 2");
  if (c.clients_per_round < 1) errs.push_back("clients_per_round must be >= 1");
  if (c.clients_per_round > c.total_clients)
    errs.push_back("clients_per_round (|S_k| = " + std::to_string(c.clients_per_round) +
                   ") must not exceed total_clients (C = " + std::to_string(c.total_clients) + ")");
  if (c.clients_per_round > c.shapley_cap)
    errs.push_back("clients_per_round (" + std::to_string(c.clients_per_round) + ") exceeds shapley_cap (" +
                   std::to_string(c.shapley_cap) + "); exact Shapley enumeration is exponential in |S_k|");
  if (c.shapley_cap > 20) errs.push_back("shapley_cap must be <= 20");
  if (c.partition.clients != c.total_clients) errs.push_back("partition.clients must equal total_clients");
  if (c.rounds < 1) errs.push_back("rounds (K) must be >= 1");
  if (c.local_epochs < 1) errs.push_back("local_epochs (E) must be >= 1");
  if (!(c.local_lr > 0.0)) errs.push_back("local_lr must be > 0");
  if (c.batch_size < 1) errs.push_back("batch_size must be >= 1");
  if (c.seeds.empty()) errs.push_back("seeds must list at least one seed");
  const auto [ws, we] = c.summary_window;
  if (ws < 1 || we < ws || we > c.rounds)
    errs.push_back("summary_window [" + std::to_string(ws) + ", " + std::to_string(we) + "] must lie within [1, " +
                   std::to_string(c.rounds) + "] with start <= end");
  if (!(c.fairness_threshold >= 0.0 && c.fairness_threshold <= 1.0))
    errs.push_back("fairness_threshold must lie in [0,1]");
  if (c.model.kind == ModelKind::mlp && c.model.hidden < 1) errs.push_back("model.hidden must be >= 1");

  if (c.partition.mode == PartitionMode::dirichlet && !(c.partition.alpha > 0.0))
    errs.push_back("partition.alpha must be > 0");
  if (!(c.partition.train_fraction > 0.0 && c.partition.train_fraction < 1.0))
    errs.push_back("partition.train_fraction must lie in (0,1)");
  if (!(c.partition.auxiliary_fraction > 0.0 && c.partition.auxiliary_fraction < 1.0))
    errs.push_back("partition.auxiliary_fraction must lie in (0,1)");
  if (c.partition.max_attempts < 1) errs.push_back("partition.max_attempts must be >= 1");

  std::size_t known_features = 0;
  int known_classes = 0;
  if (c.dataset.kind == DatasetKind::synthetic) {
    const auto &s = c.dataset.synthetic;
    known_features = s.n_features;
    known_classes = s.n_classes;
    if (s.n_samples < 1) errs.push_back("dataset.n_samples must be >= 1");
    if (s.n_classes < 2) errs.push_back("dataset.n_classes must be >= 2");
    if (s.n_features < (s.group_fraction > 0.0 ? 2u : 1u))
      errs.push_back("dataset.n_features too small (the group column needs one extra feature)");
    if (!s.class_skew.empty()) {
      double sum = 0.0;
      bool negative = false;
      for (double w : s.class_skew) {
        sum += w;
        negative |= !(w >= 0.0);
      }
      if (s.class_skew.size() != static_cast<std::size_t>(s.n_classes))
        errs.push_back("dataset.class_skew must have n_classes entries");
      if (negative) errs.push_back("dataset.class_skew weights must be >= 0");
      if (std::abs(sum - 1.0) > 1e-9) errs.push_back("dataset.class_skew must sum to 1");
    }
    if (!(s.separation >= 0.0)) errs.push_back("dataset.separation must be >= 0");
    if (!(s.group_fraction >= 0.0 && s.group_fraction <= 1.0)) errs.push_back("dataset.group_fraction must lie in [0,1]");
    if (!(s.group_noise > 0.0)) errs.push_back("dataset.group_noise must be > 0");
  } else {
    if (c.dataset.path.empty()) errs.push_back("dataset.path is required for csv datasets");
    else if (!std::ifstream(c.dataset.path)) errs.push_back("dataset.path '" + c.dataset.path + "' is not readable");
    if (c.dataset.schema.columns.empty()) errs.push_back("dataset.columns must describe every CSV column");
    int labels = 0;
    std::set<std::string> names;
    for (const auto &col : c.dataset.schema.columns) {
      labels += col.role == ColumnRole::label;
      if (col.name.empty()) errs.push_back("dataset.columns entries need a name");
      if (!names.insert(col.name).second) errs.push_back("dataset.columns lists '" + col.name + "' twice");
      if (col.role == ColumnRole::label && !col.categories.empty()) known_classes = static_cast<int>(col.categories.size());
    }
    if (labels != 1) errs.push_back("dataset.columns must contain exactly one label column");
  }
  if (c.positive_class < 0 || (known_classes > 0 && c.positive_class >= known_classes))
    errs.push_back("positive_class must be a valid class id");

  std::set<std::string> attr_names;
  for (std::size_t i = 0; i < c.attributes.size(); ++i) {
    const auto &a = c.attributes[i];
    const std::string path = "attributes[" + std::to_string(i) + "]";
    if (a.attribute_id != i) errs.push_back(path + ".attribute_id must equal its position " + std::to_string(i));
    if (a.name.empty()) errs.push_back(path + ".name is required");
    else if (!attr_names.insert(a.name).second) errs.push_back(path + ".name '" + a.name + "' is not unique");
    const auto &p = a.predicate;
    if ((p.kind == PredicateKind::feature_at_least || p.kind == PredicateKind::feature_below) && known_features > 0 &&
        p.feature >= known_features)
      errs.push_back(path + ".predicate.feature is out of range");
    if (p.kind == PredicateKind::column_equals && c.dataset.kind != DatasetKind::csv)
      errs.push_back(path + ".predicate: column_equals needs a csv dataset");
    if (p.kind == PredicateKind::label_equals && known_classes > 0 && (p.label < 0 || p.label >= known_classes))
      errs.push_back(path + ".predicate.label is out of range");
  }
  return errs;
}

// ---------------------------------------------------------------------------
// config -> JSON

inline json to_json(const ExperimentConfig &c) {
  json j;
  j["name"] = c.name;
  j["strategy"] = {{"kind", to_string(c.strategy.kind)}, {"q", c.strategy.q},
                   {"eta_q", c.strategy.eta_q},          {"lambda", c.strategy.lambda},
                   {"eta_l", c.strategy.eta_l},          {"personal_epochs", c.strategy.personal_epochs}};
  json d;
  if (c.dataset.kind == DatasetKind::synthetic) {
    const auto &s = c.dataset.synthetic;
    d = {{"kind", "synthetic"},       {"n_samples", s.n_samples},   {"n_classes", s.n_classes},
         {"n_features", s.n_features}, {"class_skew", s.class_skew}, {"separation", s.separation},
         {"group_fraction", s.group_fraction}, {"group_noise", s.group_noise}};
  } else {
    d = {{"kind", "csv"}, {"path", c.dataset.path}};
    json cols = json::array();
    for (const auto &col : c.dataset.schema.columns) {
      static const char *roles[] = {"continuous", "categorical", "label", "ignore"};
      json cj = {{"name", col.name}, {"role", roles[static_cast<int>(col.role)]}};
      if (!col.categories.empty()) cj["categories"] = col.categories;
      cols.push_back(cj);
    }
    d["columns"] = cols;
  }
  j["dataset"] = d;
  j["model"] = {{"kind", to_string(c.model.kind)}, {"hidden", c.model.hidden}};
  j["partition"] = {{"mode", c.partition.mode == PartitionMode::iid ? "iid" : "dirichlet"},
                    {"alpha", c.partition.alpha},
                    {"clients", c.partition.clients},
                    {"train_fraction", c.partition.train_fraction},
                    {"auxiliary_fraction", c.partition.auxiliary_fraction},
                    {"max_attempts", c.partition.max_attempts}};
  json attrs = json::array();
  for (const auto &a : c.attributes) {
    static const char *kinds[] = {"label_equals", "feature_at_least", "feature_below", "column_equals"};
    json p = {{"kind", kinds[static_cast<int>(a.predicate.kind)]}};
    switch (a.predicate.kind) {
    case PredicateKind::label_equals:
      p["label"] = a.predicate.label;
      break;
    case PredicateKind::feature_at_least:
    case PredicateKind::feature_below:
      p["feature"] = a.predicate.feature;
      p["threshold"] = a.predicate.threshold;
      break;
    case PredicateKind::column_equals:
      p["column"] = a.predicate.column;
      p["value"] = a.predicate.value;
      break;
    }
    attrs.push_back({{"attribute_id", a.attribute_id}, {"name", a.name}, {"predicate", p}});
  }
  j["attributes"] = attrs;
  j["total_clients"] = c.total_clients;
  j["clients_per_round"] = c.clients_per_round;
  j["rounds"] = c.rounds;
  j["local_epochs"] = c.local_epochs;
  j["local_lr"] = c.local_lr;
  j["batch_size"] = c.batch_size;
  j["seeds"] = c.seeds;
  j["fairness_weights"] = {{"w_j", c.fairness_weights.w_j},
                           {"w_g", c.fairness_weights.w_g},
                           {"w_r", c.fairness_weights.w_r},
                           {"w_o", c.fairness_weights.w_o}};
  j["shapley_weighting"] = to_string(c.shapley_weighting);
  j["eqodds_mode"] = to_string(c.eqodds_mode);
  j["summary_window"] = {c.summary_window.first, c.summary_window.second};
  j["fairness_threshold"] = c.fairness_threshold;
  j["positive_class"] = c.positive_class;
  j["shapley_cap"] = c.shapley_cap;
  return j;
}

/// Reads and schema-parses a config file. Throws ConfigParseError on unreadable files or JSON
/// syntax errors; schema problems come back in ConfigParse::errors.
inline ConfigParse load_config_file(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw ConfigParseError(path.string() + ": cannot open file");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error &e) {
    throw ConfigParseError(path.string() + ": " + e.what());
  }
  return parse_config(j, path.parent_path());
}

// ---------------------------------------------------------------------------
// Presets

namespace detail {

inline CsvSchema tabular_sample_schema() {
  static const char *continuous[] = {
      "duration",          "src_bytes",          "dst_bytes",         "land",
      "wrong_fragment",    "urgent",             "hot",               "num_failed_logins",
      "logged_in",         "num_compromised",    "root_shell",        "su_attempted",
      "num_root",          "num_file_creations", "num_shells",        "num_access_files",
      "num_outbound_cmds", "is_host_login",      "is_guest_login",    "count",
      "srv_count",         "serror_rate",        "srv_serror_rate",   "rerror_rate",
      "srv_rerror_rate",   "same_srv_rate",      "diff_srv_rate",     "srv_diff_host_rate",
      "dst_host_count",    "dst_host_srv_count", "dst_host_same_srv_rate", "dst_host_diff_srv_rate",
      "dst_host_same_src_port_rate", "dst_host_srv_diff_host_rate", "dst_host_serror_rate",
      "dst_host_srv_serror_rate", "dst_host_rerror_rate", "dst_host_srv_rerror_rate"};
  CsvSchema s;
  s.columns.push_back({"duration", ColumnRole::continuous, {}});
  s.columns.push_back({"protocol_type", ColumnRole::categorical, {"tcp", "udp", "icmp"}});
  s.columns.push_back({"service", ColumnRole::categorical, {"http", "ftp", "smtp", "private", "domain_u", "other"}});
  s.columns.push_back({"flag", ColumnRole::categorical, {"SF", "S0", "REJ", "RSTR"}});
  for (std::size_t i = 1; i < std::size(continuous); ++i) s.columns.push_back({continuous[i], ColumnRole::continuous, {}});
  s.columns.push_back({"label", ColumnRole::label, {"normal", "anomaly"}});
  return s;
}

} // namespace detail

/// Desk-scale experiment grid: {fedavg, qfedavg, ditto} x {iid, dirichlet} x {silo, device, tabular}.
/// Names read "<strategy>-<partition>-<setting>". Tabular presets point at the bundled sample CSV
/// relative to the presets/ directory.
inline std::vector<std::pair<std::string, ExperimentConfig>> builtin_presets() {
  std::vector<std::pair<std::string, ExperimentConfig>> out;
  for (auto strategy : {StrategyKind::fedavg, StrategyKind::qfedavg, StrategyKind::ditto}) {
    for (auto mode : {PartitionMode::iid, PartitionMode::dirichlet}) {
      for (const std::string setting : {"silo", "device", "tabular"}) {
        ExperimentConfig c;
        c.strategy.kind = strategy;
        c.partition.mode = mode;
        c.rounds = 30;
        c.summary_window = {15, 30};
        c.local_epochs = 5;
        c.local_lr = 0.1;
        c.seeds = {1, 2, 3};
        if (setting == "tabular") {
          c.dataset.kind = DatasetKind::csv;
          c.dataset.path = "../data/tabular_sample.csv";
          c.dataset.schema = detail::tabular_sample_schema();
          c.total_clients = 10;
          c.clients_per_round = 5;
          c.partition.alpha = 3.0;
          c.strategy.lambda = 0.85;
          c.attributes = {{0, "protocol_tcp", {PredicateKind::column_equals, 1, 0, 0.5, "protocol_type", "tcp"}}};
        } else {
          auto &s = c.dataset.synthetic;
          s.n_classes = 2;
          s.n_features = 6;
          s.separation = 2.5;
          s.group_fraction = 0.3;
          s.group_noise = 1.6;
          c.attributes = {{0, "protected_group", {PredicateKind::feature_at_least, 1, 5, 0.5, {}, {}}}};
          if (setting == "silo") {
            s.n_samples = 6000;
            c.total_clients = 10;
            c.clients_per_round = 5;
            c.partition.alpha = 0.5;
          } else {
            s.n_samples = 30000;
            c.total_clients = 100;
            c.clients_per_round = 5;
            c.partition.alpha = 3.0; // smaller alpha leaves some of 100 clients without a test split
          }
        }
        c.partition.clients = c.total_clients;
        const std::string name =
            std::string(to_string(strategy)) + "-" + (mode == PartitionMode::iid ? "iid" : "dirichlet") + "-" + setting;
        c.name = name;
        out.emplace_back(name, std::move(c));
      }
    }
  }
  return out;
}

inline std::optional<ExperimentConfig> find_preset(const std::string &name) {
  for (auto &[n, c] : builtin_presets())
    if (n == name) return c;
  return std::nullopt;
}

} // namespace fedfair
