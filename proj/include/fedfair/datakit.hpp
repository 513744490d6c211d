#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fedfair/error.hpp"
#include "fedfair/numkit.hpp"
#include "fedfair/rng.hpp"

namespace fedfair {

// ---------------------------------------------------------------------------
// Sensitive attributes

enum class PredicateKind { label_equals, feature_at_least, feature_below, column_equals };

/// Declarative membership rule. `feature` indexes the emitted (normalized, encoded) feature
/// vector; `column`/`value` compare a raw CSV cell and are only valid for CSV sources.
struct AttributePredicate {
  PredicateKind kind = PredicateKind::label_equals;
  int label = 1;
  std::size_t feature = 0;
  double threshold = 0.5;
  std::string column;
  std::string value;
};

struct SensitiveAttributeSpec {
  std::size_t attribute_id = 0;
  std::string name;
  AttributePredicate predicate;
};

namespace detail {

using RawRow = std::map<std::string, std::string, std::less<>>;

inline bool attribute_matches(const AttributePredicate &p, int label, std::span<const double> features,
                              const RawRow *raw) {
  switch (p.kind) {
  case PredicateKind::label_equals:
    return label == p.label;
  case PredicateKind::feature_at_least:
  case PredicateKind::feature_below: {
    if (p.feature >= features.size())
      throw ConfigError("attribute predicate references feature " + std::to_string(p.feature) + " of " +
                        std::to_string(features.size()));
    const bool ge = features[p.feature] >= p.threshold;
    return p.kind == PredicateKind::feature_at_least ? ge : !ge;
  }
  case PredicateKind::column_equals: {
    if (raw == nullptr) throw ConfigError("column_equals predicates need a CSV source");
    const auto it = raw->find(p.column);
    if (it == raw->end()) throw ConfigError("attribute predicate references unknown column '" + p.column + "'");
    return it->second == p.value;
  }
  }
  return false;
}

inline void fill_attributes(LabeledBatch &batch, std::span<const SensitiveAttributeSpec> specs,
                            const std::vector<RawRow> *raw_rows = nullptr) {
  batch.attribute_count = specs.size();
  batch.attribute_flags.assign(batch.size() * specs.size(), 0);
  for (std::size_t i = 0; i < batch.size(); ++i)
    for (std::size_t a = 0; a < specs.size(); ++a)
      batch.attribute_flags[i * specs.size() + a] = attribute_matches(
          specs[a].predicate, batch.labels[i], batch.features.row(i), raw_rows ? &(*raw_rows)[i] : nullptr);
}

} // namespace detail

// ---------------------------------------------------------------------------
// Synthetic data

/// Gaussian blobs. Class c is centred on (separation * sqrt 2) * e_{c mod d} scaled by
/// (1 + c / d), d being the informative width, so any two of the first d classes sit
/// `separation` standard deviations either side of the boundary between them.
///
/// With group_fraction > 0 the last column becomes a 0/1 group indicator and the flagged
/// group's blobs are widened by group_noise, giving a protected group a harder task.
struct SyntheticSpec {
  std::size_t n_samples = 1000;
  int n_classes = 2;
  std::size_t n_features = 4;
  std::vector<double> class_skew; // empty means uniform
  double separation = 3.0;
  double group_fraction = 0.0;
  double group_noise = 1.0;
};

inline LabeledBatch synth_classification(const SyntheticSpec &spec, std::span<const SensitiveAttributeSpec> attrs,
                                         RngStream &rng) {
  if (spec.n_classes < 2) throw ConfigError("synthetic data needs n_classes >= 2");
  if (spec.n_samples == 0) throw ConfigError("synthetic data needs n_samples >= 1");
  const bool grouped = spec.group_fraction > 0.0;
  if (spec.n_features < (grouped ? 2u : 1u)) throw ConfigError("synthetic data needs more features");
  if (spec.group_fraction < 0.0 || spec.group_fraction > 1.0) throw ConfigError("group_fraction must lie in [0,1]");
  if (!(spec.group_noise > 0.0)) throw ConfigError("group_noise must be positive");

  std::vector<double> weights = spec.class_skew;
  if (weights.empty()) weights.assign(static_cast<std::size_t>(spec.n_classes), 1.0 / spec.n_classes);
  if (weights.size() != static_cast<std::size_t>(spec.n_classes))
    throw ConfigError("class_skew has " + std::to_string(weights.size()) + " entries for " +
                      std::to_string(spec.n_classes) + " classes");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw ConfigError("class_skew weights must be non-negative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("class_skew weights must sum to 1");

  const std::size_t informative = spec.n_features - (grouped ? 1 : 0);
  LabeledBatch out;
  out.n_classes = spec.n_classes;
  out.features = Matrix(spec.n_samples, spec.n_features);
  out.labels.resize(spec.n_samples);
  out.ids.resize(spec.n_samples);

  for (std::size_t i = 0; i < spec.n_samples; ++i) {
    const double u = rng.uniform();
    double acc = 0.0;
    int label = spec.n_classes - 1;
    for (int c = 0; c < spec.n_classes; ++c) {
      acc += weights[static_cast<std::size_t>(c)];
      if (u < acc) {
        label = c;
        break;
      }
    }
    while (weights[static_cast<std::size_t>(label)] == 0.0) --label; // u landed past rounding slack
    out.labels[i] = label;
    out.ids[i] = i;

    const bool in_group = grouped && rng.uniform() < spec.group_fraction;
    const double sd = in_group ? spec.group_noise : 1.0;
    const auto axis = static_cast<std::size_t>(label) % informative;
    const double radius = spec.separation * std::sqrt(2.0) *
                          (1.0 + static_cast<double>(static_cast<std::size_t>(label) / informative));
    for (std::size_t j = 0; j < informative; ++j) out.features(i, j) = (j == axis ? radius : 0.0) + sd * rng.normal();
    if (grouped) out.features(i, informative) = in_group ? 1.0 : 0.0;
  }

  for (std::size_t j = 0; j < spec.n_features; ++j) {
    double lo = out.features(0, j), hi = lo;
    for (std::size_t i = 1; i < spec.n_samples; ++i) {
      lo = std::min(lo, out.features(i, j));
      hi = std::max(hi, out.features(i, j));
    }
    for (std::size_t i = 0; i < spec.n_samples; ++i)
      out.features(i, j) = hi > lo ? (out.features(i, j) - lo) / (hi - lo) : 0.0;
  }
  detail::fill_attributes(out, attrs);
  return out;
}

// ---------------------------------------------------------------------------
// CSV ingestion

enum class ColumnRole { continuous, categorical, label, ignore };

struct CsvColumn {
  std::string name;
  ColumnRole role = ColumnRole::continuous;
  /// Allowed values for categorical/label columns, in encoding order. Empty: inferred from
  /// the accepted rows in sorted order.
  std::vector<std::string> categories;
};

struct CsvSchema {
  std::vector<CsvColumn> columns;
};

struct CsvReject {
  std::size_t line = 0; // 1-based line in the file, header is line 1
  std::string reason;
};

struct CsvLoadResult {
  LabeledBatch batch;
  std::vector<CsvReject> rejects;
  std::vector<std::string> feature_names;
  std::vector<std::string> label_values;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string &line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

inline std::optional<double> parse_number(const std::string &s) {
  if (s.empty()) return std::nullopt;
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    while (used < s.size() && (s[used] == ' ' || s[used] == '\t')) ++used;
    if (used != s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
  } catch (const std::exception &) {
    return std::nullopt;
  }
}

} // namespace detail

/// Reads a headered CSV, one-hot encoding categorical columns and min-max normalizing
/// continuous ones. Rows with unknown categories or non-numeric continuous cells are skipped
/// and listed in `rejects`.
inline CsvLoadResult load_csv(const std::string &path, const CsvSchema &schema,
                              std::span<const SensitiveAttributeSpec> attrs) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open CSV file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("CSV file '" + path + "' has no header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = detail::split_csv_line(line);

  std::vector<const CsvColumn *> roles(header.size(), nullptr);
  std::size_t label_col = header.size();
  for (std::size_t c = 0; c < header.size(); ++c) {
    for (const auto &col : schema.columns)
      if (col.name == header[c]) roles[c] = &col;
    if (!roles[c]) throw ConfigError("CSV column '" + header[c] + "' is not covered by the schema");
    if (roles[c]->role == ColumnRole::label) {
      if (label_col != header.size()) throw ConfigError("CSV schema declares more than one label column");
      label_col = c;
    }
  }
  for (const auto &col : schema.columns)
    if (std::find(header.begin(), header.end(), col.name) == header.end())
      throw ConfigError("schema column '" + col.name + "' missing from CSV header");
  if (label_col == header.size()) throw ConfigError("CSV schema has no label column");

  CsvLoadResult result;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> lines;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size()) {
      result.rejects.push_back({line_no, "expected " + std::to_string(header.size()) + " fields, got " +
                                             std::to_string(cells.size())});
      continue;
    }
    std::string reason;
    for (std::size_t c = 0; c < header.size() && reason.empty(); ++c) {
      const auto &col = *roles[c];
      if (col.role == ColumnRole::continuous && !detail::parse_number(cells[c]))
        reason = "non-numeric value '" + cells[c] + "' in continuous column '" + col.name + "'";
      else if ((col.role == ColumnRole::categorical || col.role == ColumnRole::label) && !col.categories.empty() &&
               std::find(col.categories.begin(), col.categories.end(), cells[c]) == col.categories.end())
        reason = "unknown category '" + cells[c] + "' in column '" + col.name + "'";
    }
    if (!reason.empty()) {
      result.rejects.push_back({line_no, reason});
      continue;
    }
    rows.push_back(std::move(cells));
    lines.push_back(line_no);
  }

  std::vector<std::vector<std::string>> categories(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    const auto &col = *roles[c];
    if (col.role != ColumnRole::categorical && col.role != ColumnRole::label) continue;
    if (!col.categories.empty()) {
      categories[c] = col.categories;
    } else {
      std::set<std::string> seen;
      for (const auto &r : rows) seen.insert(r[c]);
      categories[c].assign(seen.begin(), seen.end());
    }
  }
  result.label_values = categories[label_col];
  if (result.label_values.size() < 2) throw ConfigError("label column needs at least two distinct values");

  std::vector<std::size_t> offset(header.size(), 0);
  std::size_t width = 0;
  for (std::size_t c = 0; c < header.size(); ++c) {
    offset[c] = width;
    switch (roles[c]->role) {
    case ColumnRole::continuous:
      result.feature_names.push_back(header[c]);
      ++width;
      break;
    case ColumnRole::categorical:
      for (const auto &v : categories[c]) result.feature_names.push_back(header[c] + "=" + v);
      width += categories[c].size();
      break;
    default:
      break;
    }
  }
  if (width == 0) throw ConfigError("CSV schema yields no feature columns");

  auto &batch = result.batch;
  batch.n_classes = static_cast<int>(result.label_values.size());
  batch.features = Matrix(rows.size(), width);
  batch.labels.resize(rows.size());
  batch.ids.resize(rows.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    const auto role = roles[c]->role;
    if (role == ColumnRole::continuous) {
      double lo = 0.0, hi = 0.0;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const double v = *detail::parse_number(rows[i][c]);
        if (i == 0 || v < lo) lo = v;
        if (i == 0 || v > hi) hi = v;
      }
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const double v = *detail::parse_number(rows[i][c]);
        batch.features(i, offset[c]) = hi > lo ? (v - lo) / (hi - lo) : 0.0;
      }
    } else if (role == ColumnRole::categorical || role == ColumnRole::label) {
      const auto &cats = categories[c];
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto k = static_cast<std::size_t>(std::find(cats.begin(), cats.end(), rows[i][c]) - cats.begin());
        if (role == ColumnRole::label) batch.labels[i] = static_cast<int>(k);
        else batch.features(i, offset[c] + k) = 1.0;
      }
    }
  }
  for (std::size_t i = 0; i < rows.size(); ++i) batch.ids[i] = lines[i] - 2;

  std::vector<detail::RawRow> raw(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t c = 0; c < header.size(); ++c) raw[i][header[c]] = rows[i][c];
  detail::fill_attributes(batch, attrs, &raw);
  return result;
}

// ---------------------------------------------------------------------------
// Partitioning

enum class PartitionMode { iid, dirichlet };

struct PartitionSpec {
  PartitionMode mode = PartitionMode::iid;
  double alpha = 0.5;
  std::size_t clients = 10;
  double train_fraction = 0.9;
  double auxiliary_fraction = 0.1;
  /// Dirichlet draws are repeated until every client can hold a full test split.
  int max_attempts = 1000;
};

struct ClientDataset {
  std::size_t client_id = 0;
  LabeledBatch train;
  LabeledBatch test;
};

struct AuxiliaryDataset {
  LabeledBatch data;
};

struct PartitionResult {
  std::vector<ClientDataset> clients;
  AuxiliaryDataset auxiliary;
  int attempts = 1;
};

inline constexpr std::size_t min_test_samples = 10;

/// (train, test) sizes for a shard of n samples.
inline std::pair<std::size_t, std::size_t> split_sizes(std::size_t n, double train_fraction) {
  auto train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * train_fraction));
  train = std::min(train, n);
  return {train, n - train};
}

inline bool shard_is_viable(std::size_t n, double train_fraction) {
  const auto [train, test] = split_sizes(n, train_fraction);
  return train >= 1 && test >= min_test_samples;
}

inline void validate(const PartitionSpec &spec) {
  if (spec.clients < 2) throw ConfigError("partition needs at least 2 clients");
  if (spec.mode == PartitionMode::dirichlet && !(spec.alpha > 0.0))
    throw ConfigError("dirichlet alpha must be > 0");
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
    throw ConfigError("train_fraction must lie in (0,1)");
  if (!(spec.auxiliary_fraction > 0.0 && spec.auxiliary_fraction < 1.0))
    throw ConfigError("auxiliary_fraction must lie in (0,1)");
  if (spec.max_attempts < 1) throw ConfigError("max_attempts must be >= 1");
}

/// Carves a class-stratified auxiliary set off the pool, assigns the rest to clients (iid
/// round-robin dealing, or per-class Dirichlet proportions) and splits each shard into
/// train/test.
inline PartitionResult partition(const LabeledBatch &data, const PartitionSpec &spec, RngStream &rng) {
  validate(spec);
  const auto n_classes = static_cast<std::size_t>(data.n_classes);
  std::vector<std::vector<std::size_t>> by_class(n_classes);
  for (std::size_t i = 0; i < data.size(); ++i) by_class[static_cast<std::size_t>(data.labels[i])].push_back(i);
  for (auto &idx : by_class) rng.shuffle(std::span<std::size_t>(idx));

  std::vector<std::size_t> aux_idx;
  for (auto &idx : by_class) {
    const auto take = static_cast<std::size_t>(
        std::llround(static_cast<double>(idx.size()) * spec.auxiliary_fraction));
    aux_idx.insert(aux_idx.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take));
    idx.erase(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take));
  }
  if (aux_idx.empty()) throw ConfigError("auxiliary set is empty; increase samples or auxiliary_fraction");

  std::vector<std::vector<std::size_t>> shards(spec.clients);
  PartitionResult result;
  if (spec.mode == PartitionMode::iid) {
    std::size_t pos = 0;
    for (const auto &idx : by_class)
      for (auto i : idx) shards[pos++ % spec.clients].push_back(i);
  } else {
    for (int attempt = 1;; ++attempt) {
      for (auto &s : shards) s.clear();
      for (const auto &idx : by_class) {
        std::vector<double> p(spec.clients);
        double sum = 0.0;
        for (auto &v : p) sum += (v = rng.gamma(spec.alpha));
        std::size_t start = 0;
        double cum = 0.0;
        for (std::size_t c = 0; c < spec.clients; ++c) {
          cum += p[c] / sum;
          std::size_t end = c + 1 == spec.clients
                                ? idx.size()
                                : std::min(idx.size(), static_cast<std::size_t>(cum * static_cast<double>(idx.size())));
          end = std::max(end, start);
          shards[c].insert(shards[c].end(), idx.begin() + static_cast<std::ptrdiff_t>(start),
                           idx.begin() + static_cast<std::ptrdiff_t>(end));
          start = end;
        }
      }
      result.attempts = attempt;
      const bool ok = std::all_of(shards.begin(), shards.end(),
                                  [&](const auto &s) { return shard_is_viable(s.size(), spec.train_fraction); });
      if (ok || attempt >= spec.max_attempts) break;
    }
  }

  for (std::size_t c = 0; c < spec.clients; ++c) {
    auto &s = shards[c];
    if (!shard_is_viable(s.size(), spec.train_fraction))
      throw ConfigError("client " + std::to_string(c) + " receives " + std::to_string(s.size()) +
                        " samples, too few for a test split of at least " + std::to_string(min_test_samples));
    std::sort(s.begin(), s.end());
    rng.shuffle(std::span<std::size_t>(s));
    const auto [n_train, n_test] = split_sizes(s.size(), spec.train_fraction);
    ClientDataset cd;
    cd.client_id = c;
    cd.train = data.subset(std::span<const std::size_t>(s).first(n_train));
    cd.test = data.subset(std::span<const std::size_t>(s).subspan(n_train, n_test));
    result.clients.push_back(std::move(cd));
  }
  std::sort(aux_idx.begin(), aux_idx.end());
  result.auxiliary.data = data.subset(aux_idx);
  return result;
}

} // namespace fedfair
