#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedfair/datakit.hpp"
#include "fedfair/error.hpp"
#include "fedfair/numkit.hpp"
#include "fedfair/parallel.hpp"

namespace fedfair {

/// `paper` sums marginal contributions over every coalition and divides by the participant
/// count only. `classic` additionally divides each term by C(|S|-1, |coalition|), which is the
/// standard Shapley value. The two agree whenever at most two clients participate.
enum class ShapleyWeighting { paper, classic };

inline const char *to_string(ShapleyWeighting w) { return w == ShapleyWeighting::paper ? "paper" : "classic"; }

inline constexpr std::size_t default_shapley_cap = 10;

/// Coalition utilities for one or more rounds. A coalition is keyed by a bitmask over the
/// round's participants in ascending id order. Entries are write-once.
class UtilityCache {
public:
  std::optional<double> find(int round, std::uint64_t coalition) const {
    const auto it = entries_.find({round, coalition});
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }

  void insert(int round, std::uint64_t coalition, double value) { entries_.emplace(Key{round, coalition}, value); }

  std::size_t size() const { return entries_.size(); }

private:
  using Key = std::pair<int, std::uint64_t>;
  std::map<Key, double> entries_;
};

namespace detail {

inline double binomial(std::size_t n, std::size_t k) {
  double r = 1.0;
  for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return r;
}

} // namespace detail

/// Per-player values from a table of coalition utilities, `utility[mask]` for every mask over
/// `players` players. utility[0] is ignored and taken as 0.
inline std::vector<double> shapley_from_table(std::size_t players, std::span<const double> utility,
                                              ShapleyWeighting weighting) {
  if (players >= 63) throw ConfigError("too many players for exact enumeration");
  const std::uint64_t full = std::uint64_t{1} << players;
  if (utility.size() != full) throw ConfigError("utility table must have 2^players entries");
  auto u = [&](std::uint64_t mask) { return mask == 0 ? 0.0 : utility[mask]; };

  std::vector<double> weight_by_size(players, 1.0);
  if (weighting == ShapleyWeighting::classic)
    for (std::size_t s = 0; s < players; ++s) weight_by_size[s] = 1.0 / detail::binomial(players - 1, s);

  std::vector<double> out(players, 0.0);
  for (std::size_t n = 0; n < players; ++n) {
    const std::uint64_t bit = std::uint64_t{1} << n;
    double sum = 0.0;
    for (std::uint64_t mask = 0; mask < full; ++mask) {
      if (mask & bit) continue;
      sum += weight_by_size[static_cast<std::size_t>(std::popcount(mask))] * (u(mask | bit) - u(mask));
    }
    out[n] = sum / static_cast<double>(players);
  }
  return out;
}

/// Loss reduction on the auxiliary set when the global model is replaced by the unweighted
/// mean of the coalition's locally trained parameters. The empty coalition scores 0.
inline double subset_utility(const std::map<std::size_t, ModelParams> &round_params,
                             std::span<const std::size_t> coalition, const ModelParams &global_before,
                             const AuxiliaryDataset &aux, std::optional<double> base_loss = std::nullopt) {
  if (coalition.empty()) return 0.0;
  if (aux.data.empty()) throw ConfigError("auxiliary dataset is empty");
  std::vector<ModelParams> members;
  members.reserve(coalition.size());
  for (auto n : coalition) {
    const auto it = round_params.find(n);
    if (it == round_params.end())
      throw ProtocolError("coalition member " + std::to_string(n) + " has no parameters this round");
    members.push_back(it->second);
  }
  const double before = base_loss ? *base_loss : loss(global_before, aux.data);
  return before - loss(average(members), aux.data);
}

struct RoundShapleyOptions {
  ShapleyWeighting weighting = ShapleyWeighting::paper;
  std::size_t cap = default_shapley_cap;
  UtilityCache *cache = nullptr;
  int round = 0;
  unsigned threads = 1;
};

/// Exact per-round contribution of every participant. Clients outside `selected` are not
/// returned; the ledger records them as 0.
inline std::map<std::size_t, double> round_shapley(const std::map<std::size_t, ModelParams> &round_params,
                                                   std::vector<std::size_t> selected,
                                                   const ModelParams &global_before, const AuxiliaryDataset &aux,
                                                   const RoundShapleyOptions &opt = {}) {
  std::sort(selected.begin(), selected.end());
  selected.erase(std::unique(selected.begin(), selected.end()), selected.end());
  if (selected.size() > opt.cap)
    throw ConfigError("exact Shapley enumeration over " + std::to_string(selected.size()) +
                      " participants exceeds the cap of " + std::to_string(opt.cap) +
                      "; approximate estimators are not supported");
  std::map<std::size_t, double> out;
  if (selected.empty()) return out;

  const std::uint64_t full = std::uint64_t{1} << selected.size();
  std::vector<double> table(full, 0.0);
  std::vector<std::uint64_t> missing;
  for (std::uint64_t mask = 1; mask < full; ++mask) {
    if (opt.cache) {
      if (auto hit = opt.cache->find(opt.round, mask)) {
        table[mask] = *hit;
        continue;
      }
    }
    missing.push_back(mask);
  }
  if (!missing.empty()) {
    const double base = loss(global_before, aux.data);
    parallel_for(missing.size(), opt.threads, [&](std::size_t k) {
      const auto mask = missing[k];
      std::vector<std::size_t> coalition;
      for (std::size_t i = 0; i < selected.size(); ++i)
        if (mask & (std::uint64_t{1} << i)) coalition.push_back(selected[i]);
      table[mask] = subset_utility(round_params, coalition, global_before, aux, base);
    });
    if (opt.cache)
      for (auto mask : missing) opt.cache->insert(opt.round, mask, table[mask]);
  }

  const auto values = shapley_from_table(selected.size(), table, opt.weighting);
  for (std::size_t i = 0; i < selected.size(); ++i) out[selected[i]] = values[i];
  return out;
}

/// Per-round and cumulative contributions for a fixed client population.
class ShapleyLedger {
public:
  ShapleyLedger() = default;
  explicit ShapleyLedger(std::span<const std::size_t> population) {
    for (auto n : population) cumulative_[n] = 0.0;
  }

  /// Records round k. Clients absent from `values` get 0 for the round.
  void accumulate(int round, const std::map<std::size_t, double> &values) {
    if (per_round_.contains(round)) throw ProtocolError("round " + std::to_string(round) + " already recorded");
    for (const auto &[n, v] : values)
      if (!cumulative_.contains(n)) throw ProtocolError("client " + std::to_string(n) + " is not in the population");
    auto &row = per_round_[round];
    for (auto &[n, total] : cumulative_) {
      const auto it = values.find(n);
      const double v = it == values.end() ? 0.0 : it->second;
      row[n] = v;
      total += v;
    }
  }

  double cumulative(std::size_t n) const {
    const auto it = cumulative_.find(n);
    return it == cumulative_.end() ? 0.0 : it->second;
  }

  double value(int round, std::size_t n) const {
    const auto r = per_round_.find(round);
    if (r == per_round_.end()) return 0.0;
    const auto it = r->second.find(n);
    return it == r->second.end() ? 0.0 : it->second;
  }

  const std::map<int, std::map<std::size_t, double>> &per_round() const { return per_round_; }
  const std::map<std::size_t, double> &cumulative() const { return cumulative_; }

private:
  std::map<int, std::map<std::size_t, double>> per_round_;
  std::map<std::size_t, double> cumulative_;
};

inline ShapleyLedger accumulate(ShapleyLedger ledger, int round, const std::map<std::size_t, double> &values) {
  ledger.accumulate(round, values);
  return ledger;
}

} // namespace fedfair
