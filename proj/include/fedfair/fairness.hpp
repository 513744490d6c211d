#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "fedfair/error.hpp"
#include "fedfair/numkit.hpp"
#include "fedfair/shapley.hpp"

namespace fedfair {

// ---------------------------------------------------------------------------
// Jain's fairness index

/// (sum x)^2 / (n sum x^2), in [1/n, 1]. Throws UndefinedMetric on empty, negative or
/// all-zero input.
inline double jfi(std::span<const double> values) {
  if (values.empty()) throw UndefinedMetric("JFI of an empty set");
  double sum = 0.0, sq = 0.0;
  for (double v : values) {
    if (!(v >= 0.0)) throw UndefinedMetric("JFI needs non-negative values");
    sum += v;
    sq += v * v;
  }
  if (sq == 0.0) throw UndefinedMetric("JFI of all-zero values is 0/0");
  return std::min(1.0, (sum * sum) / (static_cast<double>(values.size()) * sq));
}

// ---------------------------------------------------------------------------
// Equalized odds

enum class EqOddsMode { bounded, paper_literal };

inline const char *to_string(EqOddsMode m) { return m == EqOddsMode::bounded ? "bounded" : "paper_literal"; }

/// `bounded`: 1 - (|dTPR| + |dFPR|) / 2, in [0,1] with 1 at exact parity.
/// `paper_literal`: |1 - (dTPR + dFPR)|, which can exceed 1 and scores maximal disparity as 1.
inline double eq_odds_from_rates(double delta_tpr, double delta_fpr, EqOddsMode mode) {
  if (mode == EqOddsMode::bounded) return 1.0 - (std::abs(delta_tpr) + std::abs(delta_fpr)) / 2.0;
  return std::abs(1.0 - (delta_tpr + delta_fpr));
}

inline constexpr const char *insufficient_group_samples = "insufficient-group-samples";

/// Equalized-odds score for one attribute, or nullopt when either group lacks a positive or a
/// negative ground-truth sample.
inline std::optional<double> eq_odds_diff(const AttributeConfusion &c, EqOddsMode mode) {
  for (const auto &g : c.groups)
    if (g.tp + g.fn == 0 || g.fp + g.tn == 0) return std::nullopt;
  auto rate = [](std::size_t num, std::size_t den) { return static_cast<double>(num) / static_cast<double>(den); };
  const auto &g0 = c.groups[0];
  const auto &g1 = c.groups[1];
  const double delta_tpr = rate(g1.tp, g1.tp + g1.fn) - rate(g0.tp, g0.tp + g0.fn);
  const double delta_fpr = rate(g1.fp, g1.fp + g1.tn) - rate(g0.fp, g0.fp + g0.tn);
  return eq_odds_from_rates(delta_tpr, delta_fpr, mode);
}

struct EqOddsRecord {
  std::size_t client_id = 0;
  std::map<std::size_t, double> per_attribute;
  std::vector<std::pair<std::size_t, std::string>> skipped;

  std::optional<double> mean() const {
    if (per_attribute.empty()) return std::nullopt;
    double s = 0.0;
    for (const auto &[a, v] : per_attribute) s += v;
    return s / static_cast<double>(per_attribute.size());
  }
};

inline EqOddsRecord make_eqodds_record(std::size_t client_id, std::span<const AttributeConfusion> confusion,
                                       EqOddsMode mode) {
  EqOddsRecord r;
  r.client_id = client_id;
  for (std::size_t a = 0; a < confusion.size(); ++a) {
    if (auto v = eq_odds_diff(confusion[a], mode)) r.per_attribute[a] = *v;
    else r.skipped.emplace_back(a, insufficient_group_samples);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Notions

inline constexpr double shapley_epsilon = 1e-9;

struct NotionValue {
  std::optional<double> value;
  std::string reason; // set iff value is empty

  static NotionValue undefined(std::string why) { return {std::nullopt, std::move(why)}; }
  bool defined() const { return value.has_value(); }
};

struct Exclusion {
  std::size_t client_id = 0;
  std::string reason;
};

struct GainFairness {
  NotionValue notion;
  std::map<std::size_t, double> gains;
  std::vector<Exclusion> excluded;
  std::size_t clamped_negative = 0;
};

namespace detail {

inline GainFairness gain_fairness(const std::map<std::size_t, double> &numerators, const ShapleyLedger &ledger,
                                  std::span<const std::size_t> selected, const char *what) {
  GainFairness out;
  if (selected.empty()) {
    out.notion = NotionValue::undefined("no participants");
    return out;
  }
  std::vector<double> gains;
  for (auto n : selected) {
    const double s = ledger.cumulative(n);
    if (!(s > shapley_epsilon)) {
      std::ostringstream why;
      why << "cumulative shapley " << s << " <= " << shapley_epsilon;
      out.excluded.push_back({n, why.str()});
      continue;
    }
    const auto it = numerators.find(n);
    if (it == numerators.end()) throw ProtocolError(std::string("missing ") + what + " for client " + std::to_string(n));
    double g = it->second / s;
    if (g < 0.0) {
      g = 0.0;
      ++out.clamped_negative;
    }
    out.gains[n] = g;
    gains.push_back(g);
  }
  if (gains.empty()) {
    out.notion = NotionValue::undefined("every participant excluded: cumulative shapley <= epsilon");
    return out;
  }
  try {
    out.notion.value = jfi(gains);
  } catch (const UndefinedMetric &e) {
    out.notion = NotionValue::undefined(e.what());
  }
  return out;
}

} // namespace detail

/// JFI over performance-to-contribution gains x_n / s_n of the participants.
inline GainFairness individual_fairness(const std::map<std::size_t, double> &performances,
                                        const ShapleyLedger &ledger, std::span<const std::size_t> selected) {
  return detail::gain_fairness(performances, ledger, selected, "performance");
}

/// JFI over reward-to-contribution gains r_n / s_n of the participants.
inline GainFairness incentive_fairness(const std::map<std::size_t, double> &rewards, const ShapleyLedger &ledger,
                                       std::span<const std::size_t> selected) {
  return detail::gain_fairness(rewards, ledger, selected, "reward");
}

inline double median(std::vector<double> v) {
  if (v.empty()) throw UndefinedMetric("median of an empty set");
  std::sort(v.begin(), v.end());
  const auto m = v.size() / 2;
  return v.size() % 2 ? v[m] : (v[m - 1] + v[m]) / 2.0;
}

/// Median across clients of each client's mean equalized-odds score.
inline NotionValue group_fairness(std::span<const EqOddsRecord> records) {
  std::vector<double> means;
  for (const auto &r : records)
    if (auto m = r.mean()) means.push_back(*m);
  if (means.empty()) return NotionValue::undefined("no client has a computable equalized-odds attribute");
  return {median(std::move(means)), {}};
}

/// Mean normalized performance of the participants.
inline NotionValue orchestrator_fairness(const std::map<std::size_t, double> &performances,
                                         std::span<const std::size_t> selected) {
  if (selected.empty()) return NotionValue::undefined("no participants");
  double s = 0.0;
  for (auto n : selected) {
    const auto it = performances.find(n);
    if (it == performances.end()) throw ProtocolError("missing performance for client " + std::to_string(n));
    if (!(it->second >= 0.0 && it->second <= 1.0))
      return NotionValue::undefined("performance of client " + std::to_string(n) + " is not normalized to [0,1]");
    s += it->second;
  }
  return {s / static_cast<double>(selected.size()), {}};
}

struct FairnessWeights {
  double w_j = 0.25;
  double w_g = 0.25;
  double w_r = 0.25;
  double w_o = 0.25;
};

inline std::vector<std::string> validate(const FairnessWeights &w) {
  std::vector<std::string> errs;
  for (auto [name, v] : {std::pair{"w_j", w.w_j}, {"w_g", w.w_g}, {"w_r", w.w_r}, {"w_o", w.w_o}})
    if (!(v >= 0.0)) errs.push_back(std::string("fairness_weights.") + name + " must be >= 0");
  const double sum = w.w_j + w.w_g + w.w_r + w.w_o;
  if (std::abs(sum - 1.0) > 1e-9) {
    std::ostringstream os;
    os << "fairness_weights must sum to 1 (w_j + w_g + w_r + w_o = 1), got " << sum;
    errs.push_back(os.str());
  }
  return errs;
}

/// Weighted sum of the four notions; undefined if any notion is.
inline NotionValue general_fairness(const NotionValue &f_j, const NotionValue &f_g, const NotionValue &f_r,
                                    const NotionValue &f_o, const FairnessWeights &w) {
  std::string missing;
  for (auto [name, f] : {std::pair{"f_j", &f_j}, {"f_g", &f_g}, {"f_r", &f_r}, {"f_o", &f_o}})
    if (!f->defined()) missing += (missing.empty() ? "" : "; ") + std::string(name) + " undefined: " + f->reason;
  if (!missing.empty()) return NotionValue::undefined(missing);
  return {w.w_j * *f_j.value + w.w_g * *f_g.value + w.w_r * *f_r.value + w.w_o * *f_o.value, {}};
}

struct FairnessSnapshot {
  int round = 0;
  NotionValue f_j, f_g, f_r, f_o, F_T;
  std::map<std::size_t, double> gains_G;
  std::map<std::size_t, double> gains_R;
  std::vector<Exclusion> excluded_clients;
  std::size_t negative_gains_clamped = 0;
};

/// All notions for one round. `ledger` must already include the round.
inline FairnessSnapshot make_snapshot(int round, std::span<const std::size_t> selected,
                                      const std::map<std::size_t, double> &performances,
                                      const std::map<std::size_t, double> &rewards,
                                      std::span<const EqOddsRecord> eqodds, const ShapleyLedger &ledger,
                                      const FairnessWeights &weights) {
  FairnessSnapshot s;
  s.round = round;
  auto ind = individual_fairness(performances, ledger, selected);
  auto inc = incentive_fairness(rewards, ledger, selected);
  s.f_j = ind.notion;
  s.f_r = inc.notion;
  s.gains_G = std::move(ind.gains);
  s.gains_R = std::move(inc.gains);
  s.excluded_clients = std::move(ind.excluded);
  s.negative_gains_clamped = ind.clamped_negative + inc.clamped_negative;
  s.f_g = group_fairness(eqodds);
  s.f_o = orchestrator_fairness(performances, selected);
  s.F_T = general_fairness(s.f_j, s.f_g, s.f_r, s.f_o, weights);
  return s;
}

} // namespace fedfair
