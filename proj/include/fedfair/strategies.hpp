#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "fedfair/error.hpp"
#include "fedfair/numkit.hpp"
#include "fedfair/rng.hpp"

namespace fedfair {

enum class StrategyKind { fedavg, qfedavg, ditto };

inline const char *to_string(StrategyKind k) {
  switch (k) {
  case StrategyKind::fedavg:
    return "fedavg";
  case StrategyKind::qfedavg:
    return "qfedavg";
  case StrategyKind::ditto:
    return "ditto";
  }
  return "?";
}

struct StrategyConfig {
  StrategyKind kind = StrategyKind::fedavg;
  double q = 0.2;
  double eta_q = 0.1;
  double lambda = 0.8;
  double eta_l = 0.01;
  int personal_epochs = 10;
};

inline std::vector<std::string> validate(const StrategyConfig &cfg) {
  std::vector<std::string> errs;
  if (!(cfg.q >= 0.0)) errs.push_back("strategy.q must be >= 0");
  if (!(cfg.eta_q > 0.0)) errs.push_back("strategy.eta_q must be > 0");
  if (!(cfg.lambda >= 0.0)) errs.push_back("strategy.lambda must be >= 0");
  if (!(cfg.eta_l > 0.0)) errs.push_back("strategy.eta_l must be > 0");
  if (cfg.personal_epochs < 0) errs.push_back("strategy.personal_epochs must be >= 0");
  if (cfg.kind == StrategyKind::ditto && cfg.personal_epochs < 1)
    errs.push_back("strategy.personal_epochs must be >= 1 for ditto");
  return errs;
}

/// What a participant sends back after local training.
struct ClientUpdate {
  std::size_t client_id = 0;
  ModelParams params;
  std::size_t train_size = 0;
  double local_loss_before = 0.0; // loss of the distributed global model on the client's train split
};

/// Uniform sample of `count` distinct ids, returned in ascending order.
inline std::vector<std::size_t> select_clients(std::span<const std::size_t> population, std::size_t count,
                                               RngStream &rng) {
  if (count > population.size())
    throw ConfigError("cannot select " + std::to_string(count) + " clients from a population of " +
                      std::to_string(population.size()));
  std::vector<std::size_t> pool(population.begin(), population.end());
  // partial Fisher-Yates: the first `count` slots end up a uniform sample
  for (std::size_t i = 0; i < count; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.uniform_index(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  std::sort(pool.begin(), pool.end());
  return pool;
}

namespace detail {

inline void check_updates(std::span<const ClientUpdate> updates, const ModelParams *reference) {
  if (updates.empty()) throw ProtocolError("aggregation needs at least one update");
  const ModelParams &ref = reference ? *reference : updates.front().params;
  for (const auto &u : updates) {
    if (!ref.combinable_with(u.params) || ref.values.size() != u.params.values.size())
      throw ProtocolError("client " + std::to_string(u.client_id) + " sent parameters of incompatible shape");
    if (u.train_size == 0) throw ProtocolError("client " + std::to_string(u.client_id) + " reports zero train size");
  }
}

} // namespace detail

/// Sample-size weighted mean of client parameters.
inline ModelParams aggregate_fedavg(std::span<const ClientUpdate> updates) {
  detail::check_updates(updates, nullptr);
  std::vector<ModelParams> models;
  std::vector<double> weights;
  for (const auto &u : updates) {
    models.push_back(u.params);
    weights.push_back(static_cast<double>(u.train_size));
  }
  return weighted_average(models, weights);
}

struct QFedAvgResult {
  ModelParams params;
  bool fell_back_to_fedavg = false;
};

inline constexpr double min_qffl_loss = 1e-12;

/// q-FFL server step with Lipschitz estimate L = 1/eta_q:
///   delta_n = L (global - local_n)
///   step    = sum F_n^q delta_n / sum (q F_n^(q-1) |delta_n|^2 + L F_n^q)
inline QFedAvgResult aggregate_qfedavg(const ModelParams &global, std::span<const ClientUpdate> updates,
                                       const StrategyConfig &cfg) {
  detail::check_updates(updates, &global);
  if (!(cfg.eta_q > 0.0) || !(cfg.q >= 0.0)) throw ConfigError("q-FedAvg needs q >= 0 and eta_q > 0");
  const bool all_zero = std::all_of(updates.begin(), updates.end(),
                                    [](const ClientUpdate &u) { return u.local_loss_before <= 0.0; });
  if (all_zero && cfg.q > 0.0) return {aggregate_fedavg(updates), true};

  const double lip = 1.0 / cfg.eta_q;
  std::vector<double> numer(global.values.size(), 0.0);
  double denom = 0.0;
  for (const auto &u : updates) {
    const double f = std::max(u.local_loss_before, min_qffl_loss);
    const double fq = std::pow(f, cfg.q);
    double norm2 = 0.0;
    for (std::size_t i = 0; i < numer.size(); ++i) {
      const double d = lip * (global.values[i] - u.params.values[i]);
      numer[i] += fq * d;
      norm2 += d * d;
    }
    denom += cfg.q * std::pow(f, cfg.q - 1.0) * norm2 + lip * fq;
  }
  QFedAvgResult r{global, false};
  for (std::size_t i = 0; i < numer.size(); ++i) r.params.values[i] -= numer[i] / denom;
  return r;
}

/// Ditto personal-model update: SGD on the local loss at rate eta_l, with the
/// (lambda/2)|v - global|^2 pull applied as an exact proximal step after each gradient step,
/// v <- (v + eta_l lambda global) / (1 + eta_l lambda). Stable for any lambda and identical to
/// plain SGD when lambda = 0.
inline ModelParams ditto_personalize(const ModelParams &global, const ModelParams &personal,
                                     const LabeledBatch &data, const StrategyConfig &cfg, RngStream &rng,
                                     std::size_t batch_size = 32) {
  require_combinable(global, personal, "ditto personal model");
  if (cfg.personal_epochs < 1) throw ConfigError("ditto needs personal_epochs >= 1");
  const double pull = cfg.eta_l * cfg.lambda;
  const double shrink = 1.0 + pull;
  return sgd_epochs(personal, data, cfg.personal_epochs, cfg.eta_l, batch_size, rng, [&](std::vector<double> &v) {
    if (pull == 0.0) return;
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = (v[i] + pull * global.values[i]) / shrink;
  });
}

} // namespace fedfair
