#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "fedfair/config.hpp"
#include "fedfair/datakit.hpp"
#include "fedfair/error.hpp"
#include "fedfair/fairness.hpp"
#include "fedfair/numkit.hpp"
#include "fedfair/parallel.hpp"
#include "fedfair/rng.hpp"
#include "fedfair/shapley.hpp"
#include "fedfair/strategies.hpp"

namespace fedfair {

inline constexpr std::array<const char *, 5> notion_names{"f_j", "f_g", "f_r", "f_o", "F_T"};

inline const NotionValue &notion(const FairnessSnapshot &s, std::size_t i) {
  const NotionValue *all[] = {&s.f_j, &s.f_g, &s.f_r, &s.f_o, &s.F_T};
  return *all[i];
}

struct RunOptions {
  unsigned threads = default_thread_count();
  bool record_timing = false;
  /// Every client draws from the same training stream each round (instead of one stream per
  /// client). With identical shards this makes clients exact replicas of each other.
  bool shared_client_streams = false;
};

struct ClientRoundRecord {
  std::size_t client_id = 0;
  int round = 0;
  double performance = 0.0; // x_{n,k}: accuracy of the post-training model on the client's test split
  double reward = 0.0;      // r_{n,k}: accuracy of the distributed global model, before local training
  EqOddsRecord eqodds;      // post-training model, feeds group fairness
  EqOddsRecord eqodds_pre;  // distributed global model, kept for analysis
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  double local_loss_before = 0.0;
};

struct RoundOutput {
  int round = 0;
  std::vector<std::size_t> selected;
  FairnessSnapshot fairness;
  std::vector<ClientRoundRecord> clients;
  std::map<std::size_t, double> shapley;
  double aux_accuracy = 0.0;
  bool qffl_fallback = false;
  std::optional<double> wall_clock_seconds;
};

struct NotionSummary {
  std::optional<double> mean;
  std::string reason;
  int defined_rounds = 0;
};

struct Summary {
  std::pair<int, int> window{1, 1};
  std::array<NotionSummary, notion_names.size()> notions;
};

struct RunResult {
  ExperimentConfig config;
  std::uint64_t seed = 0;
  std::vector<RoundOutput> rounds;
  ShapleyLedger ledger;
  Summary summary;
  std::optional<double> wall_clock_seconds;
  int partition_attempts = 1;
};

/// Mean of each notion over the inclusive round window, skipping rounds where it is undefined.
inline Summary summarize_rounds(const std::vector<RoundOutput> &rounds, std::pair<int, int> window) {
  Summary s;
  s.window = window;
  for (std::size_t i = 0; i < notion_names.size(); ++i) {
    double sum = 0.0;
    int n = 0, in_window = 0;
    for (const auto &r : rounds) {
      if (r.round < window.first || r.round > window.second) continue;
      ++in_window;
      if (const auto &v = notion(r.fairness, i).value) {
        sum += *v;
        ++n;
      }
    }
    auto &ns = s.notions[i];
    ns.defined_rounds = n;
    if (n > 0) ns.mean = sum / n;
    else ns.reason = in_window == 0 ? "no rounds in summary window" : "undefined in every round of the window";
  }
  return s;
}

enum class Verdict { pass, fail, indeterminate };

inline const char *to_string(Verdict v) {
  switch (v) {
  case Verdict::pass:
    return "pass";
  case Verdict::fail:
    return "fail";
  case Verdict::indeterminate:
    return "indeterminate";
  }
  return "?";
}

struct ThresholdVerdicts {
  std::array<Verdict, notion_names.size()> notions{};
  Verdict overall = Verdict::indeterminate;
};

/// Per-notion mean >= threshold. Undefined notions are indeterminate, and so is the overall
/// verdict when any notion is; otherwise the overall verdict is that of F_T.
inline ThresholdVerdicts threshold_check(const std::array<std::optional<double>, notion_names.size()> &means,
                                         double threshold) {
  ThresholdVerdicts v;
  bool any_undefined = false;
  for (std::size_t i = 0; i < means.size(); ++i) {
    if (!means[i]) {
      v.notions[i] = Verdict::indeterminate;
      any_undefined = true;
    } else {
      v.notions[i] = *means[i] >= threshold ? Verdict::pass : Verdict::fail;
    }
  }
  v.overall = any_undefined ? Verdict::indeterminate : v.notions.back();
  return v;
}

inline ThresholdVerdicts threshold_check(const Summary &s, double threshold) {
  std::array<std::optional<double>, notion_names.size()> means;
  for (std::size_t i = 0; i < means.size(); ++i) means[i] = s.notions[i].mean;
  return threshold_check(means, threshold);
}

namespace detail {

enum StreamTag : std::uint64_t { data_stream = 1, partition_stream, init_stream, select_stream, client_stream, ditto_stream };

inline LabeledBatch build_dataset(const ExperimentConfig &cfg, RngStream &rng) {
  if (cfg.dataset.kind == DatasetKind::synthetic)
    return synth_classification(cfg.dataset.synthetic, cfg.attributes, rng);
  return load_csv(cfg.dataset.path, cfg.dataset.schema, cfg.attributes).batch;
}

} // namespace detail

/// One seeded federated run: data, population state and the round loop.
class Simulation {
public:
  Simulation(const ExperimentConfig &cfg, std::uint64_t seed, RunOptions opt = {})
      : cfg_(cfg), seed_(seed), opt_(opt), root_(seed, 0) {
    auto data_rng = root_.derive({detail::data_stream});
    const auto data = detail::build_dataset(cfg_, data_rng);
    auto part_rng = root_.derive({detail::partition_stream});
    auto parts = partition(data, cfg_.partition, part_rng);
    attempts_ = parts.attempts;
    init(std::move(parts.clients), std::move(parts.auxiliary), data.n_classes);
  }

  /// Runs on caller-supplied shards instead of generating them from the config's dataset.
  Simulation(const ExperimentConfig &cfg, std::uint64_t seed, std::vector<ClientDataset> clients,
             AuxiliaryDataset aux, RunOptions opt = {})
      : cfg_(cfg), seed_(seed), opt_(opt), root_(seed, 0) {
    if (clients.empty()) throw ConfigError("simulation needs at least one client");
    const int n_classes = clients.front().train.n_classes;
    init(std::move(clients), std::move(aux), n_classes);
  }

  const ExperimentConfig &config() const { return cfg_; }
  const ModelParams &global() const { return global_; }
  const ShapleyLedger &ledger() const { return ledger_; }
  const std::vector<ClientDataset> &clients() const { return clients_; }
  const AuxiliaryDataset &auxiliary() const { return aux_; }
  int partition_attempts() const { return attempts_; }

  /// select -> distribute -> reward capture -> local training (-> personalization) ->
  /// performance capture -> aggregation -> Shapley -> ledger -> fairness snapshot.
  RoundOutput run_round(int k) {
    if (k < 1 || k > cfg_.rounds) throw ConfigError("round " + std::to_string(k) + " outside [1, K]");
    const auto t0 = std::chrono::steady_clock::now();
    RoundOutput out;
    out.round = k;
    auto sel_rng = root_.derive({detail::select_stream, static_cast<std::uint64_t>(k)});
    out.selected = select_clients(population_, cfg_.clients_per_round, sel_rng);
    const ModelParams distributed = global_;

    std::vector<ClientRoundRecord> records(out.selected.size());
    std::vector<ClientUpdate> updates(out.selected.size());
    parallel_for(out.selected.size(), opt_.threads, [&](std::size_t i) {
      const auto n = out.selected[i];
      const auto &cd = clients_[n];
      auto &rec = records[i];
      rec.client_id = n;
      rec.round = k;
      rec.train_size = cd.train.size();
      rec.test_size = cd.test.size();

      const auto reward_eval = evaluate(distributed, cd.test, cfg_.positive_class);
      rec.reward = reward_eval.accuracy;
      rec.eqodds_pre = make_eqodds_record(n, reward_eval.confusion, cfg_.eqodds_mode);
      rec.local_loss_before = loss(distributed, cd.train);

      const std::uint64_t stream_client = opt_.shared_client_streams ? 0 : n;
      auto train_rng = root_.derive({detail::client_stream, stream_client, static_cast<std::uint64_t>(k)});
      auto local = train_local(distributed, cd.train, cfg_.local_epochs, cfg_.local_lr, train_rng, cfg_.batch_size);

      const ModelParams *evaluated = &local;
      if (cfg_.strategy.kind == StrategyKind::ditto) {
        auto ditto_rng = root_.derive({detail::ditto_stream, stream_client, static_cast<std::uint64_t>(k)});
        personal_[n] = ditto_personalize(distributed, personal_[n], cd.train, cfg_.strategy, ditto_rng, cfg_.batch_size);
        evaluated = &personal_[n];
      }
      const auto perf_eval = evaluate(*evaluated, cd.test, cfg_.positive_class);
      rec.performance = perf_eval.accuracy;
      rec.eqodds = make_eqodds_record(n, perf_eval.confusion, cfg_.eqodds_mode);

      updates[i] = ClientUpdate{n, std::move(local), cd.train.size(), rec.local_loss_before};
    });

    ModelParams next;
    if (cfg_.strategy.kind == StrategyKind::qfedavg) {
      auto q = aggregate_qfedavg(distributed, updates, cfg_.strategy);
      next = std::move(q.params);
      out.qffl_fallback = q.fell_back_to_fedavg;
    } else {
      next = aggregate_fedavg(updates);
    }

    std::map<std::size_t, ModelParams> round_params;
    for (const auto &u : updates) round_params.emplace(u.client_id, u.params);
    RoundShapleyOptions sopt;
    sopt.weighting = cfg_.shapley_weighting;
    sopt.cap = cfg_.shapley_cap;
    sopt.cache = &cache_;
    sopt.round = k;
    sopt.threads = opt_.threads;
    out.shapley = round_shapley(round_params, out.selected, distributed, aux_, sopt);
    ledger_.accumulate(k, out.shapley);

    std::map<std::size_t, double> performances, rewards;
    std::vector<EqOddsRecord> eqodds;
    for (const auto &rec : records) {
      performances[rec.client_id] = rec.performance;
      rewards[rec.client_id] = rec.reward;
      eqodds.push_back(rec.eqodds);
    }
    out.fairness = make_snapshot(k, out.selected, performances, rewards, eqodds, ledger_, cfg_.fairness_weights);
    out.clients = std::move(records);

    global_ = std::move(next);
    out.aux_accuracy = evaluate(global_, aux_.data, cfg_.positive_class).accuracy;
    if (opt_.record_timing)
      out.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
  }

  RunResult run() {
    const auto t0 = std::chrono::steady_clock::now();
    RunResult r;
    r.config = cfg_;
    r.seed = seed_;
    r.partition_attempts = attempts_;
    for (int k = 1; k <= cfg_.rounds; ++k) r.rounds.push_back(run_round(k));
    r.ledger = ledger_;
    r.summary = summarize_rounds(r.rounds, cfg_.summary_window);
    if (opt_.record_timing)
      r.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
  }

private:
  void init(std::vector<ClientDataset> clients, AuxiliaryDataset aux, int n_classes) {
    if (auto errs = validate(cfg_); !errs.empty()) throw ConfigError("invalid config: " + errs.front());
    if (clients.size() != cfg_.total_clients)
      throw ConfigError("config declares " + std::to_string(cfg_.total_clients) + " clients but " +
                        std::to_string(clients.size()) + " shards were supplied");
    clients_ = std::move(clients);
    aux_ = std::move(aux);
    if (aux_.data.empty()) throw ConfigError("auxiliary dataset is empty");
    for (std::size_t i = 0; i < clients_.size(); ++i) {
      if (clients_[i].client_id != i) throw ConfigError("client shards must be ordered by id starting at 0");
      if (clients_[i].train.empty() || clients_[i].test.empty())
        throw ConfigError("client " + std::to_string(i) + " has an empty train or test split");
    }
    if (cfg_.positive_class >= n_classes) throw ConfigError("positive_class is not a class of the dataset");
    population_.resize(clients_.size());
    std::iota(population_.begin(), population_.end(), std::size_t{0});
    auto init_rng = root_.derive({detail::init_stream});
    global_ = make_model(cfg_.model.kind, aux_.data.n_features(), static_cast<std::size_t>(n_classes), init_rng,
                         cfg_.model.hidden);
    if (cfg_.strategy.kind == StrategyKind::ditto) personal_.assign(clients_.size(), global_);
    ledger_ = ShapleyLedger(population_);
  }

  ExperimentConfig cfg_;
  std::uint64_t seed_;
  RunOptions opt_;
  RngStream root_;
  int attempts_ = 1;
  std::vector<ClientDataset> clients_;
  AuxiliaryDataset aux_;
  std::vector<std::size_t> population_;
  ModelParams global_;
  std::vector<ModelParams> personal_;
  ShapleyLedger ledger_;
  UtilityCache cache_;
};

inline RunResult run_single(const ExperimentConfig &cfg, std::uint64_t seed, RunOptions opt = {}) {
  return Simulation(cfg, seed, opt).run();
}

// ---------------------------------------------------------------------------
// Repeats

struct Moments {
  std::optional<double> mean;
  double stddev = 0.0; // population st-dev over the defined values
  int count = 0;
};

inline Moments moments(const std::vector<std::optional<double>> &values) {
  Moments m;
  double sum = 0.0;
  for (const auto &v : values)
    if (v) {
      sum += *v;
      ++m.count;
    }
  if (m.count == 0) return m;
  m.mean = sum / m.count;
  double ss = 0.0;
  for (const auto &v : values)
    if (v) ss += (*v - *m.mean) * (*v - *m.mean);
  m.stddev = std::sqrt(ss / m.count);
  return m;
}

struct AggregateReport {
  std::vector<std::uint64_t> seeds;
  std::pair<int, int> window{1, 1};
  double threshold = 0.8;
  /// per_round[k-1][notion]
  std::vector<std::array<Moments, notion_names.size()>> per_round;
  std::vector<Moments> aux_accuracy;
  std::array<Moments, notion_names.size()> summary;
  ThresholdVerdicts verdicts;
};

inline AggregateReport aggregate_runs(const std::vector<RunResult> &runs) {
  if (runs.empty()) throw ConfigError("aggregate needs at least one run");
  AggregateReport a;
  const auto &cfg = runs.front().config;
  a.window = cfg.summary_window;
  a.threshold = cfg.fairness_threshold;
  for (const auto &r : runs) a.seeds.push_back(r.seed);
  const std::size_t rounds = runs.front().rounds.size();
  a.per_round.resize(rounds);
  a.aux_accuracy.resize(rounds);
  for (std::size_t k = 0; k < rounds; ++k) {
    for (std::size_t i = 0; i < notion_names.size(); ++i) {
      std::vector<std::optional<double>> vals;
      for (const auto &r : runs) vals.push_back(notion(r.rounds.at(k).fairness, i).value);
      a.per_round[k][i] = moments(vals);
    }
    std::vector<std::optional<double>> acc;
    for (const auto &r : runs) acc.push_back(r.rounds.at(k).aux_accuracy);
    a.aux_accuracy[k] = moments(acc);
  }
  std::array<std::optional<double>, notion_names.size()> means;
  for (std::size_t i = 0; i < notion_names.size(); ++i) {
    std::vector<std::optional<double>> vals;
    for (const auto &r : runs) vals.push_back(r.summary.notions[i].mean);
    a.summary[i] = moments(vals);
    means[i] = a.summary[i].mean;
  }
  a.verdicts = threshold_check(means, a.threshold);
  return a;
}

struct ExperimentResult {
  std::vector<RunResult> runs;
  AggregateReport aggregate;
};

/// Independent runs, one per seed (config seeds unless overridden), plus their aggregate.
inline ExperimentResult run_experiment(const ExperimentConfig &cfg, RunOptions opt = {},
                                       std::optional<std::vector<std::uint64_t>> seeds = std::nullopt) {
  if (auto errs = validate(cfg); !errs.empty()) throw ConfigError("invalid config: " + errs.front());
  const auto &use = seeds ? *seeds : cfg.seeds;
  if (use.empty()) throw ConfigError("run_experiment needs at least one seed");
  ExperimentResult out;
  for (auto s : use) out.runs.push_back(run_single(cfg, s, opt));
  out.aggregate = aggregate_runs(out.runs);
  return out;
}

} // namespace fedfair
