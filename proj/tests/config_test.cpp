#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "fedfair/config.hpp"

using namespace fedfair;

namespace {

bool mentions(const std::vector<std::string> &errs, const std::string &needle) {
  for (const auto &e : errs)
    if (e.find(needle) != std::string::npos) return true;
  return false;
}

json minimal() {
  return json::parse(R"({
    "strategy": {"kind": "fedavg"},
    "dataset": {"kind": "synthetic", "n_samples": 500, "n_features": 3},
    "total_clients": 4, "clients_per_round": 2, "rounds": 3, "summary_window": [1, 3]
  })");
}

} // namespace

TEST(Config, MinimalDocumentParsesAndValidates) {
  const auto p = parse_config(minimal());
  EXPECT_TRUE(p.errors.empty()) << p.errors.front();
  EXPECT_TRUE(validate(p.config).empty());
  EXPECT_EQ(p.config.partition.clients, 4u);
  EXPECT_DOUBLE_EQ(p.config.participation_rate(), 0.5);
  EXPECT_DOUBLE_EQ(p.config.fairness_threshold, 0.8);
}

TEST(Config, UnknownKeysRejectedWithPath) {
  auto j = minimal();
  j["roundz"] = 3;
  j["strategy"]["qq"] = 1;
  const auto p = parse_config(j);
  EXPECT_TRUE(mentions(p.errors, "unknown key 'roundz'"));
  EXPECT_TRUE(mentions(p.errors, "unknown key 'strategy.qq'"));
}

TEST(Config, TypeAndEnumErrorsCollected) {
  auto j = minimal();
  j["rounds"] = "many";
  j["strategy"]["kind"] = "fedprox";
  const auto p = parse_config(j);
  EXPECT_GE(p.errors.size(), 2u);
  EXPECT_TRUE(mentions(p.errors, "rounds"));
  EXPECT_TRUE(mentions(p.errors, "strategy.kind"));
}

TEST(Config, ParticipantsMustNotExceedPopulation) {
  auto j = minimal();
  j["clients_per_round"] = 6;
  const auto errs = validate(parse_config(j).config);
  EXPECT_TRUE(mentions(errs, "clients_per_round (|S_k| = 6) must not exceed total_clients (C = 4)"));
}

TEST(Config, WeightsMustSumToOne) {
  auto j = minimal();
  j["fairness_weights"] = {{"w_j", 0.3}, {"w_g", 0.2}, {"w_r", 0.2}, {"w_o", 0.2}};
  const auto errs = validate(parse_config(j).config);
  EXPECT_TRUE(mentions(errs, "w_j + w_g + w_r + w_o = 1"));
}

TEST(Config, EveryViolationIsListed) {
  auto j = minimal();
  j["rounds"] = 0;
  j["local_lr"] = -1.0;
  j["seeds"] = json::array();
  const auto errs = validate(parse_config(j).config);
  EXPECT_TRUE(mentions(errs, "rounds (K)"));
  EXPECT_TRUE(mentions(errs, "local_lr"));
  EXPECT_TRUE(mentions(errs, "seeds"));
  EXPECT_TRUE(mentions(errs, "summary_window"));
}

TEST(Config, JsonRoundTripIsStable) {
  for (const auto &[name, cfg] : builtin_presets()) {
    const auto j = to_json(cfg);
    const auto p = parse_config(j);
    EXPECT_TRUE(p.errors.empty()) << name;
    EXPECT_EQ(to_json(p.config), j) << name;
  }
}

TEST(Config, SyntaxErrorsThrowParseError) {
  const auto path = std::filesystem::temp_directory_path() / "fedfair_bad_config.json";
  std::ofstream(path) << "{ \"rounds\": 3,, }";
  EXPECT_THROW(load_config_file(path), ConfigParseError);
  EXPECT_THROW(load_config_file("/nonexistent/config.json"), ConfigParseError);
}

TEST(Presets, EighteenNamedPresetsAllValidate) {
  const auto presets = builtin_presets();
  EXPECT_EQ(presets.size(), 18u);
  for (const auto &[name, cfg] : presets) {
    auto resolved = cfg;
    if (resolved.dataset.kind == DatasetKind::csv)
      resolved.dataset.path = std::string(FEDFAIR_SOURCE_DIR) + "/presets/" + resolved.dataset.path;
    const auto errs = validate(resolved);
    EXPECT_TRUE(errs.empty()) << name << ": " << (errs.empty() ? "" : errs.front());
  }
  EXPECT_TRUE(find_preset("fedavg-iid-silo").has_value());
  EXPECT_FALSE(find_preset("fedavg-iid-cloud").has_value());
}

TEST(Presets, ShippedFilesMatchBuiltins) {
  for (const auto &[name, cfg] : builtin_presets()) {
    const auto path = std::filesystem::path(FEDFAIR_SOURCE_DIR) / "presets" / (name + ".json");
    std::ifstream in(path);
    ASSERT_TRUE(in) << path;
    const auto p = parse_config(json::parse(in));
    EXPECT_TRUE(p.errors.empty()) << name;
    EXPECT_EQ(to_json(p.config), to_json(cfg)) << name << " is out of date; regenerate with `fedfair presets`";
  }
}

TEST(Presets, CsvPathResolvesAgainstConfigDirectory) {
  const auto path = std::filesystem::path(FEDFAIR_SOURCE_DIR) / "presets" / "fedavg-iid-tabular.json";
  const auto p = load_config_file(path);
  ASSERT_TRUE(p.errors.empty());
  EXPECT_TRUE(validate(p.config).empty());
  EXPECT_TRUE(std::filesystem::exists(p.config.dataset.path));
}
