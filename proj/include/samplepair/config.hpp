#pragma once

// Experiment configuration and its JSON schema (version 1).
//
// {
//   "version": 1,
//   "dataset": {"source": "cifar10" | "synthetic", "path": "...",
//               "n_per_class": 100,          // 0 = every training sample
//               "validation_limit": 0,       // 0 = whole validation split
//               "synthetic": {"n_classes": 10, "n_per_class": 50,
//                             "image_size": 16, "channels": 3,
//                             "difficulty": 0.5, "seed": 1}},
//   "pairing": {"selection": "entire" | "same_class" | "different_class" |
//                            "same_super_class" | "different_super_class" |
//                            "non_training_pool",
//               "super_classes": [["airplane", ...], [...]],
//               "pool_size": 0,              // 0 = same size as training set
//               "weights": {"kind": "fixed_half" | "uniform" |
//                                   "uniform_capped_half" | "beta",
//                           "alpha": 0.4},
//               "labels": "first" | "blended",
//               "patch": 28, "flip": true},
//   "schedule": {"unit": "epochs" | "images", "warmup": 100, "on_span": 8,
//                "off_span": 2, "finetune_start": 260},
//   "network": "reduced" | "figure2" | {"input": [h,w,c], "layers": [...]},
//   "optimizer": {"step_size": 0.001, "beta1": 0.9, "beta2": 0.999,
//                 "eps": 1e-8},
//   "batch_size": 100, "total_epochs": 300,
//   "seeds": {"data": 1, "init": 1, "augmentation": 1}
// }

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "samplepair/data.hpp"
#include "samplepair/nn/adam.hpp"
#include "samplepair/nn/network.hpp"
#include "samplepair/pairing.hpp"
#include "samplepair/schedule.hpp"

namespace samplepair {

inline constexpr int kConfigVersion = 1;

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DatasetConfig {
  enum class Source { Cifar10, Synthetic };
  Source source = Source::Synthetic;
  std::string path;
  std::size_t n_per_class = 0;
  std::size_t validation_limit = 0;
  SyntheticSpec synthetic;
  friend bool operator==(const DatasetConfig&, const DatasetConfig&) = default;
};

struct PairingSettings {
  Selection selection = Selection::EntireTrainingSet;
  std::vector<std::vector<std::string>> super_classes;
  std::size_t pool_size = 0;
  MixWeightDistribution weights;
  LabelPolicy labels = LabelPolicy::FirstLabelOnly;
  std::size_t patch = 28;
  bool flip = true;
  friend bool operator==(const PairingSettings&, const PairingSettings&) = default;
};

/// "reduced", "figure2" or an explicit layer list.
struct NetworkChoice {
  std::string preset = "reduced";
  std::optional<nn::NetworkSpec> custom;
  friend bool operator==(const NetworkChoice&, const NetworkChoice&) = default;
};

struct Seeds {
  std::uint64_t data = 1;
  std::uint64_t init = 1;
  std::uint64_t augmentation = 1;
  friend bool operator==(const Seeds&, const Seeds&) = default;
};

struct ExperimentConfig {
  int version = kConfigVersion;
  DatasetConfig dataset;
  PairingSettings pairing;
  ScheduleConfig schedule{100, 8, 2, 260, ScheduleUnit::Epochs};
  NetworkChoice network;
  nn::AdamHyper optimizer;
  std::size_t batch_size = 100;
  std::int64_t total_epochs = 300;
  Seeds seeds;

  void validate() const {
    if (version != kConfigVersion)
      throw ConfigError("unsupported config version " + std::to_string(version));
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (total_epochs < 1) throw ConfigError("total_epochs must be >= 1");
    if (pairing.patch == 0) throw ConfigError("patch size must be > 0");
    if (dataset.source == DatasetConfig::Source::Cifar10 && dataset.path.empty())
      throw ConfigError("cifar10 dataset needs a path");
    if (pairing.weights.kind == MixWeightDistribution::Kind::BetaSymmetric &&
        !(pairing.weights.alpha > 0))
      throw ConfigError("beta weights need alpha > 0");
    if (pairing.labels == LabelPolicy::BlendedHalfHalf &&
        pairing.selection == Selection::NonTrainingPool)
      throw ConfigError("blended labels cannot be used with non-training pool partners");
    if (!(optimizer.step_size > 0) || !(optimizer.beta1 >= 0 && optimizer.beta1 < 1) ||
        !(optimizer.beta2 >= 0 && optimizer.beta2 < 1) || !(optimizer.eps > 0))
      throw ConfigError("invalid Adam hyperparameters");
    if (network.custom) network.custom->validate();
    else if (network.preset != "reduced" && network.preset != "figure2")
      throw ConfigError("unknown network preset '" + network.preset + "'");
  }

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Resolves the network for a dataset of `n_classes` classes and
/// `channels`-channel patches.
inline nn::NetworkSpec resolve_network(const ExperimentConfig& cfg,
                                       std::size_t n_classes, std::size_t channels) {
  const nn::Shape input{cfg.pairing.patch, cfg.pairing.patch, channels};
  nn::NetworkSpec spec = cfg.network.custom ? *cfg.network.custom
                         : cfg.network.preset == "figure2"
                             ? nn::figure2_network(n_classes, input)
                             : nn::reduced_network(n_classes, input);
  if (spec.input != input)
    throw ConfigError("network input " + spec.input.str() + " does not match patches " +
                      input.str());
  if (spec.n_classes() != n_classes)
    throw ConfigError("network emits " + std::to_string(spec.n_classes()) +
                      " classes, dataset has " + std::to_string(n_classes));
  return spec;
}

/// Class id -> super-class id from the name lists. Names are CIFAR-10 class
/// names, or decimal class ids for other datasets. Every class must appear
/// exactly once.
inline std::vector<int> resolve_super_classes(const PairingSettings& p,
                                              DatasetConfig::Source source,
                                              std::size_t n_classes) {
  if (p.super_classes.empty()) {
    if (source == DatasetConfig::Source::Cifar10) return cifar10_super_classes();
    throw ConfigError("super-class selection needs a super_classes partition");
  }
  std::vector<int> map(n_classes, -1);
  for (std::size_t g = 0; g < p.super_classes.size(); ++g)
    for (const auto& name : p.super_classes[g]) {
      std::size_t id = 0;
      if (source == DatasetConfig::Source::Cifar10) {
        id = static_cast<std::size_t>(cifar10::class_id(name));
      } else {
        std::size_t pos = 0;
        try {
          id = std::stoul(name, &pos);
        } catch (const std::exception&) {
          pos = 0;
        }
        if (pos != name.size()) throw ConfigError("super-class entry '" + name + "' is not a class id");
      }
      if (id >= n_classes) throw ConfigError("super-class entry '" + name + "' out of range");
      if (map[id] != -1) throw ConfigError("class '" + name + "' listed in two super classes");
      map[id] = static_cast<int>(g);
    }
  for (std::size_t k = 0; k < n_classes; ++k)
    if (map[k] == -1)
      throw ConfigError("class " + std::to_string(k) + " missing from the super-class partition");
  return map;
}

// ------------------------------------------------------------------- json

inline std::string selection_name(Selection s) {
  switch (s) {
    case Selection::EntireTrainingSet: return "entire";
    case Selection::SameClass: return "same_class";
    case Selection::DifferentClass: return "different_class";
    case Selection::SameSuperClass: return "same_super_class";
    case Selection::DifferentSuperClass: return "different_super_class";
    case Selection::NonTrainingPool: return "non_training_pool";
  }
  return "?";
}

inline Selection parse_selection(const std::string& s) {
  for (auto v : {Selection::EntireTrainingSet, Selection::SameClass, Selection::DifferentClass,
                 Selection::SameSuperClass, Selection::DifferentSuperClass,
                 Selection::NonTrainingPool})
    if (selection_name(v) == s) return v;
  throw ConfigError("unknown selection '" + s + "'");
}

inline std::string weights_name(MixWeightDistribution::Kind k) {
  using K = MixWeightDistribution::Kind;
  switch (k) {
    case K::FixedHalf: return "fixed_half";
    case K::Uniform01: return "uniform";
    case K::UniformCappedHalf: return "uniform_capped_half";
    case K::BetaSymmetric: return "beta";
  }
  return "?";
}

inline MixWeightDistribution::Kind parse_weights(const std::string& s) {
  using K = MixWeightDistribution::Kind;
  for (auto k : {K::FixedHalf, K::Uniform01, K::UniformCappedHalf, K::BetaSymmetric})
    if (weights_name(k) == s) return k;
  throw ConfigError("unknown mix weight distribution '" + s + "'");
}

inline void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  using nlohmann::json;
  json ds = {{"source", c.dataset.source == DatasetConfig::Source::Cifar10 ? "cifar10" : "synthetic"},
             {"n_per_class", c.dataset.n_per_class},
             {"validation_limit", c.dataset.validation_limit}};
  if (c.dataset.source == DatasetConfig::Source::Cifar10) {
    ds["path"] = c.dataset.path;
  } else {
    const auto& s = c.dataset.synthetic;
    ds["synthetic"] = {{"n_classes", s.n_classes}, {"n_per_class", s.n_per_class},
                       {"image_size", s.image_size}, {"channels", s.channels},
                       {"difficulty", s.difficulty}, {"seed", s.seed}};
  }
  json weights = {{"kind", weights_name(c.pairing.weights.kind)}};
  if (c.pairing.weights.kind == MixWeightDistribution::Kind::BetaSymmetric)
    weights["alpha"] = c.pairing.weights.alpha;
  json pairing = {{"selection", selection_name(c.pairing.selection)},
                  {"weights", weights},
                  {"labels", c.pairing.labels == LabelPolicy::FirstLabelOnly ? "first" : "blended"},
                  {"patch", c.pairing.patch},
                  {"flip", c.pairing.flip}};
  if (!c.pairing.super_classes.empty()) pairing["super_classes"] = c.pairing.super_classes;
  if (c.pairing.pool_size) pairing["pool_size"] = c.pairing.pool_size;
  j = {{"version", c.version},
       {"dataset", ds},
       {"pairing", pairing},
       {"schedule", {{"unit", std::string(unit_name(c.schedule.unit()))},
                     {"warmup", c.schedule.warmup()},
                     {"on_span", c.schedule.on_span()},
                     {"off_span", c.schedule.off_span()},
                     {"finetune_start", c.schedule.finetune_start()}}},
       {"optimizer", {{"step_size", c.optimizer.step_size}, {"beta1", c.optimizer.beta1},
                      {"beta2", c.optimizer.beta2}, {"eps", c.optimizer.eps}}},
       {"batch_size", c.batch_size},
       {"total_epochs", c.total_epochs},
       {"seeds", {{"data", c.seeds.data}, {"init", c.seeds.init},
                  {"augmentation", c.seeds.augmentation}}}};
  if (c.network.custom) j["network"] = *c.network.custom;
  else j["network"] = c.network.preset;
}

inline void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  c = ExperimentConfig{};
  c.version = j.value("version", kConfigVersion);
  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    const auto src = d.value("source", std::string("synthetic"));
    if (src == "cifar10") c.dataset.source = DatasetConfig::Source::Cifar10;
    else if (src == "synthetic") c.dataset.source = DatasetConfig::Source::Synthetic;
    else throw ConfigError("unknown dataset source '" + src + "'");
    c.dataset.path = d.value("path", std::string());
    c.dataset.n_per_class = d.value("n_per_class", std::size_t{0});
    c.dataset.validation_limit = d.value("validation_limit", std::size_t{0});
    if (d.contains("synthetic")) {
      const auto& s = d.at("synthetic");
      auto& o = c.dataset.synthetic;
      o.n_classes = s.value("n_classes", o.n_classes);
      o.n_per_class = s.value("n_per_class", o.n_per_class);
      o.image_size = s.value("image_size", o.image_size);
      o.channels = s.value("channels", o.channels);
      o.difficulty = s.value("difficulty", o.difficulty);
      o.seed = s.value("seed", o.seed);
    }
  }
  if (j.contains("pairing")) {
    const auto& p = j.at("pairing");
    c.pairing.selection = parse_selection(p.value("selection", std::string("entire")));
    if (p.contains("super_classes")) p.at("super_classes").get_to(c.pairing.super_classes);
    c.pairing.pool_size = p.value("pool_size", std::size_t{0});
    if (p.contains("weights")) {
      const auto& w = p.at("weights");
      c.pairing.weights.kind = parse_weights(w.value("kind", std::string("fixed_half")));
      c.pairing.weights.alpha = w.value("alpha", 0.0);
    }
    const auto labels = p.value("labels", std::string("first"));
    if (labels == "first") c.pairing.labels = LabelPolicy::FirstLabelOnly;
    else if (labels == "blended") c.pairing.labels = LabelPolicy::BlendedHalfHalf;
    else throw ConfigError("unknown label policy '" + labels + "'");
    c.pairing.patch = p.value("patch", c.pairing.patch);
    c.pairing.flip = p.value("flip", c.pairing.flip);
  }
  if (j.contains("schedule")) {
    const auto& s = j.at("schedule");
    try {
      c.schedule = ScheduleConfig(s.value("warmup", std::int64_t{100}),
                                  s.value("on_span", std::int64_t{8}),
                                  s.value("off_span", std::int64_t{2}),
                                  s.value("finetune_start", std::int64_t{260}),
                                  parse_unit(s.value("unit", std::string("epochs"))));
    } catch (const ScheduleError& e) {
      throw ConfigError(std::string("schedule: ") + e.what());
    }
  }
  if (j.contains("network")) {
    const auto& n = j.at("network");
    if (n.is_string()) c.network = {n.get<std::string>(), std::nullopt};
    else c.network = {"custom", n.get<nn::NetworkSpec>()};
  }
  if (j.contains("optimizer")) {
    const auto& o = j.at("optimizer");
    c.optimizer.step_size = o.value("step_size", c.optimizer.step_size);
    c.optimizer.beta1 = o.value("beta1", c.optimizer.beta1);
    c.optimizer.beta2 = o.value("beta2", c.optimizer.beta2);
    c.optimizer.eps = o.value("eps", c.optimizer.eps);
  }
  c.batch_size = j.value("batch_size", c.batch_size);
  c.total_epochs = j.value("total_epochs", c.total_epochs);
  if (j.contains("seeds")) {
    const auto& s = j.at("seeds");
    c.seeds.data = s.value("data", c.seeds.data);
    c.seeds.init = s.value("init", c.seeds.init);
    c.seeds.augmentation = s.value("augmentation", c.seeds.augmentation);
  }
}

inline ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig c;
  try {
    c = nlohmann::json::parse(text).get<ExperimentConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config(text);
}

inline std::string dump_config(const ExperimentConfig& c) {
  return nlohmann::json(c).dump(2);
}

}  // namespace samplepair
