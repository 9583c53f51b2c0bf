#pragma once

// Named experiment grids. Each sweep varies one axis of the desk-scale default
// and pairs every pairing run with the matched baseline where that is the
// comparison of interest.

#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "samplepair/config.hpp"

namespace samplepair::presets {

using Named = std::pair<std::string, ExperimentConfig>;

/// Reduced net, CIFAR-10 at 100 samples per class, 300 epochs with the
/// 100 / 8-on 2-off / fine-tune-from-260 schedule, batch 100, Adam 1e-3.
inline ExperimentConfig desk_default(std::string cifar_dir = "data/cifar-10-batches-bin") {
  ExperimentConfig c;
  c.dataset.source = DatasetConfig::Source::Cifar10;
  c.dataset.path = std::move(cifar_dir);
  c.dataset.n_per_class = 100;
  c.schedule = ScheduleConfig(100, 8, 2, 260, ScheduleUnit::Epochs);
  c.total_epochs = 300;
  c.batch_size = 100;
  return c;
}

/// Same config with pairing never enabled: the warmup never ends. Image-unit
/// schedules use the largest counter since the image total depends on data.
inline ExperimentConfig baseline_of(ExperimentConfig c) {
  const std::int64_t end = c.schedule.unit() == ScheduleUnit::Epochs
                               ? c.total_epochs
                               : std::numeric_limits<std::int64_t>::max();
  c.schedule = ScheduleConfig(end, c.schedule.on_span(), c.schedule.off_span(), end,
                              c.schedule.unit());
  return c;
}

inline std::vector<Named> fig6_subsets(const ExperimentConfig& base) {
  std::vector<Named> out;
  for (std::size_t n : {10, 50, 100, 250, 500, 1000, 2500, 5000}) {
    auto c = base;
    c.dataset.n_per_class = n;
    const auto tag = "n" + std::to_string(n);
    out.emplace_back(tag + "_baseline", baseline_of(c));
    out.emplace_back(tag + "_pairing", c);
    if (n * 2 > 5000) continue;  // the pool must come from unused training images
    auto pool = c;
    pool.pairing.selection = Selection::NonTrainingPool;
    out.emplace_back(tag + "_pool", pool);
  }
  return out;
}

inline std::vector<Named> fig7_selection(const ExperimentConfig& base) {
  std::vector<Named> out{{"baseline", baseline_of(base)}};
  const std::pair<const char*, Selection> variants[] = {
      {"A_entire", Selection::EntireTrainingSet},
      {"B_same_class", Selection::SameClass},
      {"C_different_class", Selection::DifferentClass},
      {"D_same_super_class", Selection::SameSuperClass},
      {"E_different_super_class", Selection::DifferentSuperClass}};
  for (const auto& [name, sel] : variants) {
    auto c = base;
    c.pairing.selection = sel;
    out.emplace_back(name, c);
  }
  return out;
}

inline std::vector<Named> fig8_labels(const ExperimentConfig& base) {
  auto first = base, blended = base;
  first.pairing.labels = LabelPolicy::FirstLabelOnly;
  blended.pairing.labels = LabelPolicy::BlendedHalfHalf;
  return {{"baseline", baseline_of(base)}, {"first_label", first}, {"blended", blended}};
}

inline std::vector<Named> fig9_weights(const ExperimentConfig& base) {
  std::vector<Named> out{{"baseline", baseline_of(base)}};
  const std::pair<const char*, MixWeightDistribution> variants[] = {
      {"fixed_half", MixWeightDistribution::fixed_half()},
      {"uniform", MixWeightDistribution::uniform()},
      {"uniform_capped_half", MixWeightDistribution::uniform_capped_half()},
      {"beta_0.2", MixWeightDistribution::beta(0.2)},
      {"beta_0.4", MixWeightDistribution::beta(0.4)}};
  for (const auto& [name, w] : variants) {
    auto c = base;
    c.pairing.weights = w;
    out.emplace_back(name, c);
  }
  return out;
}

/// On/off splits of the 10-epoch cycle.
inline std::vector<Named> fig10_ratio(const ExperimentConfig& base) {
  std::vector<Named> out{{"baseline", baseline_of(base)}};
  for (auto [on, off] : {std::pair{2, 8}, {5, 5}, {8, 2}, {9, 1}, {10, 0}}) {
    auto c = base;
    c.schedule = ScheduleConfig(base.schedule.warmup(), on, off, base.schedule.finetune_start(),
                                base.schedule.unit());
    out.emplace_back("on" + std::to_string(on) + "_off" + std::to_string(off), c);
  }
  return out;
}

inline const std::vector<std::string>& sweep_names() {
  static const std::vector<std::string> names{"fig6_subsets", "fig7_selection", "fig8_labels",
                                              "fig9_weights", "fig10_ratio"};
  return names;
}

inline std::vector<Named> sweep(const std::string& name, const ExperimentConfig& base) {
  if (name == "fig6_subsets") return fig6_subsets(base);
  if (name == "fig7_selection") return fig7_selection(base);
  if (name == "fig8_labels") return fig8_labels(base);
  if (name == "fig9_weights") return fig9_weights(base);
  if (name == "fig10_ratio") return fig10_ratio(base);
  throw ConfigError("unknown preset sweep '" + name + "'");
}

}  // namespace samplepair::presets
