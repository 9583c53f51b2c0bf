#pragma once

// SamplePairing policies: which partner to overlay, with what weight, and
// what training target to emit; plus the augment-then-mix pipeline.

#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "samplepair/data.hpp"
#include "samplepair/image.hpp"
#include "samplepair/random.hpp"

namespace samplepair {

struct PolicyError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// ------------------------------------------------------------ soft labels

struct SoftLabel {
  std::vector<double> probs;

  std::size_t n_classes() const noexcept { return probs.size(); }
  bool on_simplex(double tol = 1e-9) const {
    double s = 0;
    for (double p : probs) {
      if (!(p >= 0)) return false;
      s += p;
    }
    return std::abs(s - 1.0) <= tol;
  }
  friend bool operator==(const SoftLabel&, const SoftLabel&) = default;
};

inline SoftLabel one_hot(int label, std::size_t n_classes) {
  if (label < 0 || static_cast<std::size_t>(label) >= n_classes)
    throw PolicyError("label " + std::to_string(label) + " out of range for " +
                      std::to_string(n_classes) + " classes");
  SoftLabel t{std::vector<double>(n_classes, 0.0)};
  t.probs[static_cast<std::size_t>(label)] = 1.0;
  return t;
}

enum class LabelPolicy { FirstLabelOnly, BlendedHalfHalf };

inline SoftLabel make_target(int label_a, int label_b, LabelPolicy policy,
                             std::size_t n_classes) {
  SoftLabel t = one_hot(label_a, n_classes);
  if (policy == LabelPolicy::FirstLabelOnly) return t;
  const SoftLabel b = one_hot(label_b, n_classes);
  for (std::size_t k = 0; k < n_classes; ++k)
    t.probs[k] = 0.5 * t.probs[k] + 0.5 * b.probs[k];
  return t;
}

// ------------------------------------------------------------ mix weights

struct MixWeightDistribution {
  enum class Kind { FixedHalf, Uniform01, UniformCappedHalf, BetaSymmetric };
  Kind kind = Kind::FixedHalf;
  double alpha = 0.0;  // BetaSymmetric only

  static MixWeightDistribution fixed_half() { return {Kind::FixedHalf, 0.0}; }
  static MixWeightDistribution uniform() { return {Kind::Uniform01, 0.0}; }
  static MixWeightDistribution uniform_capped_half() {
    return {Kind::UniformCappedHalf, 0.0};
  }
  static MixWeightDistribution beta(double alpha) {
    if (!(alpha > 0)) throw PolicyError("beta alpha must be > 0");
    return {Kind::BetaSymmetric, alpha};
  }

  void validate() const {
    if (kind == Kind::BetaSymmetric && !(alpha > 0))
      throw PolicyError("beta alpha must be > 0");
  }
  friend bool operator==(const MixWeightDistribution&,
                         const MixWeightDistribution&) = default;
};

/// Beta(alpha, alpha) via two Gamma(alpha, 1) variates.
inline double draw_symmetric_beta(double alpha, RandomSource& rng) {
  std::gamma_distribution<double> gamma(alpha, 1.0);
  for (;;) {
    const double g1 = gamma(rng);
    const double g2 = gamma(rng);
    const double s = g1 + g2;
    if (s > 0 && std::isfinite(s)) return g1 / s;
  }
}

inline MixWeight draw_mix_weight(const MixWeightDistribution& dist,
                                 RandomSource& rng) {
  using K = MixWeightDistribution::Kind;
  switch (dist.kind) {
    case K::FixedHalf: return MixWeight::half();
    case K::Uniform01: return MixWeight{uniform01(rng)};
    // second image's weight uniform on [0, 0.5]
    case K::UniformCappedHalf: return MixWeight{1.0 - 0.5 * uniform01(rng)};
    case K::BetaSymmetric: return MixWeight{draw_symmetric_beta(dist.alpha, rng)};
  }
  throw PolicyError("unknown mix weight distribution");
}

// -------------------------------------------------------- partner selection

enum class Selection {
  EntireTrainingSet,    // A
  SameClass,            // B
  DifferentClass,       // C
  SameSuperClass,       // D
  DifferentSuperClass,  // E
  NonTrainingPool,
};

struct SelectionPolicy {
  Selection variant = Selection::EntireTrainingSet;
  std::vector<int> super_class_of;  // class id -> super-class id (D/E)
  std::shared_ptr<const samplepair::NonTrainingPool> pool;

  void validate(std::size_t n_classes) const {
    if (variant == Selection::SameSuperClass ||
        variant == Selection::DifferentSuperClass) {
      if (super_class_of.size() != n_classes)
        throw PolicyError("super-class map must cover all " +
                          std::to_string(n_classes) + " classes");
    }
    if (variant == Selection::NonTrainingPool && (!pool || pool->size() == 0))
      throw PolicyError("non-training pool selection needs a non-empty pool");
  }
};

/// A partner is either a training sample or a non-training pool image.
struct PartnerRef {
  enum class Source { Training, Pool };
  Source source = Source::Training;
  std::size_t index = 0;
  friend bool operator==(const PartnerRef&, const PartnerRef&) = default;
};

namespace detail {

inline bool class_is_candidate(const SelectionPolicy& policy, std::size_t k,
                               std::size_t anchor_class) {
  switch (policy.variant) {
    case Selection::EntireTrainingSet: return true;
    case Selection::SameClass: return k == anchor_class;
    case Selection::DifferentClass: return k != anchor_class;
    case Selection::SameSuperClass:
      return policy.super_class_of[k] == policy.super_class_of[anchor_class];
    case Selection::DifferentSuperClass:
      return policy.super_class_of[k] != policy.super_class_of[anchor_class];
    case Selection::NonTrainingPool: return false;
  }
  return false;
}

}  // namespace detail

/// Draws a partner uniformly from the policy's candidate set. Candidate sets
/// are unions of whole classes, so the draw picks a rank in the union and
/// walks the classes; the anchor itself is eligible whenever its class is.
inline PartnerRef select_partner(const SelectionPolicy& policy,
                                 std::size_t /*anchor_index*/,
                                 std::size_t anchor_class,
                                 const ClassIndex& class_index,
                                 RandomSource& rng) {
  if (policy.variant == Selection::NonTrainingPool) {
    if (!policy.pool || policy.pool->size() == 0)
      throw PolicyError("non-training pool is empty");
    return {PartnerRef::Source::Pool, uniform_index(rng, policy.pool->size())};
  }
  if (anchor_class >= class_index.size())
    throw PolicyError("anchor class outside the class index");
  policy.validate(class_index.size());
  std::size_t total = 0;
  for (std::size_t k = 0; k < class_index.size(); ++k)
    if (detail::class_is_candidate(policy, k, anchor_class))
      total += class_index[k].size();
  if (total == 0)
    throw PolicyError("selection policy has an empty candidate set for class " +
                      std::to_string(anchor_class));
  std::size_t r = uniform_index(rng, total);
  for (std::size_t k = 0; k < class_index.size(); ++k) {
    if (!detail::class_is_candidate(policy, k, anchor_class)) continue;
    if (r < class_index[k].size())
      return {PartnerRef::Source::Training, class_index[k][r]};
    r -= class_index[k].size();
  }
  throw PolicyError("partner rank out of range");  // unreachable
}

/// CIFAR-10 super classes: artificial objects (airplane, automobile, ship,
/// truck) = 0, living things = 1.
inline std::vector<int> cifar10_super_classes() {
  std::vector<int> map(cifar10::kClassNames.size(), 1);
  for (const char* name : {"airplane", "automobile", "ship", "truck"})
    map[static_cast<std::size_t>(cifar10::class_id(name))] = 0;
  return map;
}

// ------------------------------------------------------------- pipeline

struct PairingConfig {
  SelectionPolicy selection;
  MixWeightDistribution weights;
  LabelPolicy labels = LabelPolicy::FirstLabelOnly;
  std::size_t patch_h = 28;
  std::size_t patch_w = 28;
  bool random_flip = true;

  void validate(std::size_t n_classes) const {
    selection.validate(n_classes);
    weights.validate();
    if (patch_h == 0 || patch_w == 0) throw PolicyError("patch size must be > 0");
    if (labels == LabelPolicy::BlendedHalfHalf &&
        selection.variant == Selection::NonTrainingPool)
      throw PolicyError("blended labels need a labeled partner; "
                        "non-training pool images carry no label");
  }
};

struct AugmentedSample {
  ImageF image;
  SoftLabel target;
  int anchor_label = 0;
  std::optional<PartnerRef> partner;
  MixWeight weight = MixWeight{1.0};
};

/// Random patch extraction followed by a horizontal flip with probability 1/2.
template <typename T>
BasicImage<T> baseline_augment(const BasicImage<T>& img, std::size_t patch_h,
                               std::size_t patch_w, bool random_flip,
                               RandomSource& rng) {
  auto patch = random_crop(img, patch_h, patch_w, rng);
  if (random_flip && coin(rng)) return horizontal_flip(patch);
  return patch;
}

/// Baseline augmentation of the anchor; when pairing is enabled, an
/// independently augmented partner is overlaid with a drawn weight.
/// Random draws happen in a fixed order (anchor crop/flip, partner choice,
/// partner crop/flip, weight) and the label policy consumes none, so the
/// image stream does not depend on the label policy.
inline AugmentedSample augment_sample(const Dataset& ds, std::size_t anchor,
                                      bool pairing_on,
                                      const PairingConfig& cfg,
                                      RandomSource& rng) {
  if (ds.empty()) throw PolicyError("cannot augment from an empty dataset");
  if (anchor >= ds.size()) throw PolicyError("anchor index out of range");
  const int label_a = ds.labels[anchor];
  AugmentedSample out;
  out.anchor_label = label_a;
  out.image = baseline_augment(ds.images[anchor], cfg.patch_h, cfg.patch_w,
                               cfg.random_flip, rng);
  if (!pairing_on) {
    out.target = one_hot(label_a, ds.n_classes);
    return out;
  }
  const auto partner = select_partner(cfg.selection, anchor,
                                      static_cast<std::size_t>(label_a),
                                      ds.class_index, rng);
  const ImageF& partner_src = partner.source == PartnerRef::Source::Pool
                                  ? cfg.selection.pool->images[partner.index]
                                  : ds.images[partner.index];
  const auto partner_img = baseline_augment(partner_src, cfg.patch_h,
                                            cfg.patch_w, cfg.random_flip, rng);
  out.weight = draw_mix_weight(cfg.weights, rng);
  out.image = mix_images(out.image, partner_img, out.weight);
  out.partner = partner;
  const int label_b = partner.source == PartnerRef::Source::Pool
                          ? label_a
                          : ds.labels[partner.index];
  out.target = make_target(label_a, label_b, cfg.labels, ds.n_classes);
  return out;
}

}  // namespace samplepair
