#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "samplepair/data.hpp"
#include "samplepair/pairing.hpp"

using namespace samplepair;

namespace {

// Labels only matter for selection; images are tiny placeholders.
Dataset labelled(std::size_t n_classes, std::size_t per_class, std::size_t side = 4) {
  Dataset ds;
  ds.name = "toy";
  ds.n_classes = n_classes;
  RandomSource rng{5};
  for (std::size_t i = 0; i < per_class; ++i)
    for (std::size_t k = 0; k < n_classes; ++k) {
      ImageF img(side, side, 3);
      for (auto& v : img.data()) v = static_cast<float>(uniform01(rng));
      ds.source_ids.push_back(ds.images.size());
      ds.images.push_back(std::move(img));
      ds.labels.push_back(static_cast<int>(k));
    }
  ds.rebuild_index();
  return ds;
}

// Raw moment E[X^k] of Beta(a, a).
double beta_raw_moment(double a, int k) {
  double m = 1.0;
  for (int i = 0; i < k; ++i) m *= (a + i) / (2 * a + i);
  return m;
}

}  // namespace

TEST(Targets, FirstLabelOnly) {
  const auto t = make_target(3, 7, LabelPolicy::FirstLabelOnly, 10);
  EXPECT_EQ(t, one_hot(3, 10));
}

TEST(Targets, Blended) {
  const auto t = make_target(3, 7, LabelPolicy::BlendedHalfHalf, 10);
  for (std::size_t k = 0; k < 10; ++k) EXPECT_DOUBLE_EQ(t.probs[k], (k == 3 || k == 7) ? 0.5 : 0.0);
  EXPECT_EQ(make_target(5, 5, LabelPolicy::BlendedHalfHalf, 10), one_hot(5, 10));
  EXPECT_TRUE(t.on_simplex());
}

TEST(Targets, RejectsOutOfRangeLabel) {
  EXPECT_THROW(one_hot(10, 10), PolicyError);
  EXPECT_THROW(one_hot(-1, 10), PolicyError);
}

TEST(Weights, FixedHalf) {
  RandomSource rng{1};
  EXPECT_EQ(draw_mix_weight(MixWeightDistribution::fixed_half(), rng).value(), 0.5);
}

TEST(Weights, CappedNeverFavoursPartner) {
  RandomSource rng{2};
  double lo = 1.0;
  for (int i = 0; i < 100000; ++i) {
    const auto w = draw_mix_weight(MixWeightDistribution::uniform_capped_half(), rng);
    ASSERT_LE(w.partner_weight(), 0.5);
    ASSERT_GE(w.partner_weight(), 0.0);
    lo = std::min(lo, w.value());
  }
  EXPECT_LT(lo, 0.51);  // the cap is actually approached
}

TEST(Weights, UniformCoversUnitInterval) {
  RandomSource rng{3};
  double s = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) s += draw_mix_weight(MixWeightDistribution::uniform(), rng).value();
  EXPECT_NEAR(s / n, 0.5, 3 * std::sqrt(1.0 / 12 / n));
}

TEST(Weights, BetaRejectsNonPositiveAlpha) {
  EXPECT_THROW(MixWeightDistribution::beta(0.0), PolicyError);
  MixWeightDistribution d{MixWeightDistribution::Kind::BetaSymmetric, -1.0};
  EXPECT_THROW(d.validate(), PolicyError);
}

class BetaMoments : public ::testing::TestWithParam<double> {};

TEST_P(BetaMoments, MatchClosedForm) {
  const double a = GetParam();
  const int n = 100000;
  RandomSource rng{17};
  std::vector<double> xs(n);
  for (auto& x : xs) {
    x = draw_symmetric_beta(a, rng);
    ASSERT_GE(x, 0.0);
    ASSERT_LE(x, 1.0);
  }
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double var = 0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= (n - 1);

  const double m1 = beta_raw_moment(a, 1), m2 = beta_raw_moment(a, 2);
  const double m3 = beta_raw_moment(a, 3), m4 = beta_raw_moment(a, 4);
  const double true_var = m2 - m1 * m1;
  const double mu4 = m4 - 4 * m3 * m1 + 6 * m2 * m1 * m1 - 3 * m1 * m1 * m1 * m1;
  EXPECT_NEAR(true_var, 1.0 / (4 * (2 * a + 1)), 1e-15);
  EXPECT_NEAR(mean, 0.5, 3 * std::sqrt(true_var / n));
  EXPECT_NEAR(var, true_var, 3 * std::sqrt((mu4 - true_var * true_var) / n));
}

INSTANTIATE_TEST_SUITE_P(Alphas, BetaMoments, ::testing::Values(0.2, 0.4, 1.0));

TEST(Beta, PointTwoVarianceValue) {
  // alpha*beta / ((alpha+beta)^2 (alpha+beta+1)) at 0.2, 0.2
  EXPECT_NEAR(0.04 / (0.16 * 1.4), 0.178571428571, 1e-12);
}

TEST(Selection, ConstraintsHoldPerDraw) {
  const auto ds = labelled(10, 20);
  const auto super = cifar10_super_classes();
  RandomSource rng{4};
  for (auto v : {Selection::SameClass, Selection::DifferentClass, Selection::SameSuperClass,
                 Selection::DifferentSuperClass}) {
    SelectionPolicy p{v, super, nullptr};
    for (int i = 0; i < 20000; ++i) {
      const std::size_t anchor = uniform_index(rng, ds.size());
      const auto ka = static_cast<std::size_t>(ds.labels[anchor]);
      const auto r = select_partner(p, anchor, ka, ds.class_index, rng);
      ASSERT_EQ(r.source, PartnerRef::Source::Training);
      const auto kb = static_cast<std::size_t>(ds.labels[r.index]);
      switch (v) {
        case Selection::SameClass: ASSERT_EQ(kb, ka); break;
        case Selection::DifferentClass: ASSERT_NE(kb, ka); break;
        case Selection::SameSuperClass: ASSERT_EQ(super[kb], super[ka]); break;
        case Selection::DifferentSuperClass: ASSERT_NE(super[kb], super[ka]); break;
        default: break;
      }
    }
  }
}

TEST(Selection, CifarSuperClasses) {
  const auto s = cifar10_super_classes();
  for (const char* n : {"airplane", "automobile", "ship", "truck"})
    EXPECT_EQ(s[static_cast<std::size_t>(cifar10::class_id(n))], 0) << n;
  for (const char* n : {"bird", "cat", "deer", "dog", "frog", "horse"})
    EXPECT_EQ(s[static_cast<std::size_t>(cifar10::class_id(n))], 1) << n;
  // standard ordering: 0 airplane, 1 automobile, 8 ship, 9 truck
  EXPECT_EQ(s, (std::vector<int>{0, 0, 1, 1, 1, 1, 1, 1, 0, 0}));
}

TEST(Selection, SameSuperClassDrawsWithinArtificialObjects) {
  const auto ds = labelled(10, 5);
  SelectionPolicy p{Selection::SameSuperClass, cifar10_super_classes(), nullptr};
  RandomSource rng{8};
  std::set<int> seen;
  for (int i = 0; i < 5000; ++i)
    seen.insert(ds.labels[select_partner(p, 0, 0, ds.class_index, rng).index]);
  EXPECT_EQ(seen, (std::set<int>{0, 1, 8, 9}));
}

TEST(Selection, EntireSetReachesAllOrderedPairs) {
  const auto ds = labelled(4, 5);  // N = 20
  SelectionPolicy p;
  RandomSource rng{12};
  std::set<std::pair<std::size_t, std::size_t>> pairs;
  for (int i = 0; i < 50000; ++i) {
    const auto a = uniform_index(rng, ds.size());
    pairs.insert({a, select_partner(p, a, static_cast<std::size_t>(ds.labels[a]), ds.class_index, rng).index});
  }
  EXPECT_EQ(pairs.size(), 400u);
}

TEST(Selection, RejectsIncompletePolicies) {
  const auto ds = labelled(3, 2);
  RandomSource rng{1};
  SelectionPolicy d{Selection::SameSuperClass, {0, 1}, nullptr};
  EXPECT_THROW(select_partner(d, 0, 0, ds.class_index, rng), PolicyError);
  SelectionPolicy pool{Selection::NonTrainingPool, {}, nullptr};
  EXPECT_THROW(pool.validate(3), PolicyError);
  EXPECT_THROW(select_partner(pool, 0, 0, ds.class_index, rng), PolicyError);
  // every class in one super class: "different super class" has no candidates
  SelectionPolicy e{Selection::DifferentSuperClass, {0, 0, 0}, nullptr};
  EXPECT_THROW(select_partner(e, 0, 0, ds.class_index, rng), PolicyError);
}

TEST(Selection, PoolPartnersComeFromPool) {
  const auto ds = labelled(3, 4);
  auto pool = std::make_shared<NonTrainingPool>();
  for (int i = 0; i < 7; ++i) {
    pool->images.push_back(ImageF(4, 4, 3));
    pool->source_ids.push_back(100 + i);
  }
  SelectionPolicy p{Selection::NonTrainingPool, {}, pool};
  RandomSource rng{1};
  std::set<std::size_t> seen;
  for (int i = 0; i < 1000; ++i) {
    const auto r = select_partner(p, 0, 0, ds.class_index, rng);
    ASSERT_EQ(r.source, PartnerRef::Source::Pool);
    seen.insert(r.index);
  }
  EXPECT_EQ(seen.size(), 7u);
}

TEST(Augment, PassthroughWhenDisabled) {
  const auto ds = labelled(3, 4, 8);
  PairingConfig cfg;
  cfg.patch_h = cfg.patch_w = 6;
  RandomSource a{21}, b{21};
  const auto s = augment_sample(ds, 5, false, cfg, a);
  EXPECT_FALSE(s.partner);
  EXPECT_EQ(s.target, one_hot(ds.labels[5], 3));
  EXPECT_EQ(s.image, baseline_augment(ds.images[5], 6, 6, true, b));
}

TEST(Augment, SelfPairIsIdentity) {
  const auto ds = labelled(1, 1, 6);
  PairingConfig cfg;
  cfg.patch_h = cfg.patch_w = 6;
  cfg.random_flip = false;
  RandomSource rng{2};
  const auto s = augment_sample(ds, 0, true, cfg, rng);
  ASSERT_TRUE(s.partner);
  EXPECT_EQ(s.partner->index, 0u);
  EXPECT_EQ(s.image, ds.images[0]);
}

TEST(Augment, OutputShapeRangeAndSimplex) {
  const auto ds = labelled(10, 3, 32);
  PairingConfig cfg;
  cfg.weights = MixWeightDistribution::beta(0.4);
  cfg.labels = LabelPolicy::BlendedHalfHalf;
  RandomSource rng{3};
  for (int i = 0; i < 200; ++i) {
    const auto s = augment_sample(ds, uniform_index(rng, ds.size()), true, cfg, rng);
    ASSERT_EQ(s.image.height(), 28u);
    ASSERT_EQ(s.image.width(), 28u);
    ASSERT_EQ(s.image.channels(), 3u);
    for (float v : s.image.data()) ASSERT_TRUE(v >= 0.0f && v <= 1.0f);
    ASSERT_TRUE(s.target.on_simplex());
  }
}

TEST(Augment, FixedHalfIsSymmetricInItsInputs) {
  RandomSource rng{4};
  const auto ds = labelled(2, 2, 8);
  for (int i = 0; i < 20; ++i) {
    const auto a = baseline_augment(ds.images[0], 6, 6, true, rng);
    const auto b = baseline_augment(ds.images[1], 6, 6, true, rng);
    EXPECT_EQ(mix_images(a, b, MixWeight::half()), mix_images(b, a, MixWeight::half()));
  }
}

TEST(Augment, LabelPolicyConsumesNoRandomness) {
  const auto ds = labelled(5, 6, 10);
  PairingConfig first, blended;
  first.patch_h = first.patch_w = blended.patch_h = blended.patch_w = 8;
  first.weights = blended.weights = MixWeightDistribution::uniform();
  blended.labels = LabelPolicy::BlendedHalfHalf;
  RandomSource a{9}, b{9};
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto x = augment_sample(ds, i, true, first, a);
    const auto y = augment_sample(ds, i, true, blended, b);
    ASSERT_EQ(x.image, y.image);
    ASSERT_EQ(x.partner, y.partner);
  }
}

TEST(Augment, PoolPartnerKeepsAnchorLabelAndRejectsBlending) {
  const auto ds = labelled(3, 4, 6);
  auto pool = std::make_shared<NonTrainingPool>();
  pool->images.push_back(ImageF(6, 6, 3));
  pool->source_ids.push_back(99);
  PairingConfig cfg;
  cfg.patch_h = cfg.patch_w = 6;
  cfg.selection = {Selection::NonTrainingPool, {}, pool};
  RandomSource rng{1};
  const auto s = augment_sample(ds, 4, true, cfg, rng);
  EXPECT_EQ(s.target, one_hot(ds.labels[4], 3));
  EXPECT_EQ(s.partner->source, PartnerRef::Source::Pool);
  cfg.labels = LabelPolicy::BlendedHalfHalf;
  EXPECT_THROW(cfg.validate(3), PolicyError);
}
