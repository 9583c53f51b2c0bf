#pragma once

// The experiment runner: data preparation, the schedule-driven epoch loop,
// center-crop evaluation and metrics.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <functional>
#include <future>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "samplepair/config.hpp"
#include "samplepair/data.hpp"
#include "samplepair/image.hpp"
#include "samplepair/metrics.hpp"
#include "samplepair/nn/adam.hpp"
#include "samplepair/nn/loss.hpp"
#include "samplepair/nn/network.hpp"
#include "samplepair/pairing.hpp"
#include "samplepair/random.hpp"
#include "samplepair/schedule.hpp"

namespace samplepair {

struct ExperimentData {
  Dataset train;
  Dataset validation;
  std::shared_ptr<const NonTrainingPool> pool;

  std::vector<DatasetFingerprint> fingerprints() const {
    std::vector<DatasetFingerprint> out{
        {"train", train.name, train.size(), train.checksum},
        {"validation", validation.name, validation.size(), validation.checksum}};
    if (pool) {
      std::vector<unsigned char> ids;
      for (auto id : pool->source_ids)
        for (int b = 0; b < 8; ++b) ids.push_back((id >> (8 * b)) & 0xff);
      out.push_back({"pool", train.name + "-pool", pool->size(), sha256_hex(ids)});
    }
    return out;
  }
};

/// Loads or generates the corpus, draws the class-balanced training subset and
/// (for non-training-pool pairing) the held-out partner pool.
inline ExperimentData prepare_data(const ExperimentConfig& cfg) {
  Dataset full_train, test;
  if (cfg.dataset.source == DatasetConfig::Source::Cifar10) {
    std::tie(full_train, test) = load_cifar10(cfg.dataset.path);
  } else {
    std::tie(full_train, test) = make_synthetic(cfg.dataset.synthetic);
  }
  ExperimentData d;
  const std::size_t min_class = std::ranges::min(
      full_train.class_index, {}, [](const auto& v) { return v.size(); }).size();
  if (cfg.dataset.n_per_class > 0 && cfg.dataset.n_per_class < min_class)
    d.train = subset_per_class(full_train, cfg.dataset.n_per_class, cfg.seeds.data);
  else if (cfg.dataset.n_per_class > min_class)
    throw ConfigError("n_per_class " + std::to_string(cfg.dataset.n_per_class) +
                      " exceeds the smallest class (" + std::to_string(min_class) + ")");
  else
    d.train = full_train;

  if (cfg.dataset.validation_limit > 0 && cfg.dataset.validation_limit < test.size()) {
    std::vector<std::size_t> keep(cfg.dataset.validation_limit);
    std::iota(keep.begin(), keep.end(), std::size_t{0});
    d.validation = select_samples(test, keep, test.name + "[:" + std::to_string(keep.size()) + "]");
  } else {
    d.validation = std::move(test);
  }

  if (cfg.pairing.selection == Selection::NonTrainingPool) {
    const std::size_t n = cfg.pairing.pool_size ? cfg.pairing.pool_size : d.train.size();
    d.pool = std::make_shared<const NonTrainingPool>(
        build_nontraining_pool(full_train, d.train, n, cfg.seeds.data));
  }
  return d;
}

inline PairingConfig make_pairing_config(const ExperimentConfig& cfg, const ExperimentData& data) {
  PairingConfig pc;
  pc.selection.variant = cfg.pairing.selection;
  if (cfg.pairing.selection == Selection::SameSuperClass ||
      cfg.pairing.selection == Selection::DifferentSuperClass)
    pc.selection.super_class_of =
        resolve_super_classes(cfg.pairing, cfg.dataset.source, data.train.n_classes);
  pc.selection.pool = data.pool;
  pc.weights = cfg.pairing.weights;
  pc.labels = cfg.pairing.labels;
  pc.patch_h = pc.patch_w = cfg.pairing.patch;
  pc.random_flip = cfg.pairing.flip;
  pc.validate(data.train.n_classes);
  return pc;
}

// ---------------------------------------------------------- sample stream

/// Serving order for one epoch: a permutation keyed by (data seed, epoch).
inline std::vector<std::size_t> epoch_order(std::uint64_t data_seed, std::size_t n,
                                            std::int64_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto rng = derive_stream(data_seed, {0x6f72646572ULL, static_cast<std::uint64_t>(epoch)});
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

/// Phase governing a sample: per epoch in epoch mode, per cumulative image
/// in image mode.
inline Phase phase_for(const ScheduleConfig& s, std::int64_t epoch, std::int64_t images_before) {
  return phase_at(s.unit() == ScheduleUnit::Epochs ? epoch : images_before, s);
}

/// The augmented sample served at `position` of `epoch`. Its randomness is a
/// stream keyed by (augmentation seed, epoch, position), independent of how
/// samples are grouped into batches or workers.
inline AugmentedSample serve_sample(const ExperimentConfig& cfg, const PairingConfig& pc,
                                    const Dataset& train, std::int64_t epoch,
                                    std::size_t position, std::size_t anchor, bool pairing_on) {
  auto rng = derive_stream(cfg.seeds.augmentation,
                           {static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(position)});
  return augment_sample(train, anchor, pairing_on, pc, rng);
}

/// Batch boundaries for n samples: full batches, with a trailing single
/// sample merged into the previous batch (batch norm needs two values).
inline std::vector<std::pair<std::size_t, std::size_t>> batch_ranges(std::size_t n,
                                                                     std::size_t batch) {
  std::vector<std::pair<std::size_t, std::size_t>> r;
  for (std::size_t b = 0; b < n; b += batch) r.emplace_back(b, std::min(n, b + batch));
  if (r.size() > 1 && r.back().second - r.back().first == 1) {
    r[r.size() - 2].second = r.back().second;
    r.pop_back();
  }
  return r;
}

template <typename T>
void pack_images(std::span<const ImageF* const> images, nn::Tensor<T>& out) {
  const auto& f = *images.front();
  out.resize(images.size(), {f.height(), f.width(), f.channels()});
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (!images[i]->same_shape(f)) throw ShapeError("batch images differ in shape");
    std::copy(images[i]->data().begin(), images[i]->data().end(), out.sample(i));
  }
}

// -------------------------------------------------------------- evaluation

struct EvalResult {
  double error = 0.0;
  double loss = 0.0;
  std::size_t count = 0;
};

/// Eval-mode top-1 error and mean cross-entropy on center crops (no flip).
/// Equal logits resolve to the lowest class id.
template <typename T>
EvalResult evaluate(nn::Network<T>& net, const Dataset& ds, std::size_t batch = 250) {
  const nn::Shape in = net.spec().input;
  if (ds.n_classes != net.n_classes())
    throw ShapeError("network has " + std::to_string(net.n_classes()) + " outputs, dataset " +
                     std::to_string(ds.n_classes) + " classes");
  EvalResult r;
  std::size_t wrong = 0;
  double loss_sum = 0.0;
  nn::Tensor<T> x;
  for (std::size_t b = 0; b < ds.size(); b += batch) {
    const std::size_t e = std::min(ds.size(), b + batch);
    std::vector<ImageF> crops;
    crops.reserve(e - b);
    for (std::size_t i = b; i < e; ++i) {
      if (ds.images[i].channels() != in.c)
        throw ShapeError("dataset channels do not match the network input " + in.str());
      crops.push_back(center_crop(ds.images[i], in.h, in.w));
    }
    std::vector<const ImageF*> ptrs;
    for (const auto& c : crops) ptrs.push_back(&c);
    pack_images<T>(ptrs, x);
    const auto& logits = net.forward(x, {nn::Mode::Eval, nullptr, false, false});
    const auto pred = nn::predict_classes(logits);
    std::vector<T> targets((e - b) * ds.n_classes, T(0));
    for (std::size_t i = b; i < e; ++i) {
      if (pred[i - b] != ds.labels[i]) ++wrong;
      targets[(i - b) * ds.n_classes + static_cast<std::size_t>(ds.labels[i])] = T(1);
    }
    loss_sum += nn::loss_xent_soft(logits, std::span<const T>(targets)).loss *
                static_cast<double>(e - b);
  }
  r.count = ds.size();
  if (r.count) {
    r.error = static_cast<double>(wrong) / static_cast<double>(r.count);
    r.loss = loss_sum / static_cast<double>(r.count);
  }
  return r;
}

/// Augments positions [b, e) of an epoch. `images_before` counts images served
/// before position 0 of this epoch (for image-unit schedules). With several
/// workers the positions are split into contiguous chunks; each sample owns its
/// random stream, so the result equals the sequential one.
inline std::vector<AugmentedSample> serve_range(const ExperimentConfig& cfg,
                                                const PairingConfig& pc, const Dataset& train,
                                                std::int64_t epoch,
                                                std::span<const std::size_t> order,
                                                std::size_t b, std::size_t e,
                                                std::int64_t images_before,
                                                std::size_t workers = 1) {
  std::vector<AugmentedSample> out(e - b);
  auto work = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t p = lo; p < hi; ++p) {
      const bool on = pairing_enabled(
          phase_for(cfg.schedule, epoch, images_before + static_cast<std::int64_t>(p)));
      out[p - b] = serve_sample(cfg, pc, train, epoch, p, order[p], on);
    }
  };
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(1, e - b));
  if (workers == 1) {
    work(b, e);
    return out;
  }
  std::vector<std::future<void>> jobs;
  const std::size_t chunk = (e - b + workers - 1) / workers;
  for (std::size_t lo = b; lo < e; lo += chunk)
    jobs.push_back(std::async(std::launch::async, work, lo, std::min(e, lo + chunk)));
  for (auto& j : jobs) j.get();
  return out;
}

// ------------------------------------------------------------------ runner

struct RunObserver {
  std::function<void(const EpochRecord&)> on_epoch;
  /// Threads used to augment each batch; does not change any result.
  std::size_t augment_workers = 1;
};

struct RunResult {
  MetricsLog log;
  nn::Network<float> net;
  nn::OptimizerState<float> optimizer;
  std::vector<DatasetFingerprint> datasets;
};

/// Trains for cfg.total_epochs. Each epoch serves every training sample once
/// in a seeded order, pairing according to the schedule, takes one Adam step
/// per batch and evaluates on the validation split. Every metric except wall
/// time is a function of the config and its three seeds.
inline RunResult run_experiment(const ExperimentConfig& cfg, const ExperimentData& data,
                                const RunObserver& observer = {}) {
  cfg.validate();
  if (data.train.empty()) throw ConfigError("training set is empty");
  const std::size_t channels = data.train.images.front().channels();
  const PairingConfig pc = make_pairing_config(cfg, data);
  RunResult res{{}, nn::Network<float>(resolve_network(cfg, data.train.n_classes, channels)),
                nn::OptimizerState<float>(cfg.optimizer), data.fingerprints()};
  auto& net = res.net;
  net.init(cfg.seeds.init);
  res.optimizer.attach(net.params());

  const std::size_t n = data.train.size();
  const std::size_t k = data.train.n_classes;
  std::int64_t images_served = 0;
  nn::Tensor<float> x;
  std::vector<float> targets;

  for (std::int64_t epoch = 0; epoch < cfg.total_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto order = epoch_order(cfg.seeds.data, n, epoch);
    const std::int64_t epoch_start = images_served;
    images_served += static_cast<std::int64_t>(n);
    const Phase epoch_phase = phase_for(cfg.schedule, epoch, epoch_start);
    double loss_sum = 0.0;
    std::size_t wrong = 0;
    const auto ranges = batch_ranges(n, cfg.batch_size);
    for (std::size_t bi = 0; bi < ranges.size(); ++bi) {
      const auto [b, e] = ranges[bi];
      try {
        const auto served = serve_range(cfg, pc, data.train, epoch, order, b, e,
                                        epoch_start, observer.augment_workers);
        std::vector<const ImageF*> ptrs;
        for (const auto& s : served) ptrs.push_back(&s.image);
        pack_images<float>(ptrs, x);
        targets.assign(served.size() * k, 0.0f);
        for (std::size_t i = 0; i < served.size(); ++i)
          for (std::size_t c = 0; c < k; ++c)
            targets[i * k + c] = static_cast<float>(served[i].target.probs[c]);

        auto drop_rng = derive_stream(cfg.seeds.init, {0x64726f70ULL,
                                                       static_cast<std::uint64_t>(epoch), bi});
        net.zero_grad();
        const auto& logits = net.forward(x, {nn::Mode::Train, &drop_rng, false, true});
        const auto pred = nn::predict_classes(logits);
        auto loss = nn::loss_xent_soft(logits, std::span<const float>(targets));
        for (std::size_t i = 0; i < served.size(); ++i)
          if (pred[i] != served[i].anchor_label) ++wrong;
        loss_sum += loss.loss * static_cast<double>(served.size());
        net.backward(loss.dlogits);
        nn::adam_step<float>(net.params(), res.optimizer);
      } catch (const std::exception& ex) {
        throw std::runtime_error("epoch " + std::to_string(epoch) + " batch " +
                                 std::to_string(bi) + ": " + ex.what());
      }
    }
    const auto val = evaluate(net, data.validation);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.phase = epoch_phase;
    rec.train_err = static_cast<double>(wrong) / static_cast<double>(n);
    rec.train_loss = loss_sum / static_cast<double>(n);
    rec.val_err = val.error;
    rec.val_loss = val.loss;
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    res.log.push_back(rec);
    if (observer.on_epoch) observer.on_epoch(rec);
  }
  return res;
}

}  // namespace samplepair
