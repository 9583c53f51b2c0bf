#pragma once

// Training-phase state machine: warmup without pairing, an intermittent
// on/off cadence, then a fine-tuning tail with pairing permanently off.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace samplepair {

struct ScheduleError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

enum class ScheduleUnit { Epochs, Images };

enum class Phase { Warmup, IntermittentOn, IntermittentOff, Finetune };

constexpr bool pairing_enabled(Phase p) noexcept {
  return p == Phase::IntermittentOn;
}

constexpr std::string_view phase_name(Phase p) noexcept {
  switch (p) {
    case Phase::Warmup: return "warmup";
    case Phase::IntermittentOn: return "on";
    case Phase::IntermittentOff: return "off";
    case Phase::Finetune: return "finetune";
  }
  return "?";
}

inline Phase parse_phase(std::string_view s) {
  for (Phase p : {Phase::Warmup, Phase::IntermittentOn, Phase::IntermittentOff,
                  Phase::Finetune})
    if (phase_name(p) == s) return p;
  throw ScheduleError("unknown phase '" + std::string(s) + "'");
}

constexpr std::string_view unit_name(ScheduleUnit u) noexcept {
  return u == ScheduleUnit::Epochs ? "epochs" : "images";
}

inline ScheduleUnit parse_unit(std::string_view s) {
  if (s == "epochs") return ScheduleUnit::Epochs;
  if (s == "images") return ScheduleUnit::Images;
  throw ScheduleError("unknown schedule unit '" + std::string(s) + "'");
}

/// All counters are in `unit` (epochs, or cumulative training images served).
/// Validated on construction; a ScheduleConfig that exists is always usable.
class ScheduleConfig {
 public:
  ScheduleConfig(std::int64_t warmup, std::int64_t on_span,
                 std::int64_t off_span, std::int64_t finetune_start,
                 ScheduleUnit unit = ScheduleUnit::Epochs)
      : warmup_(warmup), on_(on_span), off_(off_span),
        finetune_(finetune_start), unit_(unit) {
    if (warmup < 0) throw ScheduleError("warmup must be >= 0");
    if (on_span < 0 || off_span < 0)
      throw ScheduleError("on_span and off_span must be >= 0");
    if (on_span + off_span < 1)
      throw ScheduleError("on_span + off_span must be >= 1");
    if (finetune_start < warmup)
      throw ScheduleError("finetune_start must be >= warmup");
  }

  /// Paper defaults for the small-image datasets: 100 warmup epochs, then
  /// 8 on / 2 off.
  static ScheduleConfig small_dataset(std::int64_t finetune_start) {
    return {100, 8, 2, finetune_start, ScheduleUnit::Epochs};
  }

  std::int64_t warmup() const noexcept { return warmup_; }
  std::int64_t on_span() const noexcept { return on_; }
  std::int64_t off_span() const noexcept { return off_; }
  std::int64_t finetune_start() const noexcept { return finetune_; }
  std::int64_t cycle() const noexcept { return on_ + off_; }
  ScheduleUnit unit() const noexcept { return unit_; }

  friend bool operator==(const ScheduleConfig&, const ScheduleConfig&) = default;

 private:
  std::int64_t warmup_, on_, off_, finetune_;
  ScheduleUnit unit_;
};

inline Phase phase_at(std::int64_t t, const ScheduleConfig& cfg) {
  if (t < 0) throw ScheduleError("schedule counter must be >= 0");
  if (t < cfg.warmup()) return Phase::Warmup;
  if (t >= cfg.finetune_start()) return Phase::Finetune;
  const std::int64_t p = (t - cfg.warmup()) % cfg.cycle();
  return p < cfg.on_span() ? Phase::IntermittentOn : Phase::IntermittentOff;
}

inline std::vector<Phase> phase_sequence(const ScheduleConfig& cfg,
                                         std::int64_t until) {
  std::vector<Phase> seq;
  seq.reserve(static_cast<std::size_t>(until));
  for (std::int64_t t = 0; t < until; ++t) seq.push_back(phase_at(t, cfg));
  return seq;
}

inline double enabled_fraction(const ScheduleConfig& cfg) {
  return static_cast<double>(cfg.on_span()) / static_cast<double>(cfg.cycle());
}

/// Upper bound on training accuracy while every sample is mixed half/half
/// with a uniformly chosen partner and only the first label is kept:
/// correct for sure when both labels agree (prob 1/n for balanced classes),
/// a coin flip otherwise.
inline double theoretical_max_training_accuracy(std::int64_t n_classes) {
  if (n_classes < 2)
    throw std::invalid_argument("theoretical ceiling needs n_classes >= 2");
  return 0.5 + 1.0 / (2.0 * static_cast<double>(n_classes));
}

}  // namespace samplepair
