#pragma once

// Central finite-difference check of the backward pass.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "samplepair/nn/loss.hpp"
#include "samplepair/nn/network.hpp"
#include "samplepair/random.hpp"

namespace samplepair::nn {

struct GradCheckOptions {
  std::size_t batch = 8;
  double step = 1e-3;
  /// true: the fourth-order central stencil
  /// (-L(p+2h) + 8L(p+h) - 8L(p-h) + L(p-2h)) / 12h.
  /// false: (L(p+h) - L(p-h)) / 2h.
  bool five_point = true;
  /// A perturbation that flips a ReLU sign or a max-pool winner straddles a
  /// kink; the step is divided by 10 up to this many times before the
  /// parameter is reported as non-smooth and skipped.
  int max_step_refinements = 2;
  /// Relative errors use max(|analytic|, |numeric|, denominator_floor), so
  /// gradients below the floor are compared in absolute terms. Conv biases
  /// feeding a batch norm have an exactly-zero gradient, and their difference
  /// quotient is pure rounding noise.
  double denominator_floor = 1e-5;
  std::uint64_t seed = 1;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
  std::size_t nonsmooth_skipped = 0;
  bool passed = false;
};

inline double relative_error(double a, double n, double floor) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
}

/// Which side of every kink the last forward pass landed on: ReLU input signs
/// and max-pool winners.
template <typename T>
std::vector<std::uint32_t> kink_pattern(const Network<T>& net) {
  std::vector<std::uint32_t> sig;
  const auto& layers = net.spec().layers;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& in = net.layer_input(i);
    if (layers[i].kind == LayerKind::ReLU) {
      for (auto v : in.data) sig.push_back(v > T(0));
    } else if (layers[i].kind == LayerKind::MaxPool2x2) {
      const Shape s = in.shape;
      for (std::size_t b = 0; b < in.n; ++b)
        for (std::size_t oy = 0; oy < (s.h + 1) / 2; ++oy)
          for (std::size_t ox = 0; ox < (s.w + 1) / 2; ++ox)
            for (std::size_t ch = 0; ch < s.c; ++ch) {
              std::uint32_t best = 0;
              T best_v = -std::numeric_limits<T>::infinity();
              for (std::uint32_t d = 0; d < 4; ++d) {
                const std::size_t y = 2 * oy + d / 2, x = 2 * ox + d % 2;
                if (y >= s.h || x >= s.w) continue;
                const T v = in.data[((b * s.h + y) * s.w + x) * s.c + ch];
                if (v > best_v) best_v = v, best = d;
              }
              sig.push_back(best);
            }
    }
  }
  return sig;
}

/// Builds a double-precision network from `spec`, feeds a random batch with
/// random soft targets in Train mode, and compares every parameter gradient
/// against a central difference quotient of the loss. Dropout masks are sampled once and held
/// fixed for all perturbed evaluations; running statistics are frozen.
inline GradCheckReport grad_check(const NetworkSpec& spec, double tolerance,
                                  const GradCheckOptions& opt = {}) {
  Network<double> net(spec);
  net.init(opt.seed);
  RandomSource rng{mix_seed(opt.seed ^ 0x67726164ULL)};

  // Non-trivial BN affine parameters so their gradients are exercised.
  for (auto& p : net.params())
    if (p.name.find(".batchnorm.") != std::string::npos)
      for (auto& v : p.value)
        v = (p.name.ends_with("gamma") ? 1.0 : 0.0) + 0.3 * (uniform01(rng) - 0.5);

  const std::size_t k = spec.n_classes();
  Tensor<double> x(opt.batch, spec.input);
  for (auto& v : x.data) v = uniform01(rng);
  std::vector<double> targets(opt.batch * k);
  for (std::size_t i = 0; i < opt.batch; ++i) {
    double s = 0;
    for (std::size_t j = 0; j < k; ++j) s += targets[i * k + j] = uniform01(rng) + 0.05;
    for (std::size_t j = 0; j < k; ++j) targets[i * k + j] /= s;
  }
  const std::span<const double> tspan(targets);

  const ForwardOptions first{Mode::Train, &rng, false, false};
  const ForwardOptions fixed{Mode::Train, &rng, true, false};

  net.zero_grad();
  auto res = loss_xent_soft(net.forward(x, first), tspan);
  net.backward(res.dlogits);
  const auto base_pattern = kink_pattern(net);

  // Loss at the current parameters, and whether the pass stayed on the same
  // side of every kink as the unperturbed pass.
  auto probe = [&] {
    const double l = loss_xent_soft(net.forward(x, fixed), tspan).loss;
    return std::pair{l, kink_pattern(net) == base_pattern};
  };

  GradCheckReport rep;
  for (auto& p : net.params()) {
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double orig = p.value[i];
      double h = opt.step;
      bool smooth = false;
      double numeric = 0.0;
      for (int attempt = 0; attempt <= opt.max_step_refinements; ++attempt, h /= 10) {
        bool ok = true;
        auto at = [&](double offset) {
          p.value[i] = orig + offset;
          const auto [l, same_side] = probe();
          ok = ok && same_side;
          return l;
        };
        if (opt.five_point)
          numeric = (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h);
        else
          numeric = (at(h) - at(-h)) / (2 * h);
        p.value[i] = orig;
        if (ok) {
          smooth = true;
          break;
        }
      }
      if (!smooth) {
        ++rep.nonsmooth_skipped;
        continue;
      }
      const double analytic = p.grad[i];
      const double err = relative_error(analytic, numeric, opt.denominator_floor);
      ++rep.checked;
      if (err > rep.max_rel_error || rep.worst_param.empty()) {
        rep.max_rel_error = err;
        rep.worst_param = p.name;
        rep.worst_index = i;
        rep.worst_analytic = analytic;
        rep.worst_numeric = numeric;
      }
    }
  }
  rep.passed = rep.checked > 0 && rep.max_rel_error < tolerance;
  return rep;
}

/// Six-conv topology shrunk for gradient checking: 4x4 inputs, at most 8
/// channels per stage, small dense head.
inline NetworkSpec shrunk_figure2_network(std::size_t n_classes = 3,
                                          Shape input = {4, 4, 3}) {
  return conv_family(input, {4, 6, 6, 8, 8, 8}, 8, n_classes);
}

}  // namespace samplepair::nn
