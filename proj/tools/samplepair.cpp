// samplepair: train, evaluate, gradient-check and inspect schedules.

#include <array>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "samplepair/config.hpp"
#include "samplepair/experiment.hpp"
#include "samplepair/metrics.hpp"
#include "samplepair/nn/checkpoint.hpp"
#include "samplepair/nn/gradcheck.hpp"
#include "samplepair/presets.hpp"
#include "samplepair/schedule.hpp"
#include "samplepair/version.hpp"

namespace fs = std::filesystem;
using namespace samplepair;

namespace {

struct TrainArgs {
  std::string config, out;
  std::optional<std::uint64_t> data_seed, init_seed, aug_seed;
  std::optional<std::int64_t> epochs;
  std::size_t workers = 1;
  bool quiet = false;
};

int cmd_train(const TrainArgs& a) {
  auto cfg = load_config(a.config);
  if (a.data_seed) cfg.seeds.data = *a.data_seed;
  if (a.init_seed) cfg.seeds.init = *a.init_seed;
  if (a.aug_seed) cfg.seeds.augmentation = *a.aug_seed;
  if (a.epochs) cfg.total_epochs = *a.epochs;
  cfg.validate();

  fs::create_directories(a.out);
  const auto data = prepare_data(cfg);
  write_text(fs::path(a.out) / "manifest.json",
             make_manifest(cfg, data.fingerprints()).dump(2) + "\n");
  if (!a.quiet)
    std::fprintf(stderr, "train: %zu samples, validation: %zu, %lld epochs\n", data.train.size(),
                 data.validation.size(), static_cast<long long>(cfg.total_epochs));

  RunObserver obs;
  obs.augment_workers = a.workers;
  if (!a.quiet)
    obs.on_epoch = [](const EpochRecord& r) { std::fprintf(stderr, "%s\n", format_record(r).c_str()); };
  auto res = run_experiment(cfg, data, obs);
  emit_metrics(res.log, fs::path(a.out) / "metrics.csv");
  nn::save_checkpoint(fs::path(a.out) / "checkpoint.bin", res.net, res.optimizer);
  const auto& last = res.log.back();
  std::printf("final val_err %.4f val_loss %.4f\n", last.val_err, last.val_loss);
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& dataset,
             const std::string& config) {
  auto [net, opt] = nn::load_checkpoint<float>(checkpoint);
  Dataset ds;
  if (!dataset.empty()) {
    const std::array<const char*, 1> files{cifar10::kTestFile};
    ds = cifar10::load_split(dataset, files, "cifar10-test");
  } else if (!config.empty()) {
    ds = prepare_data(load_config(config)).validation;
  } else {
    throw CLI::ValidationError("eval", "give --dataset or --config");
  }
  const auto r = evaluate(net, ds);
  std::printf("samples %zu error %.6f loss %.6f\n", r.count, r.error, r.loss);
  return 0;
}

int cmd_gradcheck(std::uint64_t seed, double tolerance, double step, bool linear) {
  nn::GradCheckOptions opt;
  opt.seed = seed;
  opt.step = step;
  const auto spec = linear ? nn::linear_network({4, 4, 3}, 3) : nn::shrunk_figure2_network();
  const auto r = nn::grad_check(spec, tolerance, opt);
  std::printf("checked %zu parameters, %zu skipped at kinks\n", r.checked, r.nonsmooth_skipped);
  std::printf("max relative error %.3e at %s[%zu] (analytic %.6e, numeric %.6e)\n",
              r.max_rel_error, r.worst_param.c_str(), r.worst_index, r.worst_analytic,
              r.worst_numeric);
  std::printf("%s (tolerance %.1e)\n", r.passed ? "PASS" : "FAIL", tolerance);
  return r.passed ? 0 : 1;
}

int cmd_schedule_dump(const std::string& config, std::int64_t until) {
  const auto cfg = load_config(config);
  const auto& s = cfg.schedule;
  if (until <= 0)
    until = s.unit() == ScheduleUnit::Epochs
                ? cfg.total_epochs
                : std::min(s.finetune_start(), std::numeric_limits<std::int64_t>::max() - 1) + 1;
  std::printf("%s,phase\n", std::string(unit_name(s.unit())).c_str());
  if (s.unit() == ScheduleUnit::Epochs) {
    for (std::int64_t t = 0; t < until; ++t)
      std::printf("%lld,%s\n", static_cast<long long>(t), std::string(phase_name(phase_at(t, s))).c_str());
    return 0;
  }
  // Image counts are large: print runs of equal phase as first-last ranges.
  auto next_change = [&](std::int64_t t) -> std::int64_t {
    if (t < s.warmup()) return s.warmup();
    if (t >= s.finetune_start()) return until;
    const std::int64_t p = (t - s.warmup()) % s.cycle();
    const std::int64_t step = p < s.on_span() ? s.on_span() - p : s.cycle() - p;
    return std::min(t + step, s.finetune_start());
  };
  for (std::int64_t t = 0; t < until;) {
    const Phase ph = phase_at(t, s);
    std::int64_t e = t;
    while (e < until && phase_at(e, s) == ph) e = next_change(e);
    e = std::min(e, until);
    std::printf("%lld-%lld,%s\n", static_cast<long long>(t), static_cast<long long>(e - 1),
                std::string(phase_name(ph)).c_str());
    t = e;
  }
  return 0;
}

int cmd_presets(const std::string& out, const std::string& cifar_dir, const std::string& name) {
  const auto base = presets::desk_default(cifar_dir);
  fs::create_directories(out);
  write_text(fs::path(out) / "desk_default.json", dump_config(base) + "\n");
  for (const auto& sweep : presets::sweep_names()) {
    if (!name.empty() && name != sweep) continue;
    fs::create_directories(fs::path(out) / sweep);
    for (const auto& [run, cfg] : presets::sweep(sweep, base))
      write_text(fs::path(out) / sweep / (run + ".json"), dump_config(cfg) + "\n");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SamplePairing data augmentation experiments"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "run an experiment; writes metrics.csv, manifest.json, checkpoint.bin");
  train->add_option("--config", ta.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  train->add_option("--out", ta.out, "output directory")->required();
  train->add_option("--data-seed", ta.data_seed, "override the data-order seed");
  train->add_option("--init-seed", ta.init_seed, "override the weight-init seed");
  train->add_option("--aug-seed", ta.aug_seed, "override the augmentation seed");
  train->add_option("--epochs", ta.epochs, "override total_epochs");
  train->add_option("--workers", ta.workers, "augmentation threads (results do not depend on it)")
      ->check(CLI::PositiveNumber);
  train->add_flag("--quiet", ta.quiet, "no per-epoch progress on stderr");

  std::string ckpt, dataset, eval_config;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on center crops");
  eval->add_option("--checkpoint", ckpt, "checkpoint.bin from train")->required()->check(CLI::ExistingFile);
  auto* ds_opt = eval->add_option("--dataset", dataset, "CIFAR-10 binary directory (uses test_batch.bin)")
                     ->check(CLI::ExistingDirectory);
  eval->add_option("--config", eval_config, "use the validation split of this config")
      ->check(CLI::ExistingFile)
      ->excludes(ds_opt);

  std::uint64_t gc_seed = 1;
  double gc_tol = 1e-4, gc_step = 1e-3;
  bool gc_linear = false;
  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of the shrunk six-conv network");
  gc->add_option("--seed", gc_seed, "random seed");
  gc->add_option("--tolerance", gc_tol, "maximum relative error");
  gc->add_option("--step", gc_step, "finite-difference step");
  gc->add_flag("--linear", gc_linear, "check the single dense layer network instead");

  std::string sd_config;
  std::int64_t sd_until = 0;
  auto* sd = app.add_subcommand("schedule-dump", "print the phase sequence of a config");
  sd->add_option("--config", sd_config, "experiment config")->required()->check(CLI::ExistingFile);
  sd->add_option("--until", sd_until, "counter bound (default: total epochs)");

  std::string pr_out, pr_cifar = "data/cifar-10-batches-bin", pr_name;
  auto* pr = app.add_subcommand("presets", "write the named experiment configs");
  pr->add_option("--out", pr_out, "output directory")->required();
  pr->add_option("--cifar", pr_cifar, "CIFAR-10 directory recorded in the configs");
  pr->add_option("--name", pr_name, "only this sweep")->check(CLI::IsMember(presets::sweep_names()));

  CLI11_PARSE(app, argc, argv);
  try {
    if (*train) return cmd_train(ta);
    if (*eval) return cmd_eval(ckpt, dataset, eval_config);
    if (*gc) return cmd_gradcheck(gc_seed, gc_tol, gc_step, gc_linear);
    if (*sd) return cmd_schedule_dump(sd_config, sd_until);
    if (*pr) return cmd_presets(pr_out, pr_cifar, pr_name);
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
