// Experiment runner: train single networks, sweep activation families over a
// Monte Carlo grid, and run the derivative / identity verification suites.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "repsu/data.hpp"
#include "repsu/errors.hpp"
#include "repsu/gradcheck.hpp"
#include "repsu/harness.hpp"
#include "repsu/identities.hpp"
#include "repsu/network.hpp"
#include "repsu/optim.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitCheckFailed = 3;

struct DataOptions {
  bool synthetic = false;
  std::string train_images, train_labels, test_images, test_labels;
  int per_class_train = 500;
  int per_class_test = 100;
  int classes = 10;
  int image_size = 16;
};

void add_data_flags(CLI::App* cmd, DataOptions& opt) {
  cmd->add_flag("--synthetic", opt.synthetic, "use the built-in synthetic digit generator");
  cmd->add_option("--train-images", opt.train_images, "IDX image file for training");
  cmd->add_option("--train-labels", opt.train_labels, "IDX label file for training");
  cmd->add_option("--test-images", opt.test_images, "IDX image file for testing");
  cmd->add_option("--test-labels", opt.test_labels, "IDX label file for testing");
  cmd->add_option("--per-class-train", opt.per_class_train, "synthetic: training samples per class");
  cmd->add_option("--per-class-test", opt.per_class_test, "synthetic: test samples per class");
  cmd->add_option("--classes", opt.classes, "synthetic: number of classes");
  cmd->add_option("--image-size", opt.image_size, "synthetic: image side length");
}

std::pair<rpsu::Dataset, rpsu::Dataset> load_data(const DataOptions& opt, std::uint64_t seed) {
  using rpsu::mix_seed;
  if (!opt.synthetic) {
    if (opt.train_images.empty() || opt.train_labels.empty() || opt.test_images.empty() ||
        opt.test_labels.empty())
      throw rpsu::ConfigError(
          "dataset: pass --synthetic or all four --train-images/--train-labels/"
          "--test-images/--test-labels paths");
    return {rpsu::load_idx(opt.train_images, opt.train_labels),
            rpsu::load_idx(opt.test_images, opt.test_labels)};
  }
  const int per_class = opt.per_class_train + opt.per_class_test;
  rpsu::Dataset all = rpsu::synth_digits(per_class, opt.classes, opt.image_size,
                                           mix_seed(seed, {0xDA7Au}));
  const double fraction = static_cast<double>(opt.per_class_train) / per_class;
  return rpsu::split(all, fraction, mix_seed(seed, {0x5B17u}));
}

void write_or_print(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw rpsu::ConfigError("cannot write " + path);
  out << text;
}

rpsu::Family parse_family(const std::string& name) {
  const auto family = rpsu::family_from_name(name);
  if (!family) throw rpsu::ConfigError("unknown activation \"" + name + "\"");
  return *family;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trainable rectified power sigmoid units: CNN experiments"};
  app.require_subcommand(1);

  rpsu::TrainConfig cfg;
  std::string activation = "resku";
  std::string arch = "cnn1";
  int ncf = 32, cfs = 3;
  int epochs = 1;
  int trials = 10;
  int parallelism = 1;
  std::uint64_t seed = 1;
  std::string out_path = "-";
  std::string format = "csv";
  DataOptions data_opt;

  auto add_train_flags = [&](CLI::App* cmd) {
    cmd->add_option("--arch", arch)->check(CLI::IsMember({"cnn1", "cnn2"}));
    cmd->add_option("--activation", activation)
        ->check(CLI::IsMember({"relu", "sigmoid", "resku", "repsku", "repshu", "repsu", "mish",
                               "pmish", "swish", "pswish"}));
    cmd->add_option("--ncf", ncf, "number of convolution filters");
    cmd->add_option("--cfs", cfs, "convolution filter size");
    cmd->add_option("--epochs", epochs);
    cmd->add_option("--seed", seed);
    cmd->add_option("--lr", cfg.lr_weights, "learning rate for weight tensors");
    cmd->add_option("--lr-act", cfg.lr_activation, "learning rate for activation scalars");
    cmd->add_option("--batch-size", cfg.batch_size);
    cmd->add_option("--momentum", cfg.momentum);
    cmd->add_option("--sigma-min", cfg.sigma_min, "floor for sigma after each update");
    cmd->add_option("--xi-min", cfg.xi_min, "floor for xi after each update");
    cmd->add_option("--alpha-lo", cfg.alpha_lo);
    cmd->add_option("--alpha-hi", cfg.alpha_hi);
    add_data_flags(cmd, data_opt);
  };

  CLI::App* train = app.add_subcommand("train", "train one network and report test accuracy");
  std::string save_model;
  std::string config_path;
  add_train_flags(train);
  train->add_option("--save-model", save_model,
                    "write <prefix>.spec.json and <prefix>.weights.bin after training");
  train->add_option("--config", config_path, "JSON file with TrainConfig fields");

  CLI::App* sweep = app.add_subcommand("sweep", "Monte Carlo grid over families/NCF/CFS/epochs");
  std::vector<std::string> sweep_families = {"relu", "resku"};
  std::vector<int> ncf_list, cfs_list, epochs_list;
  add_train_flags(sweep);
  sweep->add_option("--families", sweep_families, "activation families to compare");
  sweep->add_option("--ncf-list", ncf_list, "grid axis; defaults to {--ncf}");
  sweep->add_option("--cfs-list", cfs_list, "grid axis; defaults to {--cfs}");
  sweep->add_option("--epochs-list", epochs_list, "grid axis; defaults to {--epochs}");
  sweep->add_option("--trials", trials, "Monte Carlo trials per cell");
  sweep->add_option("--parallelism", parallelism, "worker threads");
  sweep->add_option("--out", out_path, "output path, - for stdout");
  sweep->add_option("--format", format)->check(CLI::IsMember({"csv", "json"}));

  CLI::App* gradcheck_cmd =
      app.add_subcommand("gradcheck", "finite-difference check of every analytic derivative");
  double act_tol = 1e-6, net_tol = 1e-4;
  gradcheck_cmd->add_option("--tol", act_tol, "activation derivative tolerance");
  gradcheck_cmd->add_option("--net-tol", net_tol, "end-to-end gradient tolerance");
  gradcheck_cmd->add_option("--seed", seed);

  CLI::App* identities_cmd =
      app.add_subcommand("identities", "translation/scaling/complement property suites");
  int id_points = 10000;
  identities_cmd->add_option("--points", id_points, "random parameterizations per identity");
  identities_cmd->add_option("--seed", seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*train) {
      if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw rpsu::ConfigError("cannot read " + config_path);
        std::stringstream buf;
        buf << in.rdbuf();
        // file values fill in everything a flag did not override
        rpsu::TrainConfig merged = rpsu::train_config_from_json(buf.str());
        if (train->count("--lr")) merged.lr_weights = cfg.lr_weights;
        if (train->count("--lr-act")) merged.lr_activation = cfg.lr_activation;
        if (train->count("--batch-size")) merged.batch_size = cfg.batch_size;
        if (train->count("--momentum")) merged.momentum = cfg.momentum;
        if (train->count("--sigma-min")) merged.sigma_min = cfg.sigma_min;
        if (train->count("--xi-min")) merged.xi_min = cfg.xi_min;
        if (train->count("--alpha-lo")) merged.alpha_lo = cfg.alpha_lo;
        if (train->count("--alpha-hi")) merged.alpha_hi = cfg.alpha_hi;
        if (train->count("--epochs") == 0) epochs = merged.epochs;
        if (train->count("--seed") == 0) seed = merged.seed;
        cfg = merged;
      }
      cfg.seed = seed;
      cfg.epochs = epochs;
      const auto [train_ds, test_ds] = load_data(data_opt, seed);
      rpsu::Network net;
      const rpsu::TrialReport report = rpsu::run_trial(
          *rpsu::arch_from_name(arch), parse_family(activation), ncf, cfs, epochs, seed,
          train_ds, test_ds, cfg, &net);
      std::printf("arch=%s activation=%s ncf=%d cfs=%d epochs=%d\n", arch.c_str(),
                  activation.c_str(), ncf, cfs, epochs);
      if (report.failed) {
        std::printf("trial FAILED: %s\n", report.failure_reason.c_str());
        return kExitCheckFailed;
      }
      std::printf("test_accuracy=%.6g final_train_loss=%.6g wall_time_s=%.6g\n",
                  report.test_accuracy, report.final_train_loss, report.wall_time_s);
      if (!save_model.empty())
        rpsu::save_network(net, save_model + ".spec.json", save_model + ".weights.bin");
      return kExitOk;
    }

    if (*sweep) {
      cfg.seed = seed;
      rpsu::SweepGrid grid;
      if (sweep->count("--families") == 0 && sweep->count("--activation") > 0)
        sweep_families = {activation};
      for (const std::string& name : sweep_families) grid.families.push_back(parse_family(name));
      grid.ncf_list = ncf_list.empty() ? std::vector<int>{ncf} : ncf_list;
      grid.cfs_list = cfs_list.empty() ? std::vector<int>{cfs} : cfs_list;
      grid.epochs_list = epochs_list.empty() ? std::vector<int>{epochs} : epochs_list;
      const auto [train_ds, test_ds] = load_data(data_opt, seed);
      const rpsu::MonteCarloReport report =
          rpsu::run_sweep(*rpsu::arch_from_name(arch), grid, trials, parallelism, seed,
                           train_ds, test_ds, cfg);
      write_or_print(format == "csv" ? rpsu::report_to_csv(report)
                                     : rpsu::report_to_json(report),
                     out_path);
      return kExitOk;
    }

    if (*gradcheck_cmd) {
      bool all_passed = true;
      for (rpsu::Family family : rpsu::all_families()) {
        const rpsu::GradCheckReport r = rpsu::check_family(family, act_tol);
        all_passed &= r.passed;
        std::printf("%-8s %-7s max_rel_error=%.3e tol=%.0e worst=%s\n",
                    r.name.c_str(), r.passed ? "PASS" : "FAIL", r.max_rel_error, r.tolerance,
                    r.worst_point.empty() ? "-" : r.worst_point.c_str());
      }
      {
        rpsu::Rng rng(seed);
        rpsu::Dataset batch_ds = rpsu::synth_digits(1, 10, 12, seed);
        std::vector<rpsu::Index> idx = {0, 1, 2, 3};
        rpsu::Dataset four = rpsu::subset(batch_ds, idx);
        rpsu::Network net = rpsu::build_network(
            rpsu::cnn1_spec(8, 3, rpsu::Family::kReSKU, 10, {12, 12, 1}), rng);
        rpsu::init_activation_scalars(net, rng);
        const rpsu::GradCheckReport r =
            rpsu::check_network(net, four.images, four.labels, 20, net_tol, seed);
        all_passed &= r.passed;
        std::printf("%-8s %-7s max_rel_error=%.3e tol=%.0e worst=%s\n", "network",
                    r.passed ? "PASS" : "FAIL", r.max_rel_error, r.tolerance,
                    r.worst_point.empty() ? "-" : r.worst_point.c_str());
      }
      return all_passed ? kExitOk : kExitCheckFailed;
    }

    if (*identities_cmd) {
      bool all_passed = true;
      for (const rpsu::IdentityReport& r : rpsu::run_identity_suites(id_points, seed)) {
        all_passed &= r.passed;
        std::printf("%-30s %-7s max_error=%.3e tol=%.0e points=%d\n", r.name.c_str(),
                    r.passed ? "PASS" : "FAIL", r.max_error, r.tolerance, r.points);
      }
      return all_passed ? kExitOk : kExitCheckFailed;
    }
  } catch (const rpsu::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return kExitOk;
}
