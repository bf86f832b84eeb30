#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "repsu/data.hpp"
#include "repsu/network.hpp"
#include "repsu/optim.hpp"

namespace rpsu {

enum class ArchKind { kCnn1, kCnn2 };

std::string arch_name(ArchKind arch);
std::optional<ArchKind> arch_from_name(const std::string& name);

struct TrialReport {
  int trial_index = 0;
  std::uint64_t seed = 0;
  Family activation_family = Family::kReLU;
  int ncf = 0;
  int cfs = 0;
  int epochs = 0;
  double test_accuracy = 0.0;
  double final_train_loss = 0.0;
  double wall_time_s = 0.0;
  bool failed = false;
  std::string failure_reason;
};

struct SweepGrid {
  std::vector<Family> families;
  std::vector<int> ncf_list;
  std::vector<int> cfs_list;
  std::vector<int> epochs_list;
};

struct CellReport {
  Family family = Family::kReLU;
  int ncf = 0;
  int cfs = 0;
  int epochs = 0;
  int trials_ok = 0;  // failed trials are excluded from the mean but listed
  double mean_acc = 0.0;
  double sd_acc = 0.0;  // sample standard deviation; 0 for a single trial
  std::vector<TrialReport> trials;
};

struct MonteCarloReport {
  ArchKind arch = ArchKind::kCnn1;
  SweepGrid grid;
  int trials_per_cell = 0;
  std::uint64_t master_seed = 0;
  TrainConfig train_cfg;
  std::vector<CellReport> cells;
};

// Each cell/trial is reproducible in isolation from the master seed.
std::uint64_t trial_seed(std::uint64_t master_seed, Family family, int ncf, int cfs, int epochs,
                         int trial_index);

// Activation parameter initialization used per trial: scale parameters
// (sigma or xi) uniform in [0.25, 1.75], lambda = 0, mu uniform in [0, 2],
// alpha uniform in [0.25, 0.75]. beta stays at 1.
void init_activation_scalars(Network& net, Rng& rng);

// One independent train + test run. A diverging trial (non-finite loss or
// gradient) is reported as failed rather than thrown.
TrialReport run_trial(ArchKind arch, Family family, int ncf, int cfs, int epochs,
                      std::uint64_t seed, const Dataset& train, const Dataset& test,
                      const TrainConfig& cfg, Network* trained = nullptr);

// Full grid sweep, `trials` seeds per cell, executed by a bounded worker
// pool. Output is a pure function of (master seed, config, dataset) and is
// independent of the parallelism level.
MonteCarloReport run_sweep(ArchKind arch, const SweepGrid& grid, int trials, int parallelism,
                           std::uint64_t master_seed, const Dataset& train, const Dataset& test,
                           const TrainConfig& cfg);

double evaluate_accuracy(Network& net, const Dataset& test, int eval_batch = 256);

// Mean and sample standard deviation over the cell's non-failed trials.
void aggregate_cell(CellReport& cell);

// Fixed column order; aggregate floats with 6 significant digits; a cell
// with no successful trial emits trials=0 and empty mean/sd fields.
std::string report_to_csv(const MonteCarloReport& report);

// Full-precision mirror of every TrialReport field; parses back equal.
std::string report_to_json(const MonteCarloReport& report);
MonteCarloReport report_from_json(const std::string& text);

}  // namespace rpsu
