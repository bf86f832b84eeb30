#include <doctest.h>

#include <algorithm>
#include <set>

#include "repsu/errors.hpp"
#include "repsu/harness.hpp"

using namespace rpsu;

namespace {

// Small enough to keep the whole file under a few seconds.
struct TinySetup {
  Dataset train = synth_digits(12, 4, 12, 100);
  Dataset test = synth_digits(4, 4, 12, 101);
  TrainConfig cfg;

  TinySetup() {
    cfg.batch_size = 16;
    cfg.lr_weights = 0.01;
    cfg.lr_activation = 0.001;
  }
};

}  // namespace

TEST_CASE("trial determinism") {
  TinySetup s;
  const TrialReport a =
      run_trial(ArchKind::kCnn1, Family::kReSKU, 4, 3, 1, 555, s.train, s.test, s.cfg);
  const TrialReport b =
      run_trial(ArchKind::kCnn1, Family::kReSKU, 4, 3, 1, 555, s.train, s.test, s.cfg);
  CHECK(a.test_accuracy == b.test_accuracy);
  CHECK(a.final_train_loss == b.final_train_loss);
  CHECK_FALSE(a.failed);
}

TEST_CASE("trial config validation") {
  TinySetup s;
  CHECK_THROWS_AS(
      run_trial(ArchKind::kCnn1, Family::kReLU, 4, 3, 0, 1, s.train, s.test, s.cfg),
      ConfigError);
  TrainConfig bad = s.cfg;
  bad.batch_size = 1;
  CHECK_THROWS_AS(
      run_trial(ArchKind::kCnn1, Family::kReLU, 4, 3, 1, 1, s.train, s.test, bad),
      ConfigError);
}

TEST_CASE("activation scalar initialization law") {
  Rng rng(1000);
  Network net = build_network(cnn1_spec(16, 3, Family::kReSKU, 4, {12, 12, 1}), rng);
  init_activation_scalars(net, rng);
  bool xi_varies = false;
  double first_xi = 0.0;
  for (Layer& layer : net.layers)
    if (auto* act = std::get_if<ActivationLayer>(&layer))
      for (std::size_t c = 0; c < act->spec_per_channel.size(); ++c) {
        const ActivationParams& p = act->spec_per_channel[c].params;
        CHECK(p.lambda == 0.0);
        CHECK(p.xi >= 0.25);
        CHECK(p.xi <= 1.75);
        CHECK(p.mu >= 0.0);
        CHECK(p.mu <= 2.0);
        CHECK(p.beta == 1.0);
        if (c == 0) first_xi = p.xi;
        else xi_varies = xi_varies || p.xi != first_xi;
      }
  CHECK(xi_varies);  // one independent draw per channel

  Rng rng2(1001);
  Network repsu_net = build_network(cnn1_spec(8, 3, Family::kRePSU, 4, {12, 12, 1}), rng2);
  init_activation_scalars(repsu_net, rng2);
  for (Layer& layer : repsu_net.layers)
    if (auto* act = std::get_if<ActivationLayer>(&layer))
      for (const ActivationSpec& spec : act->spec_per_channel) {
        CHECK(spec.params.alpha >= 0.25);
        CHECK(spec.params.alpha <= 0.75);
        CHECK(spec.params.sigma >= 0.25);
        CHECK(spec.params.sigma <= 1.75);
      }
}

TEST_CASE("trial seeds") {
  const auto s1 = trial_seed(9, Family::kReLU, 30, 3, 1, 0);
  CHECK(s1 == trial_seed(9, Family::kReLU, 30, 3, 1, 0));
  std::set<std::uint64_t> seen;
  for (int t = 0; t < 10; ++t) seen.insert(trial_seed(9, Family::kReLU, 30, 3, 1, t));
  seen.insert(trial_seed(9, Family::kReSKU, 30, 3, 1, 0));
  seen.insert(trial_seed(9, Family::kReLU, 31, 3, 1, 0));
  seen.insert(trial_seed(9, Family::kReLU, 30, 4, 1, 0));
  seen.insert(trial_seed(9, Family::kReLU, 30, 3, 2, 0));
  seen.insert(trial_seed(10, Family::kReLU, 30, 3, 1, 0));
  CHECK(seen.size() == 15);
}

TEST_CASE("aggregation arithmetic") {
  CellReport cell;
  cell.trials.resize(2);
  cell.trials[0].test_accuracy = 0.70;
  cell.trials[1].test_accuracy = 0.80;
  aggregate_cell(cell);
  CHECK(cell.trials_ok == 2);
  CHECK(cell.mean_acc == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(cell.sd_acc == doctest::Approx(0.07071067811865475).epsilon(1e-12));

  // failed trials are excluded from the mean but stay in the list
  cell.trials.push_back({});
  cell.trials[2].failed = true;
  cell.trials[2].test_accuracy = 0.0;
  aggregate_cell(cell);
  CHECK(cell.trials_ok == 2);
  CHECK(cell.mean_acc == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(cell.trials.size() == 3);

  CellReport single;
  single.trials.resize(1);
  single.trials[0].test_accuracy = 0.63;
  aggregate_cell(single);
  CHECK(single.trials_ok == 1);
  CHECK(single.mean_acc == 0.63);
  CHECK(single.sd_acc == 0.0);
}

TEST_CASE("csv emission") {
  MonteCarloReport report;
  report.cells.resize(2);
  report.cells[0].family = Family::kReLU;
  report.cells[0].ncf = 30;
  report.cells[0].cfs = 3;
  report.cells[0].epochs = 1;
  report.cells[0].trials_ok = 2;
  report.cells[0].mean_acc = 0.75;
  report.cells[0].sd_acc = 0.0707106781186547;
  report.cells[1].family = Family::kReSKU;
  report.cells[1].ncf = 30;
  report.cells[1].cfs = 3;
  report.cells[1].epochs = 1;
  report.cells[1].trials_ok = 0;  // all trials failed

  const std::string csv = report_to_csv(report);
  CHECK(csv.rfind("family,ncf,cfs,epochs,trials,mean_acc,sd_acc\n", 0) == 0);
  CHECK(csv.find("relu,30,3,1,2,0.75,0.0707107\n") != std::string::npos);
  CHECK(csv.find("resku,30,3,1,0,,\n") != std::string::npos);
}

TEST_CASE("tiny sweep: determinism across parallelism and json round-trip") {
  TinySetup s;
  SweepGrid grid;
  grid.families = {Family::kReLU, Family::kReSKU};
  grid.ncf_list = {4};
  grid.cfs_list = {3};
  grid.epochs_list = {1};

  const MonteCarloReport serial =
      run_sweep(ArchKind::kCnn1, grid, 2, 1, 777, s.train, s.test, s.cfg);
  const MonteCarloReport parallel =
      run_sweep(ArchKind::kCnn1, grid, 2, 4, 777, s.train, s.test, s.cfg);
  CHECK(report_to_csv(serial) == report_to_csv(parallel));
  REQUIRE(serial.cells.size() == 2);

  // mean lies within the trial range
  for (const CellReport& cell : serial.cells) {
    double lo = 1.0, hi = 0.0;
    for (const TrialReport& t : cell.trials) {
      lo = std::min(lo, t.test_accuracy);
      hi = std::max(hi, t.test_accuracy);
    }
    CHECK(cell.mean_acc >= lo);
    CHECK(cell.mean_acc <= hi);
  }

  // single-trial sweep: the mean is the trial
  const MonteCarloReport one = run_sweep(ArchKind::kCnn1, {{Family::kReLU}, {4}, {3}, {1}}, 1, 1,
                                         777, s.train, s.test, s.cfg);
  REQUIRE(one.cells.size() == 1);
  REQUIRE(one.cells[0].trials.size() == 1);
  CHECK(one.cells[0].mean_acc == one.cells[0].trials[0].test_accuracy);
  CHECK(one.cells[0].sd_acc == 0.0);

  // json round-trip preserves every field
  const std::string text = report_to_json(serial);
  const MonteCarloReport back = report_from_json(text);
  CHECK(back.master_seed == serial.master_seed);
  CHECK(back.trials_per_cell == serial.trials_per_cell);
  CHECK(back.arch == serial.arch);
  CHECK(back.grid.families == serial.grid.families);
  REQUIRE(back.cells.size() == serial.cells.size());
  for (std::size_t c = 0; c < back.cells.size(); ++c) {
    CHECK(back.cells[c].mean_acc == serial.cells[c].mean_acc);
    CHECK(back.cells[c].sd_acc == serial.cells[c].sd_acc);
    CHECK(back.cells[c].trials_ok == serial.cells[c].trials_ok);
    REQUIRE(back.cells[c].trials.size() == serial.cells[c].trials.size());
    for (std::size_t t = 0; t < back.cells[c].trials.size(); ++t) {
      const TrialReport& x = back.cells[c].trials[t];
      const TrialReport& y = serial.cells[c].trials[t];
      CHECK(x.trial_index == y.trial_index);
      CHECK(x.seed == y.seed);
      CHECK(x.activation_family == y.activation_family);
      CHECK(x.test_accuracy == y.test_accuracy);
      CHECK(x.final_train_loss == y.final_train_loss);
      CHECK(x.wall_time_s == y.wall_time_s);
      CHECK(x.failed == y.failed);
    }
  }
}

TEST_CASE("full grid shape: 5 NCF x 6 CFS gives 30 cells per family per epoch count") {
  const Dataset train = synth_digits(8, 3, 12, 500);
  const Dataset test = synth_digits(3, 3, 12, 501);
  TrainConfig cfg;
  cfg.batch_size = 8;
  SweepGrid grid;
  grid.families = {Family::kReLU};
  grid.ncf_list = {10, 20, 30, 40, 50};
  grid.cfs_list = {2, 3, 4, 5, 6, 7};
  grid.epochs_list = {1};
  const MonteCarloReport report =
      run_sweep(ArchKind::kCnn1, grid, 1, 2, 321, train, test, cfg);
  CHECK(report.cells.size() == 30);
  std::set<std::pair<int, int>> seen;
  for (const CellReport& cell : report.cells) seen.insert({cell.ncf, cell.cfs});
  CHECK(seen.size() == 30);
}

TEST_CASE("diverging trial is reported failed and excluded from the mean") {
  TinySetup s;
  TrainConfig hot = s.cfg;
  hot.lr_weights = 1e18;  // guaranteed blow-up
  hot.momentum = 0.0;
  const TrialReport r =
      run_trial(ArchKind::kCnn1, Family::kReLU, 4, 3, 1, 42, s.train, s.test, hot);
  CHECK(r.failed);
  CHECK_FALSE(r.failure_reason.empty());

  CellReport cell;
  cell.trials.push_back(r);
  TrialReport ok_trial;
  ok_trial.test_accuracy = 0.5;
  cell.trials.push_back(ok_trial);
  aggregate_cell(cell);
  CHECK(cell.trials_ok == 1);
  CHECK(cell.mean_acc == 0.5);
  CHECK(cell.trials.size() == 2);
}

TEST_CASE("learned model beats chance") {
  const Dataset train = synth_digits(80, 4, 12, 300);
  const Dataset test = synth_digits(25, 4, 12, 301);
  TrainConfig cfg;
  cfg.batch_size = 32;
  const TrialReport r =
      run_trial(ArchKind::kCnn1, Family::kReLU, 8, 3, 1, 424242, train, test, cfg);
  REQUIRE_FALSE(r.failed);
  CHECK(r.test_accuracy > 0.25);  // strictly above 1/L
}
