#include "repsu/harness.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "repsu/errors.hpp"

namespace rpsu {

namespace {

using nlohmann::json;

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::array<Index, 3> dataset_input_shape(const Dataset& ds) {
  return {ds.images.dim(2), ds.images.dim(3), ds.images.dim(1)};
}

}  // namespace

std::string arch_name(ArchKind arch) { return arch == ArchKind::kCnn1 ? "cnn1" : "cnn2"; }

std::optional<ArchKind> arch_from_name(const std::string& name) {
  if (name == "cnn1") return ArchKind::kCnn1;
  if (name == "cnn2") return ArchKind::kCnn2;
  return std::nullopt;
}

std::uint64_t trial_seed(std::uint64_t master_seed, Family family, int ncf, int cfs, int epochs,
                         int trial_index) {
  return mix_seed(master_seed,
                  {static_cast<std::uint64_t>(family), static_cast<std::uint64_t>(ncf),
                   static_cast<std::uint64_t>(cfs), static_cast<std::uint64_t>(epochs),
                   static_cast<std::uint64_t>(trial_index)});
}

void init_activation_scalars(Network& net, Rng& rng) {
  for (Layer& layer : net.layers) {
    auto* act = std::get_if<ActivationLayer>(&layer);
    if (!act || act->spec_per_channel.empty()) continue;
    const Family family = act->spec_per_channel.front().family;
    for (ActivationSpec& spec : act->spec_per_channel) {
      switch (family) {
        case Family::kReSKU:
          spec.params.lambda = 0.0;
          spec.params.xi = rng.uniform(0.25, 1.75);
          spec.params.mu = rng.uniform(0.0, 2.0);
          break;
        case Family::kRePSKU:
        case Family::kRePSHU:
          spec.params.lambda = 0.0;
          spec.params.sigma = rng.uniform(0.25, 1.75);
          spec.params.mu = rng.uniform(0.0, 2.0);
          break;
        case Family::kRePSU:
          spec.params.lambda = 0.0;
          spec.params.sigma = rng.uniform(0.25, 1.75);
          spec.params.mu = rng.uniform(0.0, 2.0);
          spec.params.alpha = rng.uniform(0.25, 0.75);
          break;
        case Family::kPMISH:
        case Family::kPSWISH:
          spec.params.xi = rng.uniform(0.25, 1.75);
          break;
        default:
          break;
      }
    }
  }
}

double evaluate_accuracy(Network& net, const Dataset& test, int eval_batch) {
  const Index n = test.size();
  Index correct = 0;
  for (Index start = 0; start < n; start += eval_batch) {
    const Index end = std::min(n, start + eval_batch);
    std::vector<Index> idx;
    idx.reserve(static_cast<std::size_t>(end - start));
    for (Index i = start; i < end; ++i) idx.push_back(i);
    Dataset chunk = subset(test, idx);
    const std::vector<int> pred = predict(net, chunk.images);
    for (std::size_t i = 0; i < pred.size(); ++i)
      if (pred[i] == chunk.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

TrialReport run_trial(ArchKind arch, Family family, int ncf, int cfs, int epochs,
                      std::uint64_t seed, const Dataset& train, const Dataset& test,
                      const TrainConfig& cfg, Network* trained) {
  cfg.validate();
  if (epochs < 1) throw ConfigError("run_trial: epochs must be >= 1, got " + std::to_string(epochs));

  TrialReport report;
  report.seed = seed;
  report.activation_family = family;
  report.ncf = ncf;
  report.cfs = cfs;
  report.epochs = epochs;

  const auto started = std::chrono::steady_clock::now();
  const auto input_shape = dataset_input_shape(train);
  const NetworkSpec spec = arch == ArchKind::kCnn1
                               ? cnn1_spec(ncf, cfs, family, train.num_classes, input_shape)
                               : cnn2_spec(family, train.num_classes, input_shape);

  Rng rng(seed);
  Network net = build_network(spec, rng);
  init_activation_scalars(net, rng);
  SgdOptimizer optimizer(cfg);

  try {
    for (int epoch = 0; epoch < epochs; ++epoch) {
      const std::uint64_t shuffle_seed =
          mix_seed(seed, {0x5u, static_cast<std::uint64_t>(epoch)});
      for (Batch& batch : batches(train, cfg.batch_size, shuffle_seed)) {
        ForwardResult fr = forward(net, batch.images, Mode::kTrain);
        const double loss = loss_from_logits(fr.logits, batch.labels);
        if (!std::isfinite(loss))
          throw DivergenceError("loss", "non-finite training loss");
        report.final_train_loss = loss;
        GradientSet grads = backward(net, fr, batch.labels);
        optimizer.step(net, grads);
      }
    }
    report.test_accuracy = evaluate_accuracy(net, test);
  } catch (const DivergenceError& e) {
    report.failed = true;
    report.failure_reason = e.what();
  }

  report.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  if (trained && !report.failed) *trained = std::move(net);
  return report;
}

void aggregate_cell(CellReport& cell) {
  double sum = 0.0;
  int ok = 0;
  for (const TrialReport& t : cell.trials)
    if (!t.failed) {
      sum += t.test_accuracy;
      ++ok;
    }
  cell.trials_ok = ok;
  if (ok == 0) {
    cell.mean_acc = 0.0;
    cell.sd_acc = 0.0;
    return;
  }
  cell.mean_acc = sum / ok;
  if (ok < 2) {
    cell.sd_acc = 0.0;
    return;
  }
  double sq = 0.0;
  for (const TrialReport& t : cell.trials)
    if (!t.failed) {
      const double d = t.test_accuracy - cell.mean_acc;
      sq += d * d;
    }
  cell.sd_acc = std::sqrt(sq / (ok - 1));
}

MonteCarloReport run_sweep(ArchKind arch, const SweepGrid& grid, int trials, int parallelism,
                           std::uint64_t master_seed, const Dataset& train, const Dataset& test,
                           const TrainConfig& cfg) {
  if (trials < 1) throw ConfigError("run_sweep: trials must be >= 1");
  if (parallelism < 1) throw ConfigError("run_sweep: parallelism must be >= 1");
  if (grid.families.empty() || grid.ncf_list.empty() || grid.cfs_list.empty() ||
      grid.epochs_list.empty())
    throw ConfigError("run_sweep: empty grid axis");

  MonteCarloReport report;
  report.arch = arch;
  report.grid = grid;
  report.trials_per_cell = trials;
  report.master_seed = master_seed;
  report.train_cfg = cfg;

  for (Family family : grid.families)
    for (int ncf : grid.ncf_list)
      for (int cfs : grid.cfs_list)
        for (int epochs : grid.epochs_list) {
          CellReport cell;
          cell.family = family;
          cell.ncf = ncf;
          cell.cfs = cfs;
          cell.epochs = epochs;
          cell.trials.resize(static_cast<std::size_t>(trials));
          report.cells.push_back(std::move(cell));
        }

  struct Item {
    std::size_t cell;
    int trial;
  };
  std::vector<Item> items;
  for (std::size_t c = 0; c < report.cells.size(); ++c)
    for (int t = 0; t < trials; ++t) items.push_back({c, t});

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= items.size()) return;
      const Item item = items[i];
      CellReport& cell = report.cells[item.cell];
      const std::uint64_t seed =
          trial_seed(master_seed, cell.family, cell.ncf, cell.cfs, cell.epochs, item.trial);
      TrialReport tr = run_trial(arch, cell.family, cell.ncf, cell.cfs, cell.epochs, seed, train,
                                 test, cfg);
      tr.trial_index = item.trial;
      cell.trials[static_cast<std::size_t>(item.trial)] = std::move(tr);
    }
  };

  const int n_workers = std::min<int>(parallelism, static_cast<int>(items.size()));
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_workers));
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  for (CellReport& cell : report.cells) aggregate_cell(cell);
  return report;
}

std::string report_to_csv(const MonteCarloReport& report) {
  std::ostringstream os;
  os << "family,ncf,cfs,epochs,trials,mean_acc,sd_acc\n";
  for (const CellReport& cell : report.cells) {
    os << family_name(cell.family) << "," << cell.ncf << "," << cell.cfs << "," << cell.epochs
       << "," << cell.trials_ok << ",";
    if (cell.trials_ok > 0) os << fmt6(cell.mean_acc) << "," << fmt6(cell.sd_acc);
    else os << ",";
    os << "\n";
  }
  return os.str();
}

namespace {

json trial_to_json(const TrialReport& t) {
  json j;
  j["trial_index"] = t.trial_index;
  j["seed"] = t.seed;
  j["activation_family"] = family_name(t.activation_family);
  j["ncf"] = t.ncf;
  j["cfs"] = t.cfs;
  j["epochs"] = t.epochs;
  j["test_accuracy"] = t.test_accuracy;
  j["final_train_loss"] = t.final_train_loss;
  j["wall_time_s"] = t.wall_time_s;
  j["failed"] = t.failed;
  j["failure_reason"] = t.failure_reason;
  return j;
}

TrialReport trial_from_json(const json& j) {
  TrialReport t;
  t.trial_index = j.at("trial_index").get<int>();
  t.seed = j.at("seed").get<std::uint64_t>();
  t.activation_family = *family_from_name(j.at("activation_family").get<std::string>());
  t.ncf = j.at("ncf").get<int>();
  t.cfs = j.at("cfs").get<int>();
  t.epochs = j.at("epochs").get<int>();
  t.test_accuracy = j.at("test_accuracy").get<double>();
  t.final_train_loss = j.at("final_train_loss").get<double>();
  t.wall_time_s = j.at("wall_time_s").get<double>();
  t.failed = j.at("failed").get<bool>();
  t.failure_reason = j.at("failure_reason").get<std::string>();
  return t;
}

}  // namespace

std::string report_to_json(const MonteCarloReport& report) {
  json j;
  j["arch"] = arch_name(report.arch);
  j["master_seed"] = report.master_seed;
  j["trials_per_cell"] = report.trials_per_cell;
  j["train_config"] = json::parse(train_config_to_json(report.train_cfg));
  json families = json::array();
  for (Family f : report.grid.families) families.push_back(family_name(f));
  j["grid"] = {{"families", families},
               {"ncf", report.grid.ncf_list},
               {"cfs", report.grid.cfs_list},
               {"epochs", report.grid.epochs_list}};
  j["cells"] = json::array();
  for (const CellReport& cell : report.cells) {
    json cj;
    cj["family"] = family_name(cell.family);
    cj["ncf"] = cell.ncf;
    cj["cfs"] = cell.cfs;
    cj["epochs"] = cell.epochs;
    cj["trials_ok"] = cell.trials_ok;
    cj["mean_acc"] = cell.mean_acc;
    cj["sd_acc"] = cell.sd_acc;
    cj["trials"] = json::array();
    for (const TrialReport& t : cell.trials) cj["trials"].push_back(trial_to_json(t));
    j["cells"].push_back(std::move(cj));
  }
  return j.dump(2);
}

MonteCarloReport report_from_json(const std::string& text) {
  json j = json::parse(text);
  MonteCarloReport report;
  report.arch = *arch_from_name(j.at("arch").get<std::string>());
  report.master_seed = j.at("master_seed").get<std::uint64_t>();
  report.trials_per_cell = j.at("trials_per_cell").get<int>();
  report.train_cfg = train_config_from_json(j.at("train_config").dump());
  for (const json& f : j.at("grid").at("families"))
    report.grid.families.push_back(*family_from_name(f.get<std::string>()));
  report.grid.ncf_list = j.at("grid").at("ncf").get<std::vector<int>>();
  report.grid.cfs_list = j.at("grid").at("cfs").get<std::vector<int>>();
  report.grid.epochs_list = j.at("grid").at("epochs").get<std::vector<int>>();
  for (const json& cj : j.at("cells")) {
    CellReport cell;
    cell.family = *family_from_name(cj.at("family").get<std::string>());
    cell.ncf = cj.at("ncf").get<int>();
    cell.cfs = cj.at("cfs").get<int>();
    cell.epochs = cj.at("epochs").get<int>();
    cell.trials_ok = cj.at("trials_ok").get<int>();
    cell.mean_acc = cj.at("mean_acc").get<double>();
    cell.sd_acc = cj.at("sd_acc").get<double>();
    for (const json& tj : cj.at("trials")) cell.trials.push_back(trial_from_json(tj));
    report.cells.push_back(std::move(cell));
  }
  return report;
}

}  // namespace rpsu
