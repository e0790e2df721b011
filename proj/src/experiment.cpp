#include "bartlab/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "bartlab/chains.hpp"
#include "bartlab/common.hpp"
#include "bartlab/csvio.hpp"
#include "bartlab/diagnostics.hpp"
#include "bartlab/optset.hpp"
#include "bartlab/svg.hpp"

namespace bartlab {

namespace {

namespace fs = std::filesystem;

const std::vector<double> kTraceProbs = {0.05, 0.25, 0.50, 0.75, 0.95};

std::string out_dir_of(const ExperimentConfig& config,
                       const CliOptions& options) {
  return options.out_override.empty() ? config.out_dir : options.out_override;
}

int resolve_workers(const CliOptions& options) {
  if (options.workers > 0) return options.workers;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

std::string trace_path(const std::string& out, const std::string& hash,
                       int replicate, int chain) {
  return out + "/trace_" + hash + "_rep" + std::to_string(replicate) +
         "_chain" + std::to_string(chain) + ".csv";
}

// Fixed-size FIFO worker pool. The queue drains before the destructor lets
// the workers exit, so every submitted task runs.
class TaskPool {
 public:
  explicit TaskPool(int workers) {
    for (int i = 0; i < workers; ++i)
      threads_.emplace_back([this] { loop(); });
  }

  ~TaskPool() {
    {
      std::lock_guard<std::mutex> lock(mu_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto& t : threads_) t.join();
  }

  void submit(std::function<void()> task) {
    {
      std::lock_guard<std::mutex> lock(mu_);
      queue_.push_back(std::move(task));
    }
    cv_.notify_one();
  }

 private:
  void loop() {
    for (;;) {
      std::function<void()> task;
      {
        std::unique_lock<std::mutex> lock(mu_);
        cv_.wait(lock, [&] { return stop_ || !queue_.empty(); });
        if (queue_.empty()) return;
        task = std::move(queue_.front());
        queue_.pop_front();
      }
      task();
    }
  }

  std::vector<std::thread> threads_;
  std::deque<std::function<void()>> queue_;
  std::mutex mu_;
  std::condition_variable cv_;
  bool stop_ = false;
};

struct SharedData {
  Dataset test_raw;    // synthetic test draw, or the csv hold-out
  Dataset train_pool;  // csv only: rows the training sets subsample
};

SharedData prepare_shared(const ExperimentConfig& config) {
  SharedData shared;
  if (config.dataset.kind == DatasetSpec::Kind::dgp) {
    shared.test_raw = sample_dgp(config.dataset.dgp, config.dataset.n_test,
                                 test_seed(config));
    return shared;
  }
  const Dataset full =
      load_csv(config.dataset.csv_path, config.dataset.target_column);
  auto [pool, test] =
      split_train_test(full, config.dataset.test_fraction, test_seed(config));
  shared.train_pool = std::move(pool);
  shared.test_raw = std::move(test);
  return shared;
}

struct GroupData {
  Dataset train;  // binned, response scaled to [-0.5, 0.5]
  Dataset test;   // coded with the training cuts, response left raw
  Ensemble init;
  ScaleParams scale;
  SamplerConfig sampler;  // seed filled per chain
};

GroupData prepare_group(const ExperimentConfig& config,
                        const SharedData& shared, const RunPoint& point,
                        int replicate) {
  GroupData group;
  Dataset train_raw =
      config.dataset.kind == DatasetSpec::Kind::dgp
          ? sample_dgp(config.dataset.dgp, point.n_train,
                       data_seed(config, point.n_train_index, replicate))
          : subsample(shared.train_pool, point.n_train,
                      data_seed(config, point.n_train_index, replicate));
  group.train = train_raw.binned ? std::move(train_raw)
                                 : bin_features(train_raw, point.binning);
  group.test = shared.test_raw.binned
                   ? shared.test_raw
                   : encode_with(shared.test_raw, group.train.space);

  auto [y_scaled, params] = scale_response(group.train.y);
  group.train.y = std::move(y_scaled);
  group.train.scale = params;
  group.scale = params;

  group.sampler = sampler_config_for(config, point);
  if (point.init == "greedy") {
    Rng rng(init_seed(config, point.n_train_index, replicate));
    group.init = init_greedy_boost(group.train, point.m, 6, rng);
  } else {
    group.init = trivial_init(point.m, group.train);
  }
  return group;
}

// Predictions and noise variances come out of the sampler in scaled response
// units; map them back so every metric reads in the data's own units.
void unscale_trace(ChainTrace& trace, const ScaleParams& params) {
  const double range = params.y_max - params.y_min;
  for (long t = 0; t < trace.predictions.rows(); ++t)
    trace.predictions.row(t) =
        unscale(trace.predictions.row(t).transpose(), params).transpose();
  for (double& s : trace.sigma2) s *= range * range;
}

void write_trace_csv(const std::string& path, const std::string& hash,
                     const ChainTrace& trace, const Dataset& test) {
  const std::vector<double> rmse = rmse_trace(trace, test);
  const std::vector<ScalarChains> quantiles =
      quantile_traces({trace}, kTraceProbs);
  const std::vector<std::string> header = {
      "config_hash", "iteration", "rmse", "q05", "q25",
      "q50",         "q75",       "q95",  "sigma2"};
  std::vector<std::vector<std::string>> rows;
  rows.reserve(rmse.size());
  for (size_t t = 0; t < rmse.size(); ++t) {
    std::vector<std::string> row;
    row.reserve(header.size());
    row.push_back(hash);
    row.push_back(std::to_string(trace.burn_in + static_cast<long>(t)));
    row.push_back(csv_format(rmse[t]));
    for (size_t q = 0; q < kTraceProbs.size(); ++q)
      row.push_back(csv_format(quantiles[q].chains[0][t]));
    row.push_back(csv_format(trace.sigma2[t]));
    rows.push_back(std::move(row));
  }
  write_csv(path, header, rows);
}

struct Group {
  size_t point_index = 0;
  int replicate = 0;
  GroupData data;
  std::vector<ChainTrace> traces;
  std::vector<std::exception_ptr> errors;
  int remaining = 0;
  std::mutex mu;
  std::condition_variable cv;
};

void wait_done(Group& group) {
  std::unique_lock<std::mutex> lock(group.mu);
  group.cv.wait(lock, [&] { return group.remaining == 0; });
}

double required_double(const std::string& context, const std::string& text) {
  try {
    size_t pos = 0;
    const double v = std::stod(text, &pos);
    if (pos != text.size())
      throw ConfigError(context + ": malformed number '" + text + "'");
    return v;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    throw ConfigError(context + ": malformed number '" + text + "'");
  }
}

size_t header_column(const std::string& context,
                     const std::vector<std::string>& header,
                     const std::string& name) {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end())
    throw ConfigError(context + ": missing column '" + name + "'");
  return static_cast<size_t>(it - header.begin());
}

Eigen::VectorXd softmax_weights(const Eigen::VectorXd& log_w) {
  const double top = log_w.maxCoeff();
  Eigen::VectorXd w = (log_w.array() - top).exp();
  return w / w.sum();
}

}  // namespace

MeanSe mean_se(const std::vector<double>& values) {
  if (values.empty()) throw ConfigError("mean_se: empty replicate set");
  MeanSe out;
  for (const double v : values) out.mean += v;
  out.mean /= static_cast<double>(values.size());
  if (values.size() == 1) return out;
  double ss = 0.0;
  for (const double v : values) ss += (v - out.mean) * (v - out.mean);
  const double sd = std::sqrt(ss / (static_cast<double>(values.size()) - 1.0));
  out.se = sd / std::sqrt(static_cast<double>(values.size()));
  return out;
}

void apply_env_seed(ExperimentConfig& config) {
  const char* raw = std::getenv("BARTLAB_SEED");
  if (raw == nullptr) return;
  const std::string text(raw);
  if (text.empty() ||
      text.find_first_not_of("0123456789") != std::string::npos)
    throw ConfigError("BARTLAB_SEED: expected a decimal seed, got '" + text +
                      "'");
  try {
    config.seed = std::stoull(text);
  } catch (const std::exception&) {
    throw ConfigError("BARTLAB_SEED: seed '" + text +
                      "' does not fit in 64 bits");
  }
}

int cmd_fit(const ExperimentConfig& config, const CliOptions& options) {
  validate_experiment_config(config);
  for (const auto sampler : config.samplers)
    if (sampler == SamplerVariant::multistep)
      throw ConfigError(
          "sweep.sampler: multistep runs only under the exact command; the "
          "free-space sampler cannot realize Q^r proposals");

  const std::string out = out_dir_of(config, options);
  fs::create_directories(out);
  const std::vector<RunPoint> points = expand_points(config);
  const SharedData shared = prepare_shared(config);
  const int n_chains = config.n_chains;
  const int replicates = config.replicates;
  const size_t total =
      points.size() * static_cast<size_t>(replicates);
  const int workers = resolve_workers(options);
  const size_t in_flight =
      std::max<size_t>(1, static_cast<size_t>((workers + n_chains - 1) /
                                              n_chains)) +
      1;

  TaskPool pool(workers);
  std::deque<std::unique_ptr<Group>> active;
  std::vector<DiagnosticSummary> rows;
  rows.reserve(total);
  size_t admitted = 0;

  const auto admit = [&] {
    const size_t index = admitted++;
    auto group = std::make_unique<Group>();
    group->point_index = index / static_cast<size_t>(replicates);
    group->replicate = static_cast<int>(index % static_cast<size_t>(replicates));
    group->data = prepare_group(config, shared, points[group->point_index],
                                group->replicate);
    group->traces.resize(n_chains);
    group->errors.resize(n_chains);
    group->remaining = n_chains;
    Group* raw = group.get();
    active.push_back(std::move(group));
    const uint64_t base = chain_base_seed(
        config, points[raw->point_index].n_train_index, raw->replicate);
    const std::string hash = points[raw->point_index].hash;
    for (int c = 0; c < n_chains; ++c) {
      pool.submit([&, raw, base, hash, c] {
        try {
          SamplerConfig chain_config = raw->data.sampler;
          chain_config.seed = base + static_cast<uint64_t>(c);
          ChainTrace trace = run_chain(chain_config, raw->data.train,
                                       raw->data.init, &raw->data.test);
          unscale_trace(trace, raw->data.scale);
          write_trace_csv(trace_path(out, hash, raw->replicate, c), hash,
                          trace, raw->data.test);
          raw->traces[static_cast<size_t>(c)] = std::move(trace);
        } catch (...) {
          raw->errors[static_cast<size_t>(c)] = std::current_exception();
        }
        {
          std::lock_guard<std::mutex> lock(raw->mu);
          --raw->remaining;
        }
        raw->cv.notify_one();
      });
    }
  };

  try {
    size_t merged = 0;
    while (merged < total) {
      while (admitted < total && active.size() < in_flight) admit();
      Group& group = *active.front();
      wait_done(group);
      for (const auto& err : group.errors)
        if (err) std::rethrow_exception(err);
      const RunPoint& point = points[group.point_index];
      rows.push_back(summarize_chains(group.traces, group.data.test,
                                      CoverageMode::predictive,
                                      TargetKind::response,
                                      config.dataset.name, point.n_train,
                                      point.hash));
      active.pop_front();
      ++merged;
    }
  } catch (...) {
    // Let in-flight tasks finish before their groups are destroyed.
    for (const auto& group : active) wait_done(*group);
    throw;
  }

  write_summary_csv(out + "/summary.csv", rows);
  std::cout << "fit: wrote " << rows.size() << " summary rows and "
            << total * static_cast<size_t>(n_chains) << " trace files to "
            << out << "\n";
  return 0;
}

int cmd_sweep(const ExperimentConfig& config, const CliOptions& options) {
  validate_experiment_config(config);
  const size_t swept_axes =
      (config.n_train.size() > 1) + (config.temperatures.size() > 1) +
      (config.m_values.size() > 1) + (config.burn_ins.size() > 1) +
      (config.binnings.size() > 1) + (config.split_priors.size() > 1) +
      (config.move_sets.size() > 1) + (config.samplers.size() > 1) +
      (config.inits.size() > 1);
  if (swept_axes == 0)
    throw ConfigError("sweep: every axis holds a single value; nothing to "
                      "sweep");

  const std::string out = out_dir_of(config, options);
  const std::string summary_path = out + "/summary.csv";
  if (!fs::exists(summary_path))
    throw ConfigError("sweep: '" + summary_path +
                      "' not found; run fit with this config first");
  const auto table = read_csv(summary_path);
  if (table.size() < 1)
    throw ConfigError("sweep: '" + summary_path + "' is empty");
  const auto& header = table[0];
  const size_t col_hash = header_column("sweep", header, "config_hash");
  const std::vector<std::string> metrics = {"rhat_rmse", "coverage", "rmse"};
  std::vector<size_t> metric_cols;
  for (const auto& metric : metrics)
    metric_cols.push_back(header_column("sweep", header, metric));

  std::map<std::string, std::vector<std::vector<double>>> by_hash;
  for (size_t r = 1; r < table.size(); ++r) {
    std::vector<double> values;
    values.reserve(metrics.size());
    for (const size_t c : metric_cols)
      values.push_back(required_double("sweep", table[r][c]));
    by_hash[table[r][col_hash]].push_back(std::move(values));
  }

  const std::vector<RunPoint> points = expand_points(config);
  bool partial = false;
  size_t found_total = 0;
  std::vector<std::vector<std::string>> agg_rows;
  // label -> series per metric, filled in point order.
  std::vector<std::string> labels;
  std::map<std::string, std::vector<SvgSeries>> series_by_label;

  for (const auto& point : points) {
    const auto it = by_hash.find(point.hash);
    const size_t found = it == by_hash.end() ? 0 : it->second.size();
    found_total += found;
    if (found < static_cast<size_t>(config.replicates)) {
      std::cerr << "sweep: partial data for point " << point.hash << " ("
                << point.label << ", n_train=" << point.n_train << "): found "
                << found << " of " << config.replicates << " replicates\n";
      partial = true;
    }
    if (series_by_label.find(point.label) == series_by_label.end()) {
      labels.push_back(point.label);
      auto& series = series_by_label[point.label];
      series.resize(metrics.size());
      for (size_t mi = 0; mi < metrics.size(); ++mi)
        series[mi].label = point.label;
    }
    if (found == 0) continue;
    for (size_t mi = 0; mi < metrics.size(); ++mi) {
      std::vector<double> values;
      values.reserve(found);
      for (const auto& row : it->second) values.push_back(row[mi]);
      const MeanSe agg = mean_se(values);
      agg_rows.push_back({point.hash, point.label,
                          std::to_string(point.n_train), metrics[mi],
                          std::to_string(found),
                          std::to_string(config.replicates),
                          csv_format(agg.mean), csv_format(agg.se),
                          csv_format(agg.mean - 1.96 * agg.se),
                          csv_format(agg.mean + 1.96 * agg.se)});
      auto& series = series_by_label[point.label][mi];
      series.x.push_back(static_cast<double>(point.n_train));
      series.y.push_back(agg.mean);
      series.err.push_back(1.96 * agg.se);
    }
  }
  if (found_total == 0)
    throw ConfigError("sweep: '" + summary_path +
                      "' holds no rows for this config's points; run fit "
                      "first");

  write_csv(out + "/sweep_summary.csv",
            {"config_hash", "label", "n_train", "metric", "found", "expected",
             "mean", "se", "lo95", "hi95"},
            agg_rows);

  for (size_t mi = 0; mi < metrics.size(); ++mi) {
    SvgPlot plot;
    plot.title = config.dataset.name + ": " + metrics[mi];
    plot.x_label = "n_train";
    plot.y_label = metrics[mi];
    for (const auto& label : labels) {
      const auto& series = series_by_label[label][mi];
      if (!series.x.empty()) plot.series.push_back(series);
    }
    if (plot.series.empty()) continue;
    write_svg(out + "/sweep_" + metrics[mi] + ".svg", plot);
  }

  std::cout << "sweep: wrote " << agg_rows.size()
            << " aggregate rows and per-metric plots to " << out << "\n";
  if (partial) std::cerr << "sweep: output is partial\n";
  return partial ? 1 : 0;
}

int cmd_exact(const ExperimentConfig& config, const CliOptions& options) {
  validate_experiment_config(config);
  if (config.dataset.kind != DatasetSpec::Kind::dgp ||
      config.dataset.dgp.kind != DgpSpec::Kind::additive_discrete)
    throw ConfigError(
        "dataset.dgp: exact analysis needs the enumerable additive fixture");
  for (const auto sampler : config.samplers)
    if (sampler == SamplerVariant::default_sweep)
      throw ConfigError(
          "sweep.sampler: the default sweep has no enumerated-space kernel; "
          "use marginalized, tempered, or multistep");
  if (config.sigma_mode != Priors::SigmaMode::fixed)
    throw ConfigError("run.sigma: exact analysis requires fixed:<value>");
  for (const auto& ts : config.temperatures)
    if (ts.kind != TemperatureSchedule::Kind::constant)
      throw ConfigError(
          "sweep.temperature: exact analysis needs constant temperatures");
  for (const auto prior : config.split_priors)
    if (prior != Priors::SplitPrior::uniform)
      throw ConfigError(
          "sweep.prior: exact analysis supports the uniform split prior "
          "only");

  const std::string out = out_dir_of(config, options);
  fs::create_directories(out);
  const std::vector<RunPoint> points = expand_points(config);

  std::vector<std::vector<std::string>> summary_rows;
  std::vector<std::vector<std::string>> state_rows;
  for (size_t p = 0; p < points.size(); ++p) {
    const RunPoint& point = points[p];
    const Dataset data = sample_dgp(config.dataset.dgp, point.n_train,
                                    data_seed(config, point.n_train_index, 0));
    const EnumeratedSpace enumerated = enumerate_tse_space(
        data.space, point.m, config.exact_max_internal, 20000);

    const Eigen::MatrixXi grid = covariate_grid(data.space);
    Eigen::VectorXd f_star(grid.rows());
    for (long i = 0; i < grid.rows(); ++i)
      f_star(i) = additive_value(config.dataset.dgp, grid.row(i));
    const std::vector<long> opt =
        opt_set(f_star, config.exact_opt_slack, enumerated);
    const std::set<long> opt_lookup(opt.begin(), opt.end());

    SamplerConfig sampler = sampler_config_for(config, point);
    sampler.lazy = true;
    const FiniteChain chain = build_chain(enumerated, data, sampler);
    const Eigen::VectorXd pi = stationary(chain);
    const SpectralGap gap = spectral_gap(chain);
    const Eigen::VectorXd hitting = expected_hitting_times(chain, opt);
    const Eigen::VectorXd weights = softmax_weights(chain.log_w);
    const double max_diff = (pi - weights).cwiseAbs().maxCoeff();
    const bool match = max_diff <= 1e-10;
    const long trivial_index = enumerated.index_of(
        std::vector<TreeStructure>(static_cast<size_t>(point.m),
                                   trivial_tree()));

    summary_rows.push_back(
        {point.hash, point.label, std::to_string(point.n_train),
         render_temperature(point.temperature), std::to_string(point.m),
         std::to_string(enumerated.n_tse()), std::to_string(opt.size()),
         csv_format(gap.gamma), csv_format(gap.lambda_min),
         csv_format(gap.pi_min), csv_format(gap.t_mix_bound(0.01)),
         csv_format(max_diff), match ? "pass" : "fail",
         csv_format(hitting(trivial_index))});

    for (long s = 0; s < chain.P.rows(); ++s)
      state_rows.push_back(
          {point.hash, render_temperature(point.temperature),
           std::to_string(s), serialize_ensemble(enumerated.tse_ensemble(s)),
           csv_format(chain.log_w(s)), csv_format(pi(s)),
           opt_lookup.count(s) ? "1" : "0", csv_format(hitting(s))});
  }

  write_csv(out + "/exact_summary.csv",
            {"config_hash", "label", "n_train", "T", "m", "n_states", "n_opt",
             "gamma", "lambda_min", "pi_min", "t_mix_eps01",
             "stationary_max_diff", "stationary_match", "hit_trivial"},
            summary_rows);
  write_csv(out + "/exact_states.csv",
            {"config_hash", "T", "state", "ensemble", "log_w", "stationary",
             "in_opt", "hitting"},
            state_rows);
  std::cout << "exact: wrote " << summary_rows.size() << " chain summaries ("
            << state_rows.size() << " states) to " << out << "\n";
  return 0;
}

int cmd_diagnose(const ExperimentConfig& config, const CliOptions& options) {
  validate_experiment_config(config);
  const std::string out = out_dir_of(config, options);
  if (!fs::is_directory(out))
    throw ConfigError("diagnose: output directory '" + out +
                      "' does not exist");

  // (hash, replicate) -> chain index -> path.
  std::map<std::pair<std::string, int>, std::map<int, std::string>> groups;
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(out))
    if (entry.is_regular_file())
      names.push_back(entry.path().filename().string());
  std::sort(names.begin(), names.end());
  for (const auto& name : names) {
    if (name.rfind("trace_", 0) != 0 || name.size() < 10 ||
        name.substr(name.size() - 4) != ".csv")
      continue;
    const std::string stem = name.substr(6, name.size() - 10);
    const size_t rep_tag = stem.find("_rep");
    const size_t chain_tag = stem.find("_chain");
    if (rep_tag == std::string::npos || chain_tag == std::string::npos ||
        chain_tag < rep_tag)
      throw ConfigError("diagnose: unrecognized trace file name '" + name +
                        "'");
    const std::string hash = stem.substr(0, rep_tag);
    const int replicate = static_cast<int>(required_double(
        "diagnose", stem.substr(rep_tag + 4, chain_tag - rep_tag - 4)));
    const int chain = static_cast<int>(
        required_double("diagnose", stem.substr(chain_tag + 6)));
    groups[{hash, replicate}][chain] = out + "/" + name;
  }
  if (groups.empty())
    throw ConfigError("diagnose: no trace files found in '" + out + "'");

  const std::vector<std::string> metrics = {"rmse", "q05", "q25",
                                            "q50",  "q75", "q95"};
  std::vector<std::vector<std::string>> rows;
  for (const auto& [key, chains] : groups) {
    if (chains.size() < 2)
      throw ConfigError("diagnose: point " + key.first + " replicate " +
                        std::to_string(key.second) +
                        " has fewer than two chains");
    std::vector<ScalarChains> per_metric(metrics.size());
    size_t kept = 0;
    for (const auto& [chain_index, path] : chains) {
      (void)chain_index;
      const auto table = read_csv(path);
      if (table.size() < 2)
        throw ConfigError("diagnose: trace '" + path + "' has no data rows");
      std::vector<size_t> cols;
      for (const auto& metric : metrics)
        cols.push_back(header_column("diagnose", table[0], metric));
      kept = table.size() - 1;
      for (size_t mi = 0; mi < metrics.size(); ++mi) {
        std::vector<double> series;
        series.reserve(kept);
        for (size_t r = 1; r < table.size(); ++r)
          series.push_back(required_double("diagnose", table[r][cols[mi]]));
        per_metric[mi].chains.push_back(std::move(series));
      }
    }
    std::vector<std::string> row = {key.first, std::to_string(key.second),
                                    std::to_string(chains.size()),
                                    std::to_string(kept)};
    for (const auto& metric_chains : per_metric)
      row.push_back(csv_format(gelman_rubin(metric_chains)));
    rows.push_back(std::move(row));
  }

  write_csv(out + "/diagnose.csv",
            {"config_hash", "replicate", "n_chains", "kept", "rhat_rmse",
             "rhat_q05", "rhat_q25", "rhat_q50", "rhat_q75", "rhat_q95"},
            rows);
  std::cout << "diagnose: wrote " << rows.size() << " rows to " << out
            << "\n";
  return 0;
}

int run_command(const std::string& command, const ExperimentConfig& config,
                const CliOptions& options) {
  try {
    if (command == "fit") return cmd_fit(config, options);
    if (command == "sweep") return cmd_sweep(config, options);
    if (command == "exact") return cmd_exact(config, options);
    if (command == "diagnose") return cmd_diagnose(config, options);
    throw ConfigError("unknown command '" + command +
                      "'; expected fit, sweep, exact, or diagnose");
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const CapacityError& e) {
    std::cerr << "capacity error: " << e.what() << "\n";
    return 3;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace bartlab
