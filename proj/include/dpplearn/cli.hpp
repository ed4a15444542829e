// Copyright 2026 The Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <openssl/evp.h>

#include "dpplearn/datasets.hpp"
#include "dpplearn/inference.hpp"
#include "dpplearn/io.hpp"
#include "dpplearn/learning.hpp"

namespace dpplearn {
namespace cli {

inline std::string git_blob_sha1(const std::string& content) {
  std::string blob = "blob " + std::to_string(content.size());
  blob.push_back('\0');
  blob += content;
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(blob.data(), blob.size(), md, &len, EVP_sha1(), nullptr);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xF];
  }
  return out;
}

/// Collects the command, configuration snapshot, input hashes, outputs, and
/// timings of one run; written as manifest.json next to the artifacts.
class RunManifest {
 public:
  RunManifest(std::string command, std::vector<std::string> argv, std::uint64_t seed)
      : start_(std::chrono::steady_clock::now()) {
    doc_["command"] = std::move(command);
    doc_["argv"] = std::move(argv);
    doc_["seed"] = seed;
    doc_["config"] = json::object();
    doc_["inputs"] = json::array();
    doc_["outputs"] = json::array();
  }

  void config(const std::string& key, const json& value) { doc_["config"][key] = value; }

  void add_input(const std::string& path) {
    doc_["inputs"].push_back(
        {{"path", path}, {"git_blob_sha1", git_blob_sha1(detail::read_file(path))}});
  }

  void add_output(const std::string& name) { doc_["outputs"].push_back(name); }

  void save(const std::filesystem::path& out_dir) {
    doc_["timings_ms"] = {{"total", std::chrono::duration<double, std::milli>(
                                        std::chrono::steady_clock::now() - start_)
                                        .count()}};
    detail::write_file((out_dir / "manifest.json").string(), doc_.dump(2) + "\n");
  }

 private:
  json doc_;
  std::chrono::steady_clock::time_point start_;
};

namespace detail_cli {

struct CommonOpts {
  std::uint64_t seed = 0;
  std::string out_dir;
  int threads = 1;
  double tol = 1e-5;
  int max_iters = 300;
  int max_halvings = 40;
  double clamp_eps = 1e-5;
  double eta0 = 1.0;
  bool no_warm_start = false;
};

inline void add_train_flags(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--tol", o.tol, "Convergence threshold per example (absolute LL improvement)");
  cmd->add_option("--max-iters", o.max_iters, "Outer iteration cap");
  cmd->add_option("--max-halvings", o.max_halvings, "Line-search trial cap per iteration");
  cmd->add_option("--clamp-eps", o.clamp_eps, "Eigenvalue clamp into [eps, 1-eps] (EM)");
  cmd->add_option("--eta0", o.eta0, "Initial line-search step size");
  cmd->add_flag("--no-warm-start", o.no_warm_start, "Do not double eta after accepted EM steps");
}

inline TrainConfig make_config(const CommonOpts& o) {
  TrainConfig cfg;
  cfg.convergence_tol = o.tol;
  cfg.max_outer_iters = o.max_iters;
  cfg.max_step_halvings = o.max_halvings;
  cfg.eigenvalue_clamp = o.clamp_eps;
  cfg.initial_step = o.eta0;
  cfg.step_warm_start = !o.no_warm_start;
  cfg.seed = o.seed;
  cfg.threads = o.threads;
  cfg.validate();
  return cfg;
}

struct FilterFlags {
  FilterOptions opt;
  void add(CLI::App* cmd) {
    cmd->add_option("--top-items", opt.top_items, "Keep only the F most frequent items");
    cmd->add_option("--min-item-support", opt.min_item_support,
                    "Drop items appearing in fewer than S examples");
    cmd->add_option("--min-set-size", opt.min_set_size, "Drop examples smaller than this");
    cmd->add_option("--max-set-size", opt.max_set_size, "Drop examples larger than this");
  }
  SubsetDataset apply(const SubsetDataset& d) const {
    if (opt.top_items == 0 && opt.min_item_support == 0 && opt.min_set_size == 0 &&
        opt.max_set_size == 0) {
      return d;
    }
    return filter_dataset(d, opt);
  }
};

inline std::filesystem::path ensure_out_dir(const std::string& out) {
  std::filesystem::path dir(out);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Initializer spec: "wishart", "moments", or "file:PATH".
inline SpectralKernel make_initial_kernel(const std::string& init, const SubsetDataset& train,
                                          RngStream& rng, RunManifest& manifest) {
  if (init == "wishart") return wishart_init(train.ground_size(), rng);
  if (init == "moments") return moments_init(empirical_moments(train));
  if (init.rfind("file:", 0) == 0) {
    const std::string path = init.substr(5);
    manifest.add_input(path);
    SpectralKernel k = load_kernel(path);
    if (k.size() != train.ground_size()) {
      throw std::runtime_error("initial kernel size " + std::to_string(k.size()) +
                               " does not match dataset ground size " +
                               std::to_string(train.ground_size()));
    }
    return k;
  }
  throw std::runtime_error("unknown --init value: " + init +
                           " (expected wishart | moments | file:PATH)");
}

inline double quantile_linear(std::vector<double> sorted, double p) {
  if (sorted.empty()) return 0.0;
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const std::size_t lo = static_cast<std::size_t>(h);
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// 100 * (em - ka) / |ka| with deterministic conventions at the poles:
/// both -inf -> 0, only em -inf -> -inf, only ka -inf -> +inf.
inline double relative_difference_pct(double em_ll, double ka_ll) {
  if (em_ll == kNegInf && ka_ll == kNegInf) return 0.0;
  if (em_ll == kNegInf) return kNegInf;
  if (ka_ll == kNegInf) return -kNegInf;
  return 100.0 * (em_ll - ka_ll) / std::abs(ka_ll);
}

}  // namespace detail_cli

inline int cmd_train(const std::vector<std::string>& argv, const detail_cli::CommonOpts& o,
                     const std::string& data_path, const std::string& algo,
                     const std::string& init, double test_frac,
                     const detail_cli::FilterFlags& filters) {
  const auto out_dir = detail_cli::ensure_out_dir(o.out_dir);
  RunManifest manifest("train", argv, o.seed);
  manifest.add_input(data_path);
  manifest.config("algo", algo);
  manifest.config("init", init);
  manifest.config("test_frac", test_frac);
  manifest.config("tol", o.tol);
  manifest.config("max_iters", o.max_iters);
  manifest.config("clamp_eps", o.clamp_eps);
  manifest.config("eta0", o.eta0);
  manifest.config("threads", o.threads);

  SubsetDataset data = filters.apply(load_dataset(data_path));
  RngStream rng(o.seed);

  SubsetDataset train = data;
  std::optional<SubsetDataset> test;
  if (test_frac > 0.0) {
    auto [tr, te] = split_train_test(data, test_frac, rng);
    train = std::move(tr);
    test = std::move(te);
    save_dataset(train, (out_dir / "train_split.jsonl").string());
    save_dataset(*test, (out_dir / "test_split.jsonl").string());
    manifest.add_output("train_split.jsonl");
    manifest.add_output("test_split.jsonl");
  }

  const SpectralKernel k0 = detail_cli::make_initial_kernel(init, train, rng, manifest);
  const TrainConfig cfg = detail_cli::make_config(o);
  const TrainReport report = algo == "em" ? train_em(k0, train, cfg) : train_ka(k0, train, cfg);

  const json meta = {{"command", "train"}, {"algo", algo}, {"init", init}, {"seed", o.seed}};
  save_kernel((out_dir / "kernel.json").string(), *report.final_kernel, meta);
  save_report((out_dir / "report.json").string(), report, meta);
  manifest.add_output("kernel.json");
  manifest.add_output("report.json");

  std::cout << "algorithm=" << report.algorithm << "\n"
            << "iterations=" << report.iterations << "\n"
            << "converged=" << (report.converged ? "true" : "false") << "\n"
            << "stop_reason=" << report.stop_reason << "\n"
            << "train_log_likelihood=" << fmt_double(report.final_log_likelihood) << "\n";
  if (test.has_value()) {
    const double test_ll = dataset_log_likelihood(*report.final_kernel, *test, o.threads);
    std::cout << "test_log_likelihood=" << fmt_double(test_ll) << "\n";
  }
  manifest.save(out_dir);
  return 0;
}

inline int cmd_evaluate(const std::vector<std::string>& argv, const detail_cli::CommonOpts& o,
                        const std::string& kernel_path, const std::string& data_path) {
  const SpectralKernel k = load_kernel(kernel_path);
  const SubsetDataset data = load_dataset(data_path);
  if (data.ground_size() != k.size()) {
    throw std::runtime_error("kernel size does not match dataset ground size");
  }
  const double total = dataset_log_likelihood(k, data, o.threads);
  std::cout << "n_examples=" << data.size() << "\n"
            << "total_log_likelihood=" << fmt_double(total) << "\n";
  if (!o.out_dir.empty()) {
    const auto out_dir = detail_cli::ensure_out_dir(o.out_dir);
    RunManifest manifest("evaluate", argv, o.seed);
    manifest.add_input(kernel_path);
    manifest.add_input(data_path);
    CsvWriter csv({"example", "set_size", "log_likelihood"});
    for (std::size_t i = 0; i < data.size(); ++i) {
      csv.add(static_cast<std::int64_t>(i + 1));
      csv.add(data.examples()[i].size());
      csv.add(set_log_likelihood(k, data.examples()[i]));
    }
    csv.save((out_dir / "per_example.csv").string());
    manifest.add_output("per_example.csv");
    manifest.save(out_dir);
  }
  return 0;
}

inline int cmd_sample(const std::vector<std::string>& argv, const detail_cli::CommonOpts& o,
                      const std::string& kernel_path, std::size_t count, int k_size) {
  const auto out_dir = detail_cli::ensure_out_dir(o.out_dir);
  RunManifest manifest("sample", argv, o.seed);
  manifest.add_input(kernel_path);
  manifest.config("n", count);
  manifest.config("k", k_size);
  const SpectralKernel k = load_kernel(kernel_path);
  RngStream rng(o.seed);
  std::vector<Subset> draws;
  draws.reserve(count);
  if (k_size >= 0) {
    const LKernel l = l_from_marginal(k);
    for (std::size_t i = 0; i < count; ++i) draws.push_back(sample_k_dpp(l, k_size, rng));
  } else {
    for (std::size_t i = 0; i < count; ++i) draws.push_back(sample_dpp(k, rng));
  }
  const SubsetDataset out(k.size(), std::move(draws));
  save_dataset(out, (out_dir / "samples.jsonl").string());
  manifest.add_output("samples.jsonl");
  std::cout << "n_samples=" << out.size() << "\n"
            << "mean_size=" << fmt_double(out.mean_size()) << "\n";
  manifest.save(out_dir);
  return 0;
}

inline int cmd_recommend(const std::vector<std::string>& argv, const detail_cli::CommonOpts& o,
                         const std::string& kernel_path, int k_items,
                         const std::string& data_path) {
  const SpectralKernel k = load_kernel(kernel_path);
  std::map<int, std::string> catalog;
  if (!data_path.empty()) {
    const SubsetDataset data = load_dataset(data_path);
    if (data.ground_size() != k.size()) {
      throw std::runtime_error("catalog dataset ground size does not match kernel");
    }
    catalog = data.catalog();
  }
  const GreedyMapResult result = greedy_map(k, k_items);
  auto name_of = [&](int item) {
    auto it = catalog.find(item);
    return it == catalog.end() ? "item-" + std::to_string(item + 1) : it->second;
  };
  std::cout << "selected=" << result.set.size() << "\n"
            << "complete=" << (result.complete ? "true" : "false") << "\n";
  for (int i = 0; i < result.set.size(); ++i) {
    const int item = result.set.items()[i];
    std::cout << "rank " << (i + 1) << ": [" << (item + 1) << "] " << name_of(item) << "\n";
  }
  std::cout << "set_log_likelihood=" << fmt_double(set_log_likelihood(k, result.set)) << "\n";
  if (!o.out_dir.empty()) {
    const auto out_dir = detail_cli::ensure_out_dir(o.out_dir);
    RunManifest manifest("recommend", argv, o.seed);
    manifest.add_input(kernel_path);
    if (!data_path.empty()) manifest.add_input(data_path);
    manifest.config("k", k_items);
    CsvWriter csv({"rank", "item_id", "name"});
    for (int i = 0; i < result.set.size(); ++i) {
      csv.add(i + 1);
      csv.add(static_cast<std::int64_t>(result.set.items()[i] + 1));
      csv.add(name_of(result.set.items()[i]));
    }
    csv.save((out_dir / "recommend.csv").string());
    manifest.add_output("recommend.csv");
    manifest.save(out_dir);
  }
  return 0;
}

inline int cmd_stats(const std::vector<std::string>& argv, const detail_cli::CommonOpts& o,
                     const std::string& data_path, const detail_cli::FilterFlags& filters) {
  const SubsetDataset data = filters.apply(load_dataset(data_path));
  const MomentTable moments = empirical_moments(data);
  const double d = diversity_stat(moments);
  std::map<int, std::size_t> histogram;
  for (const Subset& y : data.examples()) ++histogram[y.size()];

  std::cout << "n_items=" << data.ground_size() << "\n"
            << "n_examples=" << data.size() << "\n"
            << "max_set_size=" << data.max_example_size() << "\n"
            << "mean_set_size=" << fmt_double(data.mean_size()) << "\n"
            << "diversity_d=" << fmt_double(d) << "\n";
  for (const auto& [size, count] : histogram) {
    std::cout << "size_hist[" << size << "]=" << count << "\n";
  }
  if (!o.out_dir.empty()) {
    const auto out_dir = detail_cli::ensure_out_dir(o.out_dir);
    RunManifest manifest("stats", argv, o.seed);
    manifest.add_input(data_path);
    CsvWriter stats({"key", "value"});
    stats.add("n_items");
    stats.add(static_cast<std::int64_t>(data.ground_size()));
    stats.add("n_examples");
    stats.add(static_cast<std::int64_t>(data.size()));
    stats.add("max_set_size");
    stats.add(static_cast<std::int64_t>(data.max_example_size()));
    stats.add("mean_set_size");
    stats.add(data.mean_size());
    stats.add("diversity_d");
    stats.add(d);
    for (const auto& [size, count] : histogram) {
      stats.add("size_hist_" + std::to_string(size));
      stats.add(static_cast<std::int64_t>(count));
    }
    stats.save((out_dir / "stats.csv").string());
    CsvWriter mcsv({"item_i", "item_j", "frequency"});
    for (int i = 0; i < data.ground_size(); ++i) {
      for (int j = i; j < data.ground_size(); ++j) {
        mcsv.add(static_cast<std::int64_t>(i + 1));
        mcsv.add(static_cast<std::int64_t>(j + 1));
        mcsv.add(moments.pairs(i, j));
      }
    }
    mcsv.save((out_dir / "moments.csv").string());
    manifest.add_output("stats.csv");
    manifest.add_output("moments.csv");
    manifest.save(out_dir);
  }
  return 0;
}

inline int cmd_synth(const std::vector<std::string>& argv, const detail_cli::CommonOpts& o,
                     const std::string& kernel_path, std::size_t count, int min_size,
                     int max_size) {
  const auto out_dir = detail_cli::ensure_out_dir(o.out_dir);
  RunManifest manifest("synth", argv, o.seed);
  manifest.add_input(kernel_path);
  manifest.config("n", count);
  manifest.config("min_size", min_size);
  manifest.config("max_size", max_size);
  const SpectralKernel k = load_kernel(kernel_path);
  RngStream rng(o.seed);
  const SubsetDataset data = synth_generate(k, count, rng, min_size, max_size);
  save_dataset(data, (out_dir / "synthetic.jsonl").string());
  manifest.add_output("synthetic.jsonl");
  std::cout << "n_examples=" << data.size() << "\n"
            << "mean_size=" << fmt_double(data.mean_size()) << "\n";
  manifest.save(out_dir);
  return 0;
}

inline int cmd_benchmark(const std::vector<std::string>& argv, const detail_cli::CommonOpts& o,
                         const std::string& data_path, int trials, double test_frac,
                         const std::string& init_mode, bool low_data,
                         const detail_cli::FilterFlags& filters) {
  const auto out_dir = detail_cli::ensure_out_dir(o.out_dir);
  RunManifest manifest("benchmark", argv, o.seed);
  manifest.add_input(data_path);
  manifest.config("trials", trials);
  manifest.config("test_frac", test_frac);
  manifest.config("init", init_mode);
  manifest.config("low_data", low_data);
  manifest.config("tol", o.tol);
  manifest.config("max_iters", o.max_iters);

  const SubsetDataset data = filters.apply(load_dataset(data_path));
  std::vector<std::string> inits;
  if (init_mode == "both") {
    inits = {"wishart", "moments"};
  } else if (init_mode == "wishart" || init_mode == "moments") {
    inits = {init_mode};
  } else {
    throw std::runtime_error("benchmark --init must be wishart, moments, or both");
  }

  // Training runs are forced single-threaded so the KA/EM runtime ratios
  // stay comparable.
  detail_cli::CommonOpts train_opts = o;
  train_opts.threads = 1;
  const TrainConfig cfg = detail_cli::make_config(train_opts);

  CsvWriter results({"trial", "init", "ka_test_ll", "em_test_ll", "rel_diff_pct"});
  CsvWriter runtimes({"trial", "init", "ka_millis", "em_millis", "ka_over_em_ratio"});
  std::map<std::string, std::vector<double>> rel_by_init;
  std::map<std::string, std::vector<double>> ratio_by_init;

  for (int trial = 1; trial <= trials; ++trial) {
    RngStream trial_rng = RngStream(o.seed).derive(static_cast<std::uint64_t>(trial));
    auto [train, test] = split_train_test(data, test_frac, trial_rng);
    if (low_data) {
      const std::size_t want = 2 * static_cast<std::size_t>(data.ground_size());
      if (train.size() < want) {
        throw std::runtime_error("benchmark --low-data: train split smaller than 2N examples");
      }
      std::vector<Subset> subsampled(train.examples().begin(),
                                     train.examples().begin() + static_cast<long>(want));
      train = SubsetDataset(train.ground_size(), std::move(subsampled), train.catalog());
    }
    for (const std::string& init : inits) {
      const SpectralKernel k0 =
          init == "wishart" ? wishart_init(train.ground_size(), trial_rng)
                            : moments_init(empirical_moments(train));
      const TrainReport ka = train_ka(k0, train, cfg);
      const TrainReport em = train_em(k0, train, cfg);
      const double ka_ll = dataset_log_likelihood(*ka.final_kernel, test);
      const double em_ll = dataset_log_likelihood(*em.final_kernel, test);
      const double rel = detail_cli::relative_difference_pct(em_ll, ka_ll);
      results.add(trial);
      results.add(init);
      results.add(ka_ll);
      results.add(em_ll);
      results.add(rel);
      runtimes.add(trial);
      runtimes.add(init);
      runtimes.add(ka.total_millis);
      runtimes.add(em.total_millis);
      runtimes.add(ka.total_millis / em.total_millis);
      rel_by_init[init].push_back(rel);
      ratio_by_init[init].push_back(ka.total_millis / em.total_millis);
    }
  }

  CsvWriter summary({"init", "n_trials", "rel_diff_q1", "rel_diff_median", "rel_diff_q3"});
  for (const std::string& init : inits) {
    std::vector<double> rel = rel_by_init[init];
    std::sort(rel.begin(), rel.end());
    summary.add(init);
    summary.add(static_cast<std::int64_t>(rel.size()));
    summary.add(detail_cli::quantile_linear(rel, 0.25));
    summary.add(detail_cli::quantile_linear(rel, 0.50));
    summary.add(detail_cli::quantile_linear(rel, 0.75));
    double mean_ratio = 0.0;
    for (double r : ratio_by_init[init]) mean_ratio += r;
    mean_ratio /= static_cast<double>(ratio_by_init[init].size());
    runtimes.add("mean");
    runtimes.add(init);
    runtimes.add(0.0);
    runtimes.add(0.0);
    runtimes.add(mean_ratio);
    std::cout << "init=" << init << " median_rel_diff_pct="
              << fmt_double(detail_cli::quantile_linear(rel, 0.50))
              << " mean_runtime_ratio=" << fmt_double(mean_ratio) << "\n";
  }

  results.save((out_dir / "benchmark.csv").string());
  summary.save((out_dir / "benchmark_summary.csv").string());
  runtimes.save((out_dir / "benchmark_runtimes.csv").string());
  manifest.add_output("benchmark.csv");
  manifest.add_output("benchmark_summary.csv");
  manifest.add_output("benchmark_runtimes.csv");
  manifest.save(out_dir);
  return 0;
}

/// Entry point shared by the binary and the tests. Returns the process exit
/// code; diagnostics go to stderr.
inline int run_command(const std::vector<std::string>& args) {
  CLI::App app{"dpplearn: learning and sampling determinantal point process kernels"};
  app.require_subcommand(1);

  detail_cli::CommonOpts o;
  std::string data_path, kernel_path, algo = "em", init = "wishart", init_mode = "both";
  double test_frac = 0.0;
  double bench_test_frac = 0.3;
  std::size_t count = 10;
  int k_items = 10;
  int k_size = -1;
  int min_size = 0, max_size = -1;
  int trials = 25;
  bool low_data = false;
  detail_cli::FilterFlags train_filters, stats_filters, bench_filters;

  auto add_common = [&](CLI::App* cmd, bool out_required) {
    cmd->add_option("--seed", o.seed, "Deterministic RNG seed");
    cmd->add_option("--threads", o.threads, "Worker threads for per-example fan-out");
    auto* out = cmd->add_option("--out", o.out_dir, "Output directory for artifacts");
    if (out_required) out->required();
  };

  CLI::App* train = app.add_subcommand("train", "Fit a kernel to observed subsets");
  train->add_option("--data", data_path, "Dataset file (JSON lines)")->required();
  train->add_option("--algo", algo, "Training algorithm: em | ka")
      ->check(CLI::IsMember({"em", "ka"}));
  train->add_option("--init", init, "Initializer: wishart | moments | file:PATH");
  train->add_option("--test-frac", test_frac, "Held-out fraction (0 disables the split)");
  add_common(train, true);
  detail_cli::add_train_flags(train, o);
  train_filters.add(train);

  CLI::App* evaluate = app.add_subcommand("evaluate", "Log-likelihood of a dataset under a kernel");
  evaluate->add_option("--kernel", kernel_path, "Kernel file")->required();
  evaluate->add_option("--data", data_path, "Dataset file")->required();
  add_common(evaluate, false);

  CLI::App* sample = app.add_subcommand("sample", "Draw sets from a kernel");
  sample->add_option("--kernel", kernel_path, "Kernel file")->required();
  sample->add_option("--n", count, "Number of draws");
  sample->add_option("--k", k_size, "Fixed set size (k-DPP); omit for unconstrained sizes");
  add_common(sample, true);

  CLI::App* recommend = app.add_subcommand("recommend", "Greedy high-probability set");
  recommend->add_option("--kernel", kernel_path, "Kernel file")->required();
  recommend->add_option("--k", k_items, "Set size to build");
  recommend->add_option("--data", data_path, "Dataset file supplying the item catalog");
  add_common(recommend, false);

  CLI::App* stats = app.add_subcommand("stats", "Dataset statistics and moments");
  stats->add_option("--data", data_path, "Dataset file")->required();
  add_common(stats, false);
  stats_filters.add(stats);

  CLI::App* synth = app.add_subcommand("synth", "Generate synthetic data from a kernel");
  synth->add_option("--kernel", kernel_path, "Ground-truth kernel file")->required();
  synth->add_option("--n", count, "Number of examples")->required();
  synth->add_option("--min-size", min_size, "Reject samples smaller than this");
  synth->add_option("--max-size", max_size, "Reject samples larger than this (-1 disables)");
  add_common(synth, true);

  CLI::App* benchmark = app.add_subcommand("benchmark", "EM vs KA comparison over seeded trials");
  benchmark->add_option("--data", data_path, "Dataset file")->required();
  benchmark->add_option("--trials", trials, "Number of seeded trials");
  benchmark->add_option("--test-frac", bench_test_frac, "Held-out fraction per trial");
  benchmark->add_option("--init", init_mode, "Initializers to run: wishart | moments | both");
  benchmark->add_flag("--low-data", low_data, "Subsample training to 2N examples per trial");
  add_common(benchmark, true);
  detail_cli::add_train_flags(benchmark, o);
  bench_filters.add(benchmark);

  std::vector<char*> argv;
  std::vector<std::string> storage = args;
  storage.insert(storage.begin(), "dpplearn");
  argv.reserve(storage.size());
  for (std::string& s : storage) argv.push_back(s.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (train->parsed()) return cmd_train(args, o, data_path, algo, init, test_frac, train_filters);
    if (evaluate->parsed()) return cmd_evaluate(args, o, kernel_path, data_path);
    if (sample->parsed()) return cmd_sample(args, o, kernel_path, count, k_size);
    if (recommend->parsed()) return cmd_recommend(args, o, kernel_path, k_items, data_path);
    if (stats->parsed()) return cmd_stats(args, o, data_path, stats_filters);
    if (synth->parsed()) return cmd_synth(args, o, kernel_path, count, min_size, max_size);
    if (benchmark->parsed()) {
      return cmd_benchmark(args, o, data_path, trials, bench_test_frac, init_mode, low_data,
                           bench_filters);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cerr << "error: no subcommand given\n";
  return 1;
}

}  // namespace cli
}  // namespace dpplearn
