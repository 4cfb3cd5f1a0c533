// Command-line front end: prepare raw rating logs into split archives, run
// training under any weighting scheme, evaluate checkpoints, sweep the hard
// action space, and merge run directories into comparison tables.
//
// Exit codes: 0 success, 1 usage/config error, 2 runtime failure.
// stdout carries requested tables only; diagnostics go to stderr.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "autodenoise/config.hpp"
#include "autodenoise/dataio.hpp"
#include "autodenoise/eval.hpp"
#include "autodenoise/trainer.hpp"

namespace fs = std::filesystem;
using namespace autodenoise;

namespace {

RatingsFormat format_from_name(const std::string& name) {
  if (name == "csv") return RatingsFormat::CommaSeparatedHeader;
  if (name == "dat") return RatingsFormat::DoubleColonSeparated;
  throw std::invalid_argument("unknown format '" + name + "' (expected csv or dat)");
}

int cmd_prepare(const std::string& input, const std::string& format,
                const std::string& out_dir, int min_interactions,
                double fp_threshold) {
  const auto records = parse_ratings_file(input, format_from_name(format));
  const auto filtered = filter_min_interactions(records, min_interactions);
  if (filtered.empty())
    throw std::runtime_error("no records left after filtering " + input);
  const SplitDataset split = build_split(filtered, fp_threshold);
  write_split(split, out_dir);

  const std::size_t interactions = filtered.size();
  const double density =
      static_cast<double>(interactions) / (static_cast<double>(split.m) * split.n);
  std::ofstream stats(fs::path(out_dir) / "stats.tsv", std::ios::binary);
  if (!stats) throw std::runtime_error("cannot write stats.tsv");
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", density);
  stats << "users\t" << split.m << '\n'
        << "items\t" << split.n << '\n'
        << "interactions\t" << interactions << '\n'
        << "density\t" << buf << '\n'
        << "train\t" << split.train.size() << '\n'
        << "validation\t" << split.validation.size() << '\n'
        << "validation_dropped\t"
        << split.validation_before_filter - split.validation.size() << '\n'
        << "test\t" << split.test.size() << '\n'
        << "test_dropped\t" << split.test_before_filter - split.test.size() << '\n';
  std::cerr << "[prepare] " << split.m << " users, " << split.n << " items, "
            << interactions << " interactions -> " << out_dir << '\n';
  return 0;
}

TrainConfig load_run_config(const std::string& config_path,
                            const std::vector<std::string>& overrides,
                            const std::string& data_override) {
  TrainConfig cfg = parse_config_file(config_path);
  for (const auto& kv : overrides) apply_override(cfg, kv);
  if (!data_override.empty()) cfg.data_dir = data_override;
  if (cfg.dataset.empty())
    cfg.dataset = fs::path(cfg.data_dir).filename().string();
  validate_config(cfg);
  if (cfg.data_dir.empty())
    throw std::invalid_argument("config: data_dir is required");
  return cfg;
}

int cmd_train(const std::string& config_path,
              const std::vector<std::string>& overrides,
              const std::string& data_override, const std::string& out_dir) {
  const TrainConfig cfg = load_run_config(config_path, overrides, data_override);
  const SplitDataset split = read_split(cfg.data_dir);
  const RunArtifacts run = run_and_save(cfg, split, out_dir, &std::cerr);
  std::cerr << "[train] scheme " << scheme_name(cfg.scheme.scheme) << " seed "
            << cfg.seed << ": best val_auc " << run.best_val_auc << " at epoch "
            << run.best_epoch << " (" << run.epochs_run << " epochs)\n";
  return 0;
}

int cmd_evaluate(const std::string& run_dir, const std::string& data_override) {
  const fs::path dir(run_dir);
  TrainConfig cfg = parse_config_file(dir / "config.txt");
  if (!data_override.empty()) cfg.data_dir = data_override;
  validate_config(cfg);
  const SplitDataset split = read_split(cfg.data_dir);
  const MFParams rec = load_mf(dir / "recmodel.ckpt");
  MetricsReport report = rank_metrics(rec, split.test, split.train_items, cfg.ks);
  report.auc = auc_reward(rec, split.validation, split.train_items,
                          cfg.n_neg_eval, cfg.seed);
  std::ostringstream csv;
  {
    const fs::path tmp = dir / "metrics.eval.csv";
    write_metrics_csv(tmp, cfg, report);
    std::ifstream in(tmp, std::ios::binary);
    csv << in.rdbuf();
    fs::remove(tmp);
  }
  std::cout << csv.str();
  return 0;
}

int cmd_sweep(const std::string& config_path,
              const std::vector<std::string>& overrides,
              const std::string& data_override, const std::string& actions_list,
              const std::string& out_dir) {
  TrainConfig cfg = load_run_config(config_path, overrides, data_override);
  std::vector<int> a_values;
  {
    std::stringstream ss(actions_list);
    std::string tok;
    while (std::getline(ss, tok, ','))
      if (!tok.empty()) a_values.push_back(std::stoi(tok));
  }
  if (a_values.empty()) throw std::invalid_argument("sweep: empty action list");
  const SplitDataset split = read_split(cfg.data_dir);
  const auto rows = action_space_sweep(cfg, split, a_values, &std::cerr);
  fs::create_directories(out_dir);
  write_sweep_csv(fs::path(out_dir) / "sweep.csv", rows);
  std::cout << "actions,ndcg20_pct\n";
  for (const auto& r : rows) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4g", 100.0 * r.ndcg20);
    std::cout << r.actions << ',' << buf << '\n';
  }
  return 0;
}

struct MetricRowText {
  std::string scheme, dataset, seed;
  int k = 0;
  double precision = 0, recall = 0, f1 = 0, ndcg = 0;
};

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(tok);
  return out;
}

int cmd_report(const std::vector<std::string>& run_dirs,
               const std::string& out_dir) {
  std::vector<MetricRowText> rows;
  std::vector<std::string> weight_blocks, sweep_blocks;
  std::set<int> first_ks;
  for (std::size_t r = 0; r < run_dirs.size(); ++r) {
    const fs::path dir(run_dirs[r]);
    std::ifstream in(dir / "metrics.csv", std::ios::binary);
    if (!in)
      throw std::runtime_error("run dir " + run_dirs[r] + " has no metrics.csv");
    std::string line;
    std::getline(in, line);  // header
    std::set<int> ks;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto f = split_csv_line(line);
      if (f.size() < 9)
        throw std::runtime_error(run_dirs[r] + "/metrics.csv: bad row");
      MetricRowText row;
      row.scheme = f[0];
      row.dataset = f[1];
      row.seed = f[2];
      row.k = std::stoi(f[3]);
      row.precision = std::stod(f[4]);
      row.recall = std::stod(f[5]);
      row.f1 = std::stod(f[6]);
      row.ndcg = std::stod(f[7]);
      rows.push_back(row);
      ks.insert(row.k);
    }
    if (r == 0)
      first_ks = ks;
    else if (ks != first_ks)
      throw std::runtime_error("incompatible K sets across runs (" + run_dirs[0] +
                               " vs " + run_dirs[r] + ")");
    if (std::ifstream w(dir / "weights.csv", std::ios::binary); w) {
      std::ostringstream block;
      block << "# weights " << run_dirs[r] << '\n' << w.rdbuf();
      weight_blocks.push_back(block.str());
    }
    if (std::ifstream s(dir / "sweep.csv", std::ios::binary); s) {
      std::ostringstream block;
      block << "# sweep " << run_dirs[r] << '\n' << s.rdbuf();
      sweep_blocks.push_back(block.str());
    }
  }

  // mean Default NDCG per (dataset, k) as the improvement reference
  std::map<std::pair<std::string, int>, std::pair<double, int>> default_ndcg;
  for (const auto& row : rows)
    if (row.scheme == "default") {
      auto& acc = default_ndcg[{row.dataset, row.k}];
      acc.first += row.ndcg;
      acc.second += 1;
    }

  std::ostringstream csv;
  csv << "scheme,dataset,seed,k,precision_pct,recall_pct,f1,ndcg_pct,ndcg_vs_default_pct\n";
  std::ostringstream text;
  text << std::left << std::setw(16) << "scheme" << std::setw(14) << "dataset"
       << std::setw(6) << "seed" << std::setw(5) << "k" << std::right
       << std::setw(10) << "prec%" << std::setw(10) << "recall%" << std::setw(10)
       << "f1" << std::setw(10) << "ndcg%" << std::setw(12) << "vs_default\n";
  for (const auto& row : rows) {
    std::string improve = "-";
    if (const auto it = default_ndcg.find({row.dataset, row.k});
        it != default_ndcg.end() && it->second.second > 0 && it->second.first != 0.0) {
      const double base = it->second.first / it->second.second;
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%+.2f%%", 100.0 * (row.ndcg - base) / base);
      improve = buf;
    }
    auto g4 = [](double x) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.4g", x);
      return std::string(buf);
    };
    csv << row.scheme << ',' << row.dataset << ',' << row.seed << ',' << row.k
        << ',' << g4(row.precision) << ',' << g4(row.recall) << ',' << g4(row.f1)
        << ',' << g4(row.ndcg) << ',' << improve << '\n';
    text << std::left << std::setw(16) << row.scheme << std::setw(14)
         << row.dataset << std::setw(6) << row.seed << std::setw(5) << row.k
         << std::right << std::setw(10) << g4(row.precision) << std::setw(10)
         << g4(row.recall) << std::setw(10) << g4(row.f1) << std::setw(10)
         << g4(row.ndcg) << std::setw(12) << improve << '\n';
  }

  std::cout << text.str();
  for (const auto& block : weight_blocks) std::cout << '\n' << block;
  for (const auto& block : sweep_blocks) std::cout << '\n' << block;

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ofstream out(fs::path(out_dir) / "comparison.csv", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write comparison.csv");
    out << csv.str();
    if (!weight_blocks.empty()) {
      std::ofstream w(fs::path(out_dir) / "weights_comparison.csv", std::ios::binary);
      for (const auto& block : weight_blocks) w << block;
    }
    if (!sweep_blocks.empty()) {
      std::ofstream s(fs::path(out_dir) / "sweep_comparison.csv", std::ios::binary);
      for (const auto& block : sweep_blocks) s << block;
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AutoDenoise: policy-learned sample weighting for implicit-feedback recommenders"};
  app.require_subcommand(1);

  std::string input, format = "csv", out_dir, config_path, data_dir, run_dir;
  std::string actions_list = "1,2,3,4,5";
  int min_interactions = 10;
  double fp_threshold = 3.0;
  std::vector<std::string> overrides, run_dirs;

  auto* prepare = app.add_subcommand("prepare", "Parse, filter and split a raw ratings log");
  prepare->add_option("--input", input, "raw ratings file")->required();
  prepare->add_option("--format", format, "csv (header, comma) or dat (:: separated)");
  prepare->add_option("--out", out_dir, "output directory for the split archive")->required();
  prepare->add_option("--min-interactions", min_interactions, "min interactions per user and item");
  prepare->add_option("--fp-threshold", fp_threshold, "ratings below this are false positives");

  auto* train = app.add_subcommand("train", "Train one scheme on a prepared split");
  train->add_option("--config", config_path, "key = value config file")->required();
  train->add_option("--set", overrides, "config override key=value (repeatable)");
  train->add_option("--data", data_dir, "split archive directory (overrides config)");
  train->add_option("--out", out_dir, "run directory to create")->required();

  auto* evaluate = app.add_subcommand("evaluate", "Re-evaluate a run directory's checkpoint");
  evaluate->add_option("--run", run_dir, "run directory")->required();
  evaluate->add_option("--data", data_dir, "split archive directory (overrides run config)");

  auto* sweep = app.add_subcommand("sweep", "Train hard AutoDenoise across action-space sizes");
  sweep->add_option("--config", config_path, "key = value config file")->required();
  sweep->add_option("--set", overrides, "config override key=value (repeatable)");
  sweep->add_option("--data", data_dir, "split archive directory (overrides config)");
  sweep->add_option("--actions", actions_list, "comma-separated action-space sizes");
  sweep->add_option("--out", out_dir, "directory for sweep.csv")->required();

  auto* report = app.add_subcommand("report", "Merge run directories into comparison tables");
  report->add_option("runs", run_dirs, "run directories")->required();
  report->add_option("--out", out_dir, "directory for comparison csv files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*prepare)
      return cmd_prepare(input, format, out_dir, min_interactions, fp_threshold);
    if (*train) return cmd_train(config_path, overrides, data_dir, out_dir);
    if (*evaluate) return cmd_evaluate(run_dir, data_dir);
    if (*sweep)
      return cmd_sweep(config_path, overrides, data_dir, actions_list, out_dir);
    if (*report) return cmd_report(run_dirs, out_dir);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
