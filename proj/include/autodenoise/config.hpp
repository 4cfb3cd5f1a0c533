#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "autodenoise/baselines.hpp"

namespace autodenoise {

// One training run, fully determined by these keys plus the split archive.
struct TrainConfig {
  std::string data_dir;
  std::string dataset;  // label used in report rows; defaults to data_dir stem
  SchemeConfig scheme;
  int d = 64;
  int batch_size = 512;
  double lr = 1e-3;
  double lr_c = 1e-3;
  double lambda1 = 1e-5;
  double lambda2 = 1e-5;
  int actions = 3;  // hard action space size A
  int n_neg = 4;    // negatives per positive in the training loss
  int max_epochs = 100;
  int patience = 6;
  double min_delta = 1e-5;
  double baseline_decay = 0.9;  // gamma
  double init_scale = 0.1;
  int hidden1 = 64;
  int hidden2 = 32;
  int n_neg_eval = 100;  // negatives per validation positive for the reward
  std::uint64_t seed = 1;
  std::vector<int> ks{10, 20, 50};
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* first = value.data();
  const char* last = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last)
    throw std::invalid_argument("config: bad value '" + value + "' for key '" +
                                key + "'");
  return out;
}

inline std::vector<int> parse_int_list(const std::string& key,
                                       const std::string& value) {
  std::vector<int> out;
  std::stringstream ss(value);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (tok.empty()) continue;
    out.push_back(parse_number<int>(key, tok));
  }
  if (out.empty()) throw std::invalid_argument("config: empty list for '" + key + "'");
  return out;
}

}  // namespace detail

// Applies `key = value`. Unknown keys are errors so typos cannot silently
// fall back to defaults.
inline void set_config_key(TrainConfig& cfg, const std::string& key,
                           const std::string& value) {
  using detail::parse_number;
  if (key == "data_dir") cfg.data_dir = value;
  else if (key == "dataset") cfg.dataset = value;
  else if (key == "scheme") cfg.scheme.scheme = scheme_from_name(value);
  else if (key == "adt_tl_slope") cfg.scheme.adt_tl_slope = parse_number<double>(key, value);
  else if (key == "adt_tl_max") cfg.scheme.adt_tl_max = parse_number<double>(key, value);
  else if (key == "adt_rl_beta") cfg.scheme.adt_rl_beta = parse_number<double>(key, value);
  else if (key == "d") cfg.d = parse_number<int>(key, value);
  else if (key == "batch_size") cfg.batch_size = parse_number<int>(key, value);
  else if (key == "lr") cfg.lr = parse_number<double>(key, value);
  else if (key == "lr_c") cfg.lr_c = parse_number<double>(key, value);
  else if (key == "lambda1") cfg.lambda1 = parse_number<double>(key, value);
  else if (key == "lambda2") cfg.lambda2 = parse_number<double>(key, value);
  else if (key == "actions") cfg.actions = parse_number<int>(key, value);
  else if (key == "n_neg") cfg.n_neg = parse_number<int>(key, value);
  else if (key == "max_epochs") cfg.max_epochs = parse_number<int>(key, value);
  else if (key == "patience") cfg.patience = parse_number<int>(key, value);
  else if (key == "min_delta") cfg.min_delta = parse_number<double>(key, value);
  else if (key == "baseline_decay") cfg.baseline_decay = parse_number<double>(key, value);
  else if (key == "init_scale") cfg.init_scale = parse_number<double>(key, value);
  else if (key == "hidden1") cfg.hidden1 = parse_number<int>(key, value);
  else if (key == "hidden2") cfg.hidden2 = parse_number<int>(key, value);
  else if (key == "n_neg_eval") cfg.n_neg_eval = parse_number<int>(key, value);
  else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "ks") cfg.ks = detail::parse_int_list(key, value);
  else throw std::invalid_argument("config: unknown key '" + key + "'");
}

// `key=value` override as passed on the command line.
inline void apply_override(TrainConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw std::invalid_argument("override '" + assignment + "' is not key=value");
  set_config_key(cfg, detail::trim(assignment.substr(0, eq)),
                 detail::trim(assignment.substr(eq + 1)));
}

inline void validate_config(const TrainConfig& cfg) {
  if (cfg.batch_size < 1) throw std::invalid_argument("config: batch_size must be >= 1");
  if (cfg.patience < 1) throw std::invalid_argument("config: patience must be >= 1");
  if (cfg.lr <= 0.0 || cfg.lr_c <= 0.0)
    throw std::invalid_argument("config: lr and lr_c must be > 0");
  if (cfg.d < 1) throw std::invalid_argument("config: d must be >= 1");
  if (cfg.actions < 1) throw std::invalid_argument("config: actions must be >= 1");
  if (cfg.n_neg < 1) throw std::invalid_argument("config: n_neg must be >= 1");
  if (cfg.n_neg_eval < 1) throw std::invalid_argument("config: n_neg_eval must be >= 1");
  if (cfg.max_epochs < 1) throw std::invalid_argument("config: max_epochs must be >= 1");
  if (cfg.lambda1 < 0.0 || cfg.lambda2 < 0.0)
    throw std::invalid_argument("config: lambda1/lambda2 must be >= 0");
  if (cfg.baseline_decay < 0.0 || cfg.baseline_decay >= 1.0)
    throw std::invalid_argument("config: baseline_decay must be in [0,1)");
  if (cfg.init_scale < 0.0) throw std::invalid_argument("config: init_scale must be >= 0");
  if (cfg.hidden1 < 1 || cfg.hidden2 < 1)
    throw std::invalid_argument("config: hidden sizes must be >= 1");
  if (cfg.scheme.adt_tl_slope < 0.0 || cfg.scheme.adt_tl_max < 0.0 ||
      cfg.scheme.adt_tl_max >= 1.0)
    throw std::invalid_argument("config: adt_tl drop rate must satisfy slope >= 0, max in [0,1)");
  if (cfg.scheme.adt_rl_beta < 0.0)
    throw std::invalid_argument("config: adt_rl_beta must be >= 0");
  for (int k : cfg.ks)
    if (k < 1) throw std::invalid_argument("config: ks entries must be >= 1");
}

// Plain `key = value` file; '#' starts a comment; blank lines ignored.
inline TrainConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config " + path.string());
  TrainConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos)
      line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected key = value");
    set_config_key(cfg, detail::trim(line.substr(0, eq)),
                   detail::trim(line.substr(eq + 1)));
  }
  if (cfg.dataset.empty() && !cfg.data_dir.empty())
    cfg.dataset = std::filesystem::path(cfg.data_dir).filename().string();
  return cfg;
}

// Canonical echo of a config; written into run directories so a run can be
// reproduced from its artifacts alone.
inline std::string render_config(const TrainConfig& cfg) {
  std::ostringstream out;
  out << "data_dir = " << cfg.data_dir << '\n';
  out << "dataset = " << cfg.dataset << '\n';
  out << "scheme = " << scheme_name(cfg.scheme.scheme) << '\n';
  out << "adt_tl_slope = " << cfg.scheme.adt_tl_slope << '\n';
  out << "adt_tl_max = " << cfg.scheme.adt_tl_max << '\n';
  out << "adt_rl_beta = " << cfg.scheme.adt_rl_beta << '\n';
  out << "d = " << cfg.d << '\n';
  out << "batch_size = " << cfg.batch_size << '\n';
  out << "lr = " << cfg.lr << '\n';
  out << "lr_c = " << cfg.lr_c << '\n';
  out << "lambda1 = " << cfg.lambda1 << '\n';
  out << "lambda2 = " << cfg.lambda2 << '\n';
  out << "actions = " << cfg.actions << '\n';
  out << "n_neg = " << cfg.n_neg << '\n';
  out << "max_epochs = " << cfg.max_epochs << '\n';
  out << "patience = " << cfg.patience << '\n';
  out << "min_delta = " << cfg.min_delta << '\n';
  out << "baseline_decay = " << cfg.baseline_decay << '\n';
  out << "init_scale = " << cfg.init_scale << '\n';
  out << "hidden1 = " << cfg.hidden1 << '\n';
  out << "hidden2 = " << cfg.hidden2 << '\n';
  out << "n_neg_eval = " << cfg.n_neg_eval << '\n';
  out << "seed = " << cfg.seed << '\n';
  out << "ks = ";
  for (std::size_t i = 0; i < cfg.ks.size(); ++i)
    out << (i ? "," : "") << cfg.ks[i];
  out << '\n';
  return out.str();
}

}  // namespace autodenoise
