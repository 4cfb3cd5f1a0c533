#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "autodenoise/rng.hpp"

namespace autodenoise {

enum class NoiseLabel { TruePositive, FalsePositive, Unknown };

// One explicit interaction as found in the raw rating logs.
struct RatingRecord {
  std::string user_raw;
  std::string item_raw;
  double rating = 0.0;       // in [1, 5]
  std::int64_t timestamp = 0;  // seconds, >= 0
};

// Remapped implicit interaction. Training rows are all positives (y = 1);
// the noise label records whether the originating rating was below the
// false-positive threshold.
struct Interaction {
  int user = 0;
  int item = 0;
  int y = 1;
  double rating = 0.0;
  std::int64_t timestamp = 0;
  NoiseLabel noise = NoiseLabel::Unknown;
};

struct SplitDataset {
  int m = 0;  // users
  int n = 0;  // items
  std::vector<Interaction> train;
  std::vector<Interaction> validation;
  std::vector<Interaction> test;
  std::vector<std::string> user_ids;  // dense -> raw
  std::vector<std::string> item_ids;
  std::unordered_map<std::string, int> user_index;  // raw -> dense
  std::unordered_map<std::string, int> item_index;
  // per-user sorted set of train item indices (top-K exclusion, negative
  // sampling candidates)
  std::vector<std::vector<int>> train_items;
  // sizes of validation/test before dropping false positives, kept for stats
  std::size_t validation_before_filter = 0;
  std::size_t test_before_filter = 0;
};

enum class RatingsFormat { CommaSeparatedHeader, DoubleColonSeparated };

namespace detail {

inline std::vector<std::string_view> split_line(std::string_view line,
                                                RatingsFormat format) {
  std::vector<std::string_view> fields;
  const std::string_view sep =
      format == RatingsFormat::CommaSeparatedHeader ? "," : "::";
  std::size_t pos = 0;
  while (true) {
    const std::size_t next = line.find(sep, pos);
    if (next == std::string_view::npos) {
      fields.push_back(line.substr(pos));
      break;
    }
    fields.push_back(line.substr(pos, next - pos));
    pos = next + sep.size();
  }
  return fields;
}

inline double parse_double_field(std::string_view s, std::size_t line_no,
                                 const char* what) {
  double out = 0.0;
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last)
    throw std::runtime_error("ratings line " + std::to_string(line_no) +
                             ": bad " + what + " '" + std::string(s) + "'");
  return out;
}

inline std::int64_t parse_int_field(std::string_view s, std::size_t line_no,
                                    const char* what) {
  std::int64_t out = 0;
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last)
    throw std::runtime_error("ratings line " + std::to_string(line_no) +
                             ": bad " + what + " '" + std::string(s) + "'");
  return out;
}

}  // namespace detail

// Parses `userId,movieId,rating,timestamp` (with header) or
// `UserID::MovieID::Rating::Timestamp` logs. Accepts Unix or Windows line
// endings. Malformed lines and out-of-range ratings are hard errors that name
// the offending line.
inline std::vector<RatingRecord> parse_ratings(std::istream& in,
                                               RatingsFormat format) {
  std::vector<RatingRecord> records;
  std::string line;
  std::size_t line_no = 0;
  bool skipped_header = format != RatingsFormat::CommaSeparatedHeader;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!skipped_header) {
      skipped_header = true;
      continue;
    }
    if (line.empty())
      throw std::runtime_error("ratings line " + std::to_string(line_no) +
                               ": empty line");
    const auto fields = detail::split_line(line, format);
    if (fields.size() != 4)
      throw std::runtime_error("ratings line " + std::to_string(line_no) +
                               ": expected 4 fields, got " +
                               std::to_string(fields.size()));
    RatingRecord rec;
    rec.user_raw = std::string(fields[0]);
    rec.item_raw = std::string(fields[1]);
    rec.rating = detail::parse_double_field(fields[2], line_no, "rating");
    rec.timestamp = detail::parse_int_field(fields[3], line_no, "timestamp");
    if (rec.rating < 1.0 || rec.rating > 5.0)
      throw std::runtime_error("ratings line " + std::to_string(line_no) +
                               ": rating " + std::to_string(rec.rating) +
                               " outside [1,5]");
    if (rec.timestamp < 0)
      throw std::runtime_error("ratings line " + std::to_string(line_no) +
                               ": negative timestamp");
    records.push_back(std::move(rec));
  }
  return records;
}

inline std::vector<RatingRecord> parse_ratings_file(
    const std::filesystem::path& path, RatingsFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return parse_ratings(in, format);
}

// Drops users and items with fewer than min_count interactions, alternating
// user and item passes until a fixpoint: removing sparse users can push items
// below the threshold and vice versa. Record order is preserved.
inline std::vector<RatingRecord> filter_min_interactions(
    std::vector<RatingRecord> records, int min_count) {
  if (min_count < 1) throw std::invalid_argument("min_count must be >= 1");
  bool changed = true;
  while (changed) {
    changed = false;
    std::unordered_map<std::string, int> user_count;
    for (const auto& r : records) ++user_count[r.user_raw];
    auto before = records.size();
    std::erase_if(records, [&](const RatingRecord& r) {
      return user_count[r.user_raw] < min_count;
    });
    changed |= records.size() != before;

    std::unordered_map<std::string, int> item_count;
    for (const auto& r : records) ++item_count[r.item_raw];
    before = records.size();
    std::erase_if(records, [&](const RatingRecord& r) {
      return item_count[r.item_raw] < min_count;
    });
    changed |= records.size() != before;
  }
  return records;
}

// Chronological 4:1:1 split per user: sorted by timestamp (stable on ties),
// the first ceil(4c/6) records train, next ceil(c/6) validate, rest test.
// Validation/test keep only true positives (rating >= fp_threshold); train
// keeps everything as implicit positives but remembers the noise label.
// Dense ids are assigned by first appearance in the user-sorted stream.
inline SplitDataset build_split(const std::vector<RatingRecord>& records,
                                double fp_threshold = 3.0) {
  if (records.empty()) throw std::invalid_argument("build_split: no records");

  std::vector<std::string> user_order;
  std::unordered_map<std::string, std::vector<std::size_t>> per_user;
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto [it, inserted] = per_user.try_emplace(records[i].user_raw);
    if (inserted) user_order.push_back(records[i].user_raw);
    it->second.push_back(i);
  }

  SplitDataset out;
  auto item_id = [&](const std::string& raw) {
    auto [it, inserted] =
        out.item_index.try_emplace(raw, static_cast<int>(out.item_ids.size()));
    if (inserted) out.item_ids.push_back(raw);
    return it->second;
  };

  for (const auto& user_raw : user_order) {
    auto& idxs = per_user[user_raw];
    std::stable_sort(idxs.begin(), idxs.end(), [&](std::size_t a, std::size_t b) {
      return records[a].timestamp < records[b].timestamp;
    });
    const int uid = static_cast<int>(out.user_ids.size());
    out.user_index.emplace(user_raw, uid);
    out.user_ids.push_back(user_raw);

    const std::size_t c = idxs.size();
    const std::size_t train_n = (4 * c + 5) / 6;
    const std::size_t val_n = std::min((c + 5) / 6, c - train_n);

    for (std::size_t k = 0; k < c; ++k) {
      const RatingRecord& r = records[idxs[k]];
      Interaction x;
      x.user = uid;
      x.item = item_id(r.item_raw);
      x.y = 1;
      x.rating = r.rating;
      x.timestamp = r.timestamp;
      x.noise = r.rating < fp_threshold ? NoiseLabel::FalsePositive
                                        : NoiseLabel::TruePositive;
      if (k < train_n) {
        out.train.push_back(x);
      } else if (k < train_n + val_n) {
        ++out.validation_before_filter;
        if (x.noise == NoiseLabel::TruePositive) out.validation.push_back(x);
      } else {
        ++out.test_before_filter;
        if (x.noise == NoiseLabel::TruePositive) out.test.push_back(x);
      }
    }
  }

  out.m = static_cast<int>(out.user_ids.size());
  out.n = static_cast<int>(out.item_ids.size());
  out.train_items.assign(out.m, {});
  for (const auto& x : out.train) out.train_items[x.user].push_back(x.item);
  for (auto& items : out.train_items) {
    std::sort(items.begin(), items.end());
    items.erase(std::unique(items.begin(), items.end()), items.end());
  }
  return out;
}

struct NoiseInjection {
  std::vector<Interaction> train;
  std::vector<NoiseLabel> labels;  // aligned with train
};

// Adds floor(fp_rate*|clean|/(1-fp_rate)) false positives sampled uniformly
// over (user, non-interacted item) pairs, then shuffles deterministically.
// With fp_rate = 0 the input comes back untouched.
inline NoiseInjection inject_synthetic_noise(
    const std::vector<Interaction>& clean, int m, int n, double fp_rate,
    std::uint64_t seed) {
  if (fp_rate < 0.0 || fp_rate >= 1.0)
    throw std::invalid_argument("fp_rate must be in [0,1)");
  for (const auto& x : clean)
    if (x.noise != NoiseLabel::TruePositive)
      throw std::invalid_argument(
          "inject_synthetic_noise: clean input must be all true-positive");

  NoiseInjection out;
  out.train = clean;
  const auto n_inject = static_cast<std::size_t>(
      fp_rate * static_cast<double>(clean.size()) / (1.0 - fp_rate));
  if (n_inject == 0) {
    out.labels.assign(clean.size(), NoiseLabel::TruePositive);
    return out;
  }

  std::unordered_set<std::int64_t> taken;
  taken.reserve(clean.size() * 2);
  for (const auto& x : clean)
    taken.insert(static_cast<std::int64_t>(x.user) * n + x.item);
  const auto free_pairs =
      static_cast<std::int64_t>(m) * n - static_cast<std::int64_t>(taken.size());
  if (static_cast<std::int64_t>(n_inject) > free_pairs)
    throw std::runtime_error(
        "inject_synthetic_noise: not enough non-interacted pairs");

  Rng rng(derive_seed(seed, stream::kSyntheticNoise));
  for (std::size_t k = 0; k < n_inject;) {
    const int u = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(m)));
    const int v = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n)));
    const std::int64_t key = static_cast<std::int64_t>(u) * n + v;
    if (!taken.insert(key).second) continue;
    Interaction x;
    x.user = u;
    x.item = v;
    x.y = 1;
    x.rating = 1.0;  // a disliked interaction logged as an implicit positive
    x.timestamp = 0;
    x.noise = NoiseLabel::FalsePositive;
    out.train.push_back(x);
    ++k;
  }
  rng.shuffle(out.train);
  out.labels.reserve(out.train.size());
  for (const auto& x : out.train) out.labels.push_back(x.noise);
  return out;
}

// ---------------------------------------------------------------------------
// Split archive: train.tsv / val.tsv / test.tsv with columns
//   user item y rating timestamp noise_label
// plus meta.tsv holding m, n and the raw<->dense id maps.

namespace detail {

inline const char* noise_to_string(NoiseLabel label) {
  switch (label) {
    case NoiseLabel::TruePositive: return "tp";
    case NoiseLabel::FalsePositive: return "fp";
    default: return "unknown";
  }
}

inline NoiseLabel noise_from_string(std::string_view s) {
  if (s == "tp") return NoiseLabel::TruePositive;
  if (s == "fp") return NoiseLabel::FalsePositive;
  if (s == "unknown") return NoiseLabel::Unknown;
  throw std::runtime_error("bad noise label '" + std::string(s) + "'");
}

inline std::string format_rating(double r) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", r);
  return buf;
}

inline void write_interactions(const std::filesystem::path& path,
                               const std::vector<Interaction>& xs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& x : xs)
    out << x.user << '\t' << x.item << '\t' << x.y << '\t'
        << format_rating(x.rating) << '\t' << x.timestamp << '\t'
        << noise_to_string(x.noise) << '\n';
}

inline std::vector<Interaction> read_interactions(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<Interaction> xs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ss(line);
    Interaction x;
    std::string noise;
    if (!(ss >> x.user >> x.item >> x.y >> x.rating >> x.timestamp >> noise))
      throw std::runtime_error(path.string() + " line " +
                               std::to_string(line_no) + ": bad row");
    x.noise = noise_from_string(noise);
    xs.push_back(x);
  }
  return xs;
}

}  // namespace detail

inline void write_split(const SplitDataset& split,
                        const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  detail::write_interactions(dir / "train.tsv", split.train);
  detail::write_interactions(dir / "val.tsv", split.validation);
  detail::write_interactions(dir / "test.tsv", split.test);
  std::ofstream meta(dir / "meta.tsv", std::ios::binary);
  if (!meta) throw std::runtime_error("cannot write meta.tsv");
  meta << "m\t" << split.m << '\n' << "n\t" << split.n << '\n';
  for (int u = 0; u < split.m; ++u)
    meta << "user\t" << u << '\t' << split.user_ids[u] << '\n';
  for (int v = 0; v < split.n; ++v)
    meta << "item\t" << v << '\t' << split.item_ids[v] << '\n';
}

inline SplitDataset read_split(const std::filesystem::path& dir) {
  SplitDataset split;
  std::ifstream meta(dir / "meta.tsv", std::ios::binary);
  if (!meta) throw std::runtime_error("cannot read " + (dir / "meta.tsv").string());
  std::string line;
  while (std::getline(meta, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string kind;
    ss >> kind;
    if (kind == "m") {
      ss >> split.m;
    } else if (kind == "n") {
      ss >> split.n;
    } else if (kind == "user" || kind == "item") {
      int dense = 0;
      std::string raw;
      if (!(ss >> dense >> raw))
        throw std::runtime_error("meta.tsv: bad id map row");
      auto& ids = kind == "user" ? split.user_ids : split.item_ids;
      auto& index = kind == "user" ? split.user_index : split.item_index;
      if (dense != static_cast<int>(ids.size()))
        throw std::runtime_error("meta.tsv: id map out of order");
      ids.push_back(raw);
      index.emplace(raw, dense);
    } else {
      throw std::runtime_error("meta.tsv: unknown row kind '" + kind + "'");
    }
  }
  split.train = detail::read_interactions(dir / "train.tsv");
  split.validation = detail::read_interactions(dir / "val.tsv");
  split.test = detail::read_interactions(dir / "test.tsv");
  split.train_items.assign(split.m, {});
  for (const auto& x : split.train) {
    if (x.user < 0 || x.user >= split.m || x.item < 0 || x.item >= split.n)
      throw std::runtime_error("train.tsv: index outside id maps");
    split.train_items[x.user].push_back(x.item);
  }
  for (auto& items : split.train_items) {
    std::sort(items.begin(), items.end());
    items.erase(std::unique(items.begin(), items.end()), items.end());
  }
  return split;
}

}  // namespace autodenoise
