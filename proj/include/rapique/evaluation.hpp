#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rapique/deep_features.hpp"
#include "rapique/error.hpp"
#include "rapique/features.hpp"
#include "rapique/parallel.hpp"
#include "rapique/random.hpp"
#include "rapique/regressor.hpp"

namespace rapique {

// ---------------------------------------------------------------------------
// MOS calibration
// ---------------------------------------------------------------------------

enum class MosScale { konvid_1to5, livevqc_0to100, youtube_1to5 };

inline std::string_view to_string(MosScale s) {
  switch (s) {
    case MosScale::konvid_1to5: return "konvid_1to5";
    case MosScale::livevqc_0to100: return "livevqc_0to100";
    case MosScale::youtube_1to5: return "youtube_1to5";
  }
  return "?";
}

inline MosScale mos_scale_from_string(std::string_view s) {
  if (s == "konvid_1to5") return MosScale::konvid_1to5;
  if (s == "livevqc_0to100") return MosScale::livevqc_0to100;
  if (s == "youtube_1to5") return MosScale::youtube_1to5;
  fail(ErrorKind::parse, "unknown mos_scale '" + std::string(s) + "'");
}

inline std::pair<double, double> mos_range(MosScale s) {
  return s == MosScale::livevqc_0to100 ? std::pair{0.0, 100.0} : std::pair{1.0, 5.0};
}

// Maps each dataset's MOS onto a common 1..5-like axis. Out-of-range input
// is a data error.
inline double calibrate_mos(double mos, MosScale scale) {
  const auto [lo, hi] = mos_range(scale);
  require(std::isfinite(mos) && mos >= lo && mos <= hi, ErrorKind::data,
          "mos " + std::to_string(mos) + " outside " + std::string(to_string(scale)) + " range");
  switch (scale) {
    case MosScale::konvid_1to5: return 5.0 - 4.0 * ((5.0 - mos) / 4.0 * 1.1241 - 0.0993);
    case MosScale::livevqc_0to100: return 5.0 - 4.0 * ((100.0 - mos) / 100.0 * 0.7132 + 0.0253);
    case MosScale::youtube_1to5: return mos;
  }
  return mos;
}

// ---------------------------------------------------------------------------
// Correlation metrics
// ---------------------------------------------------------------------------

namespace detail {

inline void check_pair(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), ErrorKind::geometry, "metric inputs differ in length");
  require(x.size() >= 3, ErrorKind::precondition, "metrics need at least 3 pairs");
  for (std::span<const double> v : {x, y}) {
    for (double e : v) require(std::isfinite(e), ErrorKind::data, "non-finite metric input");
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    require(*lo < *hi, ErrorKind::degenerate, "correlation undefined for a constant vector");
  }
}

inline double pearson_unchecked(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace detail

// 1-based ranks, ties share their average rank.
inline std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = r;
    i = j + 1;
  }
  return rank;
}

inline double pearson(std::span<const double> x, std::span<const double> y) {
  detail::check_pair(x, y);
  return detail::pearson_unchecked(x, y);
}

inline double srcc(std::span<const double> x, std::span<const double> y) {
  detail::check_pair(x, y);
  const auto rx = average_ranks(x), ry = average_ranks(y);
  return detail::pearson_unchecked(rx, ry);
}

// Kendall tau-b.
inline double krcc(std::span<const double> x, std::span<const double> y) {
  detail::check_pair(x, y);
  long long concordant = 0, discordant = 0, ties_x = 0, ties_y = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      const double dx = x[i] - x[j], dy = y[i] - y[j];
      if (dx == 0.0 && dy == 0.0) continue;
      if (dx == 0.0) ++ties_x;
      else if (dy == 0.0) ++ties_y;
      else if ((dx > 0.0) == (dy > 0.0)) ++concordant;
      else ++discordant;
    }
  const double n0 = static_cast<double>(concordant + discordant);
  const double denom = std::sqrt((n0 + ties_x) * (n0 + ties_y));
  return std::clamp(static_cast<double>(concordant - discordant) / denom, -1.0, 1.0);
}

struct PlccRmse {
  double plcc = 0.0;
  double rmse = 0.0;
  LogisticParams logistic;
};

// Pearson correlation and RMSE after mapping predictions x through a fitted
// four-parameter logistic onto y.
inline PlccRmse plcc_rmse(std::span<const double> x, std::span<const double> y) {
  detail::check_pair(x, y);
  PlccRmse out;
  out.logistic = fit_logistic(x, y);
  std::vector<double> mapped(x.size());
  double se = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mapped[i] = out.logistic(x[i]);
    se += (mapped[i] - y[i]) * (mapped[i] - y[i]);
  }
  out.rmse = std::sqrt(se / static_cast<double>(x.size()));
  const auto [lo, hi] = std::minmax_element(mapped.begin(), mapped.end());
  require(*lo < *hi, ErrorKind::degenerate, "logistic mapping collapsed to a constant");
  out.plcc = detail::pearson_unchecked(mapped, y);
  return out;
}

// ---------------------------------------------------------------------------
// Dataset manifest (CSV)
//
// Header row required. Columns, any order:
//   video_id, feature_path, mos, mos_scale   required
//   deep_path, category                      optional (may be empty per row)
// Relative paths resolve against the manifest's directory.
// ---------------------------------------------------------------------------

struct ManifestEntry {
  std::string video_id;
  std::filesystem::path feature_path;
  std::optional<std::filesystem::path> deep_path;
  double mos = 0.0;
  MosScale mos_scale = MosScale::youtube_1to5;
  std::string category;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line, std::size_t line_no) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') cur += '"', ++i;
        else quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"' && cur.empty()) {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  require(!quoted, ErrorKind::parse, "manifest line " + std::to_string(line_no) + ": unterminated quote");
  out.push_back(std::move(cur));
  return out;
}

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

inline DatasetManifest parse_manifest(std::istream& in, const std::filesystem::path& base_dir) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (header.empty() && std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (detail::trim(line).empty()) continue;
    header = detail::split_csv_line(line, line_no);
    for (auto& h : header) h = detail::trim(h);
  }
  require(!header.empty(), ErrorKind::parse, "manifest: missing header row");
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) {
    static const std::set<std::string> known = {"video_id", "feature_path", "deep_path",
                                                "mos",      "mos_scale",    "category"};
    require(known.count(header[i]) == 1, ErrorKind::parse,
            "manifest: unknown column '" + header[i] + "'");
    require(col.emplace(header[i], i).second, ErrorKind::parse,
            "manifest: duplicate column '" + header[i] + "'");
  }
  for (const char* req : {"video_id", "feature_path", "mos", "mos_scale"})
    require(col.count(req) == 1, ErrorKind::parse,
            std::string("manifest: missing required column '") + req + "'");

  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  };

  DatasetManifest m;
  std::set<std::string> ids;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv_line(line, line_no);
    const std::string where = "manifest line " + std::to_string(line_no);
    require(cells.size() == header.size(), ErrorKind::parse,
            where + ": expected " + std::to_string(header.size()) + " fields, got " +
                std::to_string(cells.size()));
    for (auto& c : cells) c = detail::trim(c);
    ManifestEntry e;
    e.video_id = cells[col["video_id"]];
    require(!e.video_id.empty(), ErrorKind::parse, where + ": empty video_id");
    require(ids.insert(e.video_id).second, ErrorKind::parse,
            where + ": duplicate video_id '" + e.video_id + "'");
    e.feature_path = resolve(cells[col["feature_path"]]);
    if (col.count("deep_path") && !cells[col["deep_path"]].empty())
      e.deep_path = resolve(cells[col["deep_path"]]);
    if (col.count("category")) e.category = cells[col["category"]];
    e.mos_scale = mos_scale_from_string(cells[col["mos_scale"]]);
    const std::string& mos = cells[col["mos"]];
    std::size_t used = 0;
    try {
      e.mos = std::stod(mos, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    require(used == mos.size() && used > 0, ErrorKind::parse, where + ": bad mos '" + mos + "'");
    const auto [lo, hi] = mos_range(e.mos_scale);
    require(e.mos >= lo && e.mos <= hi, ErrorKind::data,
            where + ": mos " + mos + " outside " + std::string(to_string(e.mos_scale)) + " range");
    m.entries.push_back(std::move(e));
  }
  return m;
}

inline DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.is_open(), ErrorKind::io, "cannot open manifest '" + path.string() + "'");
  return parse_manifest(in, path.parent_path());
}

struct Dataset {
  Matrix features;
  std::vector<double> labels;  // calibrated MOS
  std::vector<std::string> ids;
};

// Reads every entry's feature file. A deep_path replaces the deep block with
// the pooled sidecar rows; its row count must equal the chunk count recorded
// in the feature file's metadata, when that metadata exists.
inline Dataset load_dataset(const DatasetManifest& m) {
  Dataset d;
  for (const auto& e : m.entries) {
    auto v = read_feature_file(e.feature_path);
    if (e.deep_path) {
      require(v.size() > kNssBlockDim, ErrorKind::alignment,
              "entry '" + e.video_id + "': feature vector has no deep block");
      const auto meta = metadata_path(e.feature_path);
      std::size_t chunks = 0;
      if (std::filesystem::exists(meta)) {
        std::ifstream in(meta);
        try {
          chunks = nlohmann::json::parse(in).at("chunks").get<std::size_t>();
        } catch (const nlohmann::json::exception& ex) {
          fail(ErrorKind::parse, "metadata '" + meta.string() + "': " + ex.what());
        }
      } else {
        const auto bytes = binary::read_file(*e.deep_path);
        binary::Reader r(bytes, "DFV1");
        require(r.remaining() >= 12, ErrorKind::parse, "DFV1: header truncated");
        r.magic(4);
        chunks = r.u32();
      }
      const auto deep = read_deep_features(*e.deep_path, chunks);
      require(deep.dim == v.size() - kNssBlockDim, ErrorKind::alignment,
              "entry '" + e.video_id + "': sidecar dim " + std::to_string(deep.dim) +
                  " does not match the feature file's deep block");
      const auto pooled = pool_deep(deep.rows);
      std::copy(pooled.begin(), pooled.end(), v.begin() + kNssBlockDim);
    }
    if (d.features.rows == 0) d.features.cols = v.size();
    require(v.size() == d.features.cols, ErrorKind::geometry,
            "entry '" + e.video_id + "': feature dim " + std::to_string(v.size()) +
                " differs from " + std::to_string(d.features.cols));
    d.features.data.insert(d.features.data.end(), v.begin(), v.end());
    ++d.features.rows;
    d.labels.push_back(calibrate_mos(e.mos, e.mos_scale));
    d.ids.push_back(e.video_id);
  }
  return d;
}

// ---------------------------------------------------------------------------
// Repeated random split protocol
// ---------------------------------------------------------------------------

struct ProtocolOptions {
  int iterations = 20;
  double train_frac = 0.8;
  std::uint64_t seed = 0;
  SvrOptions svr;  // seed and threads are overridden per iteration
  unsigned threads = 1;
  std::size_t min_entries = 50;
};

struct IterationResult {
  std::uint64_t split_seed = 0;
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  double srcc = 0.0, krcc = 0.0, plcc = 0.0, rmse = 0.0;
  double c = 0.0, gamma = 0.0;
  bool undefined = false;  // predictions were constant; correlations reported as 0
};

struct EvalReport {
  std::uint64_t seed = 0;
  int iterations = 0;
  double train_frac = 0.0;
  std::size_t entries = 0;
  std::vector<IterationResult> per_iteration;
  double median_srcc = 0.0, median_krcc = 0.0, median_plcc = 0.0, median_rmse = 0.0;
  std::vector<std::string> warnings;
  nlohmann::json config;
};

inline double median(std::vector<double> v) {
  require(!v.empty(), ErrorKind::precondition, "median of an empty set");
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

inline EvalReport run_protocol(const Matrix& x, std::span<const double> y,
                               const ProtocolOptions& opt) {
  require(x.rows == y.size(), ErrorKind::geometry, "feature rows and labels differ in count");
  require(x.rows >= opt.min_entries, ErrorKind::precondition,
          "protocol needs at least " + std::to_string(opt.min_entries) + " entries, got " +
              std::to_string(x.rows));
  require(opt.iterations >= 1 && opt.train_frac > 0.0 && opt.train_frac < 1.0, ErrorKind::usage,
          "invalid protocol settings");
  const std::size_t n = x.rows;
  const auto n_train = static_cast<std::size_t>(std::llround(opt.train_frac * static_cast<double>(n)));
  require(n_train >= 20 && n - n_train >= 8, ErrorKind::precondition,
          "split leaves too few training or test items");

  EvalReport rep;
  rep.seed = opt.seed;
  rep.iterations = opt.iterations;
  rep.train_frac = opt.train_frac;
  rep.entries = n;
  rep.per_iteration.resize(static_cast<std::size_t>(opt.iterations));

  parallel_for(rep.per_iteration.size(), opt.threads, [&](std::size_t it) {
    IterationResult& r = rep.per_iteration[it];
    r.split_seed = derive_seed(opt.seed, it);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(r.split_seed);
    rng.shuffle(std::span(order));
    r.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    r.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    std::sort(r.train.begin(), r.train.end());
    std::sort(r.test.begin(), r.test.end());

    Matrix xt(r.train.size(), x.cols);
    std::vector<double> yt(r.train.size());
    for (std::size_t k = 0; k < r.train.size(); ++k) {
      std::copy(x.row(r.train[k]).begin(), x.row(r.train[k]).end(), xt.row(k).begin());
      yt[k] = y[r.train[k]];
    }
    SvrOptions so = opt.svr;
    so.seed = derive_seed(r.split_seed, 1);
    so.threads = 1;
    const TrainedModel model = fit_svr(xt, yt, so);
    r.c = model.c;
    r.gamma = model.gamma;

    std::vector<double> pred(r.test.size()), truth(r.test.size());
    for (std::size_t k = 0; k < r.test.size(); ++k) {
      pred[k] = predict(model, x.row(r.test[k]));
      truth[k] = y[r.test[k]];
    }
    const auto [lo, hi] = std::minmax_element(pred.begin(), pred.end());
    if (!(*lo < *hi)) {
      r.undefined = true;
      double se = 0.0;
      for (std::size_t k = 0; k < pred.size(); ++k) se += (pred[k] - truth[k]) * (pred[k] - truth[k]);
      r.rmse = std::sqrt(se / static_cast<double>(pred.size()));
      return;
    }
    r.srcc = srcc(pred, truth);
    r.krcc = krcc(pred, truth);
    try {
      const auto pr = plcc_rmse(pred, truth);
      r.plcc = pr.plcc;
      r.rmse = pr.rmse;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::degenerate) throw;
      r.undefined = true;
    }
  });

  std::vector<double> s, k, p, e;
  for (std::size_t it = 0; it < rep.per_iteration.size(); ++it) {
    const auto& r = rep.per_iteration[it];
    s.push_back(r.srcc);
    k.push_back(r.krcc);
    p.push_back(r.plcc);
    e.push_back(r.rmse);
    if (r.undefined)
      rep.warnings.push_back("iteration " + std::to_string(it) +
                             ": constant test predictions, correlations recorded as 0");
  }
  rep.median_srcc = median(s);
  rep.median_krcc = median(k);
  rep.median_plcc = median(p);
  rep.median_rmse = median(e);
  return rep;
}

inline EvalReport run_protocol(const DatasetManifest& m, const ProtocolOptions& opt) {
  const Dataset d = load_dataset(m);
  return run_protocol(d.features, d.labels, opt);
}

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json iters = nlohmann::json::array();
  for (std::size_t i = 0; i < r.per_iteration.size(); ++i) {
    const auto& it = r.per_iteration[i];
    iters.push_back({{"iteration", i},
                     {"split_seed", it.split_seed},
                     {"train_size", it.train.size()},
                     {"test_size", it.test.size()},
                     {"srcc", it.srcc},
                     {"krcc", it.krcc},
                     {"plcc", it.plcc},
                     {"rmse", it.rmse},
                     {"C", it.c},
                     {"gamma", it.gamma},
                     {"undefined", it.undefined}});
  }
  return {{"seed", r.seed},
          {"iterations", r.iterations},
          {"train_frac", r.train_frac},
          {"entries", r.entries},
          {"median", {{"srcc", r.median_srcc}, {"krcc", r.median_krcc},
                      {"plcc", r.median_plcc}, {"rmse", r.median_rmse}}},
          {"per_iteration", iters},
          {"warnings", r.warnings},
          {"config", r.config}};
}

// ---------------------------------------------------------------------------
// Benchmark
// ---------------------------------------------------------------------------

struct StageStats {
  double median = 0.0, min = 0.0, max = 0.0;
};

struct BenchmarkRow {
  std::string resolution_class;  // e.g. "1080p", from the short side
  int width = 0, height = 0;
  std::size_t inputs = 0;
  std::size_t repetitions = 0;
  std::size_t frames = 0;
  std::array<StageStats, kStageNames.size()> stages;
  double stage_sum_over_total = 0.0;  // median stage sum / median total
};

struct BenchmarkTable {
  std::vector<BenchmarkRow> rows;  // ascending by pixel count
  nlohmann::json config;
};

inline std::string resolution_class(int width, int height) {
  return std::to_string(std::min(width, height)) + "p";
}

using ReaderFactory = std::function<std::unique_ptr<FrameReader>()>;

// Extracts each input `reps` times without deep features. Runs that share a
// resolution class are pooled before computing the per-stage statistics.
inline BenchmarkTable benchmark(std::span<const ReaderFactory> inputs, int reps,
                                const Config& config = {}) {
  require(reps >= 1, ErrorKind::usage, "benchmark needs at least one repetition");
  struct Acc {
    int width = 0, height = 0;
    std::size_t inputs = 0, frames = 0;
    std::array<std::vector<double>, kStageNames.size()> samples;
    std::vector<double> sums;
  };
  std::map<std::pair<long long, std::string>, Acc> classes;
  std::vector<Acc*> slot(inputs.size(), nullptr);
  ExtractOptions opts;
  opts.config = config;
  // Repetitions are interleaved across inputs so slow drift in machine load
  // spreads over every resolution class instead of biasing one.
  for (int r = 0; r < reps; ++r) {
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      auto reader = inputs[i]();
      const auto& src = reader->source();
      Acc*& acc = slot[i];
      if (!acc) {
        acc = &classes[{static_cast<long long>(src.width) * src.height,
                        resolution_class(src.width, src.height)}];
        acc->width = src.width;
        acc->height = src.height;
        ++acc->inputs;
        acc->frames += src.frame_count;
      }
      const auto res = extract_video(*reader, opts);
      for (std::size_t s = 0; s < kStageNames.size(); ++s)
        acc->samples[s].push_back(res.meta.timings.seconds[s]);
      acc->sums.push_back(res.meta.timings.stage_sum());
    }
  }
  BenchmarkTable table;
  table.config = to_json(config);
  for (auto& [key, acc] : classes) {
    BenchmarkRow row;
    row.resolution_class = key.second;
    row.width = acc.width;
    row.height = acc.height;
    row.inputs = acc.inputs;
    row.repetitions = static_cast<std::size_t>(reps);
    row.frames = acc.frames;
    for (std::size_t s = 0; s < kStageNames.size(); ++s) {
      const auto& v = acc.samples[s];
      row.stages[s] = {median(v), *std::min_element(v.begin(), v.end()),
                       *std::max_element(v.begin(), v.end())};
    }
    const double total = row.stages[kTotal].median;
    row.stage_sum_over_total = total > 0.0 ? median(acc.sums) / total : 1.0;
    table.rows.push_back(row);
  }
  return table;
}

inline nlohmann::json to_json(const BenchmarkTable& t) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : t.rows) {
    nlohmann::json stages = nlohmann::json::object();
    for (std::size_t s = 0; s < kStageNames.size(); ++s)
      stages[std::string(kStageNames[s])] = {
          {"median", r.stages[s].median}, {"min", r.stages[s].min}, {"max", r.stages[s].max}};
    rows.push_back({{"resolution_class", r.resolution_class},
                    {"width", r.width},
                    {"height", r.height},
                    {"inputs", r.inputs},
                    {"repetitions", r.repetitions},
                    {"frames", r.frames},
                    {"seconds", stages},
                    {"stage_sum_over_total", r.stage_sum_over_total}});
  }
  return {{"unit", "seconds"}, {"rows", rows}, {"config", t.config}};
}

}  // namespace rapique
