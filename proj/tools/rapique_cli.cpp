// rapique: feature extraction, training, prediction, evaluation and
// benchmarking from the command line. See README.md for usage.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rapique/rapique.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rapique;

namespace {

struct Globals {
  std::string config_path;
  std::optional<unsigned> threads;

  Config load() const {
    Config c;
    if (!config_path.empty()) c = load_config(config_path, c);
    if (threads) c.threads = *threads;
    validate(c);
    return c;
  }
};

FrameRate parse_frame_rate(const std::string& text) {
  auto whole = [&](const std::string& s) {
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    require(used == s.size() && used > 0 && v > 0, ErrorKind::usage, "bad --fps '" + text + "'");
    return v;
  };
  if (const auto slash = text.find('/'); slash != std::string::npos)
    return {whole(text.substr(0, slash)), whole(text.substr(slash + 1))};
  if (const auto dot = text.find('.'); dot != std::string::npos) {
    const std::string frac = text.substr(dot + 1);
    long long den = 1;
    for (std::size_t i = 0; i < frac.size(); ++i) den *= 10;
    return {whole(text.substr(0, dot) + frac), den};
  }
  return {whole(text), 1};
}

void emit(const json& j, const std::string& path) {
  const std::string text = j.dump(2) + "\n";
  if (path.empty() || path == "-") std::cout << text;
  else binary::write_text(path, text);
}


}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RAPIQUE blind video quality features and regressor"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "JSON file overriding the default configuration");
  app.add_option("--threads", g.threads, "worker thread cap (default: logical cores)")
      ->check(CLI::PositiveNumber);

  // extract
  auto* extract = app.add_subcommand("extract", "extract a feature vector from one video");
  std::string input, format = "auto", fps_text, pixfmt = "yuv420p", deep, out;
  int width = 0, height = 0;
  bool no_deep = false;
  extract->add_option("--input", input, "video path (.y4m, raw .yuv, or - for y4m on stdin)")
      ->required();
  extract->add_option("--format", format, "y4m | raw | auto (by extension)")
      ->check(CLI::IsMember({"auto", "y4m", "raw"}));
  extract->add_option("--width", width, "raw: frame width");
  extract->add_option("--height", height, "raw: frame height");
  extract->add_option("--fps", fps_text, "raw: frame rate, e.g. 30, 29.97 or 30000/1001");
  extract->add_option("--pixel-format", pixfmt, "raw: yuv420p | yuv444p | rgb24");
  auto* deep_opt = extract->add_option("--deep", deep, "DFV1 deep-feature sidecar");
  auto* no_deep_opt = extract->add_flag("--no-deep", no_deep, "zero-fill the deep block");
  deep_opt->excludes(no_deep_opt);
  extract->add_option("--out", out, "output FTV1 path (metadata goes to <out>.meta.json)")
      ->required();

  // train
  auto* train = app.add_subcommand("train", "fit the SVR head on a dataset manifest");
  std::string manifest, out_model;
  std::optional<int> budget;
  std::optional<std::uint64_t> seed;
  train->add_option("--manifest", manifest, "CSV dataset manifest")->required();
  train->add_option("--out-model", out_model, "output model file")->required();
  train->add_option("--budget", budget, "random-search budget")->check(CLI::PositiveNumber);
  train->add_option("--seed", seed, "search seed");

  // predict
  auto* pred = app.add_subcommand("predict", "score feature files with a trained model");
  std::string model_path;
  std::vector<std::string> feature_paths;
  pred->add_option("--model", model_path, "model file")->required();
  pred->add_option("--features", feature_paths, "FTV1 feature files")->required();

  // eval
  auto* eval = app.add_subcommand("eval", "repeated 80/20 split evaluation");
  int iterations = 20;
  std::string report;
  eval->add_option("--manifest", manifest, "CSV dataset manifest")->required();
  eval->add_option("--iterations", iterations, "number of random splits")
      ->check(CLI::PositiveNumber);
  eval->add_option("--seed", seed, "split seed");
  eval->add_option("--budget", budget, "random-search budget")->check(CLI::PositiveNumber);
  eval->add_option("--report", report, "JSON report path (default: stdout)");

  // bench
  auto* bench = app.add_subcommand("bench", "per-stage wall-clock timing");
  std::vector<std::string> inputs, synthetic;
  int reps = 1;
  double seconds = 8.0;
  bench->add_option("--inputs", inputs, "Y4M inputs");
  bench->add_option("--synthetic", synthetic, "generated noise videos, WxH (e.g. 1920x1080)");
  bench->add_option("--seconds", seconds, "synthetic: duration at 25 fps")->check(CLI::PositiveNumber);
  bench->add_option("--reps", reps, "repetitions per input")->check(CLI::PositiveNumber);
  bench->add_option("--report", report, "JSON report path (default: stdout)");

  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
      return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
      return app.exit(e);
    } catch (const CLI::ParseError& e) {
      fail(ErrorKind::usage, e.what());
    }

    const Config config = g.load();
    const json config_json = to_json(config);

    if (*extract) {
      if (format == "auto") format = fs::path(input).extension() == ".yuv" ? "raw" : "y4m";
      std::unique_ptr<FrameReader> reader;
      if (format == "y4m") {
        reader = open_y4m(input);
      } else {
        require(width > 0 && height > 0 && !fps_text.empty(), ErrorKind::usage,
                "--format raw requires --width, --height and --fps");
        reader = read_raw_yuv(input, width, height, parse_frame_rate(fps_text),
                              pixel_format_from_string(pixfmt));
      }
      require(!deep.empty() || no_deep, ErrorKind::alignment,
              "no deep-feature sidecar given: pass --deep <file.dfv> or --no-deep");
      ExtractOptions opts;
      opts.config = config;
      if (!deep.empty()) opts.deep_sidecar = fs::path(deep);
      const auto result = extract_video(*reader, opts);
      write_features(out, result);
      for (const auto& w : result.meta.warnings) std::cerr << "warning: " << w << "\n";
      emit({{"command", "extract"},
            {"features", out},
            {"metadata", metadata_path(out).string()},
            {"dim", result.features.values.size()},
            {"chunks", result.meta.chunks},
            {"timings_seconds", to_json(result.meta, result.features.values.size())["timings_seconds"]},
            {"config", config_json}},
           "-");
      return 0;
    }

    if (*train) {
      const auto ds = load_dataset(load_manifest(manifest));
      SvrOptions so;
      so.budget = budget.value_or(config.search_budget);
      so.seed = seed.value_or(config.seed);
      so.threads = config.effective_threads();
      TrainedModel m = fit_svr(ds.features, ds.labels, so);
      m.logistic = fit_logistic(m.training_scores, ds.labels);
      json cfg = config_json;
      cfg["search_budget"] = so.budget;
      cfg["seed"] = so.seed;
      m.config = cfg;
      save_model(out_model, m);
      emit({{"command", "train"},
            {"model", out_model},
            {"training_size", m.training_size},
            {"support_vectors", m.support_vectors.rows},
            {"C", m.c},
            {"gamma", m.gamma},
            {"cv_rmse", m.cv_rmse},
            {"training_srcc", srcc(m.training_scores, ds.labels)},
            {"solver_converged", m.solver.converged},
            {"zero_variance_dims", m.scaler.zero_variance.size()},
            {"config", cfg}},
           "-");
      return 0;
    }

    if (*pred) {
      const TrainedModel m = load_model(model_path);
      json rows = json::array();
      for (const auto& p : feature_paths) {
        const auto v = read_feature_file(p);
        const double raw = predict(m, v);
        json row = {{"features", p}, {"raw_score", raw}};
        if (m.logistic) row["mapped_score"] = (*m.logistic)(raw);
        rows.push_back(row);
      }
      emit({{"command", "predict"}, {"model", model_path}, {"predictions", rows},
            {"model_config", m.config}, {"config", config_json}},
           "-");
      return 0;
    }

    if (*eval) {
      const auto ds = load_dataset(load_manifest(manifest));
      ProtocolOptions po;
      po.iterations = iterations;
      po.seed = seed.value_or(config.seed);
      po.svr.budget = budget.value_or(config.search_budget);
      po.threads = config.effective_threads();
      EvalReport rep = run_protocol(ds.features, ds.labels, po);
      json cfg = config_json;
      cfg["search_budget"] = po.svr.budget;
      cfg["seed"] = po.seed;
      rep.config = cfg;
      for (const auto& w : rep.warnings) std::cerr << "warning: " << w << "\n";
      json j = to_json(rep);
      j["command"] = "eval";
      j["manifest"] = manifest;
      emit(j, report);
      return 0;
    }

    if (*bench) {
      require(!inputs.empty() || !synthetic.empty(), ErrorKind::usage,
              "bench needs --inputs and/or --synthetic");
      std::vector<ReaderFactory> factories;
      for (const auto& p : inputs) factories.push_back([p] { return std::unique_ptr<FrameReader>(open_y4m(p)); });
      for (const auto& s : synthetic) {
        const auto x = s.find('x');
        require(x != std::string::npos, ErrorKind::usage, "bad --synthetic '" + s + "', want WxH");
        int w = 0, h = 0;
        try {
          w = std::stoi(s.substr(0, x));
          h = std::stoi(s.substr(x + 1));
        } catch (const std::exception&) {
          fail(ErrorKind::usage, "bad --synthetic '" + s + "', want WxH");
        }
        const auto frames = static_cast<std::size_t>(std::llround(seconds * 25.0));
        factories.push_back([w, h, frames] { return noise_video(w, h, {25, 1}, frames); });
      }
      json j = to_json(benchmark(factories, reps, config));
      j["command"] = "bench";
      emit(j, report);
      return 0;
    }
  } catch (const Error& e) {
    std::string msg = e.what();
    std::string escaped;
    for (char ch : msg) {
      if (ch == '"' || ch == '\\') escaped += '\\';
      escaped += ch == '\n' ? ' ' : ch;
    }
    std::cerr << "error: class=" << to_string(e.kind()) << " code=" << exit_code(e.kind())
              << " message=\"" << escaped << "\"\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: class=internal code=1 message=\"" << e.what() << "\"\n";
    return 1;
  }
  return 0;
}
