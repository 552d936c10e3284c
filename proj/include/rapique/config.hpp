#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "rapique/error.hpp"
#include "rapique/nss.hpp"
#include "rapique/parallel.hpp"

namespace rapique {

struct Config {
  int resize_short_side = 512;
  NssParams nss;
  int spatial_frames_per_chunk = 2;
  int temporal_frames_per_chunk = 8;
  int cnn_frames_per_chunk = 1;
  std::size_t deep_dim = 2048;
  int search_budget = 50;
  std::uint64_t seed = 0;
  unsigned threads = 0;  // 0 = all logical cores

  unsigned effective_threads() const { return threads == 0 ? default_threads() : threads; }
};

inline void validate(const Config& c) {
  require(c.resize_short_side >= 64, ErrorKind::usage, "config: resize_short_side must be >= 64");
  require(c.nss.radius >= 1 && c.nss.window_sigma > 0.0 && c.nss.c > 0.0, ErrorKind::usage,
          "config: invalid NSS window parameters");
  require(c.spatial_frames_per_chunk == 2 && c.temporal_frames_per_chunk == 8 &&
              c.cnn_frames_per_chunk == 1,
          ErrorKind::usage, "config: only the 2/8/1 per-chunk sampling is supported");
  require(c.deep_dim > 0, ErrorKind::usage, "config: deep_dim must be positive");
  require(c.search_budget >= 1, ErrorKind::usage, "config: search_budget must be >= 1");
}

inline nlohmann::json to_json(const Config& c) {
  return {
      {"resize_short_side", c.resize_short_side},
      {"nss", {{"C", c.nss.c}, {"K", c.nss.radius}, {"L", c.nss.radius},
               {"window_sigma", c.nss.window_sigma}}},
      {"sampling", {{"spatial_frames_per_chunk", c.spatial_frames_per_chunk},
                    {"temporal_frames_per_chunk", c.temporal_frames_per_chunk},
                    {"cnn_frames_per_chunk", c.cnn_frames_per_chunk}}},
      {"deep_dim", c.deep_dim},
      {"search_budget", c.search_budget},
      {"seed", c.seed},
      {"threads", c.effective_threads()},
  };
}

// Overlay the keys present in `j` onto `c`. Unknown keys are rejected.
inline void apply_json(Config& c, const nlohmann::json& j) {
  require(j.is_object(), ErrorKind::usage, "config must be a JSON object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "resize_short_side") c.resize_short_side = value.get<int>();
      else if (key == "nss") {
        for (const auto& [k, v] : value.items()) {
          if (k == "C") c.nss.c = v.get<double>();
          else if (k == "K" || k == "L") c.nss.radius = v.get<int>();
          else if (k == "window_sigma") c.nss.window_sigma = v.get<double>();
          else fail(ErrorKind::usage, "config: unknown key nss." + k);
        }
      } else if (key == "sampling") {
        for (const auto& [k, v] : value.items()) {
          if (k == "spatial_frames_per_chunk") c.spatial_frames_per_chunk = v.get<int>();
          else if (k == "temporal_frames_per_chunk") c.temporal_frames_per_chunk = v.get<int>();
          else if (k == "cnn_frames_per_chunk") c.cnn_frames_per_chunk = v.get<int>();
          else fail(ErrorKind::usage, "config: unknown key sampling." + k);
        }
      } else if (key == "deep_dim") c.deep_dim = value.get<std::size_t>();
      else if (key == "search_budget") c.search_budget = value.get<int>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "threads") c.threads = value.get<unsigned>();
      else fail(ErrorKind::usage, "config: unknown key " + key);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::usage, std::string("config: ") + e.what());
  }
  validate(c);
}

inline Config load_config(const std::filesystem::path& path, Config base = {}) {
  std::ifstream in(path);
  require(in.is_open(), ErrorKind::io, "cannot open config '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::parse, "config '" + path.string() + "': " + e.what());
  }
  apply_json(base, j);
  return base;
}

}  // namespace rapique
