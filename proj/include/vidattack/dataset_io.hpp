#pragma once

// On-disk layout of a dataset directory:
//   manifest.json   {"schema":1,"shape":[T,W,H,C],"classes":K,"victim":"victim.json",
//                    "samples":[{"id":..,"file":..,"label":..}, ...]}
//   <id>.vbt        one VBT1 tensor per sample
//   victim.json     linear victim: biases, temperature, ignored frames and one
//                   VBT1 weight tensor per class

#include <filesystem>
#include <set>
#include <string>

#include "json.hpp"
#include "vidattack/synthetic.hpp"

namespace vidattack {

namespace fs = std::filesystem;

inline nlohmann::ordered_json shape_json(const Shape& s) {
  return nlohmann::ordered_json::array({s.frames, s.width, s.height, s.channels});
}

inline Shape shape_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 4) throw Error(Errc::InvalidConfig, "shape must be [T,W,H,C]");
  Shape s{j[0].get<std::uint32_t>(), j[1].get<std::uint32_t>(), j[2].get<std::uint32_t>(), j[3].get<std::uint32_t>()};
  if (!s.valid()) throw Error(Errc::InvalidConfig, "shape dims must be >= 1");
  return s;
}

inline void write_json(const fs::path& path, const nlohmann::ordered_json& j) {
  write_file(path.string(), j.dump(2) + "\n");
}

inline nlohmann::json read_json(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_file(path.string()));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidFile, path.string() + ": " + e.what());
  }
}

inline void save_victim(const fs::path& dir, const LinearVictimSpec& victim, const std::string& name = "victim") {
  fs::create_directories(dir);
  nlohmann::ordered_json j;
  j["kind"] = "linear";
  j["shape"] = shape_json(victim.weights.front().shape());
  j["classes"] = victim.weights.size();
  j["temperature"] = victim.temperature;
  j["biases"] = victim.biases;
  j["ignored_frames"] = std::vector<std::size_t>(victim.ignored_frames.begin(), victim.ignored_frames.end());
  j["weights"] = nlohmann::ordered_json::array();
  for (std::size_t k = 0; k < victim.weights.size(); ++k) {
    const std::string file = name + "_w" + std::to_string(k) + ".vbt";
    save_vbt((dir / file).string(), victim.weights[k]);
    j["weights"].push_back(file);
  }
  write_json(dir / (name + ".json"), j);
}

inline LinearVictimSpec load_victim(const fs::path& file) {
  const auto j = read_json(file);
  try {
    if (j.at("kind").get<std::string>() != "linear") throw Error(Errc::InvalidFile, "unsupported victim kind");
    LinearVictimSpec v;
    v.temperature = j.at("temperature").get<double>();
    v.biases = j.at("biases").get<std::vector<double>>();
    for (auto t : j.at("ignored_frames").get<std::vector<std::size_t>>()) v.ignored_frames.insert(t);
    const Shape shape = shape_from_json(j.at("shape"));
    for (const auto& w : j.at("weights")) {
      v.weights.push_back(load_video((file.parent_path() / w.get<std::string>()).string()));
      require_same_shape(v.weights.back().shape(), shape);
    }
    return v;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidFile, file.string() + ": " + e.what());
  }
}

inline void save_dataset(const fs::path& dir, const SyntheticBundle& bundle) {
  fs::create_directories(dir);
  save_victim(dir, bundle.victim);
  nlohmann::ordered_json manifest;
  manifest["schema"] = 1;
  manifest["shape"] = shape_json(bundle.dataset.front().video.shape());
  manifest["classes"] = bundle.victim.weights.size();
  manifest["victim"] = "victim.json";
  manifest["samples"] = nlohmann::ordered_json::array();
  for (const auto& s : bundle.dataset) {
    const std::string file = s.id + ".vbt";
    save_vbt((dir / file).string(), s.video);
    nlohmann::ordered_json row;
    row["id"] = s.id;
    row["file"] = file;
    row["label"] = s.label;
    manifest["samples"].push_back(row);
  }
  write_json(dir / "manifest.json", manifest);
}

struct LoadedDataset {
  Dataset dataset;
  Shape shape;
  int classes = 0;
  std::optional<LinearVictimSpec> victim;
};

inline LoadedDataset load_dataset(const fs::path& dir) {
  const auto manifest = read_json(dir / "manifest.json");
  LoadedDataset out;
  try {
    out.shape = shape_from_json(manifest.at("shape"));
    out.classes = manifest.at("classes").get<int>();
    for (const auto& row : manifest.at("samples")) {
      LabeledVideo v{row.at("id").get<std::string>(),
                     load_video((dir / row.at("file").get<std::string>()).string()), row.at("label").get<Label>()};
      require_same_shape(v.video.shape(), out.shape);
      out.dataset.push_back(std::move(v));
    }
    if (manifest.contains("victim")) out.victim = load_victim(dir / manifest.at("victim").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidFile, (dir / "manifest.json").string() + ": " + e.what());
  }
  return out;
}

}  // namespace vidattack
