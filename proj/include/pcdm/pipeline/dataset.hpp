#pragma once

// On-disk dataset layout: per sample a PLY cloud, a PNG reference view and a
// <name>.scene.json tying them to a camera. Loading normalizes positions (a
// no-op for files written by write_sample) and keeps the record.

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include "pcdm/data/normalize.hpp"
#include "pcdm/data/synthetic.hpp"
#include "pcdm/io/ply.hpp"
#include "pcdm/io/png.hpp"
#include "pcdm/io/scene.hpp"

namespace pcdm {

struct NamedSample {
    std::string name;
    Sample sample;
};

inline constexpr const char* kSceneSuffix = ".scene.json";

inline void write_sample(const std::string& dir, const std::string& name,
                         const Sample& sample) {
    std::filesystem::create_directories(dir);
    const std::filesystem::path base(dir);
    save_ply((base / (name + ".ply")).string(), sample.cloud);
    save_png((base / (name + ".png")).string(), sample.image);
    Scene scene;
    scene.camera = sample.camera;
    scene.cloud_path = name + ".ply";
    scene.image_path = name + ".png";
    save_scene((base / (name + kSceneSuffix)).string(), scene);
}

namespace detail {

inline std::string resolve_asset(const std::filesystem::path& scene_file,
                                 const std::string& rel) {
    const std::filesystem::path p(rel);
    if (p.is_absolute()) return rel;
    return (scene_file.parent_path() / p).string();
}

}  // namespace detail

/// Load every *.scene.json under `dir`, sorted by filename for a stable
/// order.
inline std::vector<NamedSample> load_dataset(const std::string& dir) {
    if (!std::filesystem::is_directory(dir))
        throw IoError("dataset directory " + dir + " does not exist");

    std::vector<std::filesystem::path> scene_files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        const std::string fname = entry.path().filename().string();
        if (fname.size() > std::string(kSceneSuffix).size() &&
            fname.ends_with(kSceneSuffix))
            scene_files.push_back(entry.path());
    }
    std::sort(scene_files.begin(), scene_files.end());
    if (scene_files.empty())
        throw ContractError("no *" + std::string(kSceneSuffix) + " files in " + dir);

    std::vector<NamedSample> out;
    for (const auto& file : scene_files) {
        const Scene scene = load_scene(file.string());
        const PointCloud raw = load_ply(detail::resolve_asset(file, scene.cloud_path));
        Image image = load_png(detail::resolve_asset(file, scene.image_path));
        NormalizedCloud norm = normalize(raw);

        std::string name = file.filename().string();
        name.resize(name.size() - std::string(kSceneSuffix).size());
        out.push_back({std::move(name),
                       Sample{std::move(norm.cloud), std::move(image), scene.camera,
                              norm.record}});
    }
    return out;
}

}  // namespace pcdm
