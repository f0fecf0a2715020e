#pragma once

// Scene description JSON: camera plus asset paths.
// {"camera": {"position": [x,y,z], "look_at": [x,y,z], "up": [x,y,z],
//             "fov_deg": 60.0, "width": 64, "height": 64},
//  "cloud_path": "...", "image_path": "..."}

#include <fstream>
#include <numbers>
#include <string>

#include <json.hpp>

#include "pcdm/io/errors.hpp"
#include "pcdm/renderer/camera.hpp"

namespace pcdm {

struct Scene {
    Camera camera;
    std::string cloud_path;
    std::string image_path;
};

namespace detail {

inline Vec3 vec3_from_json(const nlohmann::json& j, const std::string& field) {
    if (!j.is_array() || j.size() != 3)
        throw ParseError("scene field \"" + field + "\" must be a 3-element array");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline nlohmann::json vec3_to_json(const Vec3& v) {
    return nlohmann::json::array({v[0], v[1], v[2]});
}

}  // namespace detail

inline Scene parse_scene(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("scene JSON: ") + e.what());
    }
    try {
        Scene scene;
        const auto& cam = j.at("camera");
        scene.camera.position = detail::vec3_from_json(cam.at("position"), "position");
        scene.camera.look_at = detail::vec3_from_json(cam.at("look_at"), "look_at");
        scene.camera.up = detail::vec3_from_json(cam.at("up"), "up");
        scene.camera.fov_y = cam.at("fov_deg").get<double>() * std::numbers::pi / 180.0;
        scene.camera.width = cam.at("width").get<int>();
        scene.camera.height = cam.at("height").get<int>();
        scene.cloud_path = j.value("cloud_path", std::string());
        scene.image_path = j.value("image_path", std::string());
        return scene;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("scene JSON: ") + e.what());
    }
}

inline Scene load_scene(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return parse_scene(text);
}

inline std::string scene_to_json(const Scene& scene) {
    nlohmann::json j;
    j["camera"]["position"] = detail::vec3_to_json(scene.camera.position);
    j["camera"]["look_at"] = detail::vec3_to_json(scene.camera.look_at);
    j["camera"]["up"] = detail::vec3_to_json(scene.camera.up);
    j["camera"]["fov_deg"] = scene.camera.fov_y * 180.0 / std::numbers::pi;
    j["camera"]["width"] = scene.camera.width;
    j["camera"]["height"] = scene.camera.height;
    j["cloud_path"] = scene.cloud_path;
    j["image_path"] = scene.image_path;
    return j.dump(2) + "\n";
}

inline void save_scene(const std::string& path, const Scene& scene) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot open " + path + " for writing");
    os << scene_to_json(scene);
    if (!os) throw IoError("write failed for " + path);
}

}  // namespace pcdm
