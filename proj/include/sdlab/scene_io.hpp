#pragma once

#include <string>

#include "json.hpp"

#include "sdlab/render.hpp"
#include "sdlab/splat.hpp"

namespace sdlab {

inline constexpr const char* kSceneSchema = "sdlab.scene/1";

nlohmann::json scene_to_json(const SplatScene& scene);
SplatScene scene_from_json(const nlohmann::json& j);

/// Binary layout, little-endian:
///   "SPLT1" (5 bytes), uint32 dim, uint32 count, float32 background[3],
///   then per-field arrays of float32: position[count*dim], log_scale[count*dim],
///   rotation[count*(dim == 2 ? 1 : 4)], color[count*3], opacity_logit[count], depth[count].
void write_scene_binary(const std::string& path, const SplatScene& scene);
SplatScene read_scene_binary(const std::string& path);

/// Loads by extension: ".splt" is binary, anything else JSON.
SplatScene load_scene(const std::string& path);
void save_scene(const std::string& path, const SplatScene& scene);

void write_json(const std::string& path, const nlohmann::json& j);
nlohmann::json read_json(const std::string& path);

/// 8-bit RGB PNG of a rendered view; values are clamped to [0, 1].
void write_png(const std::string& path, const RenderedView& view);
void write_png(const std::string& path, const Vec& pixels, int height, int width);

}  // namespace sdlab
