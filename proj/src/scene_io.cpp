#include "sdlab/scene_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

namespace sdlab {

nlohmann::json scene_to_json(const SplatScene& scene) {
  nlohmann::json splats = nlohmann::json::array();
  for (const auto& s : scene.splats) {
    nlohmann::json e = {{"position", std::vector<double>(s.position.data(), s.position.data() + s.position.size())},
                        {"log_scale", std::vector<double>(s.log_scale.data(), s.log_scale.data() + s.log_scale.size())},
                        {"color", {s.color[0], s.color[1], s.color[2]}},
                        {"opacity_logit", s.opacity_logit},
                        {"depth", s.depth}};
    if (scene.dim == 2) {
      e["angle"] = s.angle;
    } else {
      e["quaternion"] = {s.quaternion[0], s.quaternion[1], s.quaternion[2], s.quaternion[3]};
    }
    splats.push_back(std::move(e));
  }
  return {{"schema", kSceneSchema},
          {"dim", scene.dim},
          {"background", {scene.background[0], scene.background[1], scene.background[2]}},
          {"splats", splats}};
}

namespace {

Vec to_vec(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())); }

}  // namespace

SplatScene scene_from_json(const nlohmann::json& j) {
  try {
    if (j.value("schema", std::string(kSceneSchema)) != kSceneSchema) {
      throw ConfigError("unsupported scene schema " + j.at("schema").get<std::string>());
    }
    SplatScene scene;
    scene.dim = j.at("dim").get<int>();
    const auto bg = j.at("background").get<std::vector<double>>();
    if (bg.size() != 3) throw ConfigError("scene background must have 3 channels");
    scene.background = Eigen::Vector3d(bg[0], bg[1], bg[2]);
    for (const auto& e : j.at("splats")) {
      Splat s;
      s.position = to_vec(e.at("position").get<std::vector<double>>());
      s.log_scale = to_vec(e.at("log_scale").get<std::vector<double>>());
      const auto c = e.at("color").get<std::vector<double>>();
      if (c.size() != 3) throw ConfigError("splat color must have 3 channels");
      s.color = Eigen::Vector3d(c[0], c[1], c[2]);
      s.opacity_logit = e.at("opacity_logit").get<double>();
      s.depth = e.value("depth", 0.0);
      if (scene.dim == 2) {
        s.angle = e.value("angle", 0.0);
      } else {
        const auto q = e.at("quaternion").get<std::vector<double>>();
        if (q.size() != 4) throw ConfigError("splat quaternion must have 4 entries");
        s.quaternion = Eigen::Vector4d(q[0], q[1], q[2], q[3]);
      }
      scene.splats.push_back(std::move(s));
    }
    scene.validate();
    return scene;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad scene: ") + e.what());
  } catch (const ParameterError& e) {
    throw ConfigError(std::string("bad scene: ") + e.what());
  }
}

namespace {

constexpr char kMagic[5] = {'S', 'P', 'L', 'T', '1'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void put_f32(std::string& out, double v) { put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v))); }

struct Reader {
  const std::string& data;
  std::size_t pos = 0;

  std::uint32_t u32() {
    if (pos + 4 > data.size()) throw IoError("truncated SPLT1 file");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  double f32() { return static_cast<double>(std::bit_cast<float>(u32())); }
};

}  // namespace

void write_scene_binary(const std::string& path, const SplatScene& scene) {
  scene.validate();
  std::string out(kMagic, sizeof(kMagic));
  put_u32(out, static_cast<std::uint32_t>(scene.dim));
  put_u32(out, static_cast<std::uint32_t>(scene.size()));
  for (int c = 0; c < 3; ++c) put_f32(out, scene.background[c]);
  for (const auto& s : scene.splats) for (int k = 0; k < scene.dim; ++k) put_f32(out, s.position[k]);
  for (const auto& s : scene.splats) for (int k = 0; k < scene.dim; ++k) put_f32(out, s.log_scale[k]);
  for (const auto& s : scene.splats) {
    if (scene.dim == 2) {
      put_f32(out, s.angle);
    } else {
      for (int k = 0; k < 4; ++k) put_f32(out, s.quaternion[k]);
    }
  }
  for (const auto& s : scene.splats) for (int c = 0; c < 3; ++c) put_f32(out, s.color[c]);
  for (const auto& s : scene.splats) put_f32(out, s.opacity_logit);
  for (const auto& s : scene.splats) put_f32(out, s.depth);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("failed writing " + path);
}

SplatScene read_scene_binary(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read " + path);
  const std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (data.size() < sizeof(kMagic) || std::memcmp(data.data(), kMagic, sizeof(kMagic)) != 0) {
    throw IoError(path + " is not an SPLT1 scene");
  }
  Reader r{data, sizeof(kMagic)};
  SplatScene scene;
  scene.dim = static_cast<int>(r.u32());
  if (scene.dim != 2 && scene.dim != 3) throw IoError("SPLT1 scene has unsupported dimension");
  const std::uint32_t n = r.u32();
  const std::size_t per = scene.dim == 2 ? 9 + 1 : 14 + 1;
  if (data.size() < 5 + 8 + 12 + 4 * per * n) throw IoError("truncated SPLT1 file");
  for (int c = 0; c < 3; ++c) scene.background[c] = r.f32();
  scene.splats.resize(n);
  for (auto& s : scene.splats) {
    s.position.resize(scene.dim);
    for (int k = 0; k < scene.dim; ++k) s.position[k] = r.f32();
  }
  for (auto& s : scene.splats) {
    s.log_scale.resize(scene.dim);
    for (int k = 0; k < scene.dim; ++k) s.log_scale[k] = r.f32();
  }
  for (auto& s : scene.splats) {
    if (scene.dim == 2) {
      s.angle = r.f32();
    } else {
      for (int k = 0; k < 4; ++k) s.quaternion[k] = r.f32();
    }
  }
  for (auto& s : scene.splats) for (int c = 0; c < 3; ++c) s.color[c] = r.f32();
  for (auto& s : scene.splats) s.opacity_logit = r.f32();
  for (auto& s : scene.splats) s.depth = r.f32();
  return scene;
}

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

SplatScene load_scene(const std::string& path) {
  if (ends_with(path, ".splt")) return read_scene_binary(path);
  return scene_from_json(read_json(path));
}

void save_scene(const std::string& path, const SplatScene& scene) {
  if (ends_with(path, ".splt")) {
    write_scene_binary(path, scene);
  } else {
    write_json(path, scene_to_json(scene));
  }
}

void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path);
  f << j.dump(2) << '\n';
  if (!f) throw IoError("failed writing " + path);
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read " + path);
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace sdlab
