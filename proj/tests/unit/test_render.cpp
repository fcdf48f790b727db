#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "sdlab/parallel.hpp"
#include "sdlab/render.hpp"
#include "sdlab/scene_io.hpp"
#include "oracles.hpp"

using namespace sdlab;
namespace fs = std::filesystem;

namespace {

Splat splat_2d(double x, double y, double scale, Eigen::Vector3d color, double logit, double depth) {
  Splat s;
  s.position = Vec(2);
  s.position << x, y;
  s.log_scale = Vec::Constant(2, std::log(scale));
  s.color = color;
  s.opacity_logit = logit;
  s.depth = depth;
  return s;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "sdlab_test_render";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("eval_gaussian examples") {
  CHECK(eval_gaussian(Mat::Identity(2, 2), Vec::Zero(2)) == 1.0);
  Vec p(2);
  p << 1.0, 1.0;
  CHECK(eval_gaussian(Mat::Identity(2, 2), p) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
  Mat cov = Mat::Zero(2, 2);
  cov(0, 0) = 4.0;
  cov(1, 1) = 1.0;
  p << 2.0, 0.0;
  CHECK(eval_gaussian(cov, p) == doctest::Approx(std::exp(-0.5)).epsilon(1e-14));
}

TEST_CASE("project_covariance examples") {
  std::mt19937_64 rng(1);
  const Mat a = Mat::Random(3, 3);
  const Mat cov = a * a.transpose() + 0.1 * Mat::Identity(3, 3);
  CHECK((project_covariance(cov, Mat::Identity(3, 3), Mat::Identity(3, 3)) - cov).norm() < 1e-15);

  const Mat rot = quaternion_rotation(Eigen::Vector4d(0.8, 0.2, -0.5, 0.3).normalized());
  const Mat rotated = project_covariance(cov, rot, Mat::Identity(3, 3));
  Eigen::SelfAdjointEigenSolver<Mat> e0(cov), e1(rotated);
  CHECK((e0.eigenvalues() - e1.eigenvalues()).norm() < 1e-12);

  for (int k = 0; k < 50; ++k) {
    const Mat b = oracle::random_vec(9, rng).reshaped(3, 3);
    const Mat c = b * b.transpose();
    const Mat w = oracle::random_vec(9, rng).reshaped(3, 3);
    const Mat j = oracle::random_vec(6, rng).reshaped(2, 3);
    const Mat out = project_covariance(c, w, j);
    // Plain triple loop product.
    Mat jw = Mat::Zero(2, 3), ref = Mat::Zero(2, 2);
    for (int r = 0; r < 2; ++r)
      for (int q = 0; q < 3; ++q)
        for (int m = 0; m < 3; ++m) jw(r, q) += j(r, m) * w(m, q);
    for (int r = 0; r < 2; ++r)
      for (int s = 0; s < 2; ++s)
        for (int q = 0; q < 3; ++q)
          for (int m = 0; m < 3; ++m) ref(r, s) += jw(r, q) * c(q, m) * jw(s, m);
    CHECK((out - ref).norm() <= 1e-12 * ref.norm());
    CHECK(out(0, 1) == out(1, 0));
    Eigen::SelfAdjointEigenSolver<Mat> es(out);
    CHECK(es.eigenvalues().minCoeff() >= -1e-12 * ref.norm());
  }
  CHECK_THROWS_AS(project_covariance(Mat::Identity(3, 3), Mat::Identity(2, 2), Mat::Identity(2, 2)),
                  ParameterError);
}

TEST_CASE("splat covariance is symmetric positive definite") {
  std::mt19937_64 rng(2);
  for (int dim : {2, 3}) {
    const SplatScene scene = oracle::random_scene(dim, 30, rng);
    for (const auto& s : scene.splats) {
      const Mat c = s.covariance();
      CHECK((c - c.transpose()).norm() <= 1e-15 * c.norm());
      Eigen::SelfAdjointEigenSolver<Mat> es(c);
      CHECK(es.eigenvalues().minCoeff() > 0.0);
      CHECK(s.opacity() > 0.0);
      CHECK(s.opacity() < 1.0);
    }
  }
}

TEST_CASE("parameter vector round-trips") {
  std::mt19937_64 rng(3);
  for (int dim : {2, 3}) {
    SplatScene scene = oracle::random_scene(dim, 7, rng);
    const Vec theta = scene.parameters();
    CHECK(theta.size() == 7 * scene.params_per_splat());
    SplatScene other = scene;
    for (auto& s : other.splats) s.opacity_logit = 0.0;
    other.set_parameters(theta);
    CHECK(other.parameters() == theta);
    for (std::size_t i = 0; i < scene.splats.size(); ++i) {
      CHECK(other.splats[i].position == scene.splats[i].position);
      CHECK(other.splats[i].color == scene.splats[i].color);
    }
    CHECK_THROWS_AS(scene.set_parameters(Vec(3)), ParameterError);
  }
}

TEST_CASE("empty scene renders the background") {
  SplatScene scene;
  scene.background = Eigen::Vector3d(0.1, 0.6, 0.9);
  const auto view = render(scene, planar_camera(8, 12));
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 12; ++c) CHECK(view.pixel(r, c) == scene.background);
  CHECK(view.transmittance == Vec::Ones(96));
}

TEST_CASE("opaque splat at a pixel centre shows its color") {
  SplatScene scene;
  const Eigen::Vector3d color(0.9, 0.2, 0.4);
  scene.splats.push_back(splat_2d((10 + 0.5) / 32.0, (20 + 0.5) / 32.0, 0.05, color, 12.0, 0.0));
  const auto view = render(scene, planar_camera(32, 32));
  CHECK((view.pixel(20, 10) - color).norm() < 1e-3);
}

TEST_CASE("two overlapping splats match the scalar compositing reference") {
  SplatScene scene;
  scene.background = Eigen::Vector3d(0.3, 0.3, 0.3);
  scene.splats.push_back(splat_2d(0.45, 0.5, 0.12, {1.0, 0.0, 0.0}, 1.5, 0.7));
  scene.splats.push_back(splat_2d(0.55, 0.48, 0.1, {0.0, 0.2, 1.0}, 0.5, 0.2));
  scene.splats[1].log_scale[0] = std::log(0.2);
  scene.splats[1].angle = 0.6;
  for (double az : {0.0, 0.4, 2.0}) {
    const CameraPose cam = planar_camera(24, 20, az);
    const auto view = render(scene, cam);
    double worst = 0.0;
    for (int r = 0; r < 24; ++r)
      for (int c = 0; c < 20; ++c) worst = std::max(worst, (view.pixel(r, c) - oracle::composite_pixel_2d(scene, cam, r, c)).norm());
    CHECK(worst < 1e-10);
  }
}

TEST_CASE("random scenes match the scalar reference and stay in range") {
  std::mt19937_64 rng(4);
  const SplatScene scene = oracle::random_scene(2, 25, rng);
  const CameraPose cam = planar_camera(20, 20, 0.3);
  const auto view = render(scene, cam);
  for (int r = 0; r < 20; ++r)
    for (int c = 0; c < 20; ++c) CHECK((view.pixel(r, c) - oracle::composite_pixel_2d(scene, cam, r, c)).norm() < 1e-10);
  CHECK(view.pixels.minCoeff() >= 0.0);
  CHECK(view.pixels.maxCoeff() <= 1.0);
  CHECK(view.transmittance.minCoeff() > 0.0);
  CHECK(view.transmittance.maxCoeff() <= 1.0);
}

TEST_CASE("storage order does not change the image when depth keys differ") {
  std::mt19937_64 rng(5);
  SplatScene scene = oracle::random_scene(2, 12, rng);
  SplatScene shuffled = scene;
  std::shuffle(shuffled.splats.begin(), shuffled.splats.end(), rng);
  const CameraPose cam = planar_camera(16, 16);
  CHECK((render(scene, cam).pixels - render(shuffled, cam).pixels).cwiseAbs().maxCoeff() < 1e-15);

  SplatScene s3 = oracle::random_scene(3, 12, rng);
  SplatScene s3b = s3;
  std::reverse(s3b.splats.begin(), s3b.splats.end());
  const CameraPose orbit = orbit_camera(0.7, 0.3, 4.0, 16, 16);
  CHECK((render(s3, orbit).pixels - render(s3b, orbit).pixels).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("rendering is deterministic and thread-count independent") {
  std::mt19937_64 rng(6);
  const SplatScene scene = oracle::random_scene(3, 20, rng);
  const CameraPose cam = orbit_camera(1.0, 0.2, 4.0, 32, 32);
  const Vec g = oracle::random_vec(32 * 32 * 3, rng);
  const auto a = render(scene, cam);
  const Vec ga = render_backward(scene, cam, g);
  set_num_threads(3);
  const auto b = render(scene, cam);
  const Vec gb = render_backward(scene, cam, g);
  set_num_threads(1);
  CHECK(a.pixels == b.pixels);
  CHECK(ga == gb);
}

TEST_CASE("zero upstream gradient gives zero parameter gradient") {
  std::mt19937_64 rng(7);
  const SplatScene scene = oracle::random_scene(2, 5, rng);
  const Vec g = render_backward(scene, planar_camera(8, 8), Vec::Zero(8 * 8 * 3));
  CHECK(g.size() == scene.num_parameters());
  CHECK(g.cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(render_backward(scene, planar_camera(8, 8), Vec::Zero(5)), ParameterError);
}

TEST_CASE("color gradient of an isolated splat equals the forward weights") {
  SplatScene scene;
  scene.background = Eigen::Vector3d(0.5, 0.5, 0.5);
  scene.splats.push_back(splat_2d(0.5, 0.5, 0.1, {0.2, 0.7, 0.1}, 0.3, 0.0));
  const CameraPose cam = planar_camera(16, 16);
  std::mt19937_64 rng(8);
  const Vec gp = oracle::random_vec(16 * 16 * 3, rng);
  const Vec grad = render_backward(scene, cam, gp);
  // sigma at each pixel from the transmittance left behind: T = 1 - sigma.
  const auto view = render(scene, cam);
  Eigen::Vector3d expect = Eigen::Vector3d::Zero();
  for (int p = 0; p < 256; ++p) expect += (1.0 - view.transmittance[p]) * gp.segment<3>(p * 3);
  CHECK((grad.segment<3>(scene.color_offset()) - expect).norm() < 1e-12 * expect.norm());
}

TEST_CASE("single-splat gradients match central differences") {
  for (int dim : {2, 3}) {
    std::mt19937_64 rng(9 + dim);
    SplatScene scene = oracle::random_scene(dim, 1, rng);
    if (dim == 2) scene.splats[0].position << 0.5, 0.45;
    const CameraPose cam = dim == 2 ? planar_camera(16, 16, 0.2) : orbit_camera(0.3, 0.2, 3.0, 16, 16);
    const Vec gp = oracle::random_vec(16 * 16 * 3, rng);
    auto loss = [&](const Vec& theta) {
      SplatScene s = scene;
      s.set_parameters(theta);
      return gp.dot(render(s, cam).pixels);
    };
    const auto rep = oracle::fd_check(loss, scene.parameters(), render_backward(scene, cam, gp), 1e-4, 1e-8);
    INFO("dim " << dim << " worst parameter " << rep.worst);
    CHECK(rep.max_rel < 1e-3);
  }
}

TEST_CASE("20-splat gradients match central differences at three cameras") {
  for (int dim : {2, 3}) {
    std::mt19937_64 rng(20 + dim);
    const SplatScene scene = oracle::random_scene(dim, 20, rng);
    std::vector<CameraPose> cams;
    for (double az : {0.0, 2.1, 4.2}) cams.push_back(dim == 2 ? planar_camera(24, 24, az) : orbit_camera(az, 0.25, 3.5, 24, 24));
    for (const auto& cam : cams) {
      const Vec gp = oracle::random_vec(24 * 24 * 3, rng);
      auto loss = [&](const Vec& theta) {
        SplatScene s = scene;
        s.set_parameters(theta);
        return gp.dot(render(s, cam).pixels);
      };
      const auto rep = oracle::fd_check(loss, scene.parameters(), render_backward(scene, cam, gp), 1e-4, 1e-8);
      INFO("dim " << dim << " azimuth " << cam.azimuth << " worst parameter " << rep.worst);
      CHECK(rep.max_rel < 1e-3);
    }
  }
}

TEST_CASE("mismatched camera and scene dimension") {
  std::mt19937_64 rng(10);
  const SplatScene scene = oracle::random_scene(2, 2, rng);
  CHECK_THROWS_AS(render(scene, orbit_camera(0.0, 0.0, 4.0, 8, 8)), ParameterError);
}

TEST_CASE("scene JSON round-trips exactly") {
  std::mt19937_64 rng(11);
  for (int dim : {2, 3}) {
    const SplatScene scene = oracle::random_scene(dim, 6, rng);
    const SplatScene back = scene_from_json(scene_to_json(scene));
    CHECK(back.dim == dim);
    CHECK(back.parameters() == scene.parameters());
    CHECK(back.background == scene.background);
    for (std::size_t i = 0; i < 6; ++i) CHECK(back.splats[i].depth == scene.splats[i].depth);
  }
  CHECK_THROWS_AS(scene_from_json({{"schema", "nope"}}), ConfigError);
}

TEST_CASE("SPLT1 round-trips at float precision") {
  std::mt19937_64 rng(12);
  for (int dim : {2, 3}) {
    const SplatScene scene = oracle::random_scene(dim, 9, rng);
    const auto path = scratch("scene" + std::to_string(dim) + ".splt");
    save_scene(path.string(), scene);
    std::ifstream f(path, std::ios::binary);
    char magic[5];
    f.read(magic, 5);
    CHECK(std::string(magic, 5) == "SPLT1");
    const std::size_t per = static_cast<std::size_t>(2 * dim + (dim == 2 ? 1 : 4) + 3 + 1 + 1);
    CHECK(fs::file_size(path) == 5 + 8 + 12 + 4 * per * 9);
    const SplatScene back = load_scene(path.string());
    CHECK(back.dim == dim);
    CHECK(back.size() == 9);
    const Vec a = scene.parameters(), b = back.parameters();
    for (Eigen::Index k = 0; k < a.size(); ++k) CHECK(b[k] == static_cast<double>(static_cast<float>(a[k])));
  }
  const auto bad = scratch("bad.splt");
  std::ofstream(bad, std::ios::binary) << "NOTASCENE";
  CHECK_THROWS_AS(read_scene_binary(bad.string()), IoError);
  const auto truncated = scratch("short.splt");
  std::ofstream(truncated, std::ios::binary) << "SPLT1";
  CHECK_THROWS_AS(read_scene_binary(truncated.string()), IoError);
}

TEST_CASE("PNG output has the right signature and header") {
  std::mt19937_64 rng(13);
  const SplatScene scene = oracle::random_scene(2, 4, rng);
  const auto view = render(scene, planar_camera(10, 14));
  const auto path = scratch("view.png");
  write_png(path.string(), view);
  std::ifstream f(path, std::ios::binary);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  REQUIRE(bytes.size() > 33);
  const unsigned char sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  CHECK(std::equal(sig, sig + 8, bytes.begin()));
  CHECK(std::string(bytes.begin() + 12, bytes.begin() + 16) == "IHDR");
  auto be32 = [&](std::size_t at) {
    return (bytes[at] << 24) | (bytes[at + 1] << 16) | (bytes[at + 2] << 8) | bytes[at + 3];
  };
  CHECK(be32(16) == 14);
  CHECK(be32(20) == 10);
  CHECK(bytes[24] == 8);
  CHECK(bytes[25] == 2);
  CHECK_THROWS_AS(write_png(path.string(), Vec::Zero(5), 10, 14), ParameterError);
}
