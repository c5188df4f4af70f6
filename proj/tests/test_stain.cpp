#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cellpheno/stain.hpp"
#include "cellpheno/util.hpp"

using namespace cellpheno;
using namespace cellpheno::stain;

namespace {

RegionImage uniform_image(std::uint8_t r, std::uint8_t g, std::uint8_t b, Eigen::Index n = 8) {
  RegionImage img;
  img.id = "u";
  img.r = PlaneU8::Constant(n, n, r);
  img.g = PlaneU8::Constant(n, n, g);
  img.b = PlaneU8::Constant(n, n, b);
  return img;
}

}  // namespace

TEST_CASE("rgb_to_lab matches an independent reference implementation") {
  // reference values computed with scikit-image rgb2lab (D65)
  struct Case {
    double r, g, b, L, a, bb;
  };
  const Case cases[] = {
      {10, 200, 30, 70.500132, -70.513831, 64.940840},
      {240, 12, 128, 52.233128, 80.479523, -0.141499},
      {128, 128, 128, 53.585013, -0.001473, 0.002791},
      {0, 0, 0, 0.0, 0.0, 0.0},
  };
  for (const auto& c : cases) {
    const Eigen::Vector3d lab = rgb_to_lab(c.r, c.g, c.b);
    CHECK(lab.x() == doctest::Approx(c.L).epsilon(1e-4));
    CHECK(lab.y() == doctest::Approx(c.a).scale(1.0).epsilon(2e-3));
    CHECK(lab.z() == doctest::Approx(c.bb).scale(1.0).epsilon(2e-3));
  }
  // inverse direction against the same reference
  const Eigen::Vector3d rgb = lab_to_rgb({52.0, -30.0, 40.0});
  CHECK(rgb.x() == doctest::Approx(92.3387).epsilon(1e-3));
  CHECK(rgb.y() == doctest::Approx(136.0208).epsilon(1e-3));
  CHECK(rgb.z() == doctest::Approx(50.8488).epsilon(1e-3));
}

TEST_CASE("lab round trip is tight inside the gamut") {
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const double r = rng.uniform(5, 250), g = rng.uniform(5, 250), b = rng.uniform(5, 250);
    const Eigen::Vector3d back = lab_to_rgb(rgb_to_lab(r, g, b));
    CHECK(std::abs(back.x() - r) < 1e-6);
    CHECK(std::abs(back.y() - g) < 1e-6);
    CHECK(std::abs(back.z() - b) < 1e-6);
  }
}

TEST_CASE("uniform image stats have clamped std") {
  const LabStats s = compute_lab_stats(uniform_image(128, 128, 128));
  CHECK(s.std.x() == doctest::Approx(kMinStd));
  CHECK(s.std.y() == doctest::Approx(kMinStd));
  CHECK(s.std.z() == doctest::Approx(kMinStd));
  CHECK(s.mean.x() == doctest::Approx(53.585013).epsilon(1e-4));
}

TEST_CASE("stats are invariant under horizontal mirroring") {
  RegionImage img;
  img.r.resize(4, 6);
  img.g.resize(4, 6);
  img.b.resize(4, 6);
  Rng rng(11);
  for (Eigen::Index y = 0; y < 4; ++y)
    for (Eigen::Index x = 0; x < 6; ++x) {
      img.r(y, x) = static_cast<std::uint8_t>(rng.uniform_int(256));
      img.g(y, x) = static_cast<std::uint8_t>(rng.uniform_int(256));
      img.b(y, x) = static_cast<std::uint8_t>(rng.uniform_int(256));
    }
  RegionImage mirror = img;
  mirror.r = img.r.rowwise().reverse();
  mirror.g = img.g.rowwise().reverse();
  mirror.b = img.b.rowwise().reverse();
  const LabStats a = compute_lab_stats(img), b = compute_lab_stats(mirror);
  CHECK((a.mean - b.mean).norm() < 1e-9);
  CHECK((a.std - b.std).norm() < 1e-9);
}

TEST_CASE("two-pixel image stats match a scalar computation") {
  RegionImage img;
  img.r.resize(1, 2);
  img.g.resize(1, 2);
  img.b.resize(1, 2);
  img.r(0, 0) = 10;  img.g(0, 0) = 200; img.b(0, 0) = 30;
  img.r(0, 1) = 240; img.g(0, 1) = 12;  img.b(0, 1) = 128;
  const Eigen::Vector3d l0 = rgb_to_lab(10, 200, 30);
  const Eigen::Vector3d l1 = rgb_to_lab(240, 12, 128);
  const LabStats s = compute_lab_stats(img);
  CHECK((s.mean - 0.5 * (l0 + l1)).norm() < 1e-12);
  const Eigen::Vector3d expected_std = (0.5 * (l0 - l1)).cwiseAbs();
  CHECK((s.std - expected_std).norm() < 1e-9);
}

TEST_CASE("normalize_to_target with own stats is identity within quantization") {
  RegionImage img;
  img.r.resize(8, 8);
  img.g.resize(8, 8);
  img.b.resize(8, 8);
  Rng rng(21);
  for (Eigen::Index y = 0; y < 8; ++y)
    for (Eigen::Index x = 0; x < 8; ++x) {
      img.r(y, x) = static_cast<std::uint8_t>(20 + rng.uniform_int(200));
      img.g(y, x) = static_cast<std::uint8_t>(20 + rng.uniform_int(200));
      img.b(y, x) = static_cast<std::uint8_t>(20 + rng.uniform_int(200));
    }
  const RegionImage out = normalize_to_target(img, compute_lab_stats(img));
  for (Eigen::Index y = 0; y < 8; ++y)
    for (Eigen::Index x = 0; x < 8; ++x) {
      CHECK(std::abs(int(out.r(y, x)) - int(img.r(y, x))) <= 1);
      CHECK(std::abs(int(out.g(y, x)) - int(img.g(y, x))) <= 1);
      CHECK(std::abs(int(out.b(y, x)) - int(img.b(y, x))) <= 1);
    }
}

TEST_CASE("uniform image maps to shifted L target") {
  const RegionImage img = uniform_image(120, 120, 120);
  LabStats target = compute_lab_stats(img);
  target.mean.x() += 10.0;
  const RegionImage out = normalize_to_target(img, target);
  const LabStats result = compute_lab_stats(out);
  CHECK(result.mean.x() == doctest::Approx(target.mean.x()).epsilon(0.01));
  // still uniform
  CHECK(result.std.x() == doctest::Approx(kMinStd));
}

TEST_CASE("two-tone image reaches arbitrary target stats within 2%") {
  RegionImage img;
  img.r.resize(8, 8);
  img.g.resize(8, 8);
  img.b.resize(8, 8);
  for (Eigen::Index y = 0; y < 8; ++y)
    for (Eigen::Index x = 0; x < 8; ++x) {
      const bool tone = (x + y) % 2 == 0;
      img.r(y, x) = tone ? 90 : 150;
      img.g(y, x) = tone ? 60 : 170;
      img.b(y, x) = tone ? 110 : 140;
    }
  LabStats target;
  target.mean = Eigen::Vector3d(60.0, 8.0, -6.0);
  target.std = Eigen::Vector3d(9.0, 5.0, 4.0);
  const RegionImage out = normalize_to_target(img, target);
  const LabStats result = compute_lab_stats(out);
  for (int c = 0; c < 3; ++c) {
    CHECK(std::abs(result.mean(c) - target.mean(c)) < 0.02 * std::abs(target.mean(c)) + 0.2);
    CHECK(std::abs(result.std(c) - target.std(c)) < 0.02 * target.std(c) + 0.2);
  }
}

TEST_CASE("normalize_to_target is idempotent") {
  RegionImage img;
  img.r.resize(8, 8);
  img.g.resize(8, 8);
  img.b.resize(8, 8);
  Rng rng(31);
  for (Eigen::Index y = 0; y < 8; ++y)
    for (Eigen::Index x = 0; x < 8; ++x) {
      img.r(y, x) = static_cast<std::uint8_t>(40 + rng.uniform_int(160));
      img.g(y, x) = static_cast<std::uint8_t>(40 + rng.uniform_int(160));
      img.b(y, x) = static_cast<std::uint8_t>(40 + rng.uniform_int(160));
    }
  LabStats target;
  target.mean = Eigen::Vector3d(70.0, 12.0, -8.0);
  target.std = Eigen::Vector3d(8.0, 4.0, 3.0);
  const RegionImage once = normalize_to_target(img, target);
  const RegionImage twice = normalize_to_target(once, target);
  int max_delta = 0;
  for (Eigen::Index y = 0; y < 8; ++y)
    for (Eigen::Index x = 0; x < 8; ++x) {
      max_delta = std::max(max_delta, std::abs(int(once.r(y, x)) - int(twice.r(y, x))));
      max_delta = std::max(max_delta, std::abs(int(once.g(y, x)) - int(twice.g(y, x))));
      max_delta = std::max(max_delta, std::abs(int(once.b(y, x)) - int(twice.b(y, x))));
    }
  CHECK(max_delta <= 2);
}

TEST_CASE("optical density is monotone decreasing in pixel value") {
  double prev = optical_density(0);
  for (int v = 1; v <= 255; ++v) {
    const double od = optical_density(v);
    CHECK(od < prev);
    prev = od;
  }
  CHECK(optical_density(255) == doctest::Approx(0.0));
}

TEST_CASE("white pixel deconvolves to zero concentrations") {
  const auto [h, e] = deconvolve(uniform_image(255, 255, 255), StainMatrix::standard_he());
  CHECK(h.values.abs().maxCoeff() < 1e-12);
  CHECK(e.values.abs().maxCoeff() < 1e-12);
}

TEST_CASE("forward model then deconvolution recovers planted concentrations") {
  const StainMatrix stains = StainMatrix::standard_he();
  SUBCASE("single pixel, known concentrations") {
    const PlaneD ch = PlaneD::Constant(4, 4, 0.7);
    const PlaneD ce = PlaneD::Constant(4, 4, 0.0);
    const RegionImage img = render_from_concentrations(ch, ce, stains, "t", Group::MUT);
    const auto [h, e] = deconvolve(img, stains);
    CHECK(std::abs(h.values(0, 0) - 0.7) < 1e-2);
    CHECK(std::abs(e.values(0, 0) - 0.0) < 1e-2);
  }
  SUBCASE("noise-free grid of concentrations, max error 1e-2") {
    const int n = 16;
    PlaneD ch(n, n), ce(n, n);
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        ch(y, x) = 1.5 * y / (n - 1.0);
        ce(y, x) = 0.8 * x / (n - 1.0);
      }
    const RegionImage img = render_from_concentrations(ch, ce, stains, "t", Group::MUT);
    const auto [h, e] = deconvolve(img, stains);
    CHECK((h.values - ch).abs().maxCoeff() < 1e-2);
    CHECK((e.values - ce).abs().maxCoeff() < 1e-2);
  }
  SUBCASE("additive noise sigma=1 keeps mean absolute error under 0.05") {
    const int n = 64;
    const PlaneD ch = PlaneD::Constant(n, n, 0.9);
    const PlaneD ce = PlaneD::Constant(n, n, 0.3);
    RegionImage img = render_from_concentrations(ch, ce, stains, "t", Group::MUT);
    Rng rng(77);
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        auto jitter = [&](std::uint8_t v) {
          return static_cast<std::uint8_t>(
              std::clamp(std::lround(v + rng.normal(0.0, 1.0)), 0L, 255L));
        };
        img.r(y, x) = jitter(img.r(y, x));
        img.g(y, x) = jitter(img.g(y, x));
        img.b(y, x) = jitter(img.b(y, x));
      }
    const auto [h, e] = deconvolve(img, stains);
    CHECK((h.values - ch).abs().mean() < 0.05);
    CHECK((e.values - ce).abs().mean() < 0.05);
  }
}

TEST_CASE("near-collinear stain vectors are rejected") {
  const StainMatrix bad =
      StainMatrix::from_columns({0.5, 0.5, 0.70710678}, {0.5 + 1e-9, 0.5, 0.70710678});
  RegionImage img = uniform_image(100, 120, 140);
  CHECK_THROWS_AS(deconvolve(img, bad), SingularStains);
}
