#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cellpheno/segment.hpp"
#include "cellpheno/util.hpp"

#include <cmath>
#include <deque>
#include <set>

using namespace cellpheno;
using namespace cellpheno::segment;

namespace {

ScalarImage scalar(PlaneD v) {
  ScalarImage s;
  s.values = std::move(v);
  return s;
}

// isotropic Gaussian bump of spatial std s, amplitude amp
PlaneD gaussian_blob(Eigen::Index n, double s, double amp) {
  PlaneD img(n, n);
  const double c = (n - 1) / 2.0;
  for (Eigen::Index y = 0; y < n; ++y)
    for (Eigen::Index x = 0; x < n; ++x)
      img(y, x) = amp * std::exp(-((x - c) * (x - c) + (y - c) * (y - c)) / (2 * s * s));
  return img;
}

// brute-force hysteresis oracle: threshold at t_low, 8-connected flood,
// keep components holding a strong pixel
raster::Mask hysteresis_oracle(const ScalarImage& f, double lo, double hi) {
  const Eigen::Index rows = f.rows(), cols = f.cols();
  raster::Mask weak(rows, cols);
  for (Eigen::Index y = 0; y < rows; ++y)
    for (Eigen::Index x = 0; x < cols; ++x) weak(y, x) = f.values(y, x) >= lo ? 1 : 0;
  auto [labels, n] = raster::label_components(weak, raster::Connectivity::Eight);
  std::set<int> keep;
  for (Eigen::Index y = 0; y < rows; ++y)
    for (Eigen::Index x = 0; x < cols; ++x)
      if (f.values(y, x) >= hi && labels(y, x) > 0) keep.insert(labels(y, x));
  raster::Mask out = raster::Mask::Zero(rows, cols);
  for (Eigen::Index y = 0; y < rows; ++y)
    for (Eigen::Index x = 0; x < cols; ++x)
      if (keep.count(labels(y, x))) out(y, x) = 1;
  return out;
}

}  // namespace

TEST_CASE("constant image has zero Hessian eigenvalues") {
  const HessianEigenField f = hessian_eigen(scalar(PlaneD::Constant(64, 64, 3.7)), 2.0);
  CHECK(f.lambda1.values.abs().maxCoeff() < 1e-10);
  CHECK(f.lambda2.values.abs().maxCoeff() < 1e-10);
}

TEST_CASE("lambda1 <= lambda2 everywhere on a random image") {
  Rng rng(3);
  PlaneD v(40, 40);
  for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = rng.uniform();
  const HessianEigenField f = hessian_eigen(scalar(std::move(v)), 1.5);
  CHECK(((f.lambda2.values - f.lambda1.values) >= -1e-12).all());
}

TEST_CASE("Gaussian blob center matches the analytic Hessian") {
  // image A exp(-r^2/2s^2) smoothed at sigma has center eigenvalues
  // lambda = A sigma^2 s^2 / (s^2 + sigma^2)^2 after negation and scaling
  const double s = 4.0, sigma = 4.0, amp = 1.0;
  const Eigen::Index n = 65;
  const HessianEigenField f = hessian_eigen(scalar(gaussian_blob(n, s, amp)), sigma);
  const double expected = amp * sigma * sigma * s * s / std::pow(s * s + sigma * sigma, 2);
  const Eigen::Index c = (n - 1) / 2;
  const double l1 = f.lambda1.values(c, c), l2 = f.lambda2.values(c, c);
  CHECK(l1 > 0);
  CHECK(std::abs(l1 / l2 - 1.0) < 0.05);
  CHECK(l1 == doctest::Approx(expected).epsilon(0.05));
  CHECK(l2 == doctest::Approx(expected).epsilon(0.05));
}

TEST_CASE("bright ridge has one near-zero and one positive eigenvalue") {
  const Eigen::Index n = 65;
  const double s = 3.0;
  PlaneD img(n, n);
  const double c = (n - 1) / 2.0;
  for (Eigen::Index y = 0; y < n; ++y)
    for (Eigen::Index x = 0; x < n; ++x) img(y, x) = std::exp(-(x - c) * (x - c) / (2 * s * s));
  const HessianEigenField f = hessian_eigen(scalar(std::move(img)), 2.0);
  const auto ci = static_cast<Eigen::Index>(c);
  const double l1 = f.lambda1.values(ci, ci), l2 = f.lambda2.values(ci, ci);
  CHECK(l2 > 0);
  CHECK(std::abs(l1) < 0.05 * l2);
}

TEST_CASE("enhancement response formula") {
  SUBCASE("zero when lambda1 <= 0") {
    CHECK(enhancement_response(0.0, 1.0, 0.5, 1.0) == 0.0);
    CHECK(enhancement_response(-0.5, 1.0, 0.5, 1.0) == 0.0);
    CHECK(enhancement_response(0.5, -1.0, 0.5, 1.0) == 0.0);
  }
  SUBCASE("lambda1 = lambda2 = beta with alpha 0.5") {
    const double beta = 0.8;
    const double f = enhancement_response(beta, beta, 0.5, beta);
    const double expected = (1.0 - std::exp(-2.0)) * (1.0 - std::exp(-1.0));
    CHECK(f == doctest::Approx(expected).epsilon(1e-12));
    CHECK(f == doctest::Approx(0.5466).epsilon(1e-3));
  }
  SUBCASE("output bounded in [0,1)") {
    Rng rng(9);
    for (int i = 0; i < 1000; ++i) {
      const double f = enhancement_response(rng.uniform(0, 5), rng.uniform(0, 5),
                                            rng.uniform(0.1, 2), rng.uniform(0.1, 2));
      CHECK(f >= 0.0);
      CHECK(f < 1.0);
    }
  }
  SUBCASE("monotone in magnitude at fixed ratio") {
    double prev = 0;
    for (double scale = 0.1; scale < 3.0; scale += 0.1) {
      const double f = enhancement_response(0.8 * scale, 1.0 * scale, 0.5, 1.0);
      CHECK(f >= prev);
      prev = f;
    }
  }
}

TEST_CASE("enhance output lies in [0,1) and peaks at blob centers") {
  EnhancementParams p;
  p.sigmas = {2, 3, 4, 6};
  const Eigen::Index n = 97;
  PlaneD img = gaussian_blob(n, 4.0, 1.0);
  const ScalarImage out = enhance(scalar(std::move(img)), p);
  CHECK(out.values.minCoeff() >= 0.0);
  CHECK(out.values.maxCoeff() < 1.0);
  const Eigen::Index c = (n - 1) / 2;
  CHECK(out.values(c, c) > 0.5);
  CHECK(out.values(c, c) == out.values.maxCoeff());
}

TEST_CASE("hysteresis") {
  SUBCASE("all below t_low gives empty mask") {
    const raster::Mask m = hysteresis(scalar(PlaneD::Constant(16, 16, 0.05)), 0.2, 0.5);
    CHECK((m != 0).count() == 0);
  }
  SUBCASE("plateau at 1.0 surrounded by 0 is kept exactly") {
    PlaneD v = PlaneD::Zero(16, 16);
    for (int y = 4; y <= 8; ++y)
      for (int x = 5; x <= 9; ++x) v(y, x) = 1.0;
    const raster::Mask m = hysteresis(scalar(std::move(v)), 0.2, 0.5);
    CHECK((m != 0).count() == 25);
    CHECK(m(4, 5) == 1);
    CHECK(m(3, 5) == 0);
  }
  SUBCASE("skirt-only regions are excluded, connected skirts kept") {
    PlaneD v = PlaneD::Zero(32, 32);
    // peak with a connected skirt
    for (int y = 5; y <= 9; ++y)
      for (int x = 5; x <= 9; ++x) v(y, x) = 0.3;
    v(7, 7) = 0.8;
    // skirt-only island
    for (int y = 20; y <= 24; ++y)
      for (int x = 20; x <= 24; ++x) v(y, x) = 0.3;
    const ScalarImage f = scalar(std::move(v));
    const raster::Mask m = hysteresis(f, 0.2, 0.5);
    CHECK(m(7, 7) == 1);
    CHECK(m(5, 5) == 1);
    CHECK(m(22, 22) == 0);
  }
  SUBCASE("matches brute-force oracle on random smooth fields") {
    Rng rng(17);
    for (int trial = 0; trial < 5; ++trial) {
      PlaneD v(48, 48);
      for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = rng.uniform();
      // crude smoothing to create connected structures
      PlaneD s = PlaneD::Zero(48, 48);
      for (Eigen::Index y = 1; y < 47; ++y)
        for (Eigen::Index x = 1; x < 47; ++x)
          s(y, x) = v.block(y - 1, x - 1, 3, 3).mean();
      const ScalarImage f = scalar(std::move(s));
      const raster::Mask fast = hysteresis(f, 0.45, 0.62);
      const raster::Mask slow = hysteresis_oracle(f, 0.45, 0.62);
      CHECK((fast != slow).count() == 0);
    }
  }
  SUBCASE("equal thresholds reduce to plain thresholding") {
    Rng rng(23);
    PlaneD v(20, 20);
    for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = rng.uniform();
    const ScalarImage f = scalar(std::move(v));
    const raster::Mask m = hysteresis(f, 0.5, 0.5);
    for (Eigen::Index y = 0; y < 20; ++y)
      for (Eigen::Index x = 0; x < 20; ++x)
        CHECK(static_cast<bool>(m(y, x)) == (f.values(y, x) >= 0.5));
  }
}

namespace {

// concentration image with a filled disk of value `conc`
ScalarImage disk_concentration(Eigen::Index n, double cx, double cy, double radius, double conc) {
  PlaneD v = PlaneD::Zero(n, n);
  for (Eigen::Index y = 0; y < n; ++y)
    for (Eigen::Index x = 0; x < n; ++x)
      if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= radius * radius) v(y, x) = conc;
  ScalarImage s;
  s.values = std::move(v);
  s.range = ValueRange::OpticalDensity;
  return s;
}

raster::Mask disk_mask(Eigen::Index n, double cx, double cy, double radius) {
  raster::Mask m = raster::Mask::Zero(n, n);
  for (Eigen::Index y = 0; y < n; ++y)
    for (Eigen::Index x = 0; x < n; ++x)
      if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= radius * radius) m(y, x) = 1;
  return m;
}

}  // namespace

TEST_CASE("postprocess") {
  EnhancementParams p;
  const Eigen::Index n = 64;

  SUBCASE("solid disk survives as one hole-free cell") {
    const raster::Mask m = disk_mask(n, 32, 32, 10);
    const auto cells = postprocess(m, disk_concentration(n, 32, 32, 10, 0.8), p, "img");
    REQUIRE(cells.size() == 1);
    CHECK(cells[0].cell_id == "img_c0001");
    CHECK(cells[0].mask.size() > 250);
    // hole-free: filling the rasterized mask changes nothing
    raster::Mask back = raster::Mask::Zero(n, n);
    for (const auto& px : cells[0].mask) back(px.y, px.x) = 1;
    CHECK((raster::fill_holes(back) != back).count() == 0);
  }
  SUBCASE("interior hole is filled") {
    raster::Mask m = disk_mask(n, 32, 32, 10);
    m(32, 32) = 0;
    ScalarImage conc = disk_concentration(n, 32, 32, 10, 0.8);
    const auto cells = postprocess(m, conc, p, "img");
    REQUIRE(cells.size() == 1);
    bool has_center = false;
    for (const auto& px : cells[0].mask)
      if (px.x == 32 && px.y == 32) has_center = true;
    CHECK(has_center);
  }
  SUBCASE("small components are removed") {
    raster::Mask m = raster::Mask::Zero(n, n);
    for (int y = 10; y < 14; ++y)
      for (int x = 10; x < 14; ++x) m(y, x) = 1;  // 16 px < min_area 30
    const auto cells = postprocess(m, disk_concentration(n, 12, 12, 4, 0.9), p, "img");
    CHECK(cells.empty());
  }
  SUBCASE("too-pale components are removed") {
    const raster::Mask m = disk_mask(n, 32, 32, 10);
    // concentration 0.05 -> transmission ~227 > 180 cutoff
    const auto cells = postprocess(m, disk_concentration(n, 32, 32, 10, 0.05), p, "img");
    CHECK(cells.empty());
  }
  SUBCASE("border-touching components are removed") {
    const raster::Mask m = disk_mask(n, 0, 32, 10);
    const auto cells = postprocess(m, disk_concentration(n, 0, 32, 10, 0.9), p, "img");
    CHECK(cells.empty());
  }
  SUBCASE("smoothed square loses perimeter, keeps area within 10%") {
    raster::Mask m = raster::Mask::Zero(n, n);
    for (int y = 20; y <= 43; ++y)
      for (int x = 20; x <= 43; ++x) m(y, x) = 1;
    ScalarImage conc;
    conc.values = PlaneD::Zero(n, n);
    for (int y = 20; y <= 43; ++y)
      for (int x = 20; x <= 43; ++x) conc.values(y, x) = 0.8;
    const auto cells = postprocess(m, conc, p, "img");
    REQUIRE(cells.size() == 1);
    const double raw_perimeter = raster::chain_perimeter(raster::outer_boundary(m));
    const double smooth_perimeter = raster::chain_perimeter(cells[0].boundary);
    CHECK(smooth_perimeter < raw_perimeter);
    CHECK(std::abs(static_cast<double>(cells[0].mask.size()) - 576.0) < 57.6);
  }
  SUBCASE("output masks are disjoint, 4-connected, hole-free, border-free") {
    raster::Mask m = disk_mask(n, 20, 20, 8);
    const raster::Mask m2 = disk_mask(n, 44, 44, 9);
    for (Eigen::Index y = 0; y < n; ++y)
      for (Eigen::Index x = 0; x < n; ++x)
        if (m2(y, x)) m(y, x) = 1;
    ScalarImage conc = disk_concentration(n, 20, 20, 8, 0.8);
    for (Eigen::Index y = 0; y < n; ++y)
      for (Eigen::Index x = 0; x < n; ++x)
        if (m2(y, x)) conc.values(y, x) = 0.8;
    const auto cells = postprocess(m, conc, p, "img");
    REQUIRE(cells.size() == 2);
    raster::Mask seen = raster::Mask::Zero(n, n);
    for (const auto& cell : cells) {
      raster::Mask cm = raster::Mask::Zero(n, n);
      for (const auto& px : cell.mask) {
        CHECK(seen(px.y, px.x) == 0);  // disjoint
        seen(px.y, px.x) = 1;
        cm(px.y, px.x) = 1;
        CHECK(px.x > 0);
        CHECK(px.y > 0);
        CHECK(px.x < n - 1);
        CHECK(px.y < n - 1);
      }
      auto [labels, count] = raster::label_components(cm, raster::Connectivity::Four);
      CHECK(count == 1);
      CHECK((raster::fill_holes(cm) != cm).count() == 0);
    }
  }
}

TEST_CASE("EnhancementParams validation") {
  EnhancementParams p;
  p.t_low = 0.6;
  p.t_high = 0.4;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = {};
  p.sigmas = {3, 2};
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = {};
  p.min_area_px = 2;
  CHECK_THROWS_AS(p.validate(), ConfigError);
}
