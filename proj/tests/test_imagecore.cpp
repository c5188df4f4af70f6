#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cellpheno/imageio.hpp"
#include "cellpheno/manifest.hpp"
#include "cellpheno/raster.hpp"
#include "cellpheno/util.hpp"

#include <filesystem>
#include <fstream>

using namespace cellpheno;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  const fs::path p = fs::temp_directory_path() / "cellpheno_test_imagecore";
  fs::create_directories(p);
  return p;
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p);
  out << s;
}

CellInstance cell_from_pixels(std::string id, std::vector<PixelCoord> pixels, Eigen::Index rows,
                              Eigen::Index cols) {
  raster::Mask m = raster::Mask::Zero(rows, cols);
  for (const auto& p : pixels) m(p.y, p.x) = 1;
  CellInstance c;
  c.cell_id = std::move(id);
  c.image_id = "img";
  c.mask = std::move(pixels);
  c.boundary = raster::outer_boundary(m);
  return c;
}

}  // namespace

TEST_CASE("manifest parses two rows with case-insensitive groups") {
  const fs::path dir = temp_dir();
  write_text(dir / "m.csv", "path,id,group\na.png,a,MUT\nb.png,b,wt\n");
  const CohortManifest m = load_manifest(dir / "m.csv");
  REQUIRE(m.entries.size() == 2);
  CHECK(m.entries[0].id == "a");
  CHECK(m.entries[0].group == Group::MUT);
  CHECK(m.entries[1].group == Group::WT);

  write_text(dir / "lower.csv", "path,id,group\na.png,a,mut\n");
  CHECK(load_manifest(dir / "lower.csv").entries[0].group == Group::MUT);
}

TEST_CASE("manifest rejects duplicate ids and bad labels") {
  const fs::path dir = temp_dir();
  write_text(dir / "dup.csv", "path,id,group\na.png,a,MUT\nb.png,a,WT\n");
  CHECK_THROWS_AS(load_manifest(dir / "dup.csv"), DuplicateId);
  write_text(dir / "bad.csv", "path,id,group\na.png,a,XX\n");
  CHECK_THROWS_AS(load_manifest(dir / "bad.csv"), BadLabel);
}

TEST_CASE("manifest load is order-preserving and idempotent") {
  const fs::path dir = temp_dir();
  const std::string text = "path,id,group\nz.png,z,WT\na.png,a,MUT\nq.png,q,wt\n";
  write_text(dir / "ord.csv", text);
  const CohortManifest m1 = load_manifest(dir / "ord.csv");
  const CohortManifest m2 = load_manifest(dir / "ord.csv");
  REQUIRE(m1.entries.size() == 3);
  CHECK(m1.entries[0].id == "z");
  CHECK(m1.entries[1].id == "a");
  CHECK(m1.entries[2].id == "q");
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(m1.entries[i].id == m2.entries[i].id);
    CHECK(m1.entries[i].group == m2.entries[i].group);
  }
  // round trip through the writer
  write_text(dir / "rt.csv", manifest_to_csv(m1));
  const CohortManifest m3 = load_manifest(dir / "rt.csv");
  CHECK(m3.entries.size() == 3);
  CHECK(m3.entries[2].id == "q");
}

TEST_CASE("missing image raises MissingImage") {
  ManifestEntry e{"definitely_not_here.png", "x", Group::MUT};
  CHECK_THROWS_AS(load_region_image(e, temp_dir()), MissingImage);
}

TEST_CASE("instance mask rasterization") {
  SUBCASE("single 3-pixel cell") {
    const auto c = cell_from_pixels("img_c0001", {{2, 2}, {3, 2}, {2, 3}}, 8, 8);
    const PlaneU16 r = rasterize_instance_masks({c}, 8, 8);
    CHECK((r == 1).count() == 3);
    CHECK((r != 0).count() == 3);
  }
  SUBCASE("empty list gives all-zero raster") {
    const PlaneU16 r = rasterize_instance_masks({}, 8, 8);
    CHECK((r != 0).count() == 0);
  }
  SUBCASE("overlap throws") {
    const auto a = cell_from_pixels("img_c0001", {{2, 2}, {3, 2}}, 8, 8);
    const auto b = cell_from_pixels("img_c0002", {{3, 2}, {4, 2}}, 8, 8);
    CHECK_THROWS_AS(rasterize_instance_masks({a, b}, 8, 8), OverlapError);
  }
  SUBCASE("labels are 1-based in cell_id order") {
    const auto a = cell_from_pixels("img_c0002", {{5, 5}}, 8, 8);
    const auto b = cell_from_pixels("img_c0001", {{1, 1}}, 8, 8);
    const PlaneU16 r = rasterize_instance_masks({a, b}, 8, 8);
    CHECK(r(1, 1) == 1);  // img_c0001 sorts first
    CHECK(r(5, 5) == 2);
  }
}

TEST_CASE("label raster write/read round trip reproduces masks") {
  const fs::path dir = temp_dir();
  std::vector<CellInstance> cells;
  cells.push_back(cell_from_pixels("img_c0001", {{2, 2}, {3, 2}, {2, 3}, {3, 3}}, 16, 16));
  cells.push_back(cell_from_pixels("img_c0002", {{10, 10}, {11, 10}, {10, 11}, {11, 11}, {12, 10}},
                                   16, 16));
  const PlaneU16 raster = rasterize_instance_masks(cells, 16, 16);
  io::write_gray16_png(dir / "mask.png", raster);
  const PlaneU16 back = io::read_gray16_png(dir / "mask.png");
  REQUIRE(back.rows() == 16);
  CHECK((back != raster).count() == 0);

  const auto cells2 = cells_from_label_raster(back, "img");
  REQUIRE(cells2.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(cells2[i].cell_id == cells[i].cell_id);
    REQUIRE(cells2[i].mask.size() == cells[i].mask.size());
    CHECK(cells2[i].mask == cells[i].mask);
  }
}

TEST_CASE("rgb8 PNG and TIFF round trips") {
  const fs::path dir = temp_dir();
  PlaneU8 r(40, 50), g(40, 50), b(40, 50);
  Rng rng(99);
  for (Eigen::Index y = 0; y < 40; ++y)
    for (Eigen::Index x = 0; x < 50; ++x) {
      r(y, x) = static_cast<std::uint8_t>(rng.uniform_int(256));
      g(y, x) = static_cast<std::uint8_t>(rng.uniform_int(256));
      b(y, x) = static_cast<std::uint8_t>(rng.uniform_int(256));
    }
  for (const char* name : {"t.png", "t.tif"}) {
    io::write_rgb8(dir / name, r, g, b);
    const io::Rgb8 back = io::read_rgb8(dir / name);
    REQUIRE(back.r.rows() == 40);
    REQUIRE(back.r.cols() == 50);
    CHECK((back.r != r).count() == 0);
    CHECK((back.g != g).count() == 0);
    CHECK((back.b != b).count() == 0);
  }
}

TEST_CASE("float TIFF round trip") {
  const fs::path dir = temp_dir();
  PlaneD img(13, 17);
  for (Eigen::Index y = 0; y < 13; ++y)
    for (Eigen::Index x = 0; x < 17; ++x) img(y, x) = 0.01 * static_cast<double>(y * 17 + x);
  io::write_gray_f32_tiff(dir / "f.tif", img);
  const PlaneD back = io::read_gray_f32_tiff(dir / "f.tif");
  REQUIRE(back.rows() == 13);
  CHECK((back - img).abs().maxCoeff() < 1e-6);
}

TEST_CASE("boundary tracing and chain perimeter basics") {
  // 3x3 solid block: its traced ring has 8 pixels, all-axial steps, 4 corners
  raster::Mask m = raster::Mask::Zero(10, 10);
  for (int y = 2; y <= 4; ++y)
    for (int x = 2; x <= 4; ++x) m(y, x) = 1;
  const auto boundary = raster::outer_boundary(m);
  CHECK(boundary.size() == 8);
  const double p = raster::chain_perimeter(boundary);
  CHECK(p == doctest::Approx(0.980 * 8 - 0.091 * 4));
}

TEST_CASE("fill holes and largest component") {
  raster::Mask m = raster::Mask::Zero(12, 12);
  for (int y = 2; y <= 8; ++y)
    for (int x = 2; x <= 8; ++x) m(y, x) = 1;
  m(5, 5) = 0;   // interior hole
  m(10, 10) = 1;  // separate speck
  const raster::Mask filled = raster::fill_holes(m);
  CHECK(filled(5, 5) == 1);
  const raster::Mask largest = raster::largest_four_connected(filled);
  CHECK(largest(10, 10) == 0);
  CHECK(largest(4, 4) == 1);
}
