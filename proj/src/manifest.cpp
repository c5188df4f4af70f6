#include "cellpheno/manifest.hpp"

#include "cellpheno/imageio.hpp"
#include "cellpheno/raster.hpp"
#include "cellpheno/util.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

namespace cellpheno {

CohortManifest load_manifest(const std::filesystem::path& csv_path) {
  const std::string text = read_file(csv_path);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty manifest: " + csv_path.string());
  auto header = split_csv_line(line);
  if (header.size() != 3 || header[0] != "path" || header[1] != "id" || header[2] != "group")
    throw IoError("manifest header must be path,id,group: " + csv_path.string());

  CohortManifest m;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto f = split_csv_line(line);
    if (f.size() != 3) throw IoError("manifest row needs 3 fields: '" + line + "'");
    if (!seen.insert(f[1]).second) throw DuplicateId("duplicate manifest id: " + f[1]);
    m.entries.push_back({f[0], f[1], parse_group(f[2])});
  }
  return m;
}

std::string manifest_to_csv(const CohortManifest& m) {
  std::string out = "path,id,group\n";
  for (const auto& e : m.entries) {
    out += e.path;
    out += ',';
    out += e.id;
    out += ',';
    out += to_string(e.group);
    out += '\n';
  }
  return out;
}

RegionImage load_region_image(const ManifestEntry& entry, const std::filesystem::path& base_dir) {
  std::filesystem::path p(entry.path);
  if (p.is_relative()) p = base_dir / p;
  io::Rgb8 px = io::read_rgb8(p);
  if (px.r.rows() < 32 || px.r.cols() < 32)
    throw PipelineError("region image below 32x32 minimum: " + entry.id);
  RegionImage img;
  img.id = entry.id;
  img.group = entry.group;
  img.r = std::move(px.r);
  img.g = std::move(px.g);
  img.b = std::move(px.b);
  return img;
}

PlaneU16 rasterize_instance_masks(const std::vector<CellInstance>& cells, Eigen::Index rows,
                                  Eigen::Index cols) {
  std::vector<const CellInstance*> order;
  order.reserve(cells.size());
  for (const auto& c : cells) order.push_back(&c);
  std::sort(order.begin(), order.end(),
            [](const CellInstance* a, const CellInstance* b) { return a->cell_id < b->cell_id; });

  PlaneU16 raster = PlaneU16::Zero(rows, cols);
  std::uint16_t label = 0;
  for (const CellInstance* c : order) {
    ++label;
    for (const auto& p : c->mask) {
      if (p.x < 0 || p.y < 0 || p.x >= cols || p.y >= rows)
        throw PipelineError("mask pixel out of raster bounds: " + c->cell_id);
      if (raster(p.y, p.x) != 0)
        throw OverlapError("cells " + order[raster(p.y, p.x) - 1]->cell_id + " and " + c->cell_id +
                           " overlap");
      raster(p.y, p.x) = label;
    }
  }
  return raster;
}

std::vector<CellInstance> cells_from_label_raster(const PlaneU16& labels,
                                                  const std::string& image_id) {
  std::uint16_t max_label = 0;
  for (Eigen::Index y = 0; y < labels.rows(); ++y)
    for (Eigen::Index x = 0; x < labels.cols(); ++x) max_label = std::max(max_label, labels(y, x));

  std::vector<CellInstance> cells;
  for (std::uint16_t l = 1; l <= max_label; ++l) {
    raster::Mask m = raster::Mask::Zero(labels.rows(), labels.cols());
    std::vector<PixelCoord> pixels;
    for (Eigen::Index y = 0; y < labels.rows(); ++y)
      for (Eigen::Index x = 0; x < labels.cols(); ++x)
        if (labels(y, x) == l) {
          m(y, x) = 1;
          pixels.push_back({static_cast<std::int32_t>(x), static_cast<std::int32_t>(y)});
        }
    if (pixels.empty()) continue;
    CellInstance cell;
    cell.cell_id = make_cell_id(image_id, l);
    cell.image_id = image_id;
    cell.mask = std::move(pixels);
    cell.boundary = raster::outer_boundary(m);
    cells.push_back(std::move(cell));
  }
  return cells;
}

std::string make_cell_id(const std::string& image_id, int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "_c%04d", index);
  return image_id + buf;
}

}  // namespace cellpheno
