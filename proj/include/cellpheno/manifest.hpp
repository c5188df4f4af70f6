#pragma once

#include "cellpheno/types.hpp"

#include <filesystem>
#include <vector>

namespace cellpheno {

struct ManifestEntry {
  std::string path;  // as written in the CSV; relative paths resolve against the manifest dir
  std::string id;
  Group group = Group::MUT;
};

struct CohortManifest {
  std::vector<ManifestEntry> entries;
};

/// Parses a `path,id,group` CSV. Order-preserving. Throws DuplicateId on
/// repeated ids and BadLabel on unknown group strings.
CohortManifest load_manifest(const std::filesystem::path& csv_path);

std::string manifest_to_csv(const CohortManifest& m);

/// Loads the raster behind one entry. Throws MissingImage when the file is
/// absent or unreadable, and rejects tiles smaller than 32x32.
RegionImage load_region_image(const ManifestEntry& entry, const std::filesystem::path& base_dir);

/// Renders cells into a 16-bit label raster: background 0, cell k labeled k
/// (1-based in ascending cell_id order). Throws OverlapError if two masks
/// share a pixel.
PlaneU16 rasterize_instance_masks(const std::vector<CellInstance>& cells, Eigen::Index rows,
                                  Eigen::Index cols);

/// Rebuilds cell instances from a label raster. Ids are regenerated as
/// `<image_id>_c<label:04>`, matching the naming used by segmentation, so a
/// write/read round trip reproduces both masks and ids.
std::vector<CellInstance> cells_from_label_raster(const PlaneU16& labels,
                                                  const std::string& image_id);

std::string make_cell_id(const std::string& image_id, int index);

}  // namespace cellpheno
