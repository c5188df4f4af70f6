#pragma once

#include "cellpheno/features.hpp"
#include "cellpheno/stain.hpp"
#include "cellpheno/types.hpp"

#include <filesystem>
#include <map>
#include <vector>

namespace cellpheno::synth {

struct ModeShift {
  double radius = 0;
  double axis_ratio = 0;
  double intensity = 0;
};

/// Generator recipe for one cohort group. Radii are the ellipse geometric
/// mean semi-axis in pixels; intensity is hematoxylin concentration.
struct GroupSpec {
  Group group = Group::MUT;
  int n_cells_per_image = 40;
  double radius_mean = 10.0;
  double radius_std = 1.5;
  double axis_ratio_mean = 1.4;
  double axis_ratio_std = 0.25;
  double intensity_mean = 0.75;
  double intensity_std = 0.12;
  int n_modes = 1;
  std::vector<ModeShift> mode_offsets;  // optional explicit per-mode shifts
  double rim_fraction = 0.45;           // concentration at the rim relative to center

  /// Cohort recipes whose rasterized size/intensity statistics land on the
  /// published MUT/WT reference values (area means 448.28 / 198.97 px^2,
  /// MUT darker than WT).
  static GroupSpec mut_reference();
  static GroupSpec wt_reference();

  void validate() const;
};

struct CellRecord {
  CellInstance cell;
  double radius = 0, axis_ratio = 1, orientation = 0;
  double concentration = 0;       // planted center concentration
  double mean_concentration = 0;  // mean of the painted concentration over the mask
  int mode = 0;
};

struct GroundTruth {
  std::map<std::string, std::vector<CellRecord>> by_image;
};

struct ImageCohort {
  std::vector<RegionImage> images;
  GroundTruth truth;
};

/// Renders `images_per_spec` tiles per spec: rejection-sampled non-overlapping
/// ellipses kept clear of the borders, painted as hematoxylin concentration
/// with a radial falloff over a uniform eosin background, pushed through the
/// forward Lambert-Beer model, plus seeded Gaussian pixel noise.
ImageCohort synth_cohort(const std::vector<GroupSpec>& specs, int images_per_spec, int image_size,
                         std::uint64_t seed, const stain::StainMatrix& stains,
                         double noise_sigma = 2.0, double background_eosin = 0.15,
                         int threads = 1);

struct FeatureCohort {
  features::FeatureMatrix matrix;
  std::vector<int> labels;      // 1 = MUT, 0 = WT, aligned with matrix.rows
  std::vector<int> mode_index;  // planted mode per row
};

/// Ten-dimensional Gaussian-mixture rows per group. `overlap` in [0,1] sets
/// the class separation so the Bayes error is overlap/2 (capped at an 8-sigma
/// margin); planted modes are spread along seeded orthonormal directions
/// orthogonal to the class-separation axis.
FeatureCohort synth_features(const std::vector<GroupSpec>& specs, int n_per_group, double overlap,
                             std::uint64_t seed, double mode_separation = 10.0);

// Ground-truth JSON round trip (masks serialize as label-raster file names,
// geometry and planted parameters inline).
std::string ground_truth_to_json(const GroundTruth& truth);
GroundTruth ground_truth_from_json(const std::string& json_text);

}  // namespace cellpheno::synth
