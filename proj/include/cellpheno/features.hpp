#pragma once

#include "cellpheno/types.hpp"

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <vector>

namespace cellpheno::features {

inline constexpr int kFeatureCount = 10;
inline constexpr std::array<const char*, kFeatureCount> kFeatureNames = {
    "area",        "perimeter", "max_distance",   "equivalent_diameter", "eccentricity",
    "circularity", "extent",    "intensity_mean", "intensity_std",       "intensity_entropy"};

struct FeatureVector {
  std::string cell_id;
  std::string image_id;
  Group group = Group::MUT;
  double area = 0;                 // px^2
  double perimeter = 0;            // px
  double max_distance = 0;         // px
  double equivalent_diameter = 0;  // px
  double eccentricity = 0;         // [0,1)
  double circularity = 0;          // (0, 1]+eps
  double extent = 0;               // (0, 1]
  double intensity_mean = 0;       // [0,255]
  double intensity_std = 0;
  double intensity_entropy = 0;    // bits

  Eigen::Matrix<double, 1, kFeatureCount> values() const;
  void set_values(const Eigen::Matrix<double, 1, kFeatureCount>& v);
};

struct Normalization {
  Eigen::Matrix<double, 1, kFeatureCount> mean;
  Eigen::Matrix<double, 1, kFeatureCount> std;  // zero-variance columns flagged with eps
};

inline constexpr double kZeroVarianceEps = 1e-12;

struct FeatureMatrix {
  std::vector<FeatureVector> rows;
  std::optional<Normalization> normalization;

  Eigen::MatrixXd values() const;             // n x 10, raw units
  Eigen::MatrixXd normalized_values() const;  // requires normalization
};

struct FeatureOptions {
  int histogram_bins = 64;
};

/// Computes the ten per-cell features. `intensity` is the grayscale plane the
/// intensity features read from (0..255). Throws TooSmall for masks under
/// four pixels.
FeatureVector compute_features(const CellInstance& cell, const PlaneD& intensity, Group group,
                               const FeatureOptions& opts = {});

/// Rec.601 luma of an RGB tile, in [0,255].
PlaneD luma_plane(const RegionImage& img);

/// Cohort z-scoring: records per-column stats; zero-variance columns z to 0.
FeatureMatrix normalize(FeatureMatrix m);

/// Raw-unit per-group mean/std per feature. Requires both groups present.
struct GroupStats {
  // [group][feature]
  std::map<Group, Eigen::Matrix<double, 1, kFeatureCount>> mean, std;
};
GroupStats group_stats(const FeatureMatrix& m);

// Fixed-order CSV: cell_id,image_id,group,<10 features>
std::string features_to_csv(const FeatureMatrix& m);
FeatureMatrix features_from_csv(const std::filesystem::path& path);
std::string group_stats_to_csv(const GroupStats& s);

}  // namespace cellpheno::features
