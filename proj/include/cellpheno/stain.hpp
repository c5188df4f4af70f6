#pragma once

#include "cellpheno/types.hpp"

#include <utility>

namespace cellpheno::stain {

/// Per-channel LAB mean and standard deviation of one image. Degenerate
/// channels get std clamped to kMinStd so ratio mappings stay finite.
struct LabStats {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  Eigen::Vector3d std = Eigen::Vector3d::Ones();
};

inline constexpr double kMinStd = 1e-6;

/// H&E optical-density absorption directions (unit columns).
struct StainMatrix {
  Eigen::Matrix<double, 3, 2> od_basis;

  static StainMatrix standard_he();
  static StainMatrix from_columns(const Eigen::Vector3d& hematoxylin,
                                  const Eigen::Vector3d& eosin);

  Eigen::Vector3d hematoxylin() const { return od_basis.col(0); }
  Eigen::Vector3d eosin() const { return od_basis.col(1); }
  /// Completes the basis with the normalized cross product as the residual
  /// direction. Throws SingularStains when the columns are near-collinear.
  Eigen::Matrix3d full_basis() const;
};

// sRGB (0..255) <-> CIELAB via the D65 XYZ path.
Eigen::Vector3d rgb_to_lab(double r, double g, double b);
Eigen::Vector3d lab_to_rgb(const Eigen::Vector3d& lab);  // clamped to [0,255], not rounded

LabStats compute_lab_stats(const RegionImage& img);

/// Reinhard-style channel mapping in LAB: out = (in - mu_src) * sigma_tgt /
/// sigma_src + mu_tgt, mapped back to RGB with clamping.
RegionImage normalize_to_target(const RegionImage& img, const LabStats& target);

/// Per-channel optical density of an 8-bit value: -log10((v + 1) / 256).
double optical_density(double value);
/// Inverse map back to an unclamped 8-bit scale value.
double od_to_value(double od);

/// Lambert-Beer unmixing into (hematoxylin, eosin) concentration channels.
/// Negative concentrations clamp to zero.
std::pair<ScalarImage, ScalarImage> deconvolve(const RegionImage& img, const StainMatrix& stains);

/// Forward Lambert-Beer rendering of concentration maps to an RGB tile.
RegionImage render_from_concentrations(const PlaneD& c_hematoxylin, const PlaneD& c_eosin,
                                       const StainMatrix& stains, const std::string& id,
                                       Group group);

}  // namespace cellpheno::stain
