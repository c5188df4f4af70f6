#pragma once

#include "cellpheno/raster.hpp"
#include "cellpheno/stain.hpp"
#include "cellpheno/types.hpp"

#include <optional>
#include <vector>

namespace cellpheno::segment {

struct EnhancementParams {
  double alpha = 0.5;           // anisotropy sensitivity
  std::optional<double> beta;   // magnitude sensitivity; unset = per-scale robust auto
  std::vector<double> sigmas = {2, 3, 4, 6, 8, 10};
  double t_low = 0.1;
  double t_high = 0.4;
  int min_area_px = 30;
  double max_mean_intensity = 180.0;  // transmission scale 0..255; above = too pale to be a cell
  int smoothing_cutoff = 16;
  double min_circularity = 0.25;      // clumped-candidate proxy filter

  void validate() const;
};

/// Eigenvalues of the (negated, scale-normalized) Gaussian Hessian, ordered
/// lambda1 <= lambda2 pointwise. The negation makes bright blobs carry two
/// positive eigenvalues.
struct HessianEigenField {
  ScalarImage lambda1, lambda2;
};

HessianEigenField hessian_eigen(const ScalarImage& h, double sigma);

/// Scalar blob response, zero unless both eigenvalues are positive:
/// (1 - exp(-(l1/l2)^2 / 2 alpha^2)) * (1 - exp(-(l1^2 + l2^2) / 2 beta^2)).
double enhancement_response(double l1, double l2, double alpha, double beta);

/// Multi-scale enhancement: per-pixel maximum response over p.sigmas.
ScalarImage enhance(const ScalarImage& h, const EnhancementParams& p);

/// Keeps 8-connected components of {likelihood >= t_low} that contain at
/// least one pixel with likelihood >= t_high.
raster::Mask hysteresis(const ScalarImage& likelihood, double t_low, double t_high);

/// Component cleanup: drops small and too-pale candidates, fills holes,
/// low-pass smooths each boundary and re-rasterizes, drops low-circularity
/// and border-touching results. Output masks are disjoint, 4-connected and
/// hole-free; cell ids are `<image_id>_c%04d` in component-label order.
std::vector<CellInstance> postprocess(const raster::Mask& mask, const ScalarImage& original_h,
                                      const EnhancementParams& p, const std::string& image_id);

/// Full per-image chain on an already stain-normalized tile:
/// deconvolve -> enhance -> hysteresis -> postprocess.
std::vector<CellInstance> segment_image(const RegionImage& normalized,
                                        const stain::StainMatrix& stains,
                                        const EnhancementParams& p);

/// Mean transmission (0..255) of the hematoxylin channel over a pixel set;
/// the brightness scale used by the too-pale filter.
double mean_transmission(const ScalarImage& concentration, const std::vector<PixelCoord>& pixels);

}  // namespace cellpheno::segment
