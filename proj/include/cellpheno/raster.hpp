#pragma once

#include "cellpheno/types.hpp"

#include <utility>
#include <vector>

namespace cellpheno::raster {

using Mask = PlaneU8;  // 0 background, nonzero foreground

enum class Connectivity { Four, Eight };

/// Labels connected components 1..n in row-major discovery order.
std::pair<PlaneI, int> label_components(const Mask& mask, Connectivity conn);

/// Fills interior holes: background pixels not 4-connected to the border.
Mask fill_holes(const Mask& mask);

/// Keeps only the largest 4-connected component (ties: lowest label wins).
Mask largest_four_connected(const Mask& mask);

/// Moore-neighbor border following (8-connected, clockwise) from the first
/// foreground pixel in row-major order. Returns an ordered closed contour;
/// a single isolated pixel yields a 1-point contour.
std::vector<PixelCoord> outer_boundary(const Mask& mask);

/// Axis-aligned bounds of a point set.
struct Box {
  std::int32_t xmin = 0, xmax = 0, ymin = 0, ymax = 0;
  std::int32_t width() const { return xmax - xmin; }    // max - min, per retrieval convention
  std::int32_t height() const { return ymax - ymin; }
};
Box bounds(const std::vector<PixelCoord>& pts);

/// Corner-corrected chain-code perimeter (Vossepoel-Smeulders):
/// 0.980 n_axial + 1.406 n_diagonal - 0.091 n_corner. Near-unbiased on
/// digitized smooth shapes, unlike the raw sqrt(2)-weighted chain length.
double chain_perimeter(const std::vector<PixelCoord>& closed_boundary);

/// Largest pairwise Euclidean distance over the points (convex hull first,
/// then exhaustive over hull vertices).
double max_pairwise_distance(const std::vector<PixelCoord>& pts);

/// Even-odd scanline fill of a closed polygon, sampling at integer pixel
/// centers; coordinates outside [0,cols)x[0,rows) are clipped.
Mask rasterize_polygon(const std::vector<Eigen::Vector2d>& poly, Eigen::Index rows,
                       Eigen::Index cols);

/// Low-pass contour smoothing: keeps the lowest `cutoff`/2 Fourier coefficient
/// pairs (plus DC) of the complex boundary signal and resynthesizes the same
/// number of samples. Boundaries with <= cutoff+1 points pass through.
std::vector<Eigen::Vector2d> fourier_smooth(const std::vector<PixelCoord>& boundary, int cutoff);

/// Collects mask pixels of one labeled component, sorted row-major.
std::vector<PixelCoord> component_pixels(const PlaneI& labels, int label);

}  // namespace cellpheno::raster
