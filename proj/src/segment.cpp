#include "cellpheno/segment.hpp"

#include "cellpheno/filters.hpp"
#include "cellpheno/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace cellpheno::segment {

void EnhancementParams::validate() const {
  if (alpha <= 0) throw ConfigError("segment.alpha must be positive");
  if (beta && *beta <= 0) throw ConfigError("segment.beta must be positive when set");
  if (sigmas.empty()) throw ConfigError("segment.sigmas must not be empty");
  for (std::size_t i = 0; i < sigmas.size(); ++i) {
    if (sigmas[i] < 0.5) throw ConfigError("segment.sigmas entries must be >= 0.5");
    if (i > 0 && sigmas[i] <= sigmas[i - 1])
      throw ConfigError("segment.sigmas must be strictly increasing");
  }
  if (!(t_low > 0 && t_low < 1 && t_high > 0 && t_high < 1))
    throw ConfigError("segment thresholds must lie in (0,1)");
  if (t_low >= t_high) throw ConfigError("segment.t_low must be below t_high");
  if (min_area_px < 4) throw ConfigError("segment.min_area_px must be >= 4");
  if (smoothing_cutoff < 2) throw ConfigError("segment.smoothing_cutoff must be >= 2");
}

HessianEigenField hessian_eigen(const ScalarImage& h, double sigma) {
  if (sigma < 0.5) throw PipelineError("hessian_eigen: sigma must be >= 0.5");
  const Eigen::VectorXd g0 = filters::gaussian_kernel(sigma, 0);
  const Eigen::VectorXd g1 = filters::gaussian_kernel(sigma, 1);
  const Eigen::VectorXd g2 = filters::gaussian_kernel(sigma, 2);
  const double s2 = sigma * sigma;  // scale normalization for cross-scale comparability

  const PlaneD hxx = filters::separable_conv(h.values, g2, g0) * s2;
  const PlaneD hyy = filters::separable_conv(h.values, g0, g2) * s2;
  const PlaneD hxy = filters::separable_conv(h.values, g1, g1) * s2;

  HessianEigenField f;
  f.lambda1.values.resize(h.rows(), h.cols());
  f.lambda2.values.resize(h.rows(), h.cols());
  f.lambda1.range = f.lambda2.range = ValueRange::Likelihood;
  for (Eigen::Index y = 0; y < h.rows(); ++y)
    for (Eigen::Index x = 0; x < h.cols(); ++x) {
      // negate so bright blobs in h give positive curvature
      const double a = -hxx(y, x), d = -hyy(y, x), bc = -hxy(y, x);
      const double mean = 0.5 * (a + d);
      const double delta = std::sqrt(0.25 * (a - d) * (a - d) + bc * bc);
      f.lambda1.values(y, x) = mean - delta;
      f.lambda2.values(y, x) = mean + delta;
    }
  return f;
}

double enhancement_response(double l1, double l2, double alpha, double beta) {
  if (l1 <= 0 || l2 <= 0) return 0.0;
  const double ratio = l1 / l2;
  const double s2 = l1 * l1 + l2 * l2;
  return (1.0 - std::exp(-(ratio * ratio) / (2.0 * alpha * alpha))) *
         (1.0 - std::exp(-s2 / (2.0 * beta * beta)));
}

namespace {

// robust upper bound on sqrt(l1^2 + l2^2): the 99.5th percentile
double robust_structure_max(const HessianEigenField& f) {
  std::vector<double> s2;
  s2.reserve(static_cast<std::size_t>(f.lambda1.values.size()));
  for (Eigen::Index y = 0; y < f.lambda1.rows(); ++y)
    for (Eigen::Index x = 0; x < f.lambda1.cols(); ++x) {
      const double l1 = f.lambda1.values(y, x), l2 = f.lambda2.values(y, x);
      s2.push_back(l1 * l1 + l2 * l2);
    }
  const auto k = static_cast<std::size_t>(0.995 * static_cast<double>(s2.size() - 1));
  std::nth_element(s2.begin(), s2.begin() + static_cast<std::ptrdiff_t>(k), s2.end());
  return std::sqrt(s2[k]);
}

}  // namespace

ScalarImage enhance(const ScalarImage& h, const EnhancementParams& p) {
  p.validate();
  ScalarImage out;
  out.values = PlaneD::Zero(h.rows(), h.cols());
  out.range = ValueRange::Likelihood;
  for (const double sigma : p.sigmas) {
    const HessianEigenField f = hessian_eigen(h, sigma);
    const double beta = p.beta ? *p.beta : 0.5 * robust_structure_max(f);
    if (beta < 1e-12) continue;  // flat image at this scale
    for (Eigen::Index y = 0; y < h.rows(); ++y)
      for (Eigen::Index x = 0; x < h.cols(); ++x) {
        const double r = enhancement_response(f.lambda1.values(y, x), f.lambda2.values(y, x),
                                              p.alpha, beta);
        if (r > out.values(y, x)) out.values(y, x) = r;
      }
  }
  return out;
}

raster::Mask hysteresis(const ScalarImage& likelihood, double t_low, double t_high) {
  if (t_low > t_high) throw PipelineError("hysteresis: t_low must be <= t_high");
  const Eigen::Index rows = likelihood.rows(), cols = likelihood.cols();
  raster::Mask mask = raster::Mask::Zero(rows, cols);
  std::deque<PixelCoord> queue;
  for (Eigen::Index y = 0; y < rows; ++y)
    for (Eigen::Index x = 0; x < cols; ++x)
      if (likelihood.values(y, x) >= t_high) {
        mask(y, x) = 1;
        queue.push_back({static_cast<std::int32_t>(x), static_cast<std::int32_t>(y)});
      }
  while (!queue.empty()) {
    const PixelCoord p = queue.front();
    queue.pop_front();
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int nx = p.x + dx, ny = p.y + dy;
        if (nx < 0 || ny < 0 || nx >= cols || ny >= rows) continue;
        if (!mask(ny, nx) && likelihood.values(ny, nx) >= t_low) {
          mask(ny, nx) = 1;
          queue.push_back({nx, ny});
        }
      }
  }
  return mask;
}

double mean_transmission(const ScalarImage& concentration, const std::vector<PixelCoord>& pixels) {
  if (pixels.empty()) return 255.0;
  double acc = 0;
  for (const auto& p : pixels)
    acc += 255.0 * std::pow(10.0, -concentration.values(p.y, p.x));
  return acc / static_cast<double>(pixels.size());
}

namespace {

raster::Mask mask_from_pixels(const std::vector<PixelCoord>& pixels, Eigen::Index rows,
                              Eigen::Index cols) {
  raster::Mask m = raster::Mask::Zero(rows, cols);
  for (const auto& p : pixels) m(p.y, p.x) = 1;
  return m;
}

bool touches_border(const std::vector<PixelCoord>& pixels, Eigen::Index rows, Eigen::Index cols) {
  for (const auto& p : pixels)
    if (p.x == 0 || p.y == 0 || p.x == cols - 1 || p.y == rows - 1) return true;
  return false;
}

}  // namespace

std::vector<CellInstance> postprocess(const raster::Mask& mask, const ScalarImage& original_h,
                                      const EnhancementParams& p, const std::string& image_id) {
  const Eigen::Index rows = mask.rows(), cols = mask.cols();
  auto [labels, n] = raster::label_components(mask, raster::Connectivity::Eight);

  raster::Mask claimed = raster::Mask::Zero(rows, cols);
  std::vector<CellInstance> cells;
  int next_cell = 0;
  for (int l = 1; l <= n; ++l) {
    std::vector<PixelCoord> pixels = raster::component_pixels(labels, l);
    if (static_cast<int>(pixels.size()) < p.min_area_px) continue;
    if (mean_transmission(original_h, pixels) > p.max_mean_intensity) continue;

    raster::Mask comp = raster::fill_holes(mask_from_pixels(pixels, rows, cols));
    std::vector<PixelCoord> contour = raster::outer_boundary(comp);

    // low-pass the contour and re-rasterize
    const auto smooth = raster::fourier_smooth(contour, p.smoothing_cutoff);
    raster::Mask smoothed = raster::rasterize_polygon(smooth, rows, cols);
    if ((smoothed != 0).count() == 0) smoothed = comp;
    smoothed = raster::fill_holes(raster::largest_four_connected(smoothed));

    // smoothing can, rarely, push one candidate into another; earlier cells win
    bool clipped = false;
    for (Eigen::Index y = 0; y < rows; ++y)
      for (Eigen::Index x = 0; x < cols; ++x)
        if (smoothed(y, x) && claimed(y, x)) {
          smoothed(y, x) = 0;
          clipped = true;
        }
    if (clipped) {
      if ((smoothed != 0).count() == 0) continue;
      smoothed = raster::fill_holes(raster::largest_four_connected(smoothed));
    }

    std::vector<PixelCoord> final_pixels;
    for (Eigen::Index y = 0; y < rows; ++y)
      for (Eigen::Index x = 0; x < cols; ++x)
        if (smoothed(y, x))
          final_pixels.push_back({static_cast<std::int32_t>(x), static_cast<std::int32_t>(y)});
    if (final_pixels.empty()) continue;

    std::vector<PixelCoord> final_contour = raster::outer_boundary(smoothed);
    const double perimeter = raster::chain_perimeter(final_contour);
    const double area = static_cast<double>(final_pixels.size());
    const double circularity = perimeter > 0 ? 4.0 * M_PI * area / (perimeter * perimeter) : 0.0;
    if (circularity < p.min_circularity) continue;
    if (touches_border(final_pixels, rows, cols)) continue;

    for (const auto& px : final_pixels) claimed(px.y, px.x) = 1;
    CellInstance cell;
    cell.cell_id = make_cell_id(image_id, ++next_cell);
    cell.image_id = image_id;
    cell.mask = std::move(final_pixels);
    cell.boundary = std::move(final_contour);
    cells.push_back(std::move(cell));
  }
  return cells;
}

std::vector<CellInstance> segment_image(const RegionImage& normalized,
                                        const stain::StainMatrix& stains,
                                        const EnhancementParams& p) {
  const ScalarImage h = stain::deconvolve(normalized, stains).first;
  const ScalarImage likelihood = enhance(h, p);
  const raster::Mask mask = hysteresis(likelihood, p.t_low, p.t_high);
  return postprocess(mask, h, p, normalized.id);
}

}  // namespace cellpheno::segment
