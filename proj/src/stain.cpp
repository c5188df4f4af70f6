#include "cellpheno/stain.hpp"

#include <algorithm>
#include <cmath>

namespace cellpheno::stain {
namespace {

// sRGB <-> XYZ (D65), IEC 61966-2-1
const Eigen::Matrix3d kRgbToXyz = (Eigen::Matrix3d() << 0.4124564, 0.3575761, 0.1804375,
                                   0.2126729, 0.7151522, 0.0721750,
                                   0.0193339, 0.1191920, 0.9503041)
                                      .finished();
const Eigen::Matrix3d kXyzToRgb = kRgbToXyz.inverse();
const Eigen::Vector3d kWhite(0.95047, 1.0, 1.08883);

double srgb_linearize(double c) {
  return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}
double srgb_delinearize(double c) {
  return c <= 0.0031308 ? 12.92 * c : 1.055 * std::pow(c, 1.0 / 2.4) - 0.055;
}

double lab_f(double t) {
  constexpr double d3 = (6.0 / 29) * (6.0 / 29) * (6.0 / 29);
  constexpr double m = (29.0 / 6) * (29.0 / 6) / 3.0;
  return t > d3 ? std::cbrt(t) : m * t + 4.0 / 29;
}
double lab_f_inv(double t) {
  constexpr double d = 6.0 / 29;
  return t > d ? t * t * t : 3 * d * d * (t - 4.0 / 29);
}

std::uint8_t quantize(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

}  // namespace

StainMatrix StainMatrix::standard_he() {
  return from_columns({0.650, 0.704, 0.286}, {0.072, 0.990, 0.105});
}

StainMatrix StainMatrix::from_columns(const Eigen::Vector3d& hematoxylin,
                                      const Eigen::Vector3d& eosin) {
  if (hematoxylin.norm() < 1e-12 || eosin.norm() < 1e-12)
    throw SingularStains("stain column has zero norm");
  StainMatrix m;
  m.od_basis.col(0) = hematoxylin.normalized();
  m.od_basis.col(1) = eosin.normalized();
  return m;
}

Eigen::Matrix3d StainMatrix::full_basis() const {
  Eigen::JacobiSVD<Eigen::Matrix<double, 3, 2>> svd(od_basis);
  const double smin = svd.singularValues()(1);
  const double smax = svd.singularValues()(0);
  if (smin <= 0 || smax / smin > 1e6)
    throw SingularStains("stain vectors are near-collinear");
  Eigen::Matrix3d full;
  full.leftCols<2>() = od_basis;
  full.col(2) = od_basis.col(0).cross(od_basis.col(1)).normalized();
  return full;
}

Eigen::Vector3d rgb_to_lab(double r, double g, double b) {
  const Eigen::Vector3d lin(srgb_linearize(r / 255.0), srgb_linearize(g / 255.0),
                            srgb_linearize(b / 255.0));
  const Eigen::Vector3d xyz = kRgbToXyz * lin;
  const double fx = lab_f(xyz.x() / kWhite.x());
  const double fy = lab_f(xyz.y() / kWhite.y());
  const double fz = lab_f(xyz.z() / kWhite.z());
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

Eigen::Vector3d lab_to_rgb(const Eigen::Vector3d& lab) {
  const double fy = (lab.x() + 16.0) / 116.0;
  const double fx = fy + lab.y() / 500.0;
  const double fz = fy - lab.z() / 200.0;
  const Eigen::Vector3d xyz(kWhite.x() * lab_f_inv(fx), kWhite.y() * lab_f_inv(fy),
                            kWhite.z() * lab_f_inv(fz));
  const Eigen::Vector3d lin = kXyzToRgb * xyz;
  Eigen::Vector3d rgb;
  for (int c = 0; c < 3; ++c)
    rgb(c) = std::clamp(srgb_delinearize(std::clamp(lin(c), 0.0, 1.0)) * 255.0, 0.0, 255.0);
  return rgb;
}

LabStats compute_lab_stats(const RegionImage& img) {
  const Eigen::Index n = img.rows() * img.cols();
  if (n == 0) throw PipelineError("compute_lab_stats: empty image");
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  Eigen::Vector3d sumsq = Eigen::Vector3d::Zero();
  for (Eigen::Index y = 0; y < img.rows(); ++y)
    for (Eigen::Index x = 0; x < img.cols(); ++x) {
      const Eigen::Vector3d lab = rgb_to_lab(img.r(y, x), img.g(y, x), img.b(y, x));
      sum += lab;
      sumsq += lab.cwiseProduct(lab);
    }
  LabStats s;
  s.mean = sum / static_cast<double>(n);
  const Eigen::Vector3d var =
      (sumsq / static_cast<double>(n) - s.mean.cwiseProduct(s.mean)).cwiseMax(0.0);
  s.std = var.cwiseSqrt().cwiseMax(kMinStd);
  return s;
}

RegionImage normalize_to_target(const RegionImage& img, const LabStats& target) {
  const LabStats src = compute_lab_stats(img);
  const Eigen::Vector3d scale =
      target.std.cwiseMax(kMinStd).cwiseQuotient(src.std.cwiseMax(kMinStd));
  RegionImage out = img;
  for (Eigen::Index y = 0; y < img.rows(); ++y)
    for (Eigen::Index x = 0; x < img.cols(); ++x) {
      Eigen::Vector3d lab = rgb_to_lab(img.r(y, x), img.g(y, x), img.b(y, x));
      lab = (lab - src.mean).cwiseProduct(scale) + target.mean;
      const Eigen::Vector3d rgb = lab_to_rgb(lab);
      out.r(y, x) = quantize(rgb.x());
      out.g(y, x) = quantize(rgb.y());
      out.b(y, x) = quantize(rgb.z());
    }
  return out;
}

double optical_density(double value) { return -std::log10((value + 1.0) / 256.0); }

double od_to_value(double od) { return 256.0 * std::pow(10.0, -od) - 1.0; }

std::pair<ScalarImage, ScalarImage> deconvolve(const RegionImage& img,
                                               const StainMatrix& stains) {
  const Eigen::Matrix3d inv = stains.full_basis().inverse();
  ScalarImage h, e;
  h.values.resize(img.rows(), img.cols());
  e.values.resize(img.rows(), img.cols());
  h.range = e.range = ValueRange::OpticalDensity;
  for (Eigen::Index y = 0; y < img.rows(); ++y)
    for (Eigen::Index x = 0; x < img.cols(); ++x) {
      const Eigen::Vector3d od(optical_density(img.r(y, x)), optical_density(img.g(y, x)),
                               optical_density(img.b(y, x)));
      const Eigen::Vector3d conc = inv * od;
      h.values(y, x) = std::max(conc(0), 0.0);
      e.values(y, x) = std::max(conc(1), 0.0);
    }
  return {std::move(h), std::move(e)};
}

RegionImage render_from_concentrations(const PlaneD& c_hematoxylin, const PlaneD& c_eosin,
                                       const StainMatrix& stains, const std::string& id,
                                       Group group) {
  if (c_hematoxylin.rows() != c_eosin.rows() || c_hematoxylin.cols() != c_eosin.cols())
    throw PipelineError("render_from_concentrations: shape mismatch");
  RegionImage img;
  img.id = id;
  img.group = group;
  img.r.resize(c_hematoxylin.rows(), c_hematoxylin.cols());
  img.g.resize(c_hematoxylin.rows(), c_hematoxylin.cols());
  img.b.resize(c_hematoxylin.rows(), c_hematoxylin.cols());
  for (Eigen::Index y = 0; y < img.rows(); ++y)
    for (Eigen::Index x = 0; x < img.cols(); ++x) {
      const Eigen::Vector3d od =
          stains.od_basis * Eigen::Vector2d(c_hematoxylin(y, x), c_eosin(y, x));
      img.r(y, x) = quantize(od_to_value(od(0)));
      img.g(y, x) = quantize(od_to_value(od(1)));
      img.b(y, x) = quantize(od_to_value(od(2)));
    }
  return img;
}

}  // namespace cellpheno::stain
