#include "cellpheno/features.hpp"

#include "cellpheno/raster.hpp"
#include "cellpheno/util.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace cellpheno::features {

Eigen::Matrix<double, 1, kFeatureCount> FeatureVector::values() const {
  Eigen::Matrix<double, 1, kFeatureCount> v;
  v << area, perimeter, max_distance, equivalent_diameter, eccentricity, circularity, extent,
      intensity_mean, intensity_std, intensity_entropy;
  return v;
}

void FeatureVector::set_values(const Eigen::Matrix<double, 1, kFeatureCount>& v) {
  area = v(0);
  perimeter = v(1);
  max_distance = v(2);
  equivalent_diameter = v(3);
  eccentricity = v(4);
  circularity = v(5);
  extent = v(6);
  intensity_mean = v(7);
  intensity_std = v(8);
  intensity_entropy = v(9);
}

Eigen::MatrixXd FeatureMatrix::values() const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), kFeatureCount);
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = rows[i].values();
  return out;
}

Eigen::MatrixXd FeatureMatrix::normalized_values() const {
  if (!normalization) throw PipelineError("feature matrix has no normalization stats");
  Eigen::MatrixXd v = values();
  for (Eigen::Index j = 0; j < kFeatureCount; ++j) {
    const double s = normalization->std(j);
    if (s <= kZeroVarianceEps) {
      v.col(j).setZero();
    } else {
      v.col(j) = (v.col(j).array() - normalization->mean(j)) / s;
    }
  }
  return v;
}

FeatureVector compute_features(const CellInstance& cell, const PlaneD& intensity, Group group,
                               const FeatureOptions& opts) {
  if (cell.mask.size() < 4)
    throw TooSmall("cell " + cell.cell_id + " has fewer than 4 mask pixels");

  FeatureVector f;
  f.cell_id = cell.cell_id;
  f.image_id = cell.image_id;
  f.group = group;

  const double area = static_cast<double>(cell.mask.size());
  f.area = area;
  f.perimeter = raster::chain_perimeter(cell.boundary);
  f.max_distance = raster::max_pairwise_distance(cell.boundary);
  f.equivalent_diameter = std::sqrt(4.0 * area / M_PI);

  // ellipse-equivalent eccentricity from second central moments of the mask
  double mx = 0, my = 0;
  for (const auto& p : cell.mask) {
    mx += p.x;
    my += p.y;
  }
  mx /= area;
  my /= area;
  double mu20 = 0, mu02 = 0, mu11 = 0;
  for (const auto& p : cell.mask) {
    const double dx = p.x - mx, dy = p.y - my;
    mu20 += dx * dx;
    mu02 += dy * dy;
    mu11 += dx * dy;
  }
  mu20 /= area;
  mu02 /= area;
  mu11 /= area;
  const double tr = 0.5 * (mu20 + mu02);
  const double det = std::sqrt(std::max(0.25 * (mu20 - mu02) * (mu20 - mu02) + mu11 * mu11, 0.0));
  const double lmax = tr + det, lmin = std::max(tr - det, 0.0);
  f.eccentricity = lmax > 0 ? std::sqrt(std::max(1.0 - lmin / lmax, 0.0)) : 0.0;

  f.circularity = f.perimeter > 0 ? 4.0 * M_PI * area / (f.perimeter * f.perimeter) : 1.0;

  const raster::Box bb = raster::bounds(cell.mask);
  const double bbox_area =
      static_cast<double>(bb.width() + 1) * static_cast<double>(bb.height() + 1);
  f.extent = area / bbox_area;

  // intensity statistics over mask pixels
  double sum = 0, sumsq = 0;
  std::vector<std::int64_t> hist(static_cast<std::size_t>(opts.histogram_bins), 0);
  const double bin_width = 256.0 / opts.histogram_bins;
  for (const auto& p : cell.mask) {
    const double v = std::clamp(intensity(p.y, p.x), 0.0, 255.0);
    sum += v;
    sumsq += v * v;
    auto bin = static_cast<std::size_t>(v / bin_width);
    if (bin >= hist.size()) bin = hist.size() - 1;
    ++hist[bin];
  }
  f.intensity_mean = sum / area;
  f.intensity_std = std::sqrt(std::max(sumsq / area - f.intensity_mean * f.intensity_mean, 0.0));
  double entropy = 0;
  for (const auto count : hist) {
    if (count == 0) continue;
    const double p = static_cast<double>(count) / area;
    entropy -= p * std::log2(p);
  }
  f.intensity_entropy = entropy;
  return f;
}

PlaneD luma_plane(const RegionImage& img) {
  PlaneD out(img.rows(), img.cols());
  for (Eigen::Index y = 0; y < img.rows(); ++y)
    for (Eigen::Index x = 0; x < img.cols(); ++x)
      out(y, x) = 0.299 * img.r(y, x) + 0.587 * img.g(y, x) + 0.114 * img.b(y, x);
  return out;
}

FeatureMatrix normalize(FeatureMatrix m) {
  if (m.rows.size() < 2) throw PipelineError("normalize needs at least 2 rows");
  const Eigen::MatrixXd v = m.values();
  Normalization norm;
  norm.mean = v.colwise().mean();
  for (Eigen::Index j = 0; j < kFeatureCount; ++j) {
    const double var = (v.col(j).array() - norm.mean(j)).square().mean();  // population
    const double sd = std::sqrt(std::max(var, 0.0));
    norm.std(j) = sd > kZeroVarianceEps ? sd : kZeroVarianceEps;
  }
  m.normalization = norm;
  return m;
}

GroupStats group_stats(const FeatureMatrix& m) {
  std::map<Group, std::vector<Eigen::Index>> idx;
  for (std::size_t i = 0; i < m.rows.size(); ++i)
    idx[m.rows[i].group].push_back(static_cast<Eigen::Index>(i));
  if (idx.size() < 2) throw PipelineError("group_stats requires both MUT and WT rows");

  const Eigen::MatrixXd v = m.values();
  GroupStats s;
  for (const auto& [group, rows] : idx) {
    Eigen::MatrixXd sub(static_cast<Eigen::Index>(rows.size()), kFeatureCount);
    for (std::size_t i = 0; i < rows.size(); ++i) sub.row(static_cast<Eigen::Index>(i)) = v.row(rows[i]);
    Eigen::Matrix<double, 1, kFeatureCount> mean = sub.colwise().mean();
    Eigen::Matrix<double, 1, kFeatureCount> sd;
    for (Eigen::Index j = 0; j < kFeatureCount; ++j)
      sd(j) = std::sqrt(std::max((sub.col(j).array() - mean(j)).square().mean(), 0.0));
    s.mean[group] = mean;
    s.std[group] = sd;
  }
  return s;
}

std::string features_to_csv(const FeatureMatrix& m) {
  std::string out = "cell_id,image_id,group";
  for (const char* name : kFeatureNames) {
    out += ',';
    out += name;
  }
  out += '\n';
  for (const auto& r : m.rows) {
    out += r.cell_id;
    out += ',';
    out += r.image_id;
    out += ',';
    out += to_string(r.group);
    const auto v = r.values();
    for (Eigen::Index j = 0; j < kFeatureCount; ++j) {
      out += ',';
      out += format_double(v(j));
    }
    out += '\n';
  }
  return out;
}

FeatureMatrix features_from_csv(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty features CSV: " + path.string());
  const auto header = split_csv_line(line);
  std::string expect = "cell_id,image_id,group";
  for (const char* name : kFeatureNames) expect += std::string(",") + name;
  const auto expect_fields = split_csv_line(expect);
  if (header != expect_fields)
    throw IoError("features CSV header mismatch in " + path.string());

  FeatureMatrix m;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    if (f.size() != 3 + kFeatureCount)
      throw IoError("features CSV row has wrong field count: '" + line + "'");
    FeatureVector r;
    r.cell_id = f[0];
    r.image_id = f[1];
    r.group = parse_group(f[2]);
    Eigen::Matrix<double, 1, kFeatureCount> v;
    for (int j = 0; j < kFeatureCount; ++j) v(j) = parse_double(f[static_cast<std::size_t>(3 + j)]);
    r.set_values(v);
    m.rows.push_back(std::move(r));
  }
  return m;
}

std::string group_stats_to_csv(const GroupStats& s) {
  std::string out = "group,feature,mean,std\n";
  for (const auto& [group, mean] : s.mean) {
    const auto& sd = s.std.at(group);
    for (int j = 0; j < kFeatureCount; ++j) {
      out += to_string(group);
      out += ',';
      out += kFeatureNames[static_cast<std::size_t>(j)];
      out += ',';
      out += format_double(mean(j));
      out += ',';
      out += format_double(sd(j));
      out += '\n';
    }
  }
  return out;
}

}  // namespace cellpheno::features
