#include "cellpheno/synth.hpp"

#include "cellpheno/manifest.hpp"
#include "cellpheno/raster.hpp"
#include "cellpheno/util.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace cellpheno::synth {

void GroupSpec::validate() const {
  if (n_cells_per_image < 1) throw ConfigError("synth: n_cells_per_image must be >= 1");
  if (radius_mean < 3.0) throw ConfigError("synth: radius_mean must be >= 3 px");
  if (radius_std < 0 || axis_ratio_std < 0 || intensity_std < 0)
    throw ConfigError("synth: std fields must be nonnegative");
  if (axis_ratio_mean < 1.0) throw ConfigError("synth: axis_ratio_mean must be >= 1");
  if (intensity_mean <= 0) throw ConfigError("synth: intensity_mean must be positive");
  if (n_modes < 1 || n_modes > 9) throw ConfigError("synth: n_modes must be in [1, 9]");
  if (!mode_offsets.empty() && static_cast<int>(mode_offsets.size()) != n_modes)
    throw ConfigError("synth: mode_offsets size must match n_modes");
  if (rim_fraction <= 0 || rim_fraction > 1)
    throw ConfigError("synth: rim_fraction must lie in (0, 1]");
}

GroupSpec GroupSpec::mut_reference() {
  GroupSpec s;
  s.group = Group::MUT;
  s.n_cells_per_image = 40;
  // pi * (mean^2 + std^2) = 448.28 and the matching radius spread for the
  // published area std of 162.88
  s.radius_mean = 11.74;
  s.radius_std = 2.19;
  s.axis_ratio_mean = 1.3;
  s.axis_ratio_std = 0.2;
  s.intensity_mean = 0.85;
  s.intensity_std = 0.10;
  return s;
}

GroupSpec GroupSpec::wt_reference() {
  GroupSpec s;
  s.group = Group::WT;
  s.n_cells_per_image = 40;
  // pi * (mean^2 + std^2) = 198.97, area std 82.12
  s.radius_mean = 7.78;
  s.radius_std = 1.66;
  s.axis_ratio_mean = 1.5;
  s.axis_ratio_std = 0.25;
  s.intensity_mean = 0.55;
  s.intensity_std = 0.10;
  return s;
}

namespace {

struct PlacedCell {
  double cx, cy, a, b, theta, concentration;
  int mode;
};

constexpr double kPlacementGap = 6.0;  // keeps neighboring blobs separable

ModeShift mode_shift(const GroupSpec& spec, int mode) {
  if (!spec.mode_offsets.empty()) return spec.mode_offsets[static_cast<std::size_t>(mode)];
  if (spec.n_modes == 1) return {};
  const double centered = mode - 0.5 * (spec.n_modes - 1);
  return {2.0 * spec.radius_std * centered, 0.0, 2.0 * spec.intensity_std * centered};
}

RegionImage render_one_image(const GroupSpec& spec, int image_size, const std::string& image_id,
                             std::uint64_t image_seed, const stain::StainMatrix& stains,
                             double noise_sigma, double background_eosin,
                             std::vector<CellRecord>* truth_out) {
  Rng rng(image_seed);
  std::vector<PlacedCell> placed;
  const long max_attempts = 10L * spec.n_cells_per_image;
  long attempts = 0;
  while (static_cast<int>(placed.size()) < spec.n_cells_per_image) {
    if (attempts++ >= max_attempts)
      throw PlacementError("could not place " + std::to_string(spec.n_cells_per_image) +
                           " cells in " + image_id + " after " + std::to_string(max_attempts) +
                           " attempts");
    const int mode = static_cast<int>(rng.uniform_int(spec.n_modes));
    const ModeShift shift = mode_shift(spec, mode);
    const double radius = std::max(3.0, rng.normal(spec.radius_mean + shift.radius, spec.radius_std));
    const double ratio =
        std::max(1.0, rng.normal(spec.axis_ratio_mean + shift.axis_ratio, spec.axis_ratio_std));
    const double a = radius * std::sqrt(ratio);
    const double b = radius / std::sqrt(ratio);
    const double theta = rng.uniform(0.0, M_PI);
    const double margin = a + 3.0;
    if (2.0 * margin >= image_size)
      throw PlacementError("cell radius too large for image size in " + image_id);
    const double cx = rng.uniform(margin, image_size - margin);
    const double cy = rng.uniform(margin, image_size - margin);
    bool ok = true;
    for (const auto& p : placed) {
      const double dx = cx - p.cx, dy = cy - p.cy;
      if (std::sqrt(dx * dx + dy * dy) < a + p.a + kPlacementGap) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    const double conc =
        std::clamp(rng.normal(spec.intensity_mean + shift.intensity, spec.intensity_std), 0.05, 3.0);
    placed.push_back({cx, cy, a, b, theta, conc, mode});
  }

  PlaneD c_h = PlaneD::Zero(image_size, image_size);
  PlaneD c_e = PlaneD::Constant(image_size, image_size, background_eosin);
  const double falloff = std::log(1.0 / spec.rim_fraction);

  truth_out->clear();
  int index = 0;
  for (const auto& p : placed) {
    const double cos_t = std::cos(p.theta), sin_t = std::sin(p.theta);
    const auto x0 = static_cast<int>(std::floor(p.cx - p.a)), x1 = static_cast<int>(std::ceil(p.cx + p.a));
    const auto y0 = static_cast<int>(std::floor(p.cy - p.a)), y1 = static_cast<int>(std::ceil(p.cy + p.a));
    std::vector<PixelCoord> pixels;
    double conc_sum = 0;
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        const double dx = x - p.cx, dy = y - p.cy;
        const double u = (dx * cos_t + dy * sin_t) / p.a;
        const double v = (-dx * sin_t + dy * cos_t) / p.b;
        const double rho2 = u * u + v * v;
        if (rho2 > 1.0) continue;
        const double value = p.concentration * std::exp(-falloff * rho2);
        c_h(y, x) = value;
        conc_sum += value;
        pixels.push_back({x, y});
      }
    if (pixels.size() < 4) continue;  // degenerate sliver, skip

    raster::Mask m = raster::Mask::Zero(image_size, image_size);
    for (const auto& px : pixels) m(px.y, px.x) = 1;

    CellRecord rec;
    rec.cell.cell_id = make_cell_id(image_id, ++index);
    rec.cell.image_id = image_id;
    rec.cell.mask = std::move(pixels);
    rec.cell.boundary = raster::outer_boundary(m);
    rec.radius = std::sqrt(p.a * p.b);
    rec.axis_ratio = p.a / p.b;
    rec.orientation = p.theta;
    rec.concentration = p.concentration;
    rec.mean_concentration = conc_sum / static_cast<double>(rec.cell.mask.size());
    rec.mode = p.mode;
    truth_out->push_back(std::move(rec));
  }

  RegionImage img = stain::render_from_concentrations(c_h, c_e, stains, image_id, spec.group);
  if (noise_sigma > 0) {
    for (Eigen::Index y = 0; y < img.rows(); ++y)
      for (Eigen::Index x = 0; x < img.cols(); ++x) {
        const auto jitter = [&](std::uint8_t v) {
          const double nv = std::round(v + rng.normal(0.0, noise_sigma));
          return static_cast<std::uint8_t>(std::clamp(nv, 0.0, 255.0));
        };
        img.r(y, x) = jitter(img.r(y, x));
        img.g(y, x) = jitter(img.g(y, x));
        img.b(y, x) = jitter(img.b(y, x));
      }
  }
  return img;
}

}  // namespace

ImageCohort synth_cohort(const std::vector<GroupSpec>& specs, int images_per_spec, int image_size,
                         std::uint64_t seed, const stain::StainMatrix& stains, double noise_sigma,
                         double background_eosin, int threads) {
  if (specs.empty()) throw ConfigError("synth_cohort: no group specs");
  if (image_size < 32) throw ConfigError("synth_cohort: image_size must be >= 32");
  for (const auto& s : specs) {
    s.validate();
    const double fill = s.n_cells_per_image * M_PI *
                        (s.radius_mean * s.radius_mean + s.radius_std * s.radius_std) /
                        (static_cast<double>(image_size) * image_size);
    if (fill > 0.30)
      throw PlacementError("requested cell density exceeds the 30% fill budget");
  }

  const int total = static_cast<int>(specs.size()) * images_per_spec;
  ImageCohort cohort;
  cohort.images.resize(static_cast<std::size_t>(total));
  std::vector<std::vector<CellRecord>> truths(static_cast<std::size_t>(total));

  parallel_for(total, threads, [&](std::int64_t t) {
    const auto spec_idx = static_cast<std::size_t>(t) / static_cast<std::size_t>(images_per_spec);
    const int img_idx = static_cast<int>(t % images_per_spec);
    const GroupSpec& spec = specs[spec_idx];
    char buf[64];
    std::snprintf(buf, sizeof(buf), "syn_%s_%03d",
                  spec.group == Group::MUT ? "mut" : "wt", img_idx);
    cohort.images[static_cast<std::size_t>(t)] = render_one_image(
        spec, image_size, buf, derive_seed(seed, spec_idx, static_cast<std::uint64_t>(img_idx)),
        stains, noise_sigma, background_eosin, &truths[static_cast<std::size_t>(t)]);
  });

  for (int t = 0; t < total; ++t)
    cohort.truth.by_image[cohort.images[static_cast<std::size_t>(t)].id] =
        std::move(truths[static_cast<std::size_t>(t)]);
  return cohort;
}

FeatureCohort synth_features(const std::vector<GroupSpec>& specs, int n_per_group, double overlap,
                             std::uint64_t seed, double mode_separation) {
  if (specs.empty()) throw ConfigError("synth_features: no group specs");
  if (overlap < 0 || overlap > 1) throw ConfigError("synth_features: overlap must be in [0,1]");
  constexpr int d = features::kFeatureCount;

  // class separation along the first axis; Bayes error = overlap / 2
  const double delta =
      std::min(8.0, -2.0 * inv_norm_cdf(std::max(overlap, 1e-8) / 2.0));

  FeatureCohort out;
  for (std::size_t g = 0; g < specs.size(); ++g) {
    const GroupSpec& spec = specs[g];
    spec.validate();
    const int label = spec.group == Group::MUT ? 1 : 0;
    const double center0 = (label == 1 ? +0.5 : -0.5) * delta;

    // planted mode centers: seeded orthonormal directions orthogonal to the
    // separation axis, constellation centered at zero
    Rng dir_rng(derive_seed(seed, 0xD1A5ULL, g));
    Eigen::MatrixXd raw(d, spec.n_modes);
    for (Eigen::Index i = 0; i < raw.size(); ++i) raw.data()[i] = dir_rng.normal();
    raw.row(0).setZero();  // orthogonal to the class axis
    Eigen::MatrixXd q =
        Eigen::HouseholderQR<Eigen::MatrixXd>(raw).householderQ() *
        Eigen::MatrixXd::Identity(d, spec.n_modes);
    q.row(0).setZero();
    Eigen::MatrixXd centers = mode_separation * q.transpose();  // n_modes x d
    centers.rowwise() -= centers.colwise().mean();

    Rng rng(derive_seed(seed, 0x5A3FULL, g));
    for (int i = 0; i < n_per_group; ++i) {
      const int mode = static_cast<int>(rng.uniform_int(spec.n_modes));
      Eigen::Matrix<double, 1, d> row;
      for (int j = 0; j < d; ++j) row(j) = centers(mode, j) + rng.normal();
      row(0) += center0;

      features::FeatureVector fv;
      char buf[64];
      std::snprintf(buf, sizeof(buf), "syn_%s_f%06d", label == 1 ? "mut" : "wt", i);
      fv.cell_id = buf;
      fv.image_id = "synthetic";
      fv.group = spec.group;
      fv.set_values(row);
      out.matrix.rows.push_back(std::move(fv));
      out.labels.push_back(label);
      out.mode_index.push_back(mode);
    }
  }
  return out;
}

std::string ground_truth_to_json(const GroundTruth& truth) {
  nlohmann::json j;
  j["images"] = nlohmann::json::object();
  for (const auto& [image_id, records] : truth.by_image) {
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& rec : records) {
      nlohmann::json c;
      c["cell_id"] = rec.cell.cell_id;
      c["mode"] = rec.mode;
      c["radius"] = rec.radius;
      c["axis_ratio"] = rec.axis_ratio;
      c["orientation"] = rec.orientation;
      c["concentration"] = rec.concentration;
      c["mean_concentration"] = rec.mean_concentration;
      std::vector<std::int32_t> flat;
      flat.reserve(rec.cell.boundary.size() * 2);
      for (const auto& p : rec.cell.boundary) {
        flat.push_back(p.x);
        flat.push_back(p.y);
      }
      c["boundary"] = flat;
      flat.clear();
      flat.reserve(rec.cell.mask.size() * 2);
      for (const auto& p : rec.cell.mask) {
        flat.push_back(p.x);
        flat.push_back(p.y);
      }
      c["mask"] = flat;
      cells.push_back(std::move(c));
    }
    j["images"][image_id] = std::move(cells);
  }
  return j.dump() + "\n";
}

GroundTruth ground_truth_from_json(const std::string& json_text) {
  const nlohmann::json j = nlohmann::json::parse(json_text);
  GroundTruth truth;
  for (const auto& [image_id, cells] : j.at("images").items()) {
    std::vector<CellRecord> records;
    for (const auto& c : cells) {
      CellRecord rec;
      rec.cell.cell_id = c.at("cell_id").get<std::string>();
      rec.cell.image_id = image_id;
      rec.mode = c.at("mode").get<int>();
      rec.radius = c.at("radius").get<double>();
      rec.axis_ratio = c.at("axis_ratio").get<double>();
      rec.orientation = c.at("orientation").get<double>();
      rec.concentration = c.at("concentration").get<double>();
      rec.mean_concentration = c.at("mean_concentration").get<double>();
      const auto bf = c.at("boundary").get<std::vector<std::int32_t>>();
      for (std::size_t i = 0; i + 1 < bf.size(); i += 2) rec.cell.boundary.push_back({bf[i], bf[i + 1]});
      const auto mf = c.at("mask").get<std::vector<std::int32_t>>();
      for (std::size_t i = 0; i + 1 < mf.size(); i += 2) rec.cell.mask.push_back({mf[i], mf[i + 1]});
      records.push_back(std::move(rec));
    }
    truth.by_image[image_id] = std::move(records);
  }
  return truth;
}

}  // namespace cellpheno::synth
