#include "cellpheno/pipeline.hpp"

#include "cellpheno/imageio.hpp"
#include "cellpheno/manifest.hpp"
#include "cellpheno/util.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

namespace cellpheno::pipeline {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using config::PipelineConfig;

struct Paths {
  fs::path out;
  fs::path manifest, ground_truth, images_dir;
  fs::path masks_dir, segment_summary, debug_dir;
  fs::path features_csv, group_stats_csv;
  fs::path retained_csv, prune_report;
  fs::path embedding_csv, embedding_meta, scatter_png;
  fs::path clusters_csv, sse_curves;
  fs::path panels_dir, panels_meta;

  explicit Paths(const PipelineConfig& cfg) : out(cfg.out_dir) {
    manifest = out / "manifest.csv";
    ground_truth = out / "ground_truth.json";
    images_dir = out / "images";
    masks_dir = out / "masks";
    segment_summary = out / "segment_summary.json";
    debug_dir = out / "debug";
    features_csv = out / "features.csv";
    group_stats_csv = out / "group_stats.csv";
    retained_csv = out / "retained_ids.csv";
    prune_report = out / "prune_report.json";
    embedding_csv = out / "embedding.csv";
    embedding_meta = out / "embedding_meta.json";
    scatter_png = out / "scatter.png";
    clusters_csv = out / "clusters.csv";
    sse_curves = out / "sse_curves.json";
    panels_dir = out / "panels";
    panels_meta = out / "panels.json";
  }

  fs::path run_record(Stage s) const { return out / (std::string("run_") + to_string(s) + ".json"); }
};

void require_input(const fs::path& p, const char* what) {
  if (!fs::exists(p))
    throw InputError(std::string("missing input for ") + what + ": " + p.string());
}

std::string file_digest(const fs::path& p) { return digest_hex(fnv1a(read_file(p))); }

// --- run records ------------------------------------------------------------

bool up_to_date(Stage stage, const Paths& paths, const PipelineConfig& cfg,
                const std::vector<fs::path>& inputs, const std::vector<fs::path>& outputs) {
  const fs::path rec_path = paths.run_record(stage);
  if (!fs::exists(rec_path)) return false;
  json rec;
  try {
    rec = json::parse(read_file(rec_path));
  } catch (...) {
    return false;
  }
  if (!rec.contains("config_hash") ||
      rec["config_hash"].get<std::string>() != digest_hex(config_hash(cfg)))
    return false;
  for (const auto& out : outputs)
    if (!fs::exists(out)) return false;
  if (!rec.contains("inputs")) return false;
  for (const auto& in : inputs) {
    if (!fs::exists(in)) return false;
    const std::string key = in.lexically_relative(paths.out).generic_string();
    if (!rec["inputs"].contains(key) || rec["inputs"][key].get<std::string>() != file_digest(in))
      return false;
  }
  return true;
}

void write_run_record(Stage stage, const Paths& paths, const PipelineConfig& cfg,
                      const std::vector<fs::path>& inputs, const std::vector<fs::path>& outputs) {
  json rec;
  rec["stage"] = to_string(stage);
  rec["version"] = kVersion;
  rec["seed"] = cfg.seed;
  rec["config"] = config_to_json(cfg);
  rec["config_hash"] = digest_hex(config_hash(cfg));
  json in = json::object();
  for (const auto& p : inputs)
    in[p.lexically_relative(paths.out).generic_string()] = file_digest(p);
  rec["inputs"] = in;
  json outs = json::array();
  for (const auto& p : outputs) outs.push_back(p.lexically_relative(paths.out).generic_string());
  rec["outputs"] = outs;
  write_file_atomic(paths.run_record(stage), rec.dump(2) + "\n");
}

// --- shared loading helpers ---------------------------------------------------

stain::LabStats resolve_target_stats(const PipelineConfig& cfg, const CohortManifest& manifest,
                                     const fs::path& base_dir) {
  if (cfg.stain.target_stats) return *cfg.stain.target_stats;
  if (cfg.stain.reference_tile) {
    ManifestEntry ref{*cfg.stain.reference_tile, "__reference__", Group::MUT};
    return stain::compute_lab_stats(load_region_image(ref, base_dir));
  }
  if (manifest.entries.empty()) throw InputError("manifest has no entries");
  return stain::compute_lab_stats(load_region_image(manifest.entries[0], base_dir));
}

PlaneD intensity_plane(const PipelineConfig& cfg, const RegionImage& normalized) {
  if (cfg.features.intensity_channel == config::IntensityChannel::Luma)
    return features::luma_plane(normalized);
  // hematoxylin concentration mapped onto a 0..255 scale
  const ScalarImage h = stain::deconvolve(normalized, cfg.stain.matrix()).first;
  return (h.values.min(3.0) / 3.0 * 255.0).eval();
}

struct LoadedCohort {
  CohortManifest manifest;
  std::vector<RegionImage> normalized;           // aligned with manifest.entries
  std::map<std::string, const RegionImage*> by_id;
};

LoadedCohort load_normalized_cohort(const PipelineConfig& cfg, const Paths& paths) {
  LoadedCohort c;
  c.manifest = load_manifest(paths.manifest);
  const stain::LabStats target = resolve_target_stats(cfg, c.manifest, paths.out);
  c.normalized.resize(c.manifest.entries.size());
  parallel_for(static_cast<std::int64_t>(c.manifest.entries.size()), cfg.threads,
               [&](std::int64_t i) {
                 const auto& entry = c.manifest.entries[static_cast<std::size_t>(i)];
                 c.normalized[static_cast<std::size_t>(i)] =
                     stain::normalize_to_target(load_region_image(entry, paths.out), target);
               });
  for (const auto& img : c.normalized) c.by_id[img.id] = &img;
  return c;
}

std::vector<std::string> read_retained_ids(const fs::path& p) {
  std::istringstream in(read_file(p));
  std::string line;
  if (!std::getline(in, line) || split_csv_line(line) != std::vector<std::string>{"cell_id"})
    throw InputError("retained ids CSV must have header cell_id: " + p.string());
  std::vector<std::string> ids;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    ids.push_back(split_csv_line(line)[0]);
  }
  return ids;
}

features::FeatureMatrix retained_rows(const features::FeatureMatrix& all,
                                      const std::vector<std::string>& retained) {
  const std::set<std::string> keep(retained.begin(), retained.end());
  features::FeatureMatrix out;
  for (const auto& r : all.rows)
    if (keep.count(r.cell_id)) out.rows.push_back(r);
  return out;
}

// --- stages -------------------------------------------------------------------

void stage_synth(const PipelineConfig& cfg, const Paths& paths, const StageOptions& opts) {
  const std::vector<fs::path> outputs = {paths.manifest, paths.ground_truth};
  if (!opts.force && up_to_date(Stage::Synth, paths, cfg, {}, outputs)) {
    std::cout << "[synth] up to date\n";
    return;
  }
  const synth::ImageCohort cohort =
      synth::synth_cohort(cfg.synth.groups, cfg.synth.images_per_group, cfg.synth.image_size,
                          cfg.seed, cfg.stain.matrix(), cfg.synth.noise_sigma,
                          cfg.synth.background_eosin, cfg.threads);
  CohortManifest manifest;
  for (const auto& img : cohort.images) {
    const std::string rel = "images/" + img.id + ".png";
    io::write_rgb8(paths.out / rel, img.r, img.g, img.b);
    manifest.entries.push_back({rel, img.id, img.group});
  }
  write_file_atomic(paths.manifest, manifest_to_csv(manifest));
  write_file_atomic(paths.ground_truth, synth::ground_truth_to_json(cohort.truth));
  write_run_record(Stage::Synth, paths, cfg, {}, outputs);
  std::cout << "[synth] wrote " << cohort.images.size() << " images\n";
}

void stage_segment(const PipelineConfig& cfg, const Paths& paths, const StageOptions& opts) {
  require_input(paths.manifest, "segment");
  const std::vector<fs::path> inputs = {paths.manifest};
  const std::vector<fs::path> outputs = {paths.segment_summary};
  if (!opts.force && up_to_date(Stage::Segment, paths, cfg, inputs, outputs)) {
    std::cout << "[segment] up to date\n";
    return;
  }
  const LoadedCohort cohort = load_normalized_cohort(cfg, paths);
  const stain::StainMatrix stains = cfg.stain.matrix();
  const std::size_t n = cohort.manifest.entries.size();
  std::vector<std::vector<CellInstance>> cells(n);
  parallel_for(static_cast<std::int64_t>(n), cfg.threads, [&](std::int64_t i) {
    const RegionImage& img = cohort.normalized[static_cast<std::size_t>(i)];
    if (cfg.debug_dump) {
      const auto h = stain::deconvolve(img, stains).first;
      io::write_gray_f32_tiff(paths.debug_dir / (img.id + "_hematoxylin.tif"), h.values);
      io::write_gray_f32_tiff(paths.debug_dir / (img.id + "_enhanced.tif"),
                              segment::enhance(h, cfg.segment).values);
    }
    cells[static_cast<std::size_t>(i)] = segment::segment_image(img, stains, cfg.segment);
  });

  json summary;
  std::size_t total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const RegionImage& img = cohort.normalized[i];
    io::write_gray16_png(paths.masks_dir / (img.id + ".png"),
                         rasterize_instance_masks(cells[i], img.rows(), img.cols()));
    summary[img.id] = cells[i].size();
    total += cells[i].size();
  }
  write_file_atomic(paths.segment_summary, summary.dump(2) + "\n");
  write_run_record(Stage::Segment, paths, cfg, inputs, outputs);
  std::cout << "[segment] " << total << " cells across " << n << " images\n";
}

void stage_features(const PipelineConfig& cfg, const Paths& paths, const StageOptions& opts) {
  require_input(paths.manifest, "features");
  require_input(paths.masks_dir, "features");
  const std::vector<fs::path> inputs = {paths.manifest};
  const std::vector<fs::path> outputs = {paths.features_csv};
  if (!opts.force && up_to_date(Stage::Features, paths, cfg, inputs, outputs)) {
    std::cout << "[features] up to date\n";
    return;
  }
  const LoadedCohort cohort = load_normalized_cohort(cfg, paths);
  const features::FeatureOptions fopts{cfg.features.histogram_bins};

  features::FeatureMatrix matrix;
  for (std::size_t i = 0; i < cohort.manifest.entries.size(); ++i) {
    const RegionImage& img = cohort.normalized[i];
    const fs::path mask_path = paths.masks_dir / (img.id + ".png");
    require_input(mask_path, "features");
    const auto cells = cells_from_label_raster(io::read_gray16_png(mask_path), img.id);
    const PlaneD intensity = intensity_plane(cfg, img);
    for (const auto& cell : cells)
      matrix.rows.push_back(features::compute_features(cell, intensity, img.group, fopts));
  }
  write_file_atomic(paths.features_csv, features::features_to_csv(matrix));

  std::set<Group> groups;
  for (const auto& r : matrix.rows) groups.insert(r.group);
  if (groups.size() >= 2) {
    write_file_atomic(paths.group_stats_csv,
                      features::group_stats_to_csv(features::group_stats(matrix)));
  } else {
    std::cout << "[features] single-group cohort, skipping group stats\n";
  }
  write_run_record(Stage::Features, paths, cfg, inputs, outputs);
  std::cout << "[features] " << matrix.rows.size() << " cells\n";
}

struct LabeledRows {
  features::FeatureMatrix matrix;  // normalized
  Eigen::MatrixXd values;          // z-scored rows
  std::vector<int> labels;         // MUT = 1
  std::vector<std::string> ids;
};

LabeledRows load_labeled_rows(const fs::path& csv, const std::vector<std::string>* retained) {
  features::FeatureMatrix m = features::features_from_csv(csv);
  if (retained) m = retained_rows(m, *retained);
  if (m.rows.size() < 2) throw InputError("too few feature rows in " + csv.string());
  LabeledRows out;
  out.matrix = features::normalize(std::move(m));
  out.values = out.matrix.normalized_values();
  for (const auto& r : out.matrix.rows) {
    out.labels.push_back(r.group == Group::MUT ? 1 : 0);
    out.ids.push_back(r.cell_id);
  }
  return out;
}

void stage_prune(const PipelineConfig& cfg, const Paths& paths, const StageOptions& opts) {
  require_input(paths.features_csv, "prune");
  const std::vector<fs::path> inputs = {paths.features_csv};
  const std::vector<fs::path> outputs = {paths.retained_csv, paths.prune_report};
  if (!opts.force && up_to_date(Stage::Prune, paths, cfg, inputs, outputs)) {
    std::cout << "[prune] up to date\n";
    return;
  }
  LabeledRows rows = load_labeled_rows(paths.features_csv, nullptr);
  learn::PruneConfig pcfg = cfg.prune;
  pcfg.seed = cfg.seed;
  learn::PruneResult result;
  try {
    result = learn::prune(rows.values, rows.labels, rows.ids, pcfg, cfg.learn);
  } catch (const learn::PrunedToDegenerate& e) {
    write_file_atomic(paths.prune_report, learn::prune_report_to_json(e.report, pcfg));
    throw;
  }
  std::string csv = "cell_id\n";
  for (const auto& id : result.retained_ids) csv += id + "\n";
  write_file_atomic(paths.retained_csv, csv);
  write_file_atomic(paths.prune_report, learn::prune_report_to_json(result.report, pcfg));
  write_run_record(Stage::Prune, paths, cfg, inputs, outputs);
  std::cout << "[prune] retained " << result.retained_ids.size() << " of " << rows.ids.size()
            << " cells\n";
}

void draw_scatter(const fs::path& path, const features::FeatureMatrix& matrix,
                  const Eigen::MatrixXd& points) {
  constexpr int kSize = 640;
  PlaneU8 r = PlaneU8::Constant(kSize, kSize, 255);
  PlaneU8 g = PlaneU8::Constant(kSize, kSize, 255);
  PlaneU8 b = PlaneU8::Constant(kSize, kSize, 255);
  if (points.rows() > 0 && points.cols() >= 2) {
    const double x0 = points.col(0).minCoeff(), x1 = points.col(0).maxCoeff();
    const double y0 = points.col(1).minCoeff(), y1 = points.col(1).maxCoeff();
    const double sx = x1 > x0 ? (kSize - 20.0) / (x1 - x0) : 1.0;
    const double sy = y1 > y0 ? (kSize - 20.0) / (y1 - y0) : 1.0;
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
      const int px = 10 + static_cast<int>((points(i, 0) - x0) * sx);
      const int py = kSize - 10 - static_cast<int>((points(i, 1) - y0) * sy);
      const bool mut = matrix.rows[static_cast<std::size_t>(i)].group == Group::MUT;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int x = px + dx, y = py + dy;
          if (x < 0 || y < 0 || x >= kSize || y >= kSize) continue;
          r(y, x) = mut ? 178 : 30;
          g(y, x) = mut ? 34 : 60;
          b(y, x) = mut ? 34 : 200;
        }
    }
  }
  io::write_rgb8(path, r, g, b);
}

void stage_embed(const PipelineConfig& cfg, const Paths& paths, const StageOptions& opts) {
  require_input(paths.features_csv, "embed");
  std::vector<fs::path> inputs = {paths.features_csv};
  const bool have_retained = fs::exists(paths.retained_csv);
  if (have_retained) inputs.push_back(paths.retained_csv);
  const std::vector<fs::path> outputs = {paths.embedding_csv, paths.embedding_meta,
                                         paths.scatter_png};
  if (!opts.force && up_to_date(Stage::Embed, paths, cfg, inputs, outputs)) {
    std::cout << "[embed] up to date\n";
    return;
  }
  std::vector<std::string> retained;
  if (have_retained) retained = read_retained_ids(paths.retained_csv);
  LabeledRows rows = load_labeled_rows(paths.features_csv, have_retained ? &retained : nullptr);

  // stratified deterministic subsample to keep the O(n^2) embedding bounded
  std::vector<std::size_t> pick;
  const std::size_t n = rows.matrix.rows.size();
  const auto cap = static_cast<std::size_t>(std::max(2, cfg.analyze.mds_subsample));
  if (n > cap) {
    std::map<Group, std::vector<std::size_t>> by_group;
    for (std::size_t i = 0; i < n; ++i) by_group[rows.matrix.rows[i].group].push_back(i);
    for (auto& [grp, idx] : by_group) {
      (void)grp;
      const auto quota = static_cast<std::size_t>(
          std::max<double>(1.0, std::floor(static_cast<double>(idx.size()) / n *
                                           static_cast<double>(cap))));
      const double step = static_cast<double>(idx.size()) / static_cast<double>(quota);
      for (std::size_t k = 0; k < quota; ++k)
        pick.push_back(idx[static_cast<std::size_t>(k * step)]);
    }
    std::sort(pick.begin(), pick.end());
  } else {
    pick.resize(n);
    for (std::size_t i = 0; i < n; ++i) pick[i] = i;
  }

  features::FeatureMatrix sub;
  for (const std::size_t i : pick) sub.rows.push_back(rows.matrix.rows[i]);
  sub.normalization = rows.matrix.normalization;
  Eigen::MatrixXd values(static_cast<Eigen::Index>(pick.size()), features::kFeatureCount);
  for (std::size_t k = 0; k < pick.size(); ++k)
    values.row(static_cast<Eigen::Index>(k)) = rows.values.row(static_cast<Eigen::Index>(pick[k]));

  const Eigen::MatrixXd D = analyze::pairwise_distances(values);
  const analyze::Embedding emb =
      analyze::mds_embed(D, cfg.analyze.embed_dim, cfg.analyze.mds_max_iter, cfg.analyze.mds_tol,
                         cfg.seed);

  std::string csv = "cell_id,group";
  for (int j = 0; j < cfg.analyze.embed_dim; ++j) csv += ",x" + std::to_string(j);
  csv += "\n";
  for (std::size_t k = 0; k < sub.rows.size(); ++k) {
    csv += sub.rows[k].cell_id;
    csv += ',';
    csv += to_string(sub.rows[k].group);
    for (int j = 0; j < cfg.analyze.embed_dim; ++j) {
      csv += ',';
      csv += format_double(emb.points(static_cast<Eigen::Index>(k), j));
    }
    csv += '\n';
  }
  write_file_atomic(paths.embedding_csv, csv);

  json meta;
  meta["stress"] = emb.stress;
  meta["iterations"] = emb.iterations_run;
  meta["n_embedded"] = pick.size();
  meta["n_rows"] = n;
  meta["subsampled"] = n > cap;
  meta["pruned_input"] = have_retained;
  write_file_atomic(paths.embedding_meta, meta.dump(2) + "\n");
  draw_scatter(paths.scatter_png, sub, emb.points);
  write_run_record(Stage::Embed, paths, cfg, inputs, outputs);
  std::cout << "[embed] stress " << emb.stress << " over " << pick.size() << " cells\n";
}

void stage_cluster(const PipelineConfig& cfg, const Paths& paths, const StageOptions& opts) {
  require_input(paths.features_csv, "cluster");
  std::vector<fs::path> inputs = {paths.features_csv};
  const bool have_retained = fs::exists(paths.retained_csv);
  if (have_retained) inputs.push_back(paths.retained_csv);
  const std::vector<fs::path> outputs = {paths.clusters_csv, paths.sse_curves};
  if (!opts.force && up_to_date(Stage::Cluster, paths, cfg, inputs, outputs)) {
    std::cout << "[cluster] up to date\n";
    return;
  }
  std::vector<std::string> retained;
  if (have_retained) retained = read_retained_ids(paths.retained_csv);
  LabeledRows rows = load_labeled_rows(paths.features_csv, have_retained ? &retained : nullptr);

  json curves;
  std::string csv = "cell_id,group,cluster\n";
  for (const Group group : {Group::MUT, Group::WT}) {
    std::vector<Eigen::Index> idx;
    for (std::size_t i = 0; i < rows.matrix.rows.size(); ++i)
      if (rows.matrix.rows[i].group == group) idx.push_back(static_cast<Eigen::Index>(i));
    if (static_cast<int>(idx.size()) < cfg.analyze.k_max) {
      std::cout << "[cluster] group " << to_string(group) << " too small, skipped\n";
      continue;
    }
    Eigen::MatrixXd X(static_cast<Eigen::Index>(idx.size()), features::kFeatureCount);
    for (std::size_t k = 0; k < idx.size(); ++k)
      X.row(static_cast<Eigen::Index>(k)) = rows.values.row(idx[k]);

    const std::uint64_t group_seed = derive_seed(cfg.seed, 0xC1A5ULL, group == Group::MUT ? 1 : 0);
    const analyze::ElbowResult elbow = analyze::elbow_k(X, cfg.analyze.k_max, group_seed,
                                                        cfg.analyze.kmeans_restarts,
                                                        cfg.analyze.elbow_threshold);
    analyze::KmeansResult best;
    best.sse = std::numeric_limits<double>::infinity();
    for (int r = 0; r < cfg.analyze.kmeans_restarts; ++r) {
      analyze::KmeansResult cand = analyze::kmeans(
          X, elbow.k, derive_seed(group_seed, static_cast<std::uint64_t>(elbow.k),
                                  static_cast<std::uint64_t>(r)));
      if (cand.sse < best.sse) best = std::move(cand);
    }

    for (std::size_t k = 0; k < idx.size(); ++k) {
      csv += rows.matrix.rows[static_cast<std::size_t>(idx[k])].cell_id;
      csv += ',';
      csv += to_string(group);
      csv += ',';
      csv += std::to_string(best.assignments[k]);
      csv += '\n';
    }
    json curve = json::object();
    for (const auto& [k, sse] : elbow.sse_curve) curve[std::to_string(k)] = sse;
    curves[to_string(group)] = {{"k", elbow.k},
                                {"sse", curve},
                                {"weak_elbow", elbow.weak_elbow},
                                {"capped", elbow.capped}};
    std::cout << "[cluster] " << to_string(group) << " k=" << elbow.k
              << (elbow.weak_elbow ? " (weak elbow)" : "") << "\n";
  }
  write_file_atomic(paths.clusters_csv, csv);
  write_file_atomic(paths.sse_curves, curves.dump(2) + "\n");
  write_run_record(Stage::Cluster, paths, cfg, inputs, outputs);
}

void stage_panel(const PipelineConfig& cfg, const Paths& paths, const StageOptions& opts) {
  require_input(paths.manifest, "panel");
  require_input(paths.masks_dir, "panel");
  require_input(paths.features_csv, "panel");
  require_input(paths.clusters_csv, "panel");
  const std::vector<fs::path> inputs = {paths.manifest, paths.features_csv, paths.clusters_csv};
  const std::vector<fs::path> outputs = {paths.panels_meta};
  if (!opts.force && up_to_date(Stage::Panel, paths, cfg, inputs, outputs)) {
    std::cout << "[panel] up to date\n";
    return;
  }

  // cluster assignments
  std::map<Group, std::map<std::string, int>> assignments;
  {
    std::istringstream in(read_file(paths.clusters_csv));
    std::string line;
    std::getline(in, line);
    if (split_csv_line(line) != std::vector<std::string>{"cell_id", "group", "cluster"})
      throw InputError("clusters CSV header mismatch: " + paths.clusters_csv.string());
    while (std::getline(in, line)) {
      if (line.empty() || line == "\r") continue;
      const auto f = split_csv_line(line);
      if (f.size() != 3) throw InputError("bad clusters row: '" + line + "'");
      assignments[parse_group(f[1])][f[0]] = std::stoi(f[2]);
    }
  }

  LabeledRows rows = load_labeled_rows(paths.features_csv, nullptr);
  std::map<std::string, Eigen::Index> row_of;
  for (std::size_t i = 0; i < rows.matrix.rows.size(); ++i)
    row_of[rows.matrix.rows[i].cell_id] = static_cast<Eigen::Index>(i);

  const LoadedCohort cohort = load_normalized_cohort(cfg, paths);
  std::vector<std::vector<CellInstance>> all_cells;
  std::map<std::string, const CellInstance*> cell_by_id;
  for (const auto& img : cohort.normalized) {
    const fs::path mask_path = paths.masks_dir / (img.id + ".png");
    require_input(mask_path, "panel");
    all_cells.push_back(cells_from_label_raster(io::read_gray16_png(mask_path), img.id));
  }
  for (const auto& cells : all_cells)
    for (const auto& c : cells) cell_by_id[c.cell_id] = &c;

  const analyze::PanelOptions popts{cfg.analyze.per_cluster, cfg.analyze.x_margin,
                                    cfg.analyze.y_margin};
  json meta = json::array();
  for (const auto& [group, assign] : assignments) {
    if (assign.empty()) continue;
    analyze::ClusterModel model;
    model.group = group;
    model.assignments = assign;
    int k = 0;
    for (const auto& [id, c] : assign) {
      (void)id;
      k = std::max(k, c + 1);
    }
    model.k = k;
    // Centroids as member means in normalized feature space
    model.centroids = Eigen::MatrixXd::Zero(k, features::kFeatureCount);
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
    for (const auto& [id, c] : assign) {
      const auto it = row_of.find(id);
      if (it == row_of.end()) throw InputError("clusters CSV references unknown cell: " + id);
      model.centroids.row(c) += rows.values.row(it->second);
      counts(c) += 1;
    }
    for (int c = 0; c < k; ++c)
      if (counts(c) > 0) model.centroids.row(c) /= counts(c);

    const auto panels =
        analyze::retrieve_representatives(model, rows.matrix, cell_by_id, cohort.by_id, popts);
    for (const auto& panel : panels) {
      char name[64];
      std::snprintf(name, sizeof(name), "panel_%s_%d.png", to_string(panel.group), panel.cluster);
      io::write_rgb8(paths.panels_dir / name, panel.r, panel.g, panel.b);
      json pj;
      pj["file"] = std::string("panels/") + name;
      pj["group"] = to_string(panel.group);
      pj["cluster"] = panel.cluster;
      pj["tile_width"] = panel.tile_width;
      pj["tile_height"] = panel.tile_height;
      pj["grid"] = panel.grid;
      pj["n_real"] = panel.n_real;
      pj["padded"] = panel.grid * panel.grid - panel.n_real;
      meta.push_back(pj);
    }
    if (static_cast<int>(panels.size()) < k)
      std::cout << "[panel] " << to_string(group) << ": " << k - static_cast<int>(panels.size())
                << " empty cluster(s) skipped\n";
  }
  write_file_atomic(paths.panels_meta, meta.dump(2) + "\n");
  write_run_record(Stage::Panel, paths, cfg, inputs, outputs);
  std::cout << "[panel] wrote " << meta.size() << " panels\n";
}

}  // namespace

Stage parse_stage(const std::string& name) {
  if (name == "synth") return Stage::Synth;
  if (name == "segment") return Stage::Segment;
  if (name == "features") return Stage::Features;
  if (name == "prune") return Stage::Prune;
  if (name == "embed") return Stage::Embed;
  if (name == "cluster") return Stage::Cluster;
  if (name == "panel") return Stage::Panel;
  if (name == "pipeline") return Stage::Pipeline;
  throw ConfigError("unknown stage: " + name);
}

const char* to_string(Stage s) {
  switch (s) {
    case Stage::Synth: return "synth";
    case Stage::Segment: return "segment";
    case Stage::Features: return "features";
    case Stage::Prune: return "prune";
    case Stage::Embed: return "embed";
    case Stage::Cluster: return "cluster";
    case Stage::Panel: return "panel";
    case Stage::Pipeline: return "pipeline";
  }
  return "?";
}

int run_stage(Stage stage, const config::PipelineConfig& cfg, const StageOptions& opts) {
  const Paths paths(cfg);
  try {
    std::filesystem::create_directories(paths.out);
    switch (stage) {
      case Stage::Synth: stage_synth(cfg, paths, opts); break;
      case Stage::Segment: stage_segment(cfg, paths, opts); break;
      case Stage::Features: stage_features(cfg, paths, opts); break;
      case Stage::Prune: stage_prune(cfg, paths, opts); break;
      case Stage::Embed: stage_embed(cfg, paths, opts); break;
      case Stage::Cluster: stage_cluster(cfg, paths, opts); break;
      case Stage::Panel: stage_panel(cfg, paths, opts); break;
      case Stage::Pipeline:
        stage_synth(cfg, paths, opts);
        stage_segment(cfg, paths, opts);
        stage_features(cfg, paths, opts);
        stage_prune(cfg, paths, opts);
        stage_embed(cfg, paths, opts);
        stage_cluster(cfg, paths, opts);
        stage_panel(cfg, paths, opts);
        break;
    }
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

}  // namespace cellpheno::pipeline
