#include "cellpheno/config.hpp"

#include "cellpheno/util.hpp"

#include <set>

namespace cellpheno::config {
namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError("config section '" + where + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!allowed.count(key))
      throw ConfigError("unknown config key '" + where + (where.empty() ? "" : ".") + key + "'");
  }
}

template <typename T>
void get_to(const json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

Eigen::Vector3d vec3(const json& j, const std::string& where) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 3) throw ConfigError("'" + where + "' must have 3 entries");
  return {v[0], v[1], v[2]};
}

void parse_stain(const json& j, StainConfig& c) {
  check_keys(j, "stain", {"hematoxylin", "eosin", "target_stats", "reference_tile"});
  if (j.contains("hematoxylin")) c.hematoxylin = vec3(j.at("hematoxylin"), "stain.hematoxylin");
  if (j.contains("eosin")) c.eosin = vec3(j.at("eosin"), "stain.eosin");
  if (j.contains("target_stats") && !j.at("target_stats").is_null()) {
    const json& t = j.at("target_stats");
    check_keys(t, "stain.target_stats", {"mean", "std"});
    stain::LabStats stats;
    stats.mean = vec3(t.at("mean"), "stain.target_stats.mean");
    stats.std = vec3(t.at("std"), "stain.target_stats.std").cwiseMax(stain::kMinStd);
    c.target_stats = stats;
  }
  if (j.contains("reference_tile") && !j.at("reference_tile").is_null())
    c.reference_tile = j.at("reference_tile").get<std::string>();
}

void parse_segment(const json& j, segment::EnhancementParams& p) {
  check_keys(j, "segment",
             {"alpha", "beta", "sigmas", "t_low", "t_high", "min_area_px", "max_mean_intensity",
              "smoothing_cutoff", "min_circularity"});
  get_to(j, "alpha", p.alpha);
  if (j.contains("beta") && !j.at("beta").is_null()) p.beta = j.at("beta").get<double>();
  get_to(j, "sigmas", p.sigmas);
  get_to(j, "t_low", p.t_low);
  get_to(j, "t_high", p.t_high);
  get_to(j, "min_area_px", p.min_area_px);
  get_to(j, "max_mean_intensity", p.max_mean_intensity);
  get_to(j, "smoothing_cutoff", p.smoothing_cutoff);
  get_to(j, "min_circularity", p.min_circularity);
  p.validate();
}

void parse_features(const json& j, FeaturesConfig& c) {
  check_keys(j, "features", {"intensity_channel", "histogram_bins"});
  if (j.contains("intensity_channel")) {
    const auto s = j.at("intensity_channel").get<std::string>();
    if (s == "luma")
      c.intensity_channel = IntensityChannel::Luma;
    else if (s == "hematoxylin")
      c.intensity_channel = IntensityChannel::Hematoxylin;
    else
      throw ConfigError("features.intensity_channel must be 'luma' or 'hematoxylin'");
  }
  get_to(j, "histogram_bins", c.histogram_bins);
  if (c.histogram_bins < 2 || c.histogram_bins > 256)
    throw ConfigError("features.histogram_bins must be in [2, 256]");
}

void parse_learn(const json& j, learn::PruneConfig& prune, learn::LearnParams& hp) {
  check_keys(j, "learn",
             {"folds", "vote_thresholds", "final_unanimity", "early_stop_delta", "logreg",
              "forest", "adaboost", "naive_bayes", "qda", "neural_net"});
  get_to(j, "folds", prune.folds);
  get_to(j, "vote_thresholds", prune.vote_thresholds);
  get_to(j, "final_unanimity", prune.final_unanimity);
  get_to(j, "early_stop_delta", prune.early_stop_delta);
  if (j.contains("logreg")) {
    const json& s = j.at("logreg");
    check_keys(s, "learn.logreg", {"iterations", "step", "l2"});
    get_to(s, "iterations", hp.logreg.iterations);
    get_to(s, "step", hp.logreg.step);
    get_to(s, "l2", hp.logreg.l2);
  }
  if (j.contains("forest")) {
    const json& s = j.at("forest");
    check_keys(s, "learn.forest", {"trees", "max_depth", "min_samples_split"});
    get_to(s, "trees", hp.forest.trees);
    get_to(s, "max_depth", hp.forest.max_depth);
    get_to(s, "min_samples_split", hp.forest.min_samples_split);
  }
  if (j.contains("adaboost")) {
    const json& s = j.at("adaboost");
    check_keys(s, "learn.adaboost", {"rounds"});
    get_to(s, "rounds", hp.adaboost.rounds);
  }
  if (j.contains("naive_bayes")) {
    const json& s = j.at("naive_bayes");
    check_keys(s, "learn.naive_bayes", {"variance_floor"});
    get_to(s, "variance_floor", hp.nb.variance_floor);
  }
  if (j.contains("qda")) {
    const json& s = j.at("qda");
    check_keys(s, "learn.qda", {"ridge"});
    get_to(s, "ridge", hp.qda.ridge);
  }
  if (j.contains("neural_net")) {
    const json& s = j.at("neural_net");
    check_keys(s, "learn.neural_net", {"hidden", "epochs", "batch", "step", "init_range"});
    get_to(s, "hidden", hp.nn.hidden);
    get_to(s, "epochs", hp.nn.epochs);
    get_to(s, "batch", hp.nn.batch);
    get_to(s, "step", hp.nn.step);
    get_to(s, "init_range", hp.nn.init_range);
  }
  prune.validate();
}

void parse_analyze(const json& j, AnalyzeConfig& c) {
  check_keys(j, "analyze",
             {"embed_dim", "k_max", "elbow_threshold", "kmeans_restarts", "per_cluster",
              "x_margin", "y_margin", "mds_max_iter", "mds_tol", "mds_subsample"});
  get_to(j, "embed_dim", c.embed_dim);
  get_to(j, "k_max", c.k_max);
  get_to(j, "elbow_threshold", c.elbow_threshold);
  get_to(j, "kmeans_restarts", c.kmeans_restarts);
  get_to(j, "per_cluster", c.per_cluster);
  get_to(j, "x_margin", c.x_margin);
  get_to(j, "y_margin", c.y_margin);
  get_to(j, "mds_max_iter", c.mds_max_iter);
  get_to(j, "mds_tol", c.mds_tol);
  get_to(j, "mds_subsample", c.mds_subsample);
  if (c.embed_dim < 1 || c.embed_dim >= features::kFeatureCount)
    throw ConfigError("analyze.embed_dim must be in [1, 9]");
  if (c.k_max < 1) throw ConfigError("analyze.k_max must be >= 1");
  if (c.per_cluster < 1) throw ConfigError("analyze.per_cluster must be >= 1");
}

synth::GroupSpec parse_group_spec(const json& j, const std::string& where) {
  check_keys(j, where,
             {"group", "n_cells_per_image", "radius_mean", "radius_std", "axis_ratio_mean",
              "axis_ratio_std", "intensity_mean", "intensity_std", "n_modes", "mode_offsets",
              "rim_fraction"});
  synth::GroupSpec s;
  s.group = parse_group(j.at("group").get<std::string>());
  get_to(j, "n_cells_per_image", s.n_cells_per_image);
  get_to(j, "radius_mean", s.radius_mean);
  get_to(j, "radius_std", s.radius_std);
  get_to(j, "axis_ratio_mean", s.axis_ratio_mean);
  get_to(j, "axis_ratio_std", s.axis_ratio_std);
  get_to(j, "intensity_mean", s.intensity_mean);
  get_to(j, "intensity_std", s.intensity_std);
  get_to(j, "n_modes", s.n_modes);
  get_to(j, "rim_fraction", s.rim_fraction);
  if (j.contains("mode_offsets")) {
    for (const auto& m : j.at("mode_offsets")) {
      check_keys(m, where + ".mode_offsets[]", {"radius", "axis_ratio", "intensity"});
      synth::ModeShift shift;
      get_to(m, "radius", shift.radius);
      get_to(m, "axis_ratio", shift.axis_ratio);
      get_to(m, "intensity", shift.intensity);
      s.mode_offsets.push_back(shift);
    }
  }
  s.validate();
  return s;
}

void parse_synth(const json& j, SynthConfig& c) {
  check_keys(j, "synth",
             {"image_size", "images_per_group", "noise_sigma", "background_eosin", "groups",
              "features"});
  get_to(j, "image_size", c.image_size);
  get_to(j, "images_per_group", c.images_per_group);
  get_to(j, "noise_sigma", c.noise_sigma);
  get_to(j, "background_eosin", c.background_eosin);
  if (j.contains("groups")) {
    c.groups.clear();
    int idx = 0;
    for (const auto& g : j.at("groups"))
      c.groups.push_back(parse_group_spec(g, "synth.groups[" + std::to_string(idx++) + "]"));
  }
  if (j.contains("features")) {
    const json& f = j.at("features");
    check_keys(f, "synth.features", {"n_per_group", "overlap", "mode_separation"});
    get_to(f, "n_per_group", c.features.n_per_group);
    get_to(f, "overlap", c.features.overlap);
    get_to(f, "mode_separation", c.features.mode_separation);
  }
}

json group_spec_to_json(const synth::GroupSpec& s) {
  json j;
  j["group"] = to_string(s.group);
  j["n_cells_per_image"] = s.n_cells_per_image;
  j["radius_mean"] = s.radius_mean;
  j["radius_std"] = s.radius_std;
  j["axis_ratio_mean"] = s.axis_ratio_mean;
  j["axis_ratio_std"] = s.axis_ratio_std;
  j["intensity_mean"] = s.intensity_mean;
  j["intensity_std"] = s.intensity_std;
  j["n_modes"] = s.n_modes;
  j["rim_fraction"] = s.rim_fraction;
  if (!s.mode_offsets.empty()) {
    json arr = json::array();
    for (const auto& m : s.mode_offsets)
      arr.push_back({{"radius", m.radius}, {"axis_ratio", m.axis_ratio}, {"intensity", m.intensity}});
    j["mode_offsets"] = arr;
  }
  return j;
}

}  // namespace

PipelineConfig default_config() {
  PipelineConfig c;
  c.synth.groups = {synth::GroupSpec::mut_reference(), synth::GroupSpec::wt_reference()};
  return c;
}

PipelineConfig config_from_json(const json& j) {
  check_keys(j, "",
             {"seed", "out_dir", "threads", "debug_dump", "stain", "segment", "features", "learn",
              "analyze", "synth"});
  PipelineConfig c = default_config();
  get_to(j, "seed", c.seed);
  get_to(j, "out_dir", c.out_dir);
  get_to(j, "threads", c.threads);
  get_to(j, "debug_dump", c.debug_dump);
  if (j.contains("stain")) parse_stain(j.at("stain"), c.stain);
  if (j.contains("segment")) parse_segment(j.at("segment"), c.segment);
  if (j.contains("features")) parse_features(j.at("features"), c.features);
  if (j.contains("learn")) parse_learn(j.at("learn"), c.prune, c.learn);
  if (j.contains("analyze")) parse_analyze(j.at("analyze"), c.analyze);
  if (j.contains("synth")) parse_synth(j.at("synth"), c.synth);
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("config parse error in " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

nlohmann::json config_to_json(const PipelineConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["out_dir"] = c.out_dir;
  j["threads"] = c.threads;
  j["debug_dump"] = c.debug_dump;

  json stain_j;
  stain_j["hematoxylin"] = {c.stain.hematoxylin.x(), c.stain.hematoxylin.y(), c.stain.hematoxylin.z()};
  stain_j["eosin"] = {c.stain.eosin.x(), c.stain.eosin.y(), c.stain.eosin.z()};
  if (c.stain.target_stats) {
    stain_j["target_stats"] = {
        {"mean",
         {c.stain.target_stats->mean.x(), c.stain.target_stats->mean.y(), c.stain.target_stats->mean.z()}},
        {"std",
         {c.stain.target_stats->std.x(), c.stain.target_stats->std.y(), c.stain.target_stats->std.z()}}};
  }
  if (c.stain.reference_tile) stain_j["reference_tile"] = *c.stain.reference_tile;
  j["stain"] = stain_j;

  json seg;
  seg["alpha"] = c.segment.alpha;
  if (c.segment.beta) seg["beta"] = *c.segment.beta;
  seg["sigmas"] = c.segment.sigmas;
  seg["t_low"] = c.segment.t_low;
  seg["t_high"] = c.segment.t_high;
  seg["min_area_px"] = c.segment.min_area_px;
  seg["max_mean_intensity"] = c.segment.max_mean_intensity;
  seg["smoothing_cutoff"] = c.segment.smoothing_cutoff;
  seg["min_circularity"] = c.segment.min_circularity;
  j["segment"] = seg;

  j["features"] = {
      {"intensity_channel",
       c.features.intensity_channel == IntensityChannel::Luma ? "luma" : "hematoxylin"},
      {"histogram_bins", c.features.histogram_bins}};

  json learn_j;
  learn_j["folds"] = c.prune.folds;
  learn_j["vote_thresholds"] = c.prune.vote_thresholds;
  learn_j["final_unanimity"] = c.prune.final_unanimity;
  learn_j["early_stop_delta"] = c.prune.early_stop_delta;
  learn_j["logreg"] = {{"iterations", c.learn.logreg.iterations},
                       {"step", c.learn.logreg.step},
                       {"l2", c.learn.logreg.l2}};
  learn_j["forest"] = {{"trees", c.learn.forest.trees},
                       {"max_depth", c.learn.forest.max_depth},
                       {"min_samples_split", c.learn.forest.min_samples_split}};
  learn_j["adaboost"] = {{"rounds", c.learn.adaboost.rounds}};
  learn_j["naive_bayes"] = {{"variance_floor", c.learn.nb.variance_floor}};
  learn_j["qda"] = {{"ridge", c.learn.qda.ridge}};
  learn_j["neural_net"] = {{"hidden", c.learn.nn.hidden},
                           {"epochs", c.learn.nn.epochs},
                           {"batch", c.learn.nn.batch},
                           {"step", c.learn.nn.step},
                           {"init_range", c.learn.nn.init_range}};
  j["learn"] = learn_j;

  j["analyze"] = {{"embed_dim", c.analyze.embed_dim},
                  {"k_max", c.analyze.k_max},
                  {"elbow_threshold", c.analyze.elbow_threshold},
                  {"kmeans_restarts", c.analyze.kmeans_restarts},
                  {"per_cluster", c.analyze.per_cluster},
                  {"x_margin", c.analyze.x_margin},
                  {"y_margin", c.analyze.y_margin},
                  {"mds_max_iter", c.analyze.mds_max_iter},
                  {"mds_tol", c.analyze.mds_tol},
                  {"mds_subsample", c.analyze.mds_subsample}};

  json synth_j;
  synth_j["image_size"] = c.synth.image_size;
  synth_j["images_per_group"] = c.synth.images_per_group;
  synth_j["noise_sigma"] = c.synth.noise_sigma;
  synth_j["background_eosin"] = c.synth.background_eosin;
  json groups = json::array();
  for (const auto& g : c.synth.groups) groups.push_back(group_spec_to_json(g));
  synth_j["groups"] = groups;
  synth_j["features"] = {{"n_per_group", c.synth.features.n_per_group},
                         {"overlap", c.synth.features.overlap},
                         {"mode_separation", c.synth.features.mode_separation}};
  j["synth"] = synth_j;
  return j;
}

std::uint64_t config_hash(const PipelineConfig& c) { return fnv1a(config_to_json(c).dump()); }

}  // namespace cellpheno::config
