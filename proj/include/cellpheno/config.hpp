#pragma once

#include "cellpheno/analyze.hpp"
#include "cellpheno/learn.hpp"
#include "cellpheno/segment.hpp"
#include "cellpheno/stain.hpp"
#include "cellpheno/synth.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>

namespace cellpheno::config {

struct StainConfig {
  Eigen::Vector3d hematoxylin{0.650, 0.704, 0.286};
  Eigen::Vector3d eosin{0.072, 0.990, 0.105};
  std::optional<stain::LabStats> target_stats;   // wins over reference_tile
  std::optional<std::string> reference_tile;     // else: first manifest entry

  stain::StainMatrix matrix() const { return stain::StainMatrix::from_columns(hematoxylin, eosin); }
};

enum class IntensityChannel { Luma, Hematoxylin };

struct FeaturesConfig {
  IntensityChannel intensity_channel = IntensityChannel::Luma;
  int histogram_bins = 64;
};

struct AnalyzeConfig {
  int embed_dim = 3;
  int k_max = 10;
  double elbow_threshold = 0.15;
  int kmeans_restarts = 5;
  int per_cluster = 100;
  int x_margin = 4;
  int y_margin = 4;
  int mds_max_iter = 300;
  double mds_tol = 1e-9;
  int mds_subsample = 2000;  // stratified cap for the O(n^2) embedding
};

struct SynthFeaturesConfig {
  int n_per_group = 2000;
  double overlap = 0.4;
  double mode_separation = 10.0;
};

struct SynthConfig {
  int image_size = 512;
  int images_per_group = 10;
  double noise_sigma = 2.0;
  double background_eosin = 0.15;
  std::vector<synth::GroupSpec> groups;  // defaults to the MUT/WT reference specs
  SynthFeaturesConfig features;
};

struct PipelineConfig {
  std::uint64_t seed = 42;
  std::string out_dir = "out";
  int threads = 1;
  bool debug_dump = false;  // float-TIFF dumps of deconvolved/enhanced maps
  StainConfig stain;
  segment::EnhancementParams segment;
  FeaturesConfig features;
  learn::PruneConfig prune;
  learn::LearnParams learn;
  AnalyzeConfig analyze;
  SynthConfig synth;
};

PipelineConfig default_config();

/// Strict parse: unknown keys anywhere in the tree are rejected.
PipelineConfig config_from_json(const nlohmann::json& j);
PipelineConfig load_config(const std::filesystem::path& path);

nlohmann::json config_to_json(const PipelineConfig& c);

/// Digest of the canonical JSON form; run records use it to detect stale
/// artifacts.
std::uint64_t config_hash(const PipelineConfig& c);

}  // namespace cellpheno::config
