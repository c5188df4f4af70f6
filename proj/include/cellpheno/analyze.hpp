#pragma once

#include "cellpheno/features.hpp"
#include "cellpheno/types.hpp"

#include <map>
#include <vector>

namespace cellpheno::analyze {

struct Embedding {
  Eigen::MatrixXd points;  // n x d
  double stress = 0;
  int iterations_run = 0;
  std::vector<double> stress_history;  // stress after each majorization step
};

/// SMACOF stress majorization from a seeded random start. Stops when the
/// relative stress decrease falls below tol or after max_iter steps. Stress
/// is the ordered-pair sum S = sum_{i != j} (delta_ij - d_ij)^2.
Embedding mds_embed(const Eigen::MatrixXd& dissimilarity, int d, int max_iter, double tol,
                    std::uint64_t seed);

Eigen::MatrixXd pairwise_distances(const Eigen::MatrixXd& X);

struct KmeansResult {
  Eigen::MatrixXd centroids;  // k x d
  std::vector<int> assignments;
  double sse = 0;
  int iterations = 0;
  std::vector<double> sse_history;  // after each Lloyd update
};

/// k-means++ seeding plus Lloyd iterations to an assignment fixpoint.
KmeansResult kmeans(const Eigen::MatrixXd& X, int k, std::uint64_t seed, int max_iter = 100);

struct ElbowResult {
  int k = 1;
  std::map<int, double> sse_curve;  // K -> best SSE
  bool weak_elbow = false;          // no relative drop ever reached 2x threshold
  bool capped = false;              // no elbow found below k_max
};

/// Sweeps K = 1..k_max (best of `restarts` seeded runs plus one warm start
/// grown from the previous K, which keeps the curve non-increasing); picks the
/// smallest K whose relative SSE decrease to K+1 falls under `threshold`.
ElbowResult elbow_k(const Eigen::MatrixXd& X, int k_max, std::uint64_t seed, int restarts = 5,
                    double threshold = 0.15);

struct ClusterModel {
  Group group = Group::MUT;
  int k = 1;
  Eigen::MatrixXd centroids;                // in normalized feature space
  std::map<std::string, int> assignments;   // cell_id -> cluster
  std::map<int, double> sse_curve;
};

struct Panel {
  Group group = Group::MUT;
  int cluster = 0;
  int tile_width = 0, tile_height = 0;  // w_final, h_final
  int grid = 10;
  int n_real = 0;  // real crops; the rest of the grid is blank padding
  std::vector<std::string> cell_ids;  // nearest-first
  PlaneU8 r, g, b;                    // the assembled mosaic
};

struct PanelOptions {
  int per_cluster = 100;
  int x_margin = 4;
  int y_margin = 4;
};

/// Algorithm: per cluster, rank members by Euclidean distance to the centroid
/// in normalized feature space (ties by cell_id), take the first per_cluster,
/// size a common crop from the largest member bounding rectangle plus margins,
/// crop each cell from its source image at its own (x_min, y_min) with edge
/// clamping, and tile row-major into a square mosaic.
std::vector<Panel> retrieve_representatives(
    const ClusterModel& model, const features::FeatureMatrix& matrix,
    const std::map<std::string, const CellInstance*>& cells,
    const std::map<std::string, const RegionImage*>& images, const PanelOptions& opts = {});

}  // namespace cellpheno::analyze
