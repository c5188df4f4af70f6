#include "cellpheno/analyze.hpp"

#include "cellpheno/raster.hpp"
#include "cellpheno/util.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace cellpheno::analyze {

Eigen::MatrixXd pairwise_distances(const Eigen::MatrixXd& X) {
  const Eigen::Index n = X.rows();
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d = (X.row(i) - X.row(j)).norm();
      D(i, j) = D(j, i) = d;
    }
  return D;
}

namespace {

double stress_of(const Eigen::MatrixXd& D, const Eigen::MatrixXd& X) {
  const Eigen::Index n = D.rows();
  double s = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double diff = D(i, j) - (X.row(i) - X.row(j)).norm();
      s += diff * diff;
    }
  return 2.0 * s;  // ordered-pair convention
}

}  // namespace

Embedding mds_embed(const Eigen::MatrixXd& D, int d, int max_iter, double tol,
                    std::uint64_t seed) {
  const Eigen::Index n = D.rows();
  if (D.cols() != n) throw BadDissimilarity("dissimilarity matrix must be square");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(D(i, i)) > 1e-12) throw BadDissimilarity("dissimilarity diagonal must be zero");
    for (Eigen::Index j = 0; j < n; ++j) {
      if (D(i, j) < 0) throw BadDissimilarity("dissimilarities must be nonnegative");
      if (std::abs(D(i, j) - D(j, i)) > 1e-9)
        throw BadDissimilarity("dissimilarity matrix must be symmetric");
      if (!std::isfinite(D(i, j))) throw BadDissimilarity("dissimilarities must be finite");
    }
  }
  if (d < 1) throw PipelineError("mds_embed: d must be >= 1");

  Embedding emb;
  if (n == 0) {
    emb.points.resize(0, d);
    return emb;
  }

  Rng rng(derive_seed(seed, 0x3D5ULL));
  const double scale = std::max(D.maxCoeff(), 1e-12) / std::sqrt(static_cast<double>(d));
  Eigen::MatrixXd X(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) X(i, j) = rng.normal(0.0, 0.5 * scale);

  double prev = stress_of(D, X);
  emb.stress_history.push_back(prev);
  int it = 0;
  for (; it < max_iter; ++it) {
    // Guttman transform: X <- B(X) X / n
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const double dist = (X.row(i) - X.row(j)).norm();
        const double b = dist > 1e-12 ? -D(i, j) / dist : 0.0;
        B(i, j) = b;
        B(j, i) = b;
        B(i, i) -= b;
        B(j, j) -= b;
      }
    X = (B * X) / static_cast<double>(n);
    const double cur = stress_of(D, X);
    emb.stress_history.push_back(cur);
    const double rel = prev > 0 ? (prev - cur) / prev : 0.0;
    prev = cur;
    if (rel < tol) {
      ++it;
      break;
    }
  }
  emb.points = std::move(X);
  emb.stress = prev;
  emb.iterations_run = it;
  return emb;
}

namespace {

double sq_dist(const Eigen::MatrixXd& X, Eigen::Index i, const Eigen::MatrixXd& C,
               Eigen::Index c) {
  return (X.row(i) - C.row(c)).squaredNorm();
}

Eigen::MatrixXd kmeanspp_init(const Eigen::MatrixXd& X, int k, Rng& rng) {
  const Eigen::Index n = X.rows();
  Eigen::MatrixXd C(k, X.cols());
  C.row(0) = X.row(rng.uniform_int(n));
  Eigen::VectorXd d2(n);
  for (Eigen::Index i = 0; i < n; ++i) d2(i) = sq_dist(X, i, C, 0);
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    Eigen::Index pick = 0;
    if (total <= 1e-300) {
      pick = rng.uniform_int(n);
    } else {
      const double r = rng.uniform() * total;
      double acc = 0;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += d2(i);
        if (acc >= r) {
          pick = i;
          break;
        }
      }
    }
    C.row(c) = X.row(pick);
    for (Eigen::Index i = 0; i < n; ++i) d2(i) = std::min(d2(i), sq_dist(X, i, C, c));
  }
  return C;
}

KmeansResult lloyd(const Eigen::MatrixXd& X, Eigen::MatrixXd C, int max_iter) {
  const Eigen::Index n = X.rows();
  const auto k = static_cast<int>(C.rows());
  KmeansResult res;
  res.assignments.assign(static_cast<std::size_t>(n), -1);
  for (int it = 0; it < max_iter; ++it) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = sq_dist(X, i, C, 0);
      for (int c = 1; c < k; ++c) {
        const double d = sq_dist(X, i, C, c);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (res.assignments[static_cast<std::size_t>(i)] != best) {
        res.assignments[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }
    if (!changed && it > 0) break;
    ++res.iterations;

    // update step
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, X.cols());
    std::vector<std::int64_t> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(res.assignments[static_cast<std::size_t>(i)]) += X.row(i);
      ++counts[static_cast<std::size_t>(res.assignments[static_cast<std::size_t>(i)])];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        C.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
      } else {
        // re-seed an empty cluster at the worst-fit point
        Eigen::Index worst = 0;
        double worst_d = -1;
        for (Eigen::Index i = 0; i < n; ++i) {
          const double d =
              sq_dist(X, i, C, res.assignments[static_cast<std::size_t>(i)]);
          if (d > worst_d) {
            worst_d = d;
            worst = i;
          }
        }
        C.row(c) = X.row(worst);
      }
    }
    double sse = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = sq_dist(X, i, C, 0);
      for (int c = 1; c < k; ++c) {
        const double d = sq_dist(X, i, C, c);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      (void)best;
      sse += best_d;
    }
    res.sse_history.push_back(sse);
  }
  // final assignment pass so assignments are a fixpoint of the centroids
  double sse = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    int best = 0;
    double best_d = sq_dist(X, i, C, 0);
    for (int c = 1; c < k; ++c) {
      const double d = sq_dist(X, i, C, c);
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    res.assignments[static_cast<std::size_t>(i)] = best;
    sse += best_d;
  }
  res.centroids = std::move(C);
  res.sse = sse;
  return res;
}

}  // namespace

KmeansResult kmeans(const Eigen::MatrixXd& X, int k, std::uint64_t seed, int max_iter) {
  const Eigen::Index n = X.rows();
  if (k < 1 || k > n) throw BadK("kmeans: k must be in [1, n]");
  Rng rng(derive_seed(seed, 0x83A5ULL));
  return lloyd(X, kmeanspp_init(X, k, rng), max_iter);
}

ElbowResult elbow_k(const Eigen::MatrixXd& X, int k_max, std::uint64_t seed, int restarts,
                    double threshold) {
  const Eigen::Index n = X.rows();
  if (n < k_max) throw BadK("elbow_k: need at least k_max rows");
  ElbowResult res;
  KmeansResult prev_best;
  for (int k = 1; k <= k_max; ++k) {
    KmeansResult best;
    best.sse = std::numeric_limits<double>::infinity();
    for (int r = 0; r < restarts; ++r) {
      KmeansResult cand = kmeans(
          X, k, derive_seed(seed, static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(r)));
      if (cand.sse < best.sse) best = std::move(cand);
    }
    if (k > 1) {
      // warm start from the previous best plus its worst-fit point; keeps the
      // SSE curve non-increasing in K
      Eigen::MatrixXd C(k, X.cols());
      C.topRows(k - 1) = prev_best.centroids;
      Eigen::Index worst = 0;
      double worst_d = -1;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double d =
            (X.row(i) -
             prev_best.centroids.row(prev_best.assignments[static_cast<std::size_t>(i)]))
                .squaredNorm();
        if (d > worst_d) {
          worst_d = d;
          worst = i;
        }
      }
      C.row(k - 1) = X.row(worst);
      KmeansResult warm = lloyd(X, std::move(C), 100);
      if (warm.sse < best.sse) best = std::move(warm);
    }
    res.sse_curve[k] = best.sse;
    prev_best = std::move(best);
  }

  res.k = k_max;
  res.capped = true;
  for (int k = 1; k < k_max; ++k) {
    const double cur = res.sse_curve[k], next = res.sse_curve[k + 1];
    const double drop = cur > 0 ? (cur - next) / cur : 0.0;
    if (drop < threshold) {
      res.k = k;
      res.capped = false;
      break;
    }
  }
  double max_drop = 0;
  for (int k = 1; k < k_max; ++k) {
    const double cur = res.sse_curve[k], next = res.sse_curve[k + 1];
    if (cur > 0) max_drop = std::max(max_drop, (cur - next) / cur);
  }
  res.weak_elbow = max_drop < 2.0 * threshold;
  return res;
}

namespace {

std::uint8_t sample_clamped(const PlaneU8& plane, Eigen::Index y, Eigen::Index x) {
  y = std::clamp<Eigen::Index>(y, 0, plane.rows() - 1);
  x = std::clamp<Eigen::Index>(x, 0, plane.cols() - 1);
  return plane(y, x);
}

}  // namespace

std::vector<Panel> retrieve_representatives(
    const ClusterModel& model, const features::FeatureMatrix& matrix,
    const std::map<std::string, const CellInstance*>& cells,
    const std::map<std::string, const RegionImage*>& images, const PanelOptions& opts) {
  const Eigen::MatrixXd values = matrix.normalized_values();
  std::map<std::string, Eigen::Index> row_of;
  for (std::size_t i = 0; i < matrix.rows.size(); ++i)
    row_of[matrix.rows[i].cell_id] = static_cast<Eigen::Index>(i);

  std::vector<Panel> panels;
  for (int c = 0; c < model.k; ++c) {
    // rank members by distance to centroid, ties by cell_id
    std::vector<std::pair<double, std::string>> ranked;
    for (const auto& [cell_id, cluster] : model.assignments) {
      if (cluster != c) continue;
      auto it = row_of.find(cell_id);
      if (it == row_of.end())
        throw PipelineError("cluster assignment references unknown cell: " + cell_id);
      const double d = (values.row(it->second) - model.centroids.row(c)).norm();
      ranked.emplace_back(d, cell_id);
    }
    if (ranked.empty()) continue;  // caller logs the skip
    std::sort(ranked.begin(), ranked.end());
    if (static_cast<int>(ranked.size()) > opts.per_cluster)
      ranked.resize(static_cast<std::size_t>(opts.per_cluster));

    Panel panel;
    panel.group = model.group;
    panel.cluster = c;
    panel.n_real = static_cast<int>(ranked.size());
    panel.grid = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(opts.per_cluster))));

    // common crop size from the largest member bounding rectangle
    int w_max = 0, h_max = 0;
    for (const auto& [d, cell_id] : ranked) {
      (void)d;
      const CellInstance* cell = cells.at(cell_id);
      const raster::Box bb = raster::bounds(cell->boundary);
      w_max = std::max(w_max, bb.width());
      h_max = std::max(h_max, bb.height());
      panel.cell_ids.push_back(cell_id);
    }
    panel.tile_width = w_max + opts.x_margin;
    panel.tile_height = h_max + opts.y_margin;

    const int W = panel.grid * panel.tile_width;
    const int H = panel.grid * panel.tile_height;
    panel.r = PlaneU8::Zero(H, W);
    panel.g = PlaneU8::Zero(H, W);
    panel.b = PlaneU8::Zero(H, W);

    for (std::size_t j = 0; j < ranked.size(); ++j) {
      const CellInstance* cell = cells.at(ranked[j].second);
      const RegionImage* img = images.at(cell->image_id);
      const raster::Box bb = raster::bounds(cell->boundary);
      const int gy = static_cast<int>(j) / panel.grid;
      const int gx = static_cast<int>(j) % panel.grid;
      for (int dy = 0; dy < panel.tile_height; ++dy)
        for (int dx = 0; dx < panel.tile_width; ++dx) {
          const Eigen::Index sy = bb.ymin + dy, sx = bb.xmin + dx;
          const Eigen::Index ty = gy * panel.tile_height + dy;
          const Eigen::Index tx = gx * panel.tile_width + dx;
          panel.r(ty, tx) = sample_clamped(img->r, sy, sx);
          panel.g(ty, tx) = sample_clamped(img->g, sy, sx);
          panel.b(ty, tx) = sample_clamped(img->b, sy, sx);
        }
    }
    panels.push_back(std::move(panel));
  }
  return panels;
}

}  // namespace cellpheno::analyze
