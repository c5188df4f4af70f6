#include "cellpheno/raster.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <deque>

namespace cellpheno::raster {
namespace {

constexpr int kDx8[] = {1, 1, 0, -1, -1, -1, 0, 1};
constexpr int kDy8[] = {0, 1, 1, 1, 0, -1, -1, -1};

}  // namespace

std::pair<PlaneI, int> label_components(const Mask& mask, Connectivity conn) {
  const Eigen::Index rows = mask.rows(), cols = mask.cols();
  PlaneI labels = PlaneI::Zero(rows, cols);
  int next = 0;
  std::deque<PixelCoord> queue;
  const int nn = conn == Connectivity::Four ? 4 : 8;
  static constexpr int dx4[] = {1, 0, -1, 0};
  static constexpr int dy4[] = {0, 1, 0, -1};
  for (Eigen::Index y = 0; y < rows; ++y) {
    for (Eigen::Index x = 0; x < cols; ++x) {
      if (!mask(y, x) || labels(y, x) != 0) continue;
      ++next;
      labels(y, x) = next;
      queue.push_back({static_cast<std::int32_t>(x), static_cast<std::int32_t>(y)});
      while (!queue.empty()) {
        const PixelCoord p = queue.front();
        queue.pop_front();
        for (int k = 0; k < nn; ++k) {
          const int nx = p.x + (conn == Connectivity::Four ? dx4[k] : kDx8[k]);
          const int ny = p.y + (conn == Connectivity::Four ? dy4[k] : kDy8[k]);
          if (nx < 0 || ny < 0 || nx >= cols || ny >= rows) continue;
          if (mask(ny, nx) && labels(ny, nx) == 0) {
            labels(ny, nx) = next;
            queue.push_back({nx, ny});
          }
        }
      }
    }
  }
  return {std::move(labels), next};
}

Mask fill_holes(const Mask& mask) {
  const Eigen::Index rows = mask.rows(), cols = mask.cols();
  PlaneU8 reach = PlaneU8::Zero(rows, cols);
  std::deque<PixelCoord> queue;
  auto push = [&](std::int32_t x, std::int32_t y) {
    if (x < 0 || y < 0 || x >= cols || y >= rows) return;
    if (mask(y, x) || reach(y, x)) return;
    reach(y, x) = 1;
    queue.push_back({x, y});
  };
  for (Eigen::Index x = 0; x < cols; ++x) {
    push(static_cast<std::int32_t>(x), 0);
    push(static_cast<std::int32_t>(x), static_cast<std::int32_t>(rows - 1));
  }
  for (Eigen::Index y = 0; y < rows; ++y) {
    push(0, static_cast<std::int32_t>(y));
    push(static_cast<std::int32_t>(cols - 1), static_cast<std::int32_t>(y));
  }
  while (!queue.empty()) {
    const PixelCoord p = queue.front();
    queue.pop_front();
    push(p.x + 1, p.y);
    push(p.x - 1, p.y);
    push(p.x, p.y + 1);
    push(p.x, p.y - 1);
  }
  Mask out(rows, cols);
  for (Eigen::Index y = 0; y < rows; ++y)
    for (Eigen::Index x = 0; x < cols; ++x) out(y, x) = (mask(y, x) || !reach(y, x)) ? 1 : 0;
  return out;
}

Mask largest_four_connected(const Mask& mask) {
  auto [labels, n] = label_components(mask, Connectivity::Four);
  if (n <= 1) return mask;
  std::vector<std::int64_t> area(static_cast<std::size_t>(n) + 1, 0);
  for (Eigen::Index y = 0; y < mask.rows(); ++y)
    for (Eigen::Index x = 0; x < mask.cols(); ++x)
      if (labels(y, x) > 0) ++area[static_cast<std::size_t>(labels(y, x))];
  int best = 1;
  for (int i = 2; i <= n; ++i)
    if (area[static_cast<std::size_t>(i)] > area[static_cast<std::size_t>(best)]) best = i;
  Mask out = Mask::Zero(mask.rows(), mask.cols());
  for (Eigen::Index y = 0; y < mask.rows(); ++y)
    for (Eigen::Index x = 0; x < mask.cols(); ++x) out(y, x) = labels(y, x) == best ? 1 : 0;
  return out;
}

std::vector<PixelCoord> outer_boundary(const Mask& mask) {
  const Eigen::Index rows = mask.rows(), cols = mask.cols();
  PixelCoord start{-1, -1};
  for (Eigen::Index y = 0; y < rows && start.x < 0; ++y)
    for (Eigen::Index x = 0; x < cols; ++x)
      if (mask(y, x)) {
        start = {static_cast<std::int32_t>(x), static_cast<std::int32_t>(y)};
        break;
      }
  if (start.x < 0) return {};

  auto inside = [&](int x, int y) {
    return x >= 0 && y >= 0 && x < cols && y < rows && mask(y, x) != 0;
  };

  std::vector<PixelCoord> boundary{start};
  PixelCoord cur = start;
  int backtrack = 4;  // entered scanning from the left, so previous direction points west
  while (true) {
    int found = -1;
    for (int i = 0; i < 8; ++i) {
      const int d = (backtrack + 1 + i) % 8;
      if (inside(cur.x + kDx8[d], cur.y + kDy8[d])) {
        found = d;
        break;
      }
    }
    if (found < 0) break;  // isolated pixel
    cur = {cur.x + kDx8[found], cur.y + kDy8[found]};
    if (cur == start && boundary.size() > 1) break;
    boundary.push_back(cur);
    backtrack = (found + 4) % 8;
  }
  return boundary;
}

Box bounds(const std::vector<PixelCoord>& pts) {
  Box b;
  if (pts.empty()) return b;
  b.xmin = b.xmax = pts[0].x;
  b.ymin = b.ymax = pts[0].y;
  for (const auto& p : pts) {
    b.xmin = std::min(b.xmin, p.x);
    b.xmax = std::max(b.xmax, p.x);
    b.ymin = std::min(b.ymin, p.y);
    b.ymax = std::max(b.ymax, p.y);
  }
  return b;
}

double chain_perimeter(const std::vector<PixelCoord>& boundary) {
  const std::size_t n = boundary.size();
  if (n < 2) return 0.0;
  int axial = 0, diag = 0, corners = 0;
  int prev_code = -1, first_code = -1;
  for (std::size_t i = 0; i < n; ++i) {
    const PixelCoord& a = boundary[i];
    const PixelCoord& b = boundary[(i + 1) % n];
    const int dx = b.x - a.x, dy = b.y - a.y;
    if (std::abs(dx) > 1 || std::abs(dy) > 1 || (dx == 0 && dy == 0)) continue;
    const int code = (dx + 1) * 3 + (dy + 1);
    if (std::abs(dx) + std::abs(dy) == 2)
      ++diag;
    else
      ++axial;
    if (prev_code >= 0 && code != prev_code) ++corners;
    if (first_code < 0) first_code = code;
    prev_code = code;
  }
  if (prev_code >= 0 && first_code >= 0 && prev_code != first_code) ++corners;
  return 0.980 * axial + 1.406 * diag - 0.091 * corners;
}

namespace {

long long cross(const PixelCoord& o, const PixelCoord& a, const PixelCoord& b) {
  return static_cast<long long>(a.x - o.x) * (b.y - o.y) -
         static_cast<long long>(a.y - o.y) * (b.x - o.x);
}

std::vector<PixelCoord> convex_hull(std::vector<PixelCoord> pts) {
  std::sort(pts.begin(), pts.end(), [](const PixelCoord& a, const PixelCoord& b) {
    return a.x != b.x ? a.x < b.x : a.y < b.y;
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  std::vector<PixelCoord> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  const std::size_t lower = k + 1;
  for (auto it = pts.rbegin() + 1; it != pts.rend(); ++it) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], *it) <= 0) --k;
    hull[k++] = *it;
  }
  hull.resize(k - 1);
  return hull;
}

}  // namespace

double max_pairwise_distance(const std::vector<PixelCoord>& pts) {
  if (pts.size() < 2) return 0.0;
  const auto hull = convex_hull(pts);
  double best = 0.0;
  for (std::size_t i = 0; i < hull.size(); ++i)
    for (std::size_t j = i + 1; j < hull.size(); ++j) {
      const double dx = hull[i].x - hull[j].x, dy = hull[i].y - hull[j].y;
      best = std::max(best, dx * dx + dy * dy);
    }
  return std::sqrt(best);
}

Mask rasterize_polygon(const std::vector<Eigen::Vector2d>& poly, Eigen::Index rows,
                       Eigen::Index cols) {
  Mask out = Mask::Zero(rows, cols);
  const std::size_t n = poly.size();
  if (n < 3) return out;
  double ymin = poly[0].y(), ymax = poly[0].y();
  for (const auto& p : poly) {
    ymin = std::min(ymin, p.y());
    ymax = std::max(ymax, p.y());
  }
  const auto y0 = static_cast<Eigen::Index>(std::max(0.0, std::floor(ymin)));
  const auto y1 = static_cast<Eigen::Index>(
      std::min(static_cast<double>(rows - 1), std::ceil(ymax)));
  std::vector<double> xs;
  for (Eigen::Index y = y0; y <= y1; ++y) {
    const double fy = static_cast<double>(y);
    xs.clear();
    for (std::size_t i = 0; i < n; ++i) {
      const Eigen::Vector2d& a = poly[i];
      const Eigen::Vector2d& b = poly[(i + 1) % n];
      // half-open rule on [min(y), max(y)) avoids double-counting vertices
      if ((a.y() <= fy && b.y() > fy) || (b.y() <= fy && a.y() > fy)) {
        const double t = (fy - a.y()) / (b.y() - a.y());
        xs.push_back(a.x() + t * (b.x() - a.x()));
      }
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t i = 0; i + 1 < xs.size(); i += 2) {
      auto xa = static_cast<Eigen::Index>(std::ceil(xs[i]));
      auto xb = static_cast<Eigen::Index>(std::floor(xs[i + 1]));
      // pixel centers strictly inside the span
      if (std::abs(xs[i + 1] - std::floor(xs[i + 1])) < 1e-12) --xb;
      xa = std::max<Eigen::Index>(xa, 0);
      xb = std::min<Eigen::Index>(xb, cols - 1);
      for (Eigen::Index x = xa; x <= xb; ++x) out(y, x) = 1;
    }
  }
  return out;
}

std::vector<Eigen::Vector2d> fourier_smooth(const std::vector<PixelCoord>& boundary, int cutoff) {
  const std::size_t n = boundary.size();
  std::vector<Eigen::Vector2d> out;
  out.reserve(n);
  const int keep = std::max(1, cutoff / 2);
  if (n <= static_cast<std::size_t>(2 * keep + 1)) {
    for (const auto& p : boundary) out.emplace_back(p.x, p.y);
    return out;
  }
  using cd = std::complex<double>;
  const double w = 2.0 * M_PI / static_cast<double>(n);
  std::vector<cd> coeff(static_cast<std::size_t>(2 * keep + 1));
  for (int m = -keep; m <= keep; ++m) {
    cd acc(0, 0);
    for (std::size_t k = 0; k < n; ++k) {
      const double ang = -w * m * static_cast<double>(k);
      acc += cd(boundary[k].x, boundary[k].y) * std::polar(1.0, ang);
    }
    coeff[static_cast<std::size_t>(m + keep)] = acc / static_cast<double>(n);
  }
  for (std::size_t k = 0; k < n; ++k) {
    cd z(0, 0);
    for (int m = -keep; m <= keep; ++m) {
      const double ang = w * m * static_cast<double>(k);
      z += coeff[static_cast<std::size_t>(m + keep)] * std::polar(1.0, ang);
    }
    out.emplace_back(z.real(), z.imag());
  }
  return out;
}

std::vector<PixelCoord> component_pixels(const PlaneI& labels, int label) {
  std::vector<PixelCoord> out;
  for (Eigen::Index y = 0; y < labels.rows(); ++y)
    for (Eigen::Index x = 0; x < labels.cols(); ++x)
      if (labels(y, x) == label)
        out.push_back({static_cast<std::int32_t>(x), static_cast<std::int32_t>(y)});
  return out;
}

}  // namespace cellpheno::raster
