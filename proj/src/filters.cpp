#include "cellpheno/filters.hpp"

#include <cmath>

namespace cellpheno::filters {
namespace {

// reflect-101 index: ... 2 1 | 0 1 2 ... n-1 | n-2 n-3 ...
Eigen::Index mirror(Eigen::Index i, Eigen::Index n) {
  if (n == 1) return 0;
  const Eigen::Index period = 2 * (n - 1);
  i = std::abs(i) % period;
  return i < n ? i : period - i;
}

}  // namespace

Eigen::VectorXd gaussian_kernel(double sigma, int order) {
  if (sigma <= 0) throw PipelineError("gaussian_kernel: sigma must be positive");
  const auto radius = static_cast<Eigen::Index>(std::ceil(4.0 * sigma));
  const Eigen::Index size = 2 * radius + 1;
  Eigen::VectorXd k(size);
  const double s2 = sigma * sigma;
  for (Eigen::Index i = 0; i < size; ++i) {
    const double x = static_cast<double>(i - radius);
    const double g = std::exp(-0.5 * x * x / s2);
    switch (order) {
      case 0: k(i) = g; break;
      case 1: k(i) = -x / s2 * g; break;
      case 2: k(i) = (x * x / s2 - 1.0) / s2 * g; break;
      default: throw PipelineError("gaussian_kernel: order must be 0, 1 or 2");
    }
  }
  if (order == 0) {
    k /= k.sum();
  } else if (order == 1) {
    // response to f(x) = x must be exactly 1
    double m1 = 0;
    for (Eigen::Index i = 0; i < size; ++i) m1 += k(i) * -static_cast<double>(i - radius);
    k /= m1;
  } else {
    // zero mean, and response to f(x) = x^2 must be exactly 2
    k.array() -= k.mean();
    double m2 = 0;
    for (Eigen::Index i = 0; i < size; ++i) {
      const double x = static_cast<double>(i - radius);
      m2 += k(i) * x * x;
    }
    k *= 2.0 / m2;
  }
  return k;
}

PlaneD separable_conv(const PlaneD& img, const Eigen::VectorXd& kx, const Eigen::VectorXd& ky) {
  const Eigen::Index rows = img.rows(), cols = img.cols();
  const Eigen::Index rx = (kx.size() - 1) / 2;
  const Eigen::Index ry = (ky.size() - 1) / 2;

  // horizontal pass: tmp(y,x) = sum_j kx(j+rx) img(y, x-j)
  PlaneD tmp(rows, cols);
  for (Eigen::Index y = 0; y < rows; ++y) {
    for (Eigen::Index x = 0; x < cols; ++x) {
      double acc = 0;
      for (Eigen::Index j = -rx; j <= rx; ++j)
        acc += kx(j + rx) * img(y, mirror(x - j, cols));
      tmp(y, x) = acc;
    }
  }
  // vertical pass
  PlaneD out(rows, cols);
  for (Eigen::Index x = 0; x < cols; ++x) {
    for (Eigen::Index y = 0; y < rows; ++y) {
      double acc = 0;
      for (Eigen::Index i = -ry; i <= ry; ++i)
        acc += ky(i + ry) * tmp(mirror(y - i, rows), x);
      out(y, x) = acc;
    }
  }
  return out;
}

PlaneD gaussian_smooth(const PlaneD& img, double sigma) {
  const Eigen::VectorXd g = gaussian_kernel(sigma, 0);
  return separable_conv(img, g, g);
}

}  // namespace cellpheno::filters
