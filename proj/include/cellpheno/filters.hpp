#pragma once

#include "cellpheno/types.hpp"

namespace cellpheno::filters {

/// Sampled Gaussian (derivative) kernel, radius ceil(4*sigma), with discrete
/// moment correction so that order 0 sums to 1, order 1 reproduces the slope
/// of a ramp exactly, and order 2 reproduces the curvature of a parabola.
Eigen::VectorXd gaussian_kernel(double sigma, int order);

/// Separable correlation-as-convolution with mirror (reflect-101) borders:
/// out(y,x) = sum_i sum_j ky(i) kx(j) img(y-i, x-j).
PlaneD separable_conv(const PlaneD& img, const Eigen::VectorXd& kx, const Eigen::VectorXd& ky);

PlaneD gaussian_smooth(const PlaneD& img, double sigma);

}  // namespace cellpheno::filters
