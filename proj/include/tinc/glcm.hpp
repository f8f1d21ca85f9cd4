#pragma once

#include <Eigen/Dense>

namespace tinc {

// GLCM contrast of a [0,1] image: quantize into `levels` equal-width bins,
// count ordered pixel pairs at displacement (di, dj), normalize to a
// distribution P and return sum_ij P(i,j) * (i-j)^2.
double glcm_contrast(const Eigen::MatrixXd& image, int levels, int di, int dj);

}  // namespace tinc
