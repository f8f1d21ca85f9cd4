#include "tinc/glcm.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace tinc {

double glcm_contrast(const Eigen::MatrixXd& image, int levels, int di, int dj) {
  if (levels < 2) throw std::invalid_argument("glcm_contrast: levels must be >= 2");
  const int rows = int(image.rows()), cols = int(image.cols());
  if (std::abs(di) >= rows || std::abs(dj) >= cols)
    throw std::invalid_argument("glcm_contrast: offset exceeds image extent");

  auto bin = [&](double v) {
    int b = int(std::floor(v * levels));
    if (b < 0) b = 0;
    if (b >= levels) b = levels - 1;
    return b;
  };

  std::vector<std::int64_t> counts(std::size_t(levels) * levels, 0);
  std::int64_t total = 0;
  const int i0 = std::max(0, -di), i1 = std::min(rows, rows - di);
  const int j0 = std::max(0, -dj), j1 = std::min(cols, cols - dj);
  for (int i = i0; i < i1; ++i)
    for (int j = j0; j < j1; ++j) {
      const int a = bin(image(i, j));
      const int b = bin(image(i + di, j + dj));
      ++counts[std::size_t(a) * levels + b];
      ++total;
    }
  if (total == 0) throw std::invalid_argument("glcm_contrast: no valid pairs at this offset");

  double contrast = 0.0;
  for (int a = 0; a < levels; ++a)
    for (int b = 0; b < levels; ++b) {
      const double p = double(counts[std::size_t(a) * levels + b]) / double(total);
      contrast += p * double(a - b) * double(a - b);
    }
  return contrast;
}

}  // namespace tinc
