#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace tinc {

struct LossConfig {
  double lambda_ = 15.0;
  double mu = 25.0;
  double nu = 5.0;
  double gamma = 1.0;
  double eps = 1e-4;
  double bt_off_diag_weight = 0.01;
  enum class Similarity { tinc, vicreg_invariance };
  Similarity similarity_mode = Similarity::tinc;

  void validate() const {
    if (lambda_ < 0 || mu < 0 || nu < 0 || gamma < 0) throw std::invalid_argument("loss: weights must be >= 0");
    if (!(eps > 0)) throw std::invalid_argument("loss: eps must be > 0");
  }
};

template <class Scalar>
struct LossBreakdownT {
  Scalar similarity = 0;
  Scalar variance_a = 0, variance_b = 0;
  Scalar covariance_a = 0, covariance_b = 0;
  Scalar total = 0;
};
using LossBreakdown = LossBreakdownT<double>;

namespace detail {
template <class M>
void check_pair(const M& z, const M& zp) {
  if (z.rows() != zp.rows() || z.cols() != zp.cols()) throw std::invalid_argument("loss: shape mismatch");
  if (z.rows() < 1) throw std::invalid_argument("loss: empty batch");
}
template <class M>
void check_batch2(const M& z) {
  if (z.rows() < 2) throw std::invalid_argument("loss: batch of >= 2 required");
}
}  // namespace detail

// (1/n) sum_i ||z_i - z'_i||^2, rows are samples.
template <class Scalar>
Scalar invariance_term(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& z,
                       const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& zp) {
  detail::check_pair(z, zp);
  return (z - zp).squaredNorm() / Scalar(z.rows());
}

// (1/d) sum_j max(0, gamma - sqrt(var_j + eps)), unbiased column variance.
template <class Scalar>
Scalar variance_term(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& z, const LossConfig& cfg) {
  detail::check_batch2(z);
  const auto n = z.rows();
  const auto centered = (z.rowwise() - z.colwise().mean()).eval();
  Scalar acc = 0;
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    const Scalar var = centered.col(j).squaredNorm() / Scalar(n - 1);
    const Scalar hinge = Scalar(cfg.gamma) - std::sqrt(var + Scalar(cfg.eps));
    if (hinge > 0) acc += hinge;
  }
  return acc / Scalar(z.cols());
}

// (1/d) sum_{i != j} Cov(Z)_{ij}^2 with Cov = centered^T centered / (n-1).
template <class Scalar>
Scalar covariance_term(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& z) {
  detail::check_batch2(z);
  const auto centered = (z.rowwise() - z.colwise().mean()).eval();
  const auto cov = ((centered.transpose() * centered) / Scalar(z.rows() - 1)).eval();
  return (cov.squaredNorm() - cov.diagonal().squaredNorm()) / Scalar(z.cols());
}

// (1/n) sum_i max(0, ||z_i - z'_i||^2 - dt_i): the margin-based similarity.
template <class Scalar>
Scalar tinc_term(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& z,
                 const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& zp,
                 const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& dt_norm) {
  detail::check_pair(z, zp);
  if (dt_norm.size() != z.rows()) throw std::invalid_argument("tinc_term: dt_norm length mismatch");
  Scalar acc = 0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const Scalar dt = dt_norm[i];
    if (dt < Scalar(0) || dt > Scalar(1)) throw std::invalid_argument("tinc_term: dt_norm outside [0,1]");
    const Scalar excess = (z.row(i) - zp.row(i)).squaredNorm() - dt;
    if (excess > 0) acc += excess;
  }
  return acc / Scalar(z.rows());
}

template <class Scalar>
LossBreakdownT<Scalar> combined_loss(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& z,
                                     const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& zp,
                                     const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& dt_norm,
                                     const LossConfig& cfg) {
  cfg.validate();
  LossBreakdownT<Scalar> out;
  out.similarity = cfg.similarity_mode == LossConfig::Similarity::tinc
                       ? tinc_term<Scalar>(z, zp, dt_norm)
                       : invariance_term<Scalar>(z, zp);
  out.variance_a = variance_term<Scalar>(z, cfg);
  out.variance_b = variance_term<Scalar>(zp, cfg);
  out.covariance_a = covariance_term<Scalar>(z);
  out.covariance_b = covariance_term<Scalar>(zp);
  out.total = Scalar(cfg.lambda_) * out.similarity + Scalar(cfg.mu) * (out.variance_a + out.variance_b) +
              Scalar(cfg.nu) * (out.covariance_a + out.covariance_b);
  return out;
}

// Barlow Twins: per-column standardization (biased std with eps guard, so a
// self-pair has C_ii = 1 exactly), cross-correlation C = Zt^T Zt' / n,
// loss = sum_i (1-C_ii)^2 + w sum_{i!=j} C_ij^2.
template <class Scalar>
Scalar barlow_twins_loss(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& z,
                         const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& zp, const LossConfig& cfg) {
  detail::check_pair(z, zp);
  detail::check_batch2(z);
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const auto n = z.rows();
  auto standardize = [&](const Mat& m) {
    Mat c = m.rowwise() - m.colwise().mean();
    for (Eigen::Index j = 0; j < c.cols(); ++j)
      c.col(j) /= std::sqrt(c.col(j).squaredNorm() / Scalar(n) + Scalar(cfg.eps));
    return c;
  };
  const Mat c = (standardize(z).transpose() * standardize(zp)) / Scalar(n);
  Scalar on_diag = 0, off_diag = 0;
  for (Eigen::Index i = 0; i < c.rows(); ++i)
    for (Eigen::Index j = 0; j < c.cols(); ++j) {
      if (i == j)
        on_diag += (Scalar(1) - c(i, j)) * (Scalar(1) - c(i, j));
      else
        off_diag += c(i, j) * c(i, j);
    }
  return on_diag + Scalar(cfg.bt_off_diag_weight) * off_diag;
}

// ---- analytic gradients with respect to the projections ----

template <class Scalar>
struct PairGrad {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> dz, dzp;
};

template <class Scalar>
PairGrad<Scalar> invariance_grad(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& z,
                                 const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& zp) {
  detail::check_pair(z, zp);
  PairGrad<Scalar> g;
  g.dz = Scalar(2) / Scalar(z.rows()) * (z - zp);
  g.dzp = -g.dz;
  return g;
}

template <class Scalar>
PairGrad<Scalar> tinc_grad(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& z,
                           const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& zp,
                           const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& dt_norm) {
  detail::check_pair(z, zp);
  PairGrad<Scalar> g;
  g.dz.setZero(z.rows(), z.cols());
  g.dzp.setZero(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    // subgradient 0 at the kink
    if ((z.row(i) - zp.row(i)).squaredNorm() - dt_norm[i] > 0) {
      g.dz.row(i) = Scalar(2) / Scalar(z.rows()) * (z.row(i) - zp.row(i));
      g.dzp.row(i) = -g.dz.row(i);
    }
  }
  return g;
}

template <class Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> variance_grad(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& z, const LossConfig& cfg) {
  detail::check_batch2(z);
  const auto n = z.rows();
  const auto centered = (z.rowwise() - z.colwise().mean()).eval();
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> g(z.rows(), z.cols());
  g.setZero();
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    const Scalar sd = std::sqrt(centered.col(j).squaredNorm() / Scalar(n - 1) + Scalar(cfg.eps));
    if (Scalar(cfg.gamma) - sd > 0)
      g.col(j) = -centered.col(j) / (Scalar(z.cols()) * Scalar(n - 1) * sd);
  }
  return g;
}

template <class Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> covariance_grad(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& z) {
  detail::check_batch2(z);
  const auto n = z.rows();
  const auto centered = (z.rowwise() - z.colwise().mean()).eval();
  auto cov = ((centered.transpose() * centered) / Scalar(n - 1)).eval();
  cov.diagonal().setZero();
  // d/dZc of (1/d) sum_{i!=j} Cov_ij^2 = (4 / (d (n-1))) Zc Cov_off
  return (Scalar(4) / (Scalar(z.cols()) * Scalar(n - 1))) * centered * cov;
}

template <class Scalar>
PairGrad<Scalar> combined_grad(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& z,
                               const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& zp,
                               const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& dt_norm, const LossConfig& cfg) {
  PairGrad<Scalar> sim = cfg.similarity_mode == LossConfig::Similarity::tinc
                             ? tinc_grad<Scalar>(z, zp, dt_norm)
                             : invariance_grad<Scalar>(z, zp);
  PairGrad<Scalar> g;
  g.dz = Scalar(cfg.lambda_) * sim.dz + Scalar(cfg.mu) * variance_grad<Scalar>(z, cfg) +
         Scalar(cfg.nu) * covariance_grad<Scalar>(z);
  g.dzp = Scalar(cfg.lambda_) * sim.dzp + Scalar(cfg.mu) * variance_grad<Scalar>(zp, cfg) +
          Scalar(cfg.nu) * covariance_grad<Scalar>(zp);
  return g;
}

template <class Scalar>
PairGrad<Scalar> barlow_twins_grad(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& z,
                                   const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& zp,
                                   const LossConfig& cfg) {
  detail::check_pair(z, zp);
  detail::check_batch2(z);
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const auto n = z.rows();
  auto standardize = [&](const Mat& m, Mat& tilde, Vec& sd) {
    tilde = m.rowwise() - m.colwise().mean();
    sd.resize(m.cols());
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      sd[j] = std::sqrt(tilde.col(j).squaredNorm() / Scalar(n) + Scalar(cfg.eps));
      tilde.col(j) /= sd[j];
    }
  };
  Mat zt, zpt;
  Vec sd_z, sd_zp;
  standardize(z, zt, sd_z);
  standardize(zp, zpt, sd_zp);
  Mat c = (zt.transpose() * zpt) / Scalar(n);
  Mat dc = Scalar(2) * Scalar(cfg.bt_off_diag_weight) * c;
  dc.diagonal() = Scalar(-2) * (Vec::Ones(c.rows()) - c.diagonal());
  const Mat g_zt = zpt * dc.transpose() / Scalar(n);
  const Mat g_zpt = zt * dc / Scalar(n);
  // backprop through standardization: per column,
  // dx = (g - mean(g) - xt * dot(g, xt)/n) / sd
  auto destandardize = [&](const Mat& g, const Mat& tilde, const Vec& sd) {
    Mat dx(g.rows(), g.cols());
    for (Eigen::Index j = 0; j < g.cols(); ++j) {
      const Scalar gm = g.col(j).mean();
      const Scalar proj = g.col(j).dot(tilde.col(j)) / Scalar(n);
      dx.col(j) = (g.col(j).array() - gm - proj * tilde.col(j).array()) / sd[j];
    }
    return dx;
  };
  PairGrad<Scalar> out;
  out.dz = destandardize(g_zt, zt, sd_z);
  out.dzp = destandardize(g_zpt, zpt, sd_zp);
  return out;
}

}  // namespace tinc
