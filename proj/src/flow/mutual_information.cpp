// Copyright 2026 The Flower Authors
// SPDX-License-Identifier: Apache-2.0

#include "flower/flow/mutual_information.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>

namespace flower::flow {

namespace {

double log_det_spd(const Eigen::MatrixXd& m, const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error(std::string("singular covariance for ") + what +
                             "; pass a positive jitter to regularize it");
  }
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

}  // namespace

InformationEstimate mi_upper_bound_check(std::span<const double> z, std::size_t z_dim, std::span<const double> c,
                                         std::size_t c_dim, double jitter) {
  if (z_dim == 0 || c_dim == 0 || z.size() % z_dim != 0 || c.size() % c_dim != 0 ||
      z.size() / z_dim != c.size() / c_dim) {
    throw std::invalid_argument("z and c batches must hold the same number of rows");
  }
  const auto n = static_cast<Eigen::Index>(z.size() / z_dim);
  const auto dz = static_cast<Eigen::Index>(z_dim);
  const auto dc = static_cast<Eigen::Index>(c_dim);
  if (n < 2) throw std::invalid_argument("need at least two rows to fit a covariance");

  Eigen::MatrixXd joint(n, dz + dc);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index j = 0; j < dz; ++j) joint(r, j) = z[static_cast<std::size_t>(r * dz + j)];
    for (Eigen::Index j = 0; j < dc; ++j) joint(r, dz + j) = c[static_cast<std::size_t>(r * dc + j)];
  }
  const Eigen::RowVectorXd mean = joint.colwise().mean();
  const Eigen::MatrixXd centered = joint.rowwise() - mean;
  Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n);
  cov.diagonal().array() += jitter;

  const Eigen::MatrixXd cov_z = cov.topLeftCorner(dz, dz);
  const Eigen::MatrixXd cov_c = cov.bottomRightCorner(dc, dc);
  const double ld_joint = log_det_spd(cov, "(z, c)");
  const double ld_z = log_det_spd(cov_z, "z");
  const double ld_c = log_det_spd(cov_c, "c");

  InformationEstimate est;
  est.mi_estimate = 0.5 * (ld_z + ld_c - ld_joint);
  // Conditional covariance is the Schur complement, so its log-det is
  // ld_joint - ld_c and its trace plus the explained variance is tr(cov_z).
  const double mean_sq = mean.head(dz).squaredNorm();
  est.kl_estimate = 0.5 * (cov_z.trace() + mean_sq - static_cast<double>(dz) - (ld_joint - ld_c));
  if (!(est.kl_estimate + 1e-6 >= est.mi_estimate)) {
    throw std::logic_error("information bound violated: KL " + std::to_string(est.kl_estimate) + " < MI " +
                           std::to_string(est.mi_estimate));
  }
  return est;
}

}  // namespace flower::flow
