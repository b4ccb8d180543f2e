#pragma once

#include <Eigen/Dense>

namespace shmm {

/// Fixed regime prior: row-stochastic K x K matrix and the distribution of z_0.
struct TransitionMatrix
{
  Eigen::MatrixXd rows;
  Eigen::VectorXd initial;

  TransitionMatrix() = default;
  /// Validates on construction; throws InvalidArgument.
  TransitionMatrix(Eigen::MatrixXd rows, Eigen::VectorXd initial);

  int k() const { return static_cast<int>(rows.rows()); }

  /// Distribution of z_1 after marginalising z_0: initial^T * rows.
  Eigen::RowVectorXd first_step() const { return initial.transpose() * rows; }

  /// Row of rows^h for state `from`; `from < 0` denotes the root (z_0 marginalised).
  Eigen::RowVectorXd propagate(int from, int h) const;

  void validate() const;

  static TransitionMatrix uniform(int k);
  static TransitionMatrix identity(int k, int start_state);
  /// `self` on the diagonal and the remaining mass spread uniformly; uniform initial.
  static TransitionMatrix sticky(int k, double self);
};

/// Matrix power by repeated squaring.
Eigen::MatrixXd matrix_power(Eigen::MatrixXd const &m, int h);

} // namespace shmm
