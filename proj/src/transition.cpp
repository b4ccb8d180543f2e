#include "shmm/transition.hpp"

#include "shmm/errors.hpp"

#include <cmath>
#include <string>

namespace shmm {

namespace {
constexpr double kSumTol = 1e-12;
}

TransitionMatrix::TransitionMatrix(Eigen::MatrixXd r, Eigen::VectorXd init)
  : rows(std::move(r)), initial(std::move(init))
{
  validate();
}

void TransitionMatrix::validate() const
{
  if (rows.rows() < 1 || rows.rows() != rows.cols())
    throw InvalidArgument("transition matrix must be square with K >= 1");
  if (initial.size() != rows.rows())
    throw InvalidArgument("initial distribution length must equal K");
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    for (Eigen::Index j = 0; j < rows.cols(); ++j) {
      double const v = rows(i, j);
      if (!(v >= 0.0 && v <= 1.0))
        throw InvalidArgument("transition entry (" + std::to_string(i) + "," + std::to_string(j) +
                              ") outside [0,1]");
    }
    if (std::abs(rows.row(i).sum() - 1.0) > kSumTol)
      throw InvalidArgument("transition row " + std::to_string(i) + " does not sum to 1");
  }
  for (Eigen::Index i = 0; i < initial.size(); ++i)
    if (!(initial(i) >= 0.0 && initial(i) <= 1.0))
      throw InvalidArgument("initial entry outside [0,1]");
  if (std::abs(initial.sum() - 1.0) > kSumTol)
    throw InvalidArgument("initial distribution does not sum to 1");
}

Eigen::MatrixXd matrix_power(Eigen::MatrixXd const &m, int h)
{
  if (h < 0)
    throw InvalidArgument("negative matrix power");
  Eigen::MatrixXd result = Eigen::MatrixXd::Identity(m.rows(), m.cols());
  Eigen::MatrixXd base = m;
  while (h > 0) {
    if (h & 1)
      result = result * base;
    h >>= 1;
    if (h > 0)
      base = base * base;
  }
  return result;
}

Eigen::RowVectorXd TransitionMatrix::propagate(int from, int h) const
{
  Eigen::MatrixXd const ph = matrix_power(rows, h);
  if (from < 0)
    return initial.transpose() * ph;
  return ph.row(from);
}

TransitionMatrix TransitionMatrix::uniform(int k)
{
  return {Eigen::MatrixXd::Constant(k, k, 1.0 / k), Eigen::VectorXd::Constant(k, 1.0 / k)};
}

TransitionMatrix TransitionMatrix::identity(int k, int start_state)
{
  Eigen::VectorXd init = Eigen::VectorXd::Zero(k);
  init(start_state) = 1.0;
  return {Eigen::MatrixXd::Identity(k, k), init};
}

TransitionMatrix TransitionMatrix::sticky(int k, double self)
{
  if (k == 1)
    return uniform(1);
  Eigen::MatrixXd m = Eigen::MatrixXd::Constant(k, k, (1.0 - self) / (k - 1));
  m.diagonal().setConstant(self);
  // fix rounding so each row sums to 1 within tolerance
  for (int i = 0; i < k; ++i)
    m(i, i) = 1.0 - (m.row(i).sum() - m(i, i));
  return {m, Eigen::VectorXd::Constant(k, 1.0 / k)};
}

} // namespace shmm
