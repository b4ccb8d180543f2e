#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "shmm/errors.hpp"
#include "shmm/transition.hpp"

using namespace shmm;

TEST_CASE("row sums are enforced to 1e-12")
{
  Eigen::MatrixXd rows(2, 2);
  rows << 0.9, 0.1, 0.3, 0.7;
  Eigen::VectorXd init(2);
  init << 0.5, 0.5;
  CHECK_NOTHROW(TransitionMatrix(rows, init));

  rows(0, 1) = 0.1 + 1e-9;
  CHECK_THROWS_AS(TransitionMatrix(rows, init), InvalidArgument);
  rows(0, 1) = 0.1;
  init(1) = 0.6;
  CHECK_THROWS_AS(TransitionMatrix(rows, init), InvalidArgument);
}

TEST_CASE("entries outside [0,1] are rejected")
{
  Eigen::MatrixXd rows(2, 2);
  rows << 1.2, -0.2, 0.5, 0.5;
  CHECK_THROWS_AS(TransitionMatrix(rows, Eigen::VectorXd::Constant(2, 0.5)), InvalidArgument);
  CHECK_THROWS_AS(TransitionMatrix(Eigen::MatrixXd::Identity(2, 3), Eigen::VectorXd::Constant(2, 0.5)),
                  InvalidArgument);
}

TEST_CASE("sticky matrix spreads off-diagonal mass uniformly")
{
  auto const pi = TransitionMatrix::sticky(3, 0.98);
  CHECK(pi.rows(0, 0) == doctest::Approx(0.98));
  CHECK(pi.rows(0, 1) == doctest::Approx(0.01));
  CHECK(pi.rows(2, 1) == doctest::Approx(0.01));
  CHECK(pi.initial.sum() == doctest::Approx(1.0));
}

TEST_CASE("propagate matches repeated multiplication")
{
  Eigen::MatrixXd rows(3, 3);
  rows << 0.5, 0.3, 0.2, 0.1, 0.8, 0.1, 0.25, 0.25, 0.5;
  Eigen::VectorXd init(3);
  init << 0.2, 0.3, 0.5;
  TransitionMatrix const pi(rows, init);
  Eigen::RowVectorXd v = rows.row(2);
  for (int h = 1; h <= 6; ++h) {
    CHECK((pi.propagate(2, h) - v).cwiseAbs().maxCoeff() < 1e-14);
    v = v * rows;
  }
  CHECK((pi.propagate(-1, 1) - pi.first_step()).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((pi.propagate(1, 0) - Eigen::RowVectorXd::Unit(3, 1)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("uniform rows are stationary under powers")
{
  auto const pi = TransitionMatrix::uniform(4);
  for (int h = 1; h < 5; ++h)
    CHECK((pi.propagate(0, h).array() - 0.25).abs().maxCoeff() < 1e-15);
}
