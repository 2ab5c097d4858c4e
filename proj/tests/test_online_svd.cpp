#include <gtest/gtest.h>

#include "spectral_slam/eval.hpp"
#include "spectral_slam/online_svd.hpp"

using namespace spectral_slam;

namespace {
MeasurementMatrix rank4_matrix(double noise, std::uint64_t seed) {
  SimConfig c;
  c.n_steps = 600;
  c.range_noise_frac = noise;
  c.seed = seed;
  const SimulatedRun run = simulate(c);
  return build_rank4(observed_grid(run.ranges, run.trajectory.times));
}
}  // namespace

TEST(IncrementalSvd, NoiselessMatchesBatch) {
  const MeasurementMatrix y = rank4_matrix(0.0, 1);
  const FactoredModel online = online_factorize(y, 4);
  const FactoredModel batch = factorize(y, 4);
  EXPECT_LT(std::asin(subspace_sin(online.U, batch.U)), 1e-6);
  EXPECT_LT((online.singular_values - batch.singular_values).norm() / batch.singular_values(0), 1e-10);
  EXPECT_LT((online.reconstruct() - y.Y).norm() / y.Y.norm(), 1e-10);
}

TEST(IncrementalSvd, WithoutOversamplingStillExactOnLowRank) {
  const MeasurementMatrix y = rank4_matrix(0.0, 2);
  EXPECT_LT(std::asin(subspace_sin(online_factorize(y, 4, 0).U, factorize(y, 4).U)), 1e-6);
}

TEST(IncrementalSvd, NoisyCloseToBatch) {
  const MeasurementMatrix y = rank4_matrix(0.01, 3);
  EXPECT_LT(std::asin(subspace_sin(online_factorize(y, 4).U, factorize(y, 4).U)), 2.0 * kPi / 180.0);
}

TEST(IncrementalSvd, SingleColumn) {
  IncrementalSvd inc(3, 4);
  inc.update(Eigen::Vector3d(3, 0, 4));
  EXPECT_EQ(inc.rank(), 1);
  EXPECT_NEAR(inc.singular_values()(0), 5.0, 1e-15);
  EXPECT_EQ(inc.columns_seen(), 1);
}

TEST(IncrementalSvd, ZeroColumnsKeepCount) {
  IncrementalSvd inc(2, 2);
  inc.update(Eigen::Vector2d::Zero());
  inc.update(Eigen::Vector2d(1, 0));
  inc.update(Eigen::Vector2d(0, 2));
  EXPECT_EQ(inc.columns_seen(), 3);
  const Eigen::MatrixXd rec = inc.U() * inc.singular_values().asDiagonal() * inc.V().transpose();
  Eigen::MatrixXd expected(2, 3);
  expected << 0, 1, 0, 0, 0, 2;
  EXPECT_LT((rec - expected).norm(), 1e-12);
}

TEST(IncrementalSvd, WrongLength) {
  IncrementalSvd inc(3, 2);
  try {
    inc.update(Eigen::Vector2d(1, 2));
    FAIL();
  } catch (const SlamError& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
}

TEST(IncrementalSvd, LongStreamStaysOrthonormal) {
  // Enough columns to pass several re-orthogonalisation refreshes.
  SimConfig c;
  c.n_steps = 3000;
  c.seed = 4;
  const SimulatedRun run = simulate(c);
  const MeasurementMatrix y = build_rank4(observed_grid(run.ranges, run.trajectory.times));
  const FactoredModel m = online_factorize(y, 4);
  EXPECT_LT((m.U.transpose() * m.U - Eigen::MatrixXd::Identity(4, 4)).norm(), 1e-10);
  EXPECT_LT((m.V.transpose() * m.V - Eigen::MatrixXd::Identity(4, 4)).norm(), 1e-8);
}
