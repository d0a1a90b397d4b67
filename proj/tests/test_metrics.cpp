#include "amca/metrics.hpp"
#include "amca/rng.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

using namespace amca;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

// Best sum_j |M(perm[j], j)| over all permutations.
double brute_force_assignment(const Matrix& m) {
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(m.cols()));
  std::iota(perm.begin(), perm.end(), 0);
  double best = -1.0;
  do {
    double v = 0.0;
    for (std::size_t j = 0; j < perm.size(); ++j) v += std::abs(m(perm[j], static_cast<Eigen::Index>(j)));
    best = std::max(best, v);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

double matched_value(const Matrix& m, const std::vector<Eigen::Index>& perm) {
  double v = 0.0;
  for (std::size_t j = 0; j < perm.size(); ++j) v += std::abs(m(perm[j], static_cast<Eigen::Index>(j)));
  return v;
}

Matrix swap_and_scale(const Matrix& a) {
  Matrix out = a;
  out.col(0) = a.col(1);
  out.col(1) = -2.0 * a.col(0);
  return out;
}

}  // namespace

TEST(Assignment, SmallKnownCase) {
  Matrix cost(3, 3);
  cost << 4, 1, 3,  //
      2, 0, 5,      //
      3, 2, 2;
  const auto rows = solve_assignment(cost);
  double total = 0.0;
  for (std::size_t j = 0; j < 3; ++j) total += cost(rows[j], static_cast<Eigen::Index>(j));
  EXPECT_EQ(total, 5.0);
  EXPECT_THROW(solve_assignment(Matrix::Zero(2, 3)), InvalidArgument);
}

TEST(Match, SelfMatchIsIdentity) {
  const Matrix a = random_matrix(5, 4, 1);
  const auto m = match_and_scale(a, a);
  for (std::size_t j = 0; j < 4; ++j) {
    EXPECT_EQ(m.permutation[j], static_cast<Eigen::Index>(j));
    EXPECT_NEAR(m.scales[j], 1.0, 1e-12);
  }
  EXPECT_LT((m.corrected_product - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(mixing_criterion(a, a), 0.0, 1e-12);
}

TEST(Match, SwappedAndScaledColumns) {
  const Matrix a = random_matrix(4, 3, 2);
  const auto m = match_and_scale(swap_and_scale(a), a);
  EXPECT_LT((m.corrected_product - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(m.permutation[0], 1);
  EXPECT_EQ(m.permutation[1], 0);
}

TEST(Match, AgreesWithBruteForce5x4) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Matrix est = random_matrix(5, 4, 100 + seed);
    const Matrix truth = random_matrix(5, 4, 200 + seed);
    const Matrix product = pinv(est) * truth;
    const auto m = match_and_scale(est, truth);
    EXPECT_NEAR(matched_value(product, m.permutation), brute_force_assignment(product), 1e-12);
  }
}

TEST(Criterion, InvarianceUnderPermutationAndScaling) {
  const Matrix truth = random_matrix(6, 4, 3);
  const Matrix est = truth + 0.05 * random_matrix(6, 4, 4);
  Eigen::PermutationMatrix<Eigen::Dynamic> p(4);
  p.indices() << 3, 1, 0, 2;
  const Vector d = (Vector(4) << -3.0, 0.2, 7.5, -0.01).finished();
  const Matrix moved = est * p * d.asDiagonal();
  EXPECT_NEAR(mixing_criterion(moved, truth), mixing_criterion(est, truth), 1e-10);
  EXPECT_GT(mixing_criterion(est, truth), 0.0);
}

// A_true = I, A_est = [(1,0), (0.1,1)/|.|]. pinv(A_est) = inv(A_est), and by
// hand: inv([[1, b], [0, c]]) = [[1, -b/c], [0, 1/c]] with b = 0.1/r, c = 1/r.
// Identity permutation wins; scaling row 1 by c leaves [[1, -0.1], [0, 1]].
TEST(Criterion, TwoByTwoHandOracle) {
  const double r = std::sqrt(1.01);
  Matrix est(2, 2);
  est << 1, 0.1 / r,  //
      0, 1 / r;
  EXPECT_NEAR(mixing_criterion(est, Matrix::Identity(2, 2)), 0.1, 1e-12);
}

TEST(Criterion, DegenerateMatchThrows) {
  Matrix est = Matrix::Identity(2, 2);
  Matrix truth(2, 2);
  truth << 1, 1,  //
      0, 0;
  EXPECT_THROW(match_and_scale(est, truth), DegenerateMatch);
  EXPECT_THROW(match_and_scale(Matrix::Identity(2, 2), Matrix::Identity(3, 2)), InvalidArgument);
}

TEST(Sdr, ExactEstimateHitsCap) {
  const Matrix s = random_matrix(3, 64, 5);
  const Matrix z = 1e-3 * random_matrix(2, 64, 6);
  const auto d = sdr(s.row(1).transpose(), s, z, 1);
  EXPECT_EQ(d.sdr_db, kSdrCapDb);
  EXPECT_NEAR(d.e_interf + d.e_noise + d.e_artefacts, 0.0, 1e-20);
}

TEST(Sdr, PureArtefactHitsNegativeCap) {
  Matrix s = Matrix::Zero(2, 8);
  s(0, 0) = 1;
  s(1, 1) = 1;
  Matrix z = Matrix::Zero(1, 8);
  z(0, 2) = 1;
  Vector est = Vector::Zero(8);
  est(5) = 3.0;
  const auto d = sdr(est, s, z, 0);
  EXPECT_EQ(d.e_target, 0.0);
  EXPECT_EQ(d.sdr_db, -kSdrCapDb);
  EXPECT_NEAR(d.e_artefacts, 9.0, 1e-12);
}

// s1, s2 orthonormal; est = s1 + 0.1 s2: 10 log10(1 / 0.01) = 20 dB. The
// projections are also computed from the Gram matrix directly.
TEST(Sdr, TwentyDbOracle) {
  const Matrix q = Eigen::HouseholderQR<Matrix>(random_matrix(32, 2, 7)).householderQ();
  const Matrix s = q.leftCols(2).transpose();
  const Vector est = s.row(0).transpose() + 0.1 * s.row(1).transpose();
  const auto d = sdr(est, s, Matrix(0, 32), 0);
  EXPECT_NEAR(d.sdr_db, 20.0, 1e-10);

  const Matrix st = s.transpose();
  const Vector p_all = st * (st.transpose() * st).inverse() * st.transpose() * est;
  const Vector target = s.row(0).transpose() * s.row(0).dot(est);
  EXPECT_NEAR(d.e_target, target.squaredNorm(), 1e-12);
  EXPECT_NEAR(d.e_interf, (p_all - target).squaredNorm(), 1e-12);
}

TEST(Sdr, EnergiesSumToEstimateEnergy) {
  const Matrix s = random_matrix(4, 200, 8);
  const Matrix z = 0.1 * random_matrix(4, 200, 9);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Vector est = random_matrix(200, 1, 50 + seed).col(0) + 2.0 * s.row(2).transpose();
    const auto d = sdr(est, s, z, 2);
    const double total = d.e_target + d.e_interf + d.e_noise + d.e_artefacts;
    EXPECT_NEAR(total, est.squaredNorm(), 1e-9 * est.squaredNorm());
    EXPECT_GE(d.e_noise, 0.0);
  }
}

TEST(Sdr, ComponentsScaleQuadratically) {
  const Matrix s = random_matrix(3, 100, 10);
  const Matrix z = 0.1 * random_matrix(3, 100, 11);
  const Vector est = s.row(0).transpose() + random_matrix(100, 1, 12).col(0);
  const auto a = sdr(est, s, z, 0);
  const auto b = sdr(3.0 * est, s, z, 0);
  EXPECT_NEAR(b.e_target, 9.0 * a.e_target, 1e-9 * b.e_target);
  EXPECT_NEAR(b.e_interf, 9.0 * a.e_interf, 1e-9 * b.e_interf);
  EXPECT_NEAR(b.e_artefacts, 9.0 * a.e_artefacts, 1e-9 * b.e_artefacts);
  EXPECT_NEAR(b.sdr_db, a.sdr_db, 1e-9);
}

TEST(Sdr, ZeroTargetThrows) {
  Matrix s = Matrix::Zero(2, 4);
  s(0, 0) = 1;
  EXPECT_THROW(sdr(Vector::Ones(4), s, Matrix(0, 4), 1), InvalidArgument);
}

namespace {

GroundTruth tiny_truth() {
  GroundTruth t;
  t.sources = random_matrix(2, 64, 20);
  t.mixing = random_matrix(3, 2, 21);
  normalize_columns(t.mixing);
  t.noise = Matrix::Zero(3, 64);
  t.observations = t.mixing * t.sources;
  return t;
}

}  // namespace

TEST(ScoreResult, PerfectAndPermuted) {
  const auto truth = tiny_truth();
  SeparationResult r;
  r.a_est = truth.mixing;
  r.s_est = truth.sources;
  auto sc = score_result(r, truth);
  EXPECT_EQ(sc.mean_sdr, kSdrCapDb);
  EXPECT_EQ(sc.min_sdr, kSdrCapDb);
  EXPECT_NEAR(sc.ca, 0.0, 1e-12);

  SeparationResult p;
  p.a_est = swap_and_scale(truth.mixing);
  p.s_est = truth.sources;
  p.s_est.row(0) = truth.sources.row(1);
  p.s_est.row(1) = -0.5 * truth.sources.row(0);
  sc = score_result(p, truth);
  EXPECT_NEAR(sc.ca, 0.0, 1e-12);
  EXPECT_GE(sc.min_sdr, 250.0);
}

TEST(ScoreResult, OneGoodOneArtefact) {
  const auto truth = tiny_truth();
  SeparationResult r;
  r.a_est = truth.mixing;
  r.s_est = truth.sources;
  const Matrix basis = truth.sources.transpose();
  Vector junk = random_matrix(64, 1, 30).col(0);
  junk -= basis * (pinv(basis) * junk);  // orthogonal to both sources
  r.s_est.row(1) = junk.transpose();
  const auto sc = score_result(r, truth);
  EXPECT_LT(sc.min_sdr, -200.0);
  EXPECT_NEAR(sc.mean_sdr, 0.5 * (kSdrCapDb + sc.min_sdr), 1e-9);
}

TEST(ScoreResult, InvariantUnderJointPermutation) {
  const auto truth = tiny_truth();
  SeparationResult r;
  r.a_est = truth.mixing + 0.01 * random_matrix(3, 2, 40);
  r.s_est = truth.sources + 0.01 * random_matrix(2, 64, 41);
  const auto base = score_result(r, truth);
  SeparationResult p = r;
  p.a_est.col(0) = r.a_est.col(1);
  p.a_est.col(1) = r.a_est.col(0);
  p.s_est.row(0) = r.s_est.row(1);
  p.s_est.row(1) = r.s_est.row(0);
  const auto moved = score_result(p, truth);
  EXPECT_NEAR(moved.mean_sdr, base.mean_sdr, 1e-9);
  EXPECT_NEAR(moved.min_sdr, base.min_sdr, 1e-9);
  EXPECT_NEAR(moved.ca, base.ca, 1e-10);
}
