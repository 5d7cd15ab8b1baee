#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace ptzcap;
using namespace ptzcap::testing;

namespace {

// Direct summation of the orthonormal DCT-II, independent of the basis matrix.
Eigen::VectorXd dct2_orthonormal(const Eigen::VectorXd& x) {
  const int n = static_cast<int>(x.size());
  Eigen::VectorXd X(n);
  for (int k = 0; k < n; ++k) {
    double s = 0.0;
    for (int f = 0; f < n; ++f) s += x[f] * std::cos(kPi * k * (f + 0.5) / n);
    X[k] = s * std::sqrt((k == 0 ? 1.0 : 2.0) / n);
  }
  return X;
}

Eigen::MatrixXd random_matrix(Gen& g, int rows, int cols) {
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = g.normal();
  return m;
}

}  // namespace

TEST(Basis, DcCoefficientIsHalved) {
  DctCoefficients c{Eigen::MatrixXd::Zero(1, 5), 12, 0, false};
  c.coeffs(0, 0) = 2.0;
  const Eigen::MatrixXd x = idct_evaluate(c);
  for (int f = 0; f < 12; ++f) EXPECT_NEAR(x(0, f), 1.0, 1e-15);
}

TEST(Basis, MatchesPerSampleFormula) {
  Gen g(21);
  const int nf = 17, nb = 6;
  const auto b = TrajectoryBasis::cosine(nf, nb);
  const Eigen::MatrixXd c = random_matrix(g, 3, nb);
  const Eigen::MatrixXd x = b.evaluate(c);
  for (int ch = 0; ch < 3; ++ch)
    for (int f = 0; f < nf; ++f) {
      double v = c(ch, 0) / 2.0;
      for (int n = 1; n < nb; ++n) v += c(ch, n) * std::cos(kPi * n * (f + 0.5) / nf);
      EXPECT_NEAR(x(ch, f), v, 1e-12);
    }
}

TEST(Basis, FullBasisRoundTripsAnyTrajectory) {
  Gen g(22);
  for (int nf : {1, 2, 7, 50, 128}) {
    const Eigen::MatrixXd x = random_matrix(g, 4, nf);
    const auto c = dct_fit(x, nf);
    EXPECT_LT((idct_evaluate(c) - x).cwiseAbs().maxCoeff(), 1e-9) << nf;
  }
}

TEST(Basis, FullFitAgreesWithOrthonormalDctOracle) {
  Gen g(23);
  const int nf = 40;
  const Eigen::VectorXd x = random_matrix(g, 1, nf).transpose();
  const Eigen::VectorXd X = dct2_orthonormal(x);
  const Eigen::RowVectorXd c = dct_fit(x.transpose(), nf).coeffs.row(0);
  // c_0/2 = X_0/sqrt(N), c_k = X_k sqrt(2/N).
  EXPECT_NEAR(c[0], 2.0 * X[0] / std::sqrt(nf), 1e-10);
  for (int k = 1; k < nf; ++k) EXPECT_NEAR(c[k], X[k] * std::sqrt(2.0 / nf), 1e-10);
}

TEST(Basis, ConstantFitsToDcOnly) {
  const Eigen::MatrixXd x = Eigen::MatrixXd::Constant(1, 30, 3.5);
  const auto c = dct_fit(x, 8);
  EXPECT_NEAR(c.coeffs(0, 0), 7.0, 1e-12);
  for (int n = 1; n < 8; ++n) EXPECT_NEAR(c.coeffs(0, n), 0.0, 1e-12);
}

TEST(Basis, PureCosineFitsToOneCoefficient) {
  const int nf = 36;
  for (int k = 1; k < 9; ++k) {
    Eigen::MatrixXd x(1, nf);
    for (int f = 0; f < nf; ++f) x(0, f) = 0.7 * std::cos(kPi * k * (f + 0.5) / nf);
    const auto c = dct_fit(x, 9);
    for (int n = 0; n < 9; ++n) EXPECT_NEAR(c.coeffs(0, n), n == k ? 0.7 : 0.0, 1e-12);
  }
}

TEST(Basis, TruncatedResidualEqualsDiscardedEnergy) {
  Gen g(24);
  const int nf = 64, nb = nf / 4;
  const Eigen::VectorXd x = random_matrix(g, 1, nf).transpose();
  const Eigen::VectorXd X = dct2_orthonormal(x);
  const auto c = dct_fit(x.transpose(), nb);
  const double residual = (idct_evaluate(c).row(0).transpose() - x).squaredNorm();
  EXPECT_NEAR(residual, X.tail(nf - nb).squaredNorm(), 1e-10);
}

TEST(Basis, ResidualIsNonIncreasingInBasisSize) {
  Gen g(25);
  for (int trial = 0; trial < 20; ++trial) {
    const int nf = g.integer(5, 60);
    const Eigen::MatrixXd x = random_matrix(g, 1, nf);
    double prev = std::numeric_limits<double>::infinity();
    for (int nb = 1; nb <= nf; ++nb) {
      const double r = (idct_evaluate(dct_fit(x, nb)) - x).squaredNorm();
      EXPECT_LE(r, prev + 1e-10);
      prev = r;
    }
  }
}

TEST(Basis, EvaluationIsLinear) {
  Gen g(26);
  const auto b = TrajectoryBasis::cosine(30, 11);
  for (int i = 0; i < 20; ++i) {
    const Eigen::MatrixXd c1 = random_matrix(g, 3, 11), c2 = random_matrix(g, 3, 11);
    const double a = g.normal(), s = g.normal();
    EXPECT_LT((b.evaluate(a * c1 + s * c2) - (a * b.evaluate(c1) + s * b.evaluate(c2))).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Basis, JacobianIsTheBasisMatrix) {
  Gen g(27);
  const int nf = 20, nb = 7;
  const auto b = TrajectoryBasis::cosine(nf, nb);
  const Eigen::MatrixXd c = random_matrix(g, 1, nb);
  for (int n = 0; n < nb; ++n) {
    Eigen::MatrixXd p = c, m = c;
    p(0, n) += 1e-5;
    m(0, n) -= 1e-5;
    const Eigen::RowVectorXd fd = (b.evaluate(p) - b.evaluate(m)) / 2e-5;
    for (int f = 0; f < nf; ++f) EXPECT_NEAR(fd[f], b.matrix()(f, n), 1e-6 * std::max(1.0, std::abs(b.matrix()(f, n))));
  }
}

TEST(Basis, PullbackIsTheAdjoint) {
  Gen g(28);
  const auto b = TrajectoryBasis::cosine(25, 9);
  const Eigen::MatrixXd c = random_matrix(g, 2, 9), w = random_matrix(g, 2, 25);
  // <w, B c> = <B^T w, c>
  EXPECT_NEAR(w.cwiseProduct(b.evaluate(c)).sum(), b.pullback(w).cwiseProduct(c).sum(), 1e-10);
}

TEST(Basis, BasisLengthOverrideStretchesThePeriod) {
  Gen g(29);
  const int nf = 30, nb = 8, len = 45;
  const auto b = TrajectoryBasis::cosine(nf, nb, len);
  EXPECT_EQ(b.basis_length(), len);
  EXPECT_NEAR(b.matrix()(4, 3), std::cos(kPi * 3 * 4.5 / len), 1e-15);
  // Least squares remains exact for trajectories inside the span.
  const Eigen::MatrixXd c = random_matrix(g, 2, nb);
  EXPECT_LT((b.fit(b.evaluate(c)) - c).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Basis, IdentityBasisIsDirect) {
  Gen g(30);
  const auto b = TrajectoryBasis::identity(12);
  EXPECT_EQ(b.n_basis(), 12);
  const Eigen::MatrixXd x = random_matrix(g, 3, 12);
  EXPECT_EQ(b.evaluate(x), x);
  EXPECT_EQ(b.fit(x), x);
}

TEST(Basis, RejectsInvalidSizes) {
  EXPECT_THROW(TrajectoryBasis::cosine(10, 0), InputError);
  EXPECT_THROW(TrajectoryBasis::cosine(10, 11), InputError);
  EXPECT_THROW(TrajectoryBasis::cosine(0, 1), InputError);
  DctCoefficients c{Eigen::MatrixXd::Zero(1, 3), 2, 0, false};
  EXPECT_THROW(idct_evaluate(c), InputError);
  c = {Eigen::MatrixXd::Constant(1, 2, std::nan("")), 2, 0, false};
  EXPECT_THROW(idct_evaluate(c), InputError);
}

// ---------------------------------------------------------------- 1D filters

namespace {

std::vector<double> naive_median(const std::vector<double>& x, int window) {
  const int n = static_cast<int>(x.size()), h = window / 2;
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) {
    std::vector<double> w;
    for (int k = i - h; k <= i + h; ++k) w.push_back(x[std::clamp(k, 0, n - 1)]);
    std::sort(w.begin(), w.end());
    out[i] = w[h];
  }
  return out;
}

std::vector<double> naive_gaussian(const std::vector<double>& x, double sigma) {
  const int n = static_cast<int>(x.size());
  const int r = static_cast<int>(std::lround(4.0 * sigma));
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) {
    double a = 0.0, w = 0.0;
    for (int k = -r; k <= r; ++k) {
      if (i + k < 0 || i + k >= n) continue;
      const double c = std::exp(-(k * k) / (2.0 * sigma * sigma));
      a += c * x[i + k];
      w += c;
    }
    out[i] = a / w;
  }
  return out;
}

}  // namespace

TEST(Filters, MedianMatchesSortingOracle) {
  Gen g(31);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x(g.integer(1, 40));
    for (auto& v : x) v = g.normal();
    for (int w : {1, 3, 5, 7, 9}) EXPECT_EQ(median_filter(x, w), naive_median(x, w));
  }
}

TEST(Filters, GaussianMatchesDirectConvolution) {
  Gen g(32);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x(g.integer(1, 60));
    for (auto& v : x) v = g.normal();
    for (double s : {0.5, 1.5, 3.0}) {
      const auto a = gaussian_smooth(x, s), b = naive_gaussian(x, s);
      for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
    }
  }
}

TEST(Filters, ConstantsArePreserved) {
  const std::vector<double> x(20, 0.125);
  for (double v : median_filter(x, 7)) EXPECT_EQ(v, 0.125);
  for (double v : gaussian_smooth(x, 3.0)) EXPECT_NEAR(v, 0.125, 1e-15);
}

TEST(Filters, LinearRampSurvivesGaussianInterior) {
  std::vector<double> x(60);
  for (int i = 0; i < 60; ++i) x[i] = 0.01 * i - 0.2;
  const auto y = gaussian_smooth(x, 3.0);
  for (int i = 12; i < 48; ++i) EXPECT_NEAR(y[i], x[i], 1e-12);
}

TEST(Filters, ZeroSigmaIsIdentity) {
  const std::vector<double> x{1, 5, 2};
  EXPECT_EQ(gaussian_smooth(x, 0.0), x);
}
