#pragma once

// Truncated cosine trajectory basis.
//
// A channel (one scalar trajectory) with coefficients c_0..c_{N-1} evaluates to
//   x_f = c_0 / 2 + sum_{n=1}^{N-1} c_n cos(pi * n * (f + 1/2) / L),  f = 0..N_F-1,
// where L is the basis length (N_F unless overridden). With N = L = N_F this is
// the DCT-III synthesis and dct_fit is its exact inverse.

#include "ptzcap/types.hpp"

#include <Eigen/QR>

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ptzcap {

class TrajectoryBasis {
 public:
  enum class Kind { cosine, identity };

  TrajectoryBasis() = default;

  static TrajectoryBasis cosine(int n_frames, int n_basis, int basis_length = 0) {
    if (n_frames < 1) throw InputError("basis: need at least one frame");
    if (n_basis < 1 || n_basis > n_frames) throw InputError("basis: require 1 <= N_basis <= N_F");
    if (basis_length <= 0) basis_length = n_frames;
    TrajectoryBasis b;
    b.kind_ = Kind::cosine;
    b.basis_length_ = basis_length;
    b.matrix_.resize(n_frames, n_basis);
    for (int f = 0; f < n_frames; ++f) {
      b.matrix_(f, 0) = 0.5;
      for (int n = 1; n < n_basis; ++n)
        b.matrix_(f, n) = std::cos(std::numbers::pi * n * (f + 0.5) / basis_length);
    }
    b.orthogonal_ = basis_length == n_frames;
    b.prepare();
    return b;
  }

  /// Direct per-frame parametrization (coefficients are the samples themselves).
  static TrajectoryBasis identity(int n_frames) {
    if (n_frames < 1) throw InputError("basis: need at least one frame");
    TrajectoryBasis b;
    b.kind_ = Kind::identity;
    b.basis_length_ = n_frames;
    b.matrix_ = Eigen::MatrixXd::Identity(n_frames, n_frames);
    b.orthogonal_ = true;
    b.prepare();
    return b;
  }

  Kind kind() const { return kind_; }
  int n_frames() const { return static_cast<int>(matrix_.rows()); }
  int n_basis() const { return static_cast<int>(matrix_.cols()); }
  int basis_length() const { return basis_length_; }

  /// N_F x N_basis matrix B with x = c * B^T; also the Jacobian dx_f/dc_n.
  const Eigen::MatrixXd& matrix() const { return matrix_; }

  /// coeffs: channels x N_basis -> channels x N_F.
  Eigen::MatrixXd evaluate(const Eigen::MatrixXd& coeffs) const {
    if (coeffs.cols() != n_basis()) throw InputError("basis: coefficient count mismatch");
    if (kind_ == Kind::identity) return coeffs;
    return coeffs * matrix_.transpose();
  }

  /// Least-squares coefficients per channel; trajectory: channels x N_F.
  Eigen::MatrixXd fit(const Eigen::MatrixXd& trajectory) const {
    if (trajectory.cols() != n_frames()) throw InputError("basis: trajectory length mismatch");
    if (kind_ == Kind::identity) return trajectory;
    return trajectory * projector_.transpose();
  }

  /// Pulls a gradient with respect to samples (channels x N_F) back to coefficients.
  Eigen::MatrixXd pullback(const Eigen::MatrixXd& d_samples) const {
    if (kind_ == Kind::identity) return d_samples;
    return d_samples * matrix_;
  }

 private:
  void prepare() {
    if (kind_ == Kind::identity) return;
    if (orthogonal_) {
      // Columns are mutually orthogonal; projection is a per-column scaling.
      Eigen::VectorXd inv_norm = matrix_.colwise().squaredNorm().cwiseInverse().transpose();
      projector_ = inv_norm.asDiagonal() * matrix_.transpose();
    } else {
      Eigen::MatrixXd gram = matrix_.transpose() * matrix_;
      projector_ = gram.ldlt().solve(matrix_.transpose());
    }
  }

  Kind kind_ = Kind::cosine;
  int basis_length_ = 0;
  bool orthogonal_ = true;
  Eigen::MatrixXd matrix_;
  Eigen::MatrixXd projector_;  // N_basis x N_F
};

/// Cosine coefficients for a set of channels (joint coordinates or Euler angles).
struct DctCoefficients {
  Eigen::MatrixXd coeffs;  // channels x N_basis
  int n_frames = 0;
  int basis_length = 0;  // 0 means n_frames
  bool direct = false;   // per-frame samples rather than cosine coefficients

  int n_basis() const { return static_cast<int>(coeffs.cols()); }
  int channels() const { return static_cast<int>(coeffs.rows()); }

  void validate() const {
    if (n_basis() < 1 || n_basis() > n_frames) throw InputError("coefficients: require 1 <= N_basis <= N_F");
    if (!coeffs.allFinite()) throw InputError("coefficients: non-finite entry");
  }

  TrajectoryBasis basis() const {
    return direct ? TrajectoryBasis::identity(n_frames) : TrajectoryBasis::cosine(n_frames, n_basis(), basis_length);
  }
};

inline Eigen::MatrixXd idct_evaluate(const DctCoefficients& c) {
  c.validate();
  return c.basis().evaluate(c.coeffs);
}

inline DctCoefficients dct_fit(const Eigen::MatrixXd& trajectory, int n_basis, int basis_length = 0) {
  const int nf = static_cast<int>(trajectory.cols());
  const auto basis = TrajectoryBasis::cosine(nf, n_basis, basis_length);
  return {basis.fit(trajectory), nf, basis_length, false};
}

}  // namespace ptzcap
