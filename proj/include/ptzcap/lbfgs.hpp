#pragma once

// Limited-memory BFGS with Armijo backtracking.
//
// One call to step() is an outer iteration: up to max_inner_iters quasi-Newton
// updates. Curvature pairs persist across calls so a driver can interleave its
// own work (re-aiming cameras, logging) between outer iterations.

#include <Eigen/Core>

#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <vector>
#include <algorithm>

namespace ptzcap {

struct LbfgsOptions {
  double step_length = 0.05;  // trial step of the very first (steepest-descent) update
  int max_inner_iters = 20;
  int history_size = 10;
  int max_line_search_evals = 20;
  double armijo_c = 1e-4;
  double backtrack = 0.5;
  double tolerance_change = 1e-14;
};

enum class LbfgsStatus { progressing, stalled, line_search_failed };

/// Returns f(x) and writes the gradient into *grad when it is non-null.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd* grad)>;

class Lbfgs {
 public:
  Lbfgs(Objective f, LbfgsOptions opt = {}) : f_(std::move(f)), opt_(opt) {}

  /// One outer iteration starting from x (updated in place). Returns f at the final x.
  double step(Eigen::VectorXd& x) {
    Eigen::VectorXd g;
    double fx = eval(x, &g);
    if (!std::isfinite(fx)) {
      status_ = LbfgsStatus::line_search_failed;
      return fx;
    }
    status_ = LbfgsStatus::progressing;
    for (int it = 0; it < opt_.max_inner_iters; ++it) {
      if (g.lpNorm<Eigen::Infinity>() == 0.0) {
        status_ = LbfgsStatus::stalled;
        break;
      }
      Eigen::VectorXd d;
      double t;
      direction(g, d, t);
      double gtd = g.dot(d);
      if (!(gtd < 0.0)) {
        history_.clear();
        direction(g, d, t);
        gtd = g.dot(d);
      }

      Eigen::VectorXd x_new, g_new;
      double f_new;
      if (!line_search(x, fx, d, gtd, t, x_new, f_new, g_new)) {
        if (history_.empty()) {
          status_ = LbfgsStatus::line_search_failed;
          break;
        }
        // Quasi-Newton direction was poor; restart from steepest descent.
        history_.clear();
        direction(g, d, t);
        gtd = g.dot(d);
        if (!line_search(x, fx, d, gtd, t, x_new, f_new, g_new)) {
          status_ = LbfgsStatus::line_search_failed;
          break;
        }
      }

      const Eigen::VectorXd s = x_new - x;
      const Eigen::VectorXd y = g_new - g;
      const double ys = y.dot(s);
      if (ys > 1e-10) {
        if (static_cast<int>(history_.size()) == opt_.history_size) history_.pop_front();
        history_.push_back({s, y, 1.0 / ys});
      }
      const double change = std::abs(f_new - fx);
      const double step_max = s.lpNorm<Eigen::Infinity>();
      x = std::move(x_new);
      g = std::move(g_new);
      fx = f_new;
      if (change <= opt_.tolerance_change || step_max <= opt_.tolerance_change) {
        status_ = LbfgsStatus::stalled;
        break;
      }
    }
    return fx;
  }

  void reset() { history_.clear(); }
  LbfgsStatus status() const { return status_; }
  long evaluations() const { return evaluations_; }

 private:
  struct Pair {
    Eigen::VectorXd s, y;
    double rho;
  };

  double eval(const Eigen::VectorXd& x, Eigen::VectorXd* g) {
    ++evaluations_;
    return f_(x, g);
  }

  // Two-loop recursion with initial Hessian gamma*I; without history a
  // normalized steepest-descent step.
  void direction(const Eigen::VectorXd& g, Eigen::VectorXd& d, double& t) const {
    if (history_.empty()) {
      d = -g;
      t = std::min(1.0, 1.0 / g.lpNorm<1>()) * opt_.step_length;
      return;
    }
    const int m = static_cast<int>(history_.size());
    std::vector<double> alpha(m);
    Eigen::VectorXd q = -g;
    for (int i = m - 1; i >= 0; --i) {
      alpha[i] = history_[i].rho * history_[i].s.dot(q);
      q.noalias() -= alpha[i] * history_[i].y;
    }
    const auto& last = history_.back();
    q *= 1.0 / (last.rho * last.y.squaredNorm());
    for (int i = 0; i < m; ++i) {
      const double beta = history_[i].rho * history_[i].y.dot(q);
      q.noalias() += (alpha[i] - beta) * history_[i].s;
    }
    d = std::move(q);
    t = 1.0;
  }

  bool line_search(const Eigen::VectorXd& x, double fx, const Eigen::VectorXd& d, double gtd, double t,
                   Eigen::VectorXd& x_new, double& f_new, Eigen::VectorXd& g_new) {
    if (!(gtd < 0.0)) return false;
    for (int k = 0; k < opt_.max_line_search_evals; ++k) {
      x_new = x + t * d;
      f_new = eval(x_new, &g_new);
      if (std::isfinite(f_new) && f_new <= fx + opt_.armijo_c * t * gtd) return true;
      t *= opt_.backtrack;
    }
    return false;
  }

  Objective f_;
  LbfgsOptions opt_;
  std::deque<Pair> history_;
  LbfgsStatus status_ = LbfgsStatus::progressing;
  long evaluations_ = 0;
};

}  // namespace ptzcap
