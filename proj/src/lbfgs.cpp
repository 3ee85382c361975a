#include "nlnet/lbfgs.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>
#include <stdexcept>

#include "nlnet/errors.hpp"
#include "nlnet/image.hpp"

namespace nlnet {

namespace {

struct Point {
  double step = 0.0;
  double value = 0.0;
  double slope = 0.0;  // directional derivative
  std::vector<double> x;
  std::vector<double> grad;
};

class LineSearch {
 public:
  LineSearch(const Objective& fn, const LbfgsOptions& opt, const std::vector<double>& x, const std::vector<double>& dir,
             int iter, int& evaluations)
      : fn_(fn), opt_(opt), x_(x), dir_(dir), iter_(iter), evaluations_(evaluations) {}

  /// Returns false when no acceptable step was found; `best` then holds the
  /// lowest sufficient-decrease point, if any (step > 0).
  bool run(const Point& origin, double initial_step, Point& best) {
    origin_ = &origin;
    best = origin;
    best.step = 0.0;
    Point prev = origin;
    prev.step = 0.0;
    double step = initial_step;
    for (int i = 0; i < opt_.max_line_evals; ++i) {
      Point cur = evaluate(step);
      if (cur.value > armijo(step) || (i > 0 && cur.value >= prev.value)) return zoom(prev, cur, best);
      remember(cur, best);
      if (std::abs(cur.slope) <= -opt_.c2 * origin.slope) return true;
      if (cur.slope >= 0.0) return zoom(cur, prev, best);
      prev = std::move(cur);
      step *= 2.0;
    }
    return false;
  }

 private:
  double armijo(double step) const { return origin_->value + opt_.c1 * step * origin_->slope; }

  void remember(const Point& p, Point& best) const {
    if (p.value <= armijo(p.step) && p.value < best.value) best = p;
  }

  Point evaluate(double step) {
    Point p;
    p.step = step;
    p.x.resize(x_.size());
    p.grad.assign(x_.size(), 0.0);
    for (std::size_t i = 0; i < x_.size(); ++i) p.x[i] = x_[i] + step * dir_[i];
    p.value = fn_(p.x, p.grad);
    ++evaluations_;
    p.slope = dot(p.grad, dir_);
    if (!std::isfinite(p.value) || !std::isfinite(p.slope)) {
      std::ostringstream msg;
      msg << "non-finite objective or gradient at iteration " << iter_ << ", step " << step;
      throw NumericError(msg.str());
    }
    return p;
  }

  static double interpolate(const Point& lo, const Point& hi) {
    const double d1 = lo.slope + hi.slope - 3.0 * (lo.value - hi.value) / (lo.step - hi.step);
    const double disc = d1 * d1 - lo.slope * hi.slope;
    const double a = std::min(lo.step, hi.step);
    const double b = std::max(lo.step, hi.step);
    double t = 0.5 * (lo.step + hi.step);
    if (disc >= 0.0) {
      const double d2 = std::copysign(std::sqrt(disc), hi.step - lo.step);
      const double denom = hi.slope - lo.slope + 2.0 * d2;
      if (denom != 0.0) {
        const double c = hi.step - (hi.step - lo.step) * (hi.slope + d2 - d1) / denom;
        if (std::isfinite(c)) t = c;
      }
    }
    const double margin = 0.1 * (b - a);
    if (t < a + margin || t > b - margin) t = 0.5 * (a + b);
    return t;
  }

  bool zoom(Point lo, Point hi, Point& best) {
    for (int i = 0; i < opt_.max_line_evals; ++i) {
      if (std::abs(hi.step - lo.step) <= 1e-16 * std::max(1.0, lo.step)) break;
      Point cur = evaluate(interpolate(lo, hi));
      if (cur.value > armijo(cur.step) || cur.value >= lo.value) {
        hi = std::move(cur);
        continue;
      }
      remember(cur, best);
      if (std::abs(cur.slope) <= -opt_.c2 * origin_->slope) return true;
      if (cur.slope * (hi.step - lo.step) >= 0.0) hi = lo;
      lo = std::move(cur);
    }
    return false;
  }

  const Objective& fn_;
  const LbfgsOptions& opt_;
  const std::vector<double>& x_;
  const std::vector<double>& dir_;
  int iter_;
  int& evaluations_;
  const Point* origin_ = nullptr;
};

struct Correction {
  std::vector<double> s;
  std::vector<double> y;
  double rho;
};

std::vector<double> two_loop(const std::deque<Correction>& memory, const std::vector<double>& grad) {
  std::vector<double> q = grad;
  std::vector<double> alpha(memory.size());
  for (std::size_t m = memory.size(); m-- > 0;) {
    alpha[m] = memory[m].rho * dot(memory[m].s, q);
    for (std::size_t i = 0; i < q.size(); ++i) q[i] -= alpha[m] * memory[m].y[i];
  }
  if (!memory.empty()) {
    const Correction& last = memory.back();
    const double scale = dot(last.s, last.y) / dot(last.y, last.y);
    for (double& v : q) v *= scale;
  }
  for (std::size_t m = 0; m < memory.size(); ++m) {
    const double beta = memory[m].rho * dot(memory[m].y, q);
    for (std::size_t i = 0; i < q.size(); ++i) q[i] += (alpha[m] - beta) * memory[m].s[i];
  }
  for (double& v : q) v = -v;
  return q;
}

}  // namespace

LbfgsResult lbfgs_minimize(const Objective& objective, std::vector<double> x0, const LbfgsOptions& options,
                           const std::function<void(const LbfgsIteration&)>& on_iteration) {
  if (options.max_iters < 0 || options.history < 1 || !(options.c1 > 0.0 && options.c1 < options.c2 && options.c2 < 1.0))
    throw std::invalid_argument("lbfgs_minimize: invalid options");

  LbfgsResult result;
  Point cur;
  cur.x = std::move(x0);
  cur.grad.assign(cur.x.size(), 0.0);
  cur.value = objective(cur.x, cur.grad);
  result.evaluations = 1;
  double gnorm = norm2(cur.grad);
  if (!std::isfinite(cur.value) || !std::isfinite(gnorm))
    throw NumericError("non-finite objective or gradient at iteration 0, step 0");

  std::deque<Correction> memory;
  for (int k = 0; k < options.max_iters; ++k) {
    if (gnorm < options.grad_tol) {
      result.converged = true;
      break;
    }
    std::vector<double> dir = two_loop(memory, cur.grad);
    cur.slope = dot(cur.grad, dir);
    if (!(cur.slope < 0.0)) {
      memory.clear();
      dir = two_loop(memory, cur.grad);
      cur.slope = dot(cur.grad, dir);
    }

    Point next;
    const double first = memory.empty() ? 1.0 / gnorm : 1.0;
    LineSearch search(objective, options, cur.x, dir, k + 1, result.evaluations);
    search.run(cur, first, next);
    if (next.step == 0.0) {
      if (memory.empty()) break;  // steepest descent cannot make progress either
      memory.clear();
      --k;
      continue;
    }

    Correction corr;
    corr.s.resize(cur.x.size());
    corr.y.resize(cur.x.size());
    for (std::size_t i = 0; i < cur.x.size(); ++i) {
      corr.s[i] = next.x[i] - cur.x[i];
      corr.y[i] = next.grad[i] - cur.grad[i];
    }
    const double sy = dot(corr.s, corr.y);
    if (sy > 1e-12 * norm2(corr.s) * norm2(corr.y) && sy > 0.0) {
      corr.rho = 1.0 / sy;
      memory.push_back(std::move(corr));
      if (static_cast<int>(memory.size()) > options.history) memory.pop_front();
    }

    cur = std::move(next);
    gnorm = norm2(cur.grad);
    result.iterations = k + 1;
    if (on_iteration) on_iteration({k + 1, cur.value, gnorm, cur.step});
  }

  if (gnorm < options.grad_tol) result.converged = true;
  result.x = std::move(cur.x);
  result.objective = cur.value;
  result.grad_norm = gnorm;
  return result;
}

}  // namespace nlnet
