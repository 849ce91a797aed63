#include "carbonmkt/lp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>

#include <Eigen/Dense>

#include "carbonmkt/errors.hpp"

namespace carbonmkt::lp {

const char* to_string(Status status) {
  switch (status) {
    case Status::kOptimal:
      return "optimal";
    case Status::kInfeasible:
      return "infeasible";
    case Status::kUnbounded:
      return "unbounded";
  }
  return "?";
}

std::size_t LinearProgram::add_variable(std::string label, double cost,
                                        double lo, double hi) {
  objective.push_back(cost);
  lower.push_back(lo);
  upper.push_back(hi);
  variable_labels.push_back(std::move(label));
  for (auto& row : constraints) row.coefficients.push_back(0.0);
  return objective.size() - 1;
}

std::size_t LinearProgram::add_constraint(std::vector<double> coefficients,
                                          Relation relation, double rhs,
                                          std::string label) {
  constraints.push_back(
      Constraint{std::move(coefficients), relation, rhs, std::move(label)});
  return constraints.size() - 1;
}

void LinearProgram::validate() const {
  const std::size_t n = objective.size();
  if (lower.size() != n || upper.size() != n) {
    throw MalformedProgram("bound arrays do not match objective length");
  }
  if (!variable_labels.empty() && variable_labels.size() != n) {
    throw MalformedProgram("variable label count does not match objective");
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (std::isnan(objective[j]) || std::isnan(lower[j]) ||
        std::isnan(upper[j])) {
      throw MalformedProgram("NaN in variable " + std::to_string(j));
    }
    if (lower[j] > upper[j]) {
      throw MalformedProgram("lower > upper for variable " +
                             std::to_string(j));
    }
    if (lower[j] == kInf || upper[j] == -kInf) {
      throw MalformedProgram("infinite bound on wrong side for variable " +
                             std::to_string(j));
    }
  }
  for (std::size_t k = 0; k < constraints.size(); ++k) {
    const auto& row = constraints[k];
    if (row.coefficients.size() != n) {
      throw MalformedProgram("row " + std::to_string(k) + " has " +
                             std::to_string(row.coefficients.size()) +
                             " coefficients, expected " + std::to_string(n));
    }
    if (!std::isfinite(row.rhs)) {
      throw MalformedProgram("non-finite rhs in row " + std::to_string(k));
    }
    for (double a : row.coefficients) {
      if (!std::isfinite(a)) {
        throw MalformedProgram("non-finite coefficient in row " +
                               std::to_string(k));
      }
    }
  }
}

double evaluate(std::span<const double> coefficients,
                std::span<const double> x) {
  double total = 0.0;
  for (std::size_t j = 0; j < coefficients.size() && j < x.size(); ++j) {
    total += coefficients[j] * x[j];
  }
  return total;
}

namespace {

bool trace_enabled() {
  const char* flag = std::getenv("LP_TRACE");
  return flag != nullptr && std::strcmp(flag, "1") == 0;
}

// Bounded-variable tableau over [structurals | slacks | artificials], every
// row an equality `R*A x + s + art = R*b` with R the row scaling.
class Tableau {
 public:
  Tableau(const LinearProgram& lp, const SolverOptions& options,
          const Basis* start = nullptr)
      : lp_(lp),
        opt_(options),
        m_(lp.num_constraints()),
        n_(lp.num_variables()),
        trace_(trace_enabled()) {
    if (start == nullptr || !warm_setup(*start)) setup();
  }

  LpSolution run() {
    LpSolution result;
    if (num_artificial_ > 0) {
      set_phase_costs(/*phase_one=*/true);
      const Status s = iterate(1);
      (void)s;  // phase one is bounded by construction
      refactor();
      double infeasibility = 0.0;
      for (std::size_t k = 0; k < num_artificial_; ++k) {
        infeasibility += std::abs(x_[n_ + m_ + k]);
      }
      if (infeasibility > 1e-7) {
        result.status = Status::kInfeasible;
        result.iterations = iterations_;
        return result;
      }
      drive_out_artificials();
    }
    set_phase_costs(/*phase_one=*/false);
    Status status = Status::kOptimal;
    bool clean = false;
    for (int round = 0; round < 4 && !clean; ++round) {
      status = iterate(2);
      if (status != Status::kOptimal) break;
      refactor();
      clean = certified();
    }
    result.status = status;
    result.iterations = iterations_;
    if (status != Status::kOptimal) return result;
    if (!clean) {
      throw NumericalFailure("simplex could not certify its final basis");
    }
    extract(result);
    return result;
  }

 private:
  std::size_t cols() const { return n_ + m_ + num_artificial_; }
  double* row(std::size_t i) { return tab_.data() + i * cols(); }
  bool is_artificial(std::size_t j) const { return j >= n_ + m_; }

  // Row scaling, bounds and costs over [structurals | slacks], with every
  // structural parked at a finite bound where it has one.
  void setup_bounds() {
    const bool maximize = lp_.sense == Sense::kMaximize;
    scale_.assign(m_, 1.0);
    rhs_.assign(m_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) {
      double big = 0.0;
      for (double a : lp_.constraints[i].coefficients) {
        big = std::max(big, std::abs(a));
      }
      // rows of roundoff noise must not be blown up to unit size
      scale_[i] = big > 1e-9 ? 1.0 / big : 1.0;
      rhs_[i] = lp_.constraints[i].rhs * scale_[i];
    }

    const std::size_t base = n_ + m_;
    lo_.assign(base, 0.0);
    up_.assign(base, 0.0);
    cost2_.assign(base, 0.0);
    x_.assign(base, 0.0);
    for (std::size_t j = 0; j < n_; ++j) {
      lo_[j] = lp_.lower[j];
      up_[j] = lp_.upper[j];
      cost2_[j] = maximize ? lp_.objective[j] : -lp_.objective[j];
      if (std::isfinite(lo_[j])) {
        x_[j] = lo_[j];
      } else if (std::isfinite(up_[j])) {
        x_[j] = up_[j];
      } else {
        x_[j] = 0.0;
      }
    }
    for (std::size_t i = 0; i < m_; ++i) {
      const std::size_t s = n_ + i;
      switch (lp_.constraints[i].relation) {
        case Relation::kLessEqual:
          lo_[s] = 0.0;
          up_[s] = kInf;
          break;
        case Relation::kGreaterEqual:
          lo_[s] = -kInf;
          up_[s] = 0.0;
          break;
        case Relation::kEqual:
          lo_[s] = 0.0;
          up_[s] = 0.0;
          break;
      }
    }
  }

  void setup() {
    setup_bounds();
    const std::size_t base = n_ + m_;
    num_artificial_ = 0;

    // Slack values under the initial nonbasic assignment decide which rows
    // need an artificial.
    std::vector<double> residual(m_);
    std::vector<int> art_sign(m_, 0);
    for (std::size_t i = 0; i < m_; ++i) {
      const auto& a = lp_.constraints[i].coefficients;
      double ax = 0.0;
      for (std::size_t j = 0; j < n_; ++j) ax += a[j] * scale_[i] * x_[j];
      residual[i] = rhs_[i] - ax;
      const std::size_t s = n_ + i;
      if (residual[i] < lo_[s] - opt_.feasibility_tol) {
        art_sign[i] = -1;
      } else if (residual[i] > up_[s] + opt_.feasibility_tol) {
        art_sign[i] = 1;
      }
      if (art_sign[i] != 0) ++num_artificial_;
    }

    const std::size_t total = base + num_artificial_;
    lo_.resize(total, 0.0);
    up_.resize(total, kInf);
    cost2_.resize(total, 0.0);
    x_.resize(total, 0.0);
    tab_.assign(m_ * total, 0.0);
    basis_.assign(m_, 0);
    row_of_.assign(total, -1);
    art_row_.clear();
    art_sign_.clear();

    std::size_t next_art = base;
    for (std::size_t i = 0; i < m_; ++i) {
      double* r = row(i);
      const auto& a = lp_.constraints[i].coefficients;
      for (std::size_t j = 0; j < n_; ++j) r[j] = a[j] * scale_[i];
      r[n_ + i] = 1.0;
      const std::size_t s = n_ + i;
      if (art_sign[i] == 0) {
        basis_[i] = s;
        x_[s] = residual[i];
      } else {
        const double clamp = std::clamp(residual[i], lo_[s], up_[s]);
        x_[s] = clamp;
        const double sigma = art_sign[i];
        const std::size_t art = next_art++;
        r[art] = sigma;
        x_[art] = (residual[i] - clamp) / sigma;
        lo_[art] = 0.0;
        up_[art] = kInf;
        basis_[i] = art;
        art_row_.push_back(i);
        art_sign_.push_back(sigma);
        // normalize so the basic artificial has a unit coefficient
        for (std::size_t j = 0; j < total; ++j) r[j] *= sigma;
      }
      row_of_[basis_[i]] = static_cast<int>(i);
    }
    max_pivots_ = opt_.max_pivots > 0
                      ? opt_.max_pivots
                      : static_cast<int>(20 * (m_ + total) + 1000);
  }

  // Installs `start` without artificials. False when it does not fit or is
  // not primal feasible, leaving the caller to cold start.
  bool warm_setup(const Basis& start) {
    const std::size_t base = n_ + m_;
    if (start.basic.size() != m_ || start.at_upper.size() != base) return false;
    setup_bounds();
    num_artificial_ = 0;
    tab_.assign(m_ * base, 0.0);
    basis_.assign(m_, 0);
    row_of_.assign(base, -1);
    for (std::size_t i = 0; i < m_; ++i) {
      const std::size_t b = start.basic[i];
      if (b >= base || row_of_[b] >= 0) return false;
      basis_[i] = b;
      row_of_[b] = static_cast<int>(i);
    }
    for (std::size_t j = 0; j < base; ++j) {
      if (row_of_[j] >= 0) continue;
      if (start.at_upper[j] && std::isfinite(up_[j])) {
        x_[j] = up_[j];
      } else if (std::isfinite(lo_[j])) {
        x_[j] = lo_[j];
      } else if (std::isfinite(up_[j])) {
        x_[j] = up_[j];
      } else {
        x_[j] = 0.0;
      }
    }
    cost_.assign(base, 0.0);
    refactor();
    for (std::size_t i = 0; i < m_; ++i) {
      const std::size_t b = basis_[i];
      if (!std::isfinite(x_[b]) || x_[b] < lo_[b] - opt_.feasibility_tol ||
          x_[b] > up_[b] + opt_.feasibility_tol) {
        return false;
      }
    }
    max_pivots_ = opt_.max_pivots > 0 ? opt_.max_pivots
                                      : static_cast<int>(20 * (m_ + base) + 1000);
    return true;
  }

  void set_phase_costs(bool phase_one) {
    const std::size_t N = cols();
    cost_.assign(N, 0.0);
    if (phase_one) {
      for (std::size_t j = n_ + m_; j < N; ++j) cost_[j] = -1.0;
    } else {
      for (std::size_t j = 0; j < n_ + m_; ++j) cost_[j] = cost2_[j];
    }
    recompute_reduced_costs();
  }

  void recompute_reduced_costs() {
    const std::size_t N = cols();
    d_ = cost_;
    for (std::size_t i = 0; i < m_; ++i) {
      const double cb = cost_[basis_[i]];
      if (cb == 0.0) continue;
      const double* r = row(i);
      for (std::size_t j = 0; j < N; ++j) d_[j] -= cb * r[j];
    }
    for (std::size_t i = 0; i < m_; ++i) d_[basis_[i]] = 0.0;
  }

  bool eligible(std::size_t j, int phase) const {
    if (row_of_[j] >= 0) return false;
    if (lo_[j] == up_[j]) return false;
    if (phase == 2 && is_artificial(j)) return false;
    return true;
  }

  // +1 / -1 when j improves the objective moving in that direction, else 0.
  int direction(std::size_t j) const {
    const double dj = d_[j];
    const bool can_up = x_[j] < up_[j];
    const bool can_down = x_[j] > lo_[j];
    if (dj > opt_.optimality_tol && can_up) return 1;
    if (dj < -opt_.optimality_tol && can_down) return -1;
    return 0;
  }

  Status iterate(int phase) {
    const std::size_t N = cols();
    bool bland = false;
    int degenerate_run = 0;
    int since_refactor = 0;
    while (true) {
      // pricing
      std::size_t q = N;
      int dir = 0;
      double best = 0.0;
      for (std::size_t j = 0; j < N; ++j) {
        if (!eligible(j, phase)) continue;
        const int dj = direction(j);
        if (dj == 0) continue;
        if (bland) {
          q = j;
          dir = dj;
          break;
        }
        const double score = std::abs(d_[j]);
        if (score > best) {
          best = score;
          q = j;
          dir = dj;
        }
      }
      if (q == N) return Status::kOptimal;

      if (iterations_ >= max_pivots_) {
        throw NumericalFailure("simplex exceeded " +
                               std::to_string(max_pivots_) + " pivots");
      }

      // ratio test
      double tmin = kInf;
      for (std::size_t i = 0; i < m_; ++i) {
        const double alpha = row(i)[q];
        const double rate = -dir * alpha;
        const std::size_t b = basis_[i];
        double t = kInf;
        if (rate < -opt_.pivot_tol && std::isfinite(lo_[b])) {
          t = (x_[b] - lo_[b]) / -rate;
        } else if (rate > opt_.pivot_tol && std::isfinite(up_[b])) {
          t = (up_[b] - x_[b]) / rate;
        }
        tmin = std::min(tmin, std::max(t, 0.0));
      }
      const double range = up_[q] - lo_[q];
      const bool flip = std::isfinite(range) && range <= tmin;
      if (!flip && !std::isfinite(tmin)) return Status::kUnbounded;

      std::size_t leave_row = m_;
      double theta = range;
      if (!flip) {
        theta = tmin;
        const double slack = 1e-12 * std::max(1.0, tmin);
        double best_alpha = 0.0;
        for (std::size_t i = 0; i < m_; ++i) {
          const double alpha = row(i)[q];
          const double rate = -dir * alpha;
          const std::size_t b = basis_[i];
          double t = kInf;
          if (rate < -opt_.pivot_tol && std::isfinite(lo_[b])) {
            t = (x_[b] - lo_[b]) / -rate;
          } else if (rate > opt_.pivot_tol && std::isfinite(up_[b])) {
            t = (up_[b] - x_[b]) / rate;
          }
          t = std::max(t, 0.0);
          if (t > tmin + slack) continue;
          if (bland) {
            if (leave_row == m_ || basis_[i] < basis_[leave_row]) leave_row = i;
          } else if (std::abs(alpha) > best_alpha) {
            best_alpha = std::abs(alpha);
            leave_row = i;
          }
        }
      }

      // move
      for (std::size_t i = 0; i < m_; ++i) {
        const double alpha = row(i)[q];
        if (alpha != 0.0) x_[basis_[i]] -= dir * alpha * theta;
      }
      x_[q] += dir * theta;

      if (trace_) {
        std::fprintf(stderr,
                     "lp phase=%d iter=%d enter=%zu dir=%+d theta=%.6g "
                     "leave=%s%s\n",
                     phase, iterations_, q, dir, theta,
                     flip ? "flip"
                          : std::to_string(basis_[leave_row]).c_str(),
                     bland ? " bland" : "");
      }

      if (flip) {
        x_[q] = dir > 0 ? up_[q] : lo_[q];
      } else {
        const std::size_t leaving = basis_[leave_row];
        const double alpha = row(leave_row)[q];
        const double rate = -dir * alpha;
        x_[leaving] = rate < 0 ? lo_[leaving] : up_[leaving];
        pivot(leave_row, q);
      }
      ++iterations_;

      if (theta <= 1e-12) {
        if (++degenerate_run > opt_.bland_after) bland = true;
      } else {
        degenerate_run = 0;
        bland = false;
      }
      if (++since_refactor >= std::max<int>(opt_.refactor_every,
                                            static_cast<int>(m_))) {
        refactor();
        since_refactor = 0;
      }
    }
  }

  void pivot(std::size_t r, std::size_t q) {
    const std::size_t N = cols();
    double* pr = row(r);
    const double inv = 1.0 / pr[q];
    for (std::size_t j = 0; j < N; ++j) pr[j] *= inv;
    pr[q] = 1.0;
    for (std::size_t i = 0; i < m_; ++i) {
      if (i == r) continue;
      double* pi = row(i);
      const double f = pi[q];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < N; ++j) pi[j] -= f * pr[j];
      pi[q] = 0.0;
    }
    const double fd = d_[q];
    if (fd != 0.0) {
      for (std::size_t j = 0; j < N; ++j) d_[j] -= fd * pr[j];
    }
    d_[q] = 0.0;
    row_of_[basis_[r]] = -1;
    basis_[r] = q;
    row_of_[q] = static_cast<int>(r);
  }

  double original_entry(std::size_t i, std::size_t j) const {
    if (j < n_) return lp_.constraints[i].coefficients[j] * scale_[i];
    if (j < n_ + m_) return j - n_ == i ? 1.0 : 0.0;
    const std::size_t k = j - n_ - m_;
    return art_row_[k] == i ? art_sign_[k] : 0.0;
  }

  // Rebuilds tableau, basic values and reduced costs from the original data.
  void refactor() {
    if (m_ == 0) {
      recompute_reduced_costs();
      return;
    }
    const std::size_t N = cols();
    Eigen::MatrixXd B(m_, m_);
    for (std::size_t i = 0; i < m_; ++i) {
      for (std::size_t k = 0; k < m_; ++k) {
        B(i, k) = original_entry(i, basis_[k]);
      }
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);

    Eigen::MatrixXd M(m_, N);
    for (std::size_t i = 0; i < m_; ++i) {
      for (std::size_t j = 0; j < N; ++j) M(i, j) = original_entry(i, j);
    }
    const Eigen::MatrixXd T = lu.solve(M);
    for (std::size_t i = 0; i < m_; ++i) {
      double* r = row(i);
      for (std::size_t j = 0; j < N; ++j) r[j] = T(i, j);
      r[basis_[i]] = 1.0;
    }

    Eigen::VectorXd rhs(m_);
    for (std::size_t i = 0; i < m_; ++i) {
      double v = rhs_[i];
      for (std::size_t j = 0; j < N; ++j) {
        if (row_of_[j] >= 0) continue;
        const double a = M(i, j);
        if (a != 0.0 && x_[j] != 0.0) v -= a * x_[j];
      }
      rhs(i) = v;
    }
    const Eigen::VectorXd xb = lu.solve(rhs);
    for (std::size_t i = 0; i < m_; ++i) x_[basis_[i]] = xb(i);

    Eigen::VectorXd cb(m_);
    for (std::size_t i = 0; i < m_; ++i) cb(i) = cost_[basis_[i]];
    y_ = lu.transpose().solve(cb);
    d_ = cost_;
    for (std::size_t j = 0; j < N; ++j) {
      if (row_of_[j] >= 0) {
        d_[j] = 0.0;
        continue;
      }
      double v = cost_[j];
      for (std::size_t i = 0; i < m_; ++i) v -= y_(i) * M(i, j);
      d_[j] = v;
    }
  }

  bool certified() const {
    for (double v : x_) {
      if (!std::isfinite(v)) return false;
    }
    for (double v : d_) {
      if (!std::isfinite(v)) return false;
    }
    for (std::size_t i = 0; i < m_; ++i) {
      const std::size_t b = basis_[i];
      if (x_[b] < lo_[b] - opt_.feasibility_tol ||
          x_[b] > up_[b] + opt_.feasibility_tol) {
        return false;
      }
    }
    for (std::size_t j = 0; j < cols(); ++j) {
      if (eligible(j, 2) && direction(j) != 0) return false;
    }
    return true;
  }

  void drive_out_artificials() {
    const std::size_t N = cols();
    for (std::size_t i = 0; i < m_; ++i) {
      if (!is_artificial(basis_[i])) continue;
      const double* r = row(i);
      std::size_t q = N;
      double best = 1e-7;
      for (std::size_t j = 0; j < n_ + m_; ++j) {
        if (row_of_[j] >= 0) continue;
        if (std::abs(r[j]) > best) {
          best = std::abs(r[j]);
          q = j;
        }
      }
      if (q == N) continue;  // redundant row, the artificial stays at zero
      x_[basis_[i]] = 0.0;
      pivot(i, q);
    }
    for (std::size_t j = n_ + m_; j < N; ++j) {
      lo_[j] = 0.0;
      up_[j] = 0.0;
      if (row_of_[j] < 0) x_[j] = 0.0;
    }
    refactor();
  }

  void extract(LpSolution& out) const {
    const bool maximize = lp_.sense == Sense::kMaximize;
    const double flip = maximize ? 1.0 : -1.0;
    out.primal.assign(x_.begin(), x_.begin() + static_cast<long>(n_));
    // snap basic values sitting within tolerance of a bound
    for (std::size_t j = 0; j < n_; ++j) {
      if (std::abs(out.primal[j] - lo_[j]) <= 1e-12) out.primal[j] = lo_[j];
      if (std::abs(out.primal[j] - up_[j]) <= 1e-12) out.primal[j] = up_[j];
    }
    out.duals.assign(m_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) {
      out.duals[i] = flip * y_(i) * scale_[i];
    }
    out.reduced_costs.assign(n_, 0.0);
    for (std::size_t j = 0; j < n_; ++j) out.reduced_costs[j] = flip * d_[j];
    out.objective = evaluate(lp_.objective, out.primal);
    const std::size_t base = n_ + m_;
    const bool clean_basis = std::all_of(
        basis_.begin(), basis_.end(), [&](std::size_t b) { return b < base; });
    if (clean_basis) {
      out.basis.basic = basis_;
      out.basis.at_upper.assign(base, 0);
      for (std::size_t j = 0; j < base; ++j) {
        out.basis.at_upper[j] = row_of_[j] < 0 && lo_[j] != up_[j] &&
                                std::isfinite(up_[j]) && x_[j] == up_[j];
      }
    }
  }

  const LinearProgram& lp_;
  SolverOptions opt_;
  std::size_t m_;
  std::size_t n_;
  bool trace_;
  std::size_t num_artificial_ = 0;
  std::vector<std::size_t> art_row_;
  std::vector<double> art_sign_;
  std::vector<double> scale_, rhs_;
  std::vector<double> lo_, up_, cost2_, cost_, x_, d_;
  std::vector<double> tab_;
  std::vector<std::size_t> basis_;
  std::vector<int> row_of_;
  Eigen::VectorXd y_;
  int iterations_ = 0;
  int max_pivots_ = 0;

};

}  // namespace

LpSolution solve(const LinearProgram& lp, const SolverOptions& options) {
  lp.validate();
  Tableau tableau(lp, options);
  return tableau.run();
}

LpSolution solve(const LinearProgram& lp, const Basis& start,
                 const SolverOptions& options) {
  lp.validate();
  Tableau tableau(lp, options, start.empty() ? nullptr : &start);
  return tableau.run();
}

LpSolution solve_lexicographic(const LinearProgram& lp,
                               std::span<const double> secondary,
                               Sense secondary_sense,
                               const SolverOptions& options, double pin_tol) {
  if (secondary.size() != lp.num_variables()) {
    throw MalformedProgram("secondary objective length mismatch");
  }
  LpSolution primary = solve(lp, options);
  if (!primary.optimal()) return primary;

  double cost_scale = 1.0;
  for (double c : lp.objective) cost_scale = std::max(cost_scale, std::abs(c));
  const double face_tol = 1e-9 * cost_scale;

  LinearProgram face = lp;
  face.sense = secondary_sense;
  face.objective.assign(secondary.begin(), secondary.end());
  for (std::size_t j = 0; j < lp.num_variables(); ++j) {
    if (std::abs(primary.reduced_costs[j]) > face_tol) {
      face.lower[j] = primary.primal[j];
      face.upper[j] = primary.primal[j];
    }
  }
  for (std::size_t k = 0; k < lp.num_constraints(); ++k) {
    if (std::abs(primary.duals[k]) > face_tol) {
      face.constraints[k].relation = Relation::kEqual;
    }
  }
  LpSolution second = solve(face, primary.basis, options);

  if (!second.optimal()) {
    LinearProgram pinned = lp;
    pinned.sense = secondary_sense;
    pinned.objective.assign(secondary.begin(), secondary.end());
    const double slack = pin_tol * std::max(1.0, std::abs(primary.objective));
    if (lp.sense == Sense::kMaximize) {
      pinned.add_constraint(lp.objective, Relation::kGreaterEqual,
                            primary.objective - slack, "pin");
    } else {
      pinned.add_constraint(lp.objective, Relation::kLessEqual,
                            primary.objective + slack, "pin");
    }
    second = solve(pinned, options);
    if (second.status == Status::kInfeasible) {
      throw NumericalFailure(
          "lexicographic re-solve infeasible after pinning the objective");
    }
    if (!second.optimal()) return second;
  }

  LpSolution out = primary;
  out.primal = second.primal;
  out.objective = evaluate(lp.objective, out.primal);
  out.iterations = primary.iterations + second.iterations;
  return out;
}

DualProgram dual_of(const LinearProgram& lp) {
  lp.validate();
  if (lp.sense != Sense::kMaximize) {
    throw MalformedProgram("dual_of expects a maximization program");
  }
  const std::size_t m = lp.num_constraints();
  const std::size_t n = lp.num_variables();

  DualProgram out;
  LinearProgram& dual = out.program;
  dual.sense = Sense::kMinimize;
  out.row_variable.resize(m);
  for (std::size_t k = 0; k < m; ++k) {
    const auto& row = lp.constraints[k];
    double lo = -kInf, hi = kInf;
    if (row.relation == Relation::kLessEqual) lo = 0.0;
    if (row.relation == Relation::kGreaterEqual) hi = 0.0;
    out.row_variable[k] = dual.objective.size();
    dual.objective.push_back(row.rhs);
    dual.lower.push_back(lo);
    dual.upper.push_back(hi);
    dual.variable_labels.push_back(
        "y[" + (row.label.empty() ? std::to_string(k) : row.label) + "]");
  }
  std::vector<long> upper_var(n, -1), lower_var(n, -1);
  out.upper_variable.assign(n, DualProgram::kNone);
  out.lower_variable.assign(n, DualProgram::kNone);
  for (std::size_t j = 0; j < n; ++j) {
    const std::string name = lp.variable_labels.empty()
                                 ? std::to_string(j)
                                 : lp.variable_labels[j];
    if (std::isfinite(lp.upper[j])) {
      upper_var[j] = static_cast<long>(dual.objective.size());
      out.upper_variable[j] = dual.objective.size();
      dual.objective.push_back(lp.upper[j]);
      dual.lower.push_back(0.0);
      dual.upper.push_back(kInf);
      dual.variable_labels.push_back("ub[" + name + "]");
    }
    if (std::isfinite(lp.lower[j]) && lp.lower[j] != 0.0) {
      lower_var[j] = static_cast<long>(dual.objective.size());
      out.lower_variable[j] = dual.objective.size();
      dual.objective.push_back(-lp.lower[j]);
      dual.lower.push_back(0.0);
      dual.upper.push_back(kInf);
      dual.variable_labels.push_back("lb[" + name + "]");
    }
  }
  const std::size_t width = dual.objective.size();
  dual.constraints.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<double> coef(width, 0.0);
    for (std::size_t k = 0; k < m; ++k) {
      coef[out.row_variable[k]] = lp.constraints[k].coefficients[j];
    }
    if (upper_var[j] >= 0) coef[static_cast<std::size_t>(upper_var[j])] = 1.0;
    if (lower_var[j] >= 0) coef[static_cast<std::size_t>(lower_var[j])] = -1.0;
    Relation rel = Relation::kEqual;
    if (lp.lower[j] == 0.0) rel = Relation::kGreaterEqual;
    dual.constraints.push_back(Constraint{
        std::move(coef), rel, lp.objective[j],
        "col[" + (lp.variable_labels.empty() ? std::to_string(j)
                                             : lp.variable_labels[j]) +
            "]"});
  }
  return out;
}

namespace {

// Basis of the dual program complementary to a primal basis: a tight primal
// row makes its multiplier basic, a nonbasic primal column makes the dual
// quantity pricing its bound basic (the row slack when that bound is a zero
// lower bound).
Basis complementary_basis(const LinearProgram& lp, const Basis& primal,
                          const DualProgram& dual) {
  const std::size_t m = lp.num_constraints();
  const std::size_t n = lp.num_variables();
  const std::size_t nd = dual.program.num_variables();
  const std::size_t md = dual.program.num_constraints();
  std::vector<char> basic(n + m, 0);
  for (std::size_t b : primal.basic) basic[b] = 1;

  Basis out;
  out.at_upper.assign(nd + md, 0);
  for (std::size_t k = 0; k < m; ++k) {
    if (!basic[n + k]) out.basic.push_back(dual.row_variable[k]);
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (basic[j]) continue;
    if (primal.at_upper[j]) {
      if (dual.upper_variable[j] == DualProgram::kNone) return {};
      out.basic.push_back(dual.upper_variable[j]);
    } else if (dual.lower_variable[j] != DualProgram::kNone) {
      out.basic.push_back(dual.lower_variable[j]);
    } else {
      out.basic.push_back(nd + j);
    }
  }
  return out;
}

}  // namespace

PrimalDualSolution solve_selecting_dual(const LinearProgram& lp,
                                        std::span<const double> secondary,
                                        Sense secondary_sense,
                                        const SolverOptions& options,
                                        double pin_tol) {
  PrimalDualSolution out;
  out.program = dual_of(lp);
  LinearProgram& dual = out.program.program;
  if (secondary.size() != dual.num_variables()) {
    throw MalformedProgram("secondary objective length mismatch");
  }
  out.primal = solve(lp, options);
  if (!out.primal.optimal()) return out;
  const std::vector<double>& x = out.primal.primal;
  const std::size_t n = lp.num_variables();

  LinearProgram face = dual;
  face.sense = secondary_sense;
  face.objective.assign(secondary.begin(), secondary.end());
  auto near = [](double a, double b) {
    return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b));
  };
  for (std::size_t k = 0; k < lp.num_constraints(); ++k) {
    const Constraint& row = lp.constraints[k];
    if (row.relation == Relation::kEqual) continue;
    if (!near(evaluate(row.coefficients, x), row.rhs)) {
      const std::size_t y = out.program.row_variable[k];
      face.lower[y] = face.upper[y] = 0.0;
    }
  }
  for (std::size_t j = 0; j < n; ++j) {
    const bool at_lo = std::isfinite(lp.lower[j]) && near(x[j], lp.lower[j]);
    const bool at_up = std::isfinite(lp.upper[j]) && near(x[j], lp.upper[j]);
    if (const std::size_t u = out.program.upper_variable[j];
        u != DualProgram::kNone && !at_up) {
      face.lower[u] = face.upper[u] = 0.0;
    }
    if (const std::size_t l = out.program.lower_variable[j];
        l != DualProgram::kNone && !at_lo) {
      face.lower[l] = face.upper[l] = 0.0;
    }
    if (!at_lo && !at_up) face.constraints[j].relation = Relation::kEqual;
  }
  if (!out.primal.basis.empty()) {
    const Basis start = complementary_basis(lp, out.primal.basis, out.program);
    if (!start.empty()) {
      LpSolution sel = solve(face, start, options);
      // a face cut too loosely shows up as a duality gap
      if (sel.optimal()) {
        const double value = evaluate(dual.objective, sel.primal);
        const double gap = value - out.primal.objective;
        if (gap <= pin_tol * std::max(1.0, std::abs(out.primal.objective))) {
          out.dual = std::move(sel);
          out.dual.objective = value;
          return out;
        }
      }
    }
  }
  out.dual = solve_lexicographic(dual, secondary, secondary_sense, options);
  return out;
}

double max_violation(const LinearProgram& lp, std::span<const double> x) {
  double worst = 0.0;
  for (std::size_t j = 0; j < lp.num_variables(); ++j) {
    worst = std::max(worst, lp.lower[j] - x[j]);
    worst = std::max(worst, x[j] - lp.upper[j]);
  }
  for (const auto& row : lp.constraints) {
    double scale = 0.0;
    for (double a : row.coefficients) scale = std::max(scale, std::abs(a));
    if (scale == 0.0) scale = 1.0;
    const double ax = evaluate(row.coefficients, x);
    double v = 0.0;
    switch (row.relation) {
      case Relation::kLessEqual:
        v = ax - row.rhs;
        break;
      case Relation::kGreaterEqual:
        v = row.rhs - ax;
        break;
      case Relation::kEqual:
        v = std::abs(ax - row.rhs);
        break;
    }
    worst = std::max(worst, v / scale);
  }
  return std::max(worst, 0.0);
}

double dual_objective(const LinearProgram& lp, const LpSolution& solution) {
  const bool maximize = lp.sense == Sense::kMaximize;
  double total = 0.0;
  for (std::size_t k = 0; k < lp.num_constraints(); ++k) {
    total += lp.constraints[k].rhs * solution.duals[k];
  }
  for (std::size_t j = 0; j < lp.num_variables(); ++j) {
    const double d = solution.reduced_costs[j];
    if (d == 0.0) continue;
    // maximize: d > 0 prices the upper bound; minimize: the lower bound
    const bool uses_upper = maximize ? d > 0.0 : d < 0.0;
    const double bound = uses_upper ? lp.upper[j] : lp.lower[j];
    if (!std::isfinite(bound)) {
      if (std::abs(d) > 1e-9) return maximize ? kInf : -kInf;
      continue;
    }
    total += d * bound;
  }
  return total;
}

}  // namespace carbonmkt::lp
