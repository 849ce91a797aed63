#pragma once

// Dense linear programming with exact dual extraction.
//
// Sign conventions (both senses):
//
//   | quantity            | meaning                                   |
//   |---------------------|-------------------------------------------|
//   | duals[k]            | d(objective) / d(rhs_k) at the optimum    |
//   | reduced_costs[j]    | objective[j] - sum_k duals[k] * A[k][j]   |
//
// For a maximization this gives duals >= 0 on `<=` rows and <= 0 on `>=`
// rows; equality-row duals are free. A variable resting at its upper bound
// has reduced cost >= 0, at its lower bound <= 0. Minimization flips both
// inequalities. Model builders convert these into the nonnegative market
// multipliers they expose.

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace carbonmkt::lp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Sense { kMaximize, kMinimize };
enum class Relation { kLessEqual, kEqual, kGreaterEqual };
enum class Status { kOptimal, kInfeasible, kUnbounded };

const char* to_string(Status status);

struct Constraint {
  std::vector<double> coefficients;
  Relation relation = Relation::kLessEqual;
  double rhs = 0.0;
  std::string label;
};

struct LinearProgram {
  Sense sense = Sense::kMaximize;
  std::vector<double> objective;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<std::string> variable_labels;
  std::vector<Constraint> constraints;

  std::size_t num_variables() const { return objective.size(); }
  std::size_t num_constraints() const { return constraints.size(); }

  /// Appends a variable and widens every existing row with a zero.
  std::size_t add_variable(std::string label, double cost, double lo,
                           double hi);
  /// Appends a row; `coefficients` must already span all variables.
  std::size_t add_constraint(std::vector<double> coefficients,
                             Relation relation, double rhs,
                             std::string label = {});

  /// Throws MalformedProgram when dimensions or bounds are inconsistent.
  void validate() const;
};

/// Simplex basis over [structurals | slacks]. Nonbasic columns rest at their
/// lower bound unless flagged in `at_upper`.
struct Basis {
  std::vector<std::size_t> basic;
  std::vector<char> at_upper;

  bool empty() const { return basic.empty(); }
};

struct LpSolution {
  Status status = Status::kInfeasible;
  std::vector<double> primal;
  std::vector<double> duals;
  std::vector<double> reduced_costs;
  double objective = 0.0;
  int iterations = 0;
  /// final basis; empty when an artificial stayed basic
  Basis basis;

  bool optimal() const { return status == Status::kOptimal; }
};

struct SolverOptions {
  double feasibility_tol = 1e-9;
  double optimality_tol = 1e-9;
  double pivot_tol = 1e-7;
  /// Consecutive degenerate pivots tolerated before switching to Bland's rule
  /// until the next pivot that makes progress.
  int bland_after = 50;
  /// 0 selects a size-dependent limit.
  int max_pivots = 0;
  /// Tableau refactorization period.
  int refactor_every = 100;
};

/// Two-phase bounded-variable primal simplex.
///
/// Throws MalformedProgram on dimension mismatch and NumericalFailure when the
/// pivot budget is exhausted.
LpSolution solve(const LinearProgram& lp, const SolverOptions& options = {});

/// As above, but phase two starts from `start` when that basis is primal
/// feasible for `lp`; otherwise falls back to a cold start.
LpSolution solve(const LinearProgram& lp, const Basis& start,
                 const SolverOptions& options = {});

/// Optimizes `secondary` over the optimal face of `lp`.
///
/// The face is carved out with complementary slackness against the primary
/// optimal dual: variables with nonzero reduced cost are fixed at their bound
/// and inequality rows with nonzero dual become equalities. Should that
/// restricted program come back infeasible (numerically marginal data), the
/// primary objective is pinned to within `pin_tol * max(1, |obj|)` instead.
///
/// The face program starts from the primary's final basis.
///
/// The returned primal is the secondary optimizer; `objective` is the primary
/// objective evaluated there. Duals and reduced costs are those of the
/// primary solve and certify optimality of the face.
LpSolution solve_lexicographic(const LinearProgram& lp,
                               std::span<const double> secondary,
                               Sense secondary_sense,
                               const SolverOptions& options = {},
                               double pin_tol = 1e-7);

/// Explicit dual of a maximization program.
///
/// Dual variables come first, one per primal row and in row order, followed
/// by one multiplier per finite upper bound and one per finite nonzero lower
/// bound. There is one dual row per primal variable. At an optimum the first
/// block equals the primal duals in the convention documented above.
struct DualProgram {
  LinearProgram program;
  /// index of the dual variable carrying primal row k
  std::vector<std::size_t> row_variable;
  /// multiplier of primal variable j's upper / lower bound, or kNone
  std::vector<std::size_t> upper_variable;
  std::vector<std::size_t> lower_variable;

  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);
};

DualProgram dual_of(const LinearProgram& lp);

struct PrimalDualSolution {
  LpSolution primal;
  /// selection solve over the dual program: its primal vector is the chosen
  /// dual, its duals and reduced costs belong to the selection objective
  LpSolution dual;
  DualProgram program;
};

/// Solves a maximization `lp`, then optimizes `secondary` (an objective over
/// the variables of dual_of(lp)) across the optimal dual set, cut out by
/// complementary slackness with the primal optimum. The selection starts
/// from the basis complementary to the primal one, and its result must close
/// the duality gap to pin_tol * max(1, |objective|). Otherwise, or when that
/// start is unusable, it falls back to solve_lexicographic on the dual.
PrimalDualSolution solve_selecting_dual(const LinearProgram& lp,
                                        std::span<const double> secondary,
                                        Sense secondary_sense,
                                        const SolverOptions& options = {},
                                        double pin_tol = 1e-9);

/// Largest absolute violation of rows and bounds at `x`.
double max_violation(const LinearProgram& lp, std::span<const double> x);

/// b'y plus bound terms, from the dual and reduced-cost vectors.
double dual_objective(const LinearProgram& lp, const LpSolution& solution);

double evaluate(std::span<const double> coefficients,
                std::span<const double> x);

}  // namespace carbonmkt::lp
