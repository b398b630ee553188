#include "qwp/ot_solver.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "qwp/assignment.hpp"
#include "qwp/error.hpp"

namespace qwp {

void SinkhornConfig::validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ConfigError("sinkhorn: epsilon must be positive");
  if (!(tol > 0.0)) throw ConfigError("sinkhorn: tol must be positive");
  if (max_iters <= 0) throw ConfigError("sinkhorn: max_iters must be positive");
  if (!(tau > 0.0)) throw ConfigError("sinkhorn: tau must be positive");
}

namespace {
constexpr double kCancellationGuard = 1e-8;
}  // namespace

CostMatrix cost_matrix(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw DimensionError("cost_matrix: dimension " + std::to_string(a.cols()) + " vs " + std::to_string(b.cols()));
  }
  const Vector a_norms = a.rowwise().squaredNorm();
  const Vector b_norms = b.rowwise().squaredNorm();
  CostMatrix cost = -2.0 * (a * b.transpose());
  cost.colwise() += a_norms;
  cost.rowwise() += b_norms.transpose();
  // The expanded form loses all precision for nearly coincident rows; those
  // entries are recomputed directly (exact zeros for identical rows).
  for (Index i = 0; i < cost.rows(); ++i) {
    for (Index j = 0; j < cost.cols(); ++j) {
      if (cost(i, j) <= kCancellationGuard * (a_norms[i] + b_norms[j])) {
        cost(i, j) = (a.row(i) - b.row(j)).squaredNorm();
      }
    }
  }
  return cost;
}

double transport_cost(const CostMatrix& cost, const Matrix& plan) {
  if (cost.rows() != plan.rows() || cost.cols() != plan.cols()) throw DimensionError("transport_cost: shape mismatch");
  return (cost.array() * plan.array()).sum();
}

namespace {

void check_problem(const CostMatrix& cost, const Vector& a, const Vector& b, const char* who) {
  if (cost.rows() != a.size() || cost.cols() != b.size()) {
    throw DimensionError(std::string(who) + ": cost is " + std::to_string(cost.rows()) + "x" +
                         std::to_string(cost.cols()) + ", marginals " + std::to_string(a.size()) + " and " +
                         std::to_string(b.size()));
  }
  if (cost.size() == 0) throw DimensionError(std::string(who) + ": empty problem");
  if (!cost.allFinite()) throw NumericalError(std::string(who) + ": non-finite cost");
  if (!(a.array() > 0.0).all() || !(b.array() > 0.0).all()) {
    throw ConfigError(std::string(who) + ": marginal weights must be strictly positive");
  }
}

void fill_errors(TransportPlan& plan, const Vector& a, const Vector& b) {
  plan.src_marginal_error = (plan.matrix.rowwise().sum() - a).lpNorm<1>();
  plan.tgt_marginal_error = (plan.matrix.colwise().sum().transpose() - b).lpNorm<1>();
}

// Plain sweeps run first; after that, slow instances switch to Newton steps on
// the dual (same fixed point, quadratic convergence near it).
constexpr int kSweepsBeforeNewton = 50;
constexpr Index kNewtonMaxRows = 1000;

/// Scaling iterations on K~ = exp((f_i + g_j - C_ij) / eps). The exponent
/// applied to each marginal update is 1 for balanced OT and tau/(tau+eps) for
/// the KL-relaxed problem (tau = infinity means balanced).
class ScalingSolver {
 public:
  ScalingSolver(const CostMatrix& cost, const Vector& a, const Vector& b, double epsilon, double tau,
                const Potentials* warm)
      : cost_(cost), a_(a), b_(b), eps_(epsilon), tau_(tau),
        exponent_(std::isinf(tau) ? 1.0 : tau / (tau + epsilon)),
        log_a_(a.array().log()), log_b_(b.array().log()) {
    if (warm && warm->f.size() == a.size() && warm->g.size() == b.size() && warm->f.allFinite() &&
        warm->g.allFinite()) {
      f_ = warm->f;
      g_ = warm->g;
    } else {
      f_ = Vector::Zero(a.size());
      g_ = Vector::Zero(b.size());
    }
    log_domain_pass();
  }

  /// One u-update then one v-update; falls back to a log-domain pass if the
  /// kernel products underflow.
  void sweep() {
    if (!kv_fresh_) kv_.noalias() = kernel_ * v_;
    kv_fresh_ = false;
    if ((kv_.array() <= 0.0).any()) {
      log_domain_pass();
      return;
    }
    u_ = scaled(log_a_, kv_, f_);
    ktu_.noalias() = kernel_.transpose() * u_;
    if ((ktu_.array() <= 0.0).any()) {
      log_domain_pass();
      return;
    }
    v_ = scaled(log_b_, ktu_, g_);
    if (u_.maxCoeff() > kAbsorb || v_.maxCoeff() > kAbsorb || u_.minCoeff() < 1.0 / kAbsorb ||
        v_.minCoeff() < 1.0 / kAbsorb) {
      absorb();
    }
  }

  bool finite() const { return u_.allFinite() && v_.allFinite() && f_.allFinite() && g_.allFinite(); }

  /// L1 violation of the row marginal for the current scalings.
  double row_violation() {
    kv_.noalias() = kernel_ * v_;
    kv_fresh_ = true;
    return (u_.cwiseProduct(kv_) - a_).lpNorm<1>();
  }

  /// Log-scalings of the full (unabsorbed) problem.
  Vector log_u() const { return f_ / eps_ + u_.array().log().matrix(); }
  Vector log_v() const { return g_ / eps_ + v_.array().log().matrix(); }

  Potentials potentials() const { return {eps_ * log_u(), eps_ * log_v()}; }

  Matrix plan() const { return u_.asDiagonal() * kernel_ * v_.asDiagonal(); }

  bool newton_allowed() const { return cost_.rows() <= kNewtonMaxRows; }

  /// Damped Newton step on the dual with g eliminated by its exact update.
  /// Returns false (state untouched) when no improving step is found.
  bool newton_step() {
    Vector f = f_ + eps_ * u_.array().log().matrix();
    const bool balanced = exponent_ == 1.0;
    Vector g;
    Matrix p;
    exact_g(f, g, p);
    const Vector r = p.rowwise().sum();
    const Vector c = p.colwise().sum().transpose();
    const Vector target = balanced ? a_ : Vector(a_.array() * (-f.array() / tau_).exp());
    const Vector gradient = target - r;
    const double objective = dual(f, g, p);
    const double violation = gradient.lpNorm<1>();

    Matrix m = -exponent_ * (p * c.cwiseInverse().asDiagonal() * p.transpose());
    m.diagonal() += r;
    if (balanced) {
      // Constant shifts of f are a null direction; pin them.
      m.array() += r.mean() / static_cast<double>(r.size());
    } else {
      m.diagonal() += (eps_ / tau_) * target;
    }
    const Eigen::LDLT<Matrix> ldlt(m);
    if (ldlt.info() != Eigen::Success) return false;
    const Vector step = ldlt.solve(eps_ * gradient);
    if (!step.allFinite()) return false;
    const double slope = gradient.dot(step);
    if (!(slope > 0.0)) return false;

    for (double t = 1.0; t >= 1e-6; t *= 0.5) {
      Vector f_next = f + t * step;
      Vector g_next;
      Matrix p_next;
      exact_g(f_next, g_next, p_next);
      if (!p_next.allFinite()) continue;
      const Vector r_next = p_next.rowwise().sum();
      const Vector target_next =
          balanced ? a_ : Vector(a_.array() * (-f_next.array() / tau_).exp());
      // Near the optimum the objective gain drops below rounding; the
      // gradient norm still certifies progress there.
      if (dual(f_next, g_next, p_next) >= objective + 1e-4 * t * slope ||
          (target_next - r_next).lpNorm<1>() < violation) {
        f_ = std::move(f_next);
        g_ = std::move(g_next);
        rebuild_kernel();
        return true;
      }
    }
    return false;
  }

 private:
  static constexpr double kAbsorb = 1e50;

  // u = (a / Kv)^exponent * exp(-(1 - exponent) f / eps), written in the
  // absorbed variables.
  Vector scaled(const Vector& log_target, const Vector& kernel_product, const Vector& potential) const {
    if (exponent_ == 1.0) return (log_target.array() - kernel_product.array().log()).exp();
    return (exponent_ * (log_target.array() - kernel_product.array().log()) -
            (1.0 - exponent_) * potential.array() / eps_)
        .exp();
  }

  // g from its exact update given f, and the resulting plan.
  void exact_g(const Vector& f, Vector& g, Matrix& p) const {
    p = ((-cost_).colwise() + f) / eps_;
    g.resize(cost_.cols());
    for (Index j = 0; j < cost_.cols(); ++j) {
      const double mx = p.col(j).maxCoeff();
      const double lse = mx + std::log((p.col(j).array() - mx).exp().sum());
      g[j] = exponent_ * eps_ * (log_b_[j] - lse);
    }
    p = ((p.rowwise() + g.transpose() / eps_).array().exp()).matrix();
  }

  double dual(const Vector& f, const Vector& g, const Matrix& p) const {
    if (exponent_ == 1.0) return a_.dot(f) + b_.dot(g) - eps_ * p.sum();
    return -tau_ * a_.dot(((-f.array() / tau_).exp() - 1.0).matrix()) -
           tau_ * b_.dot(((-g.array() / tau_).exp() - 1.0).matrix()) - eps_ * p.sum();
  }

  void absorb() {
    f_ += eps_ * u_.array().log().matrix();
    g_ += eps_ * v_.array().log().matrix();
    rebuild_kernel();
  }

  // Exact log-sum-exp updates of both potentials; leaves every row and column
  // of the rebuilt kernel with at least one representable entry.
  void log_domain_pass() {
    if (u_.size() == f_.size() && v_.size() == g_.size()) {
      f_ += eps_ * u_.array().log().matrix();
      g_ += eps_ * v_.array().log().matrix();
    }
    const Index rows = cost_.rows();
    const Index cols = cost_.cols();
    for (Index i = 0; i < rows; ++i) {
      const auto z = ((g_.transpose().array() - cost_.row(i).array()) / eps_).eval();
      const double mx = z.maxCoeff();
      const double lse = mx + std::log((z - mx).exp().sum());
      f_[i] = exponent_ * eps_ * (log_a_[i] - lse);
    }
    for (Index j = 0; j < cols; ++j) {
      const auto z = ((f_.array() - cost_.col(j).array()) / eps_).eval();
      const double mx = z.maxCoeff();
      const double lse = mx + std::log((z - mx).exp().sum());
      g_[j] = exponent_ * eps_ * (log_b_[j] - lse);
    }
    rebuild_kernel();
  }

  void rebuild_kernel() {
    kernel_ = ((-cost_).colwise() + f_).rowwise() + g_.transpose();
    kernel_ = (kernel_.array() / eps_).exp().matrix();
    u_ = Vector::Ones(cost_.rows());
    v_ = Vector::Ones(cost_.cols());
    kv_fresh_ = false;
  }

  const CostMatrix& cost_;
  const Vector& a_;
  const Vector& b_;
  double eps_;
  double tau_;
  double exponent_;
  Vector log_a_;
  Vector log_b_;
  Vector f_;
  Vector g_;
  Vector u_;
  Vector v_;
  Vector kv_;
  Vector ktu_;
  Matrix kernel_;
  bool kv_fresh_ = false;
};

}  // namespace

TransportPlan sinkhorn(const CostMatrix& cost, const Vector& a, const Vector& b, const SinkhornConfig& config,
                       const Potentials* warm_start) {
  config.validate();
  check_problem(cost, a, b, "sinkhorn");
  if (std::abs(a.sum() - 1.0) > 1e-9 || std::abs(b.sum() - 1.0) > 1e-9) {
    throw ConfigError("sinkhorn: marginals must each sum to 1");
  }

  ScalingSolver solver(cost, a, b, config.epsilon, std::numeric_limits<double>::infinity(), warm_start);
  TransportPlan plan;
  int iter = 0;
  for (; iter < config.max_iters; ++iter) {
    if (solver.row_violation() <= config.tol) {
      plan.converged = true;
      break;
    }
    if (iter < kSweepsBeforeNewton || !solver.newton_allowed() || !solver.newton_step()) solver.sweep();
    if (!solver.finite()) throw NumericalError("sinkhorn: non-finite scaling at iteration " + std::to_string(iter));
  }
  if (!plan.converged && solver.row_violation() <= config.tol) plan.converged = true;
  plan.iterations = iter;
  plan.matrix = solver.plan();
  if (!plan.matrix.allFinite()) throw NumericalError("sinkhorn: non-finite plan at iteration " + std::to_string(iter));
  plan.potentials = solver.potentials();
  fill_errors(plan, a, b);
  return plan;
}

TransportPlan sinkhorn_unbalanced(const CostMatrix& cost, const Vector& a, const Vector& b,
                                  const SinkhornConfig& config, const Potentials* warm_start) {
  config.validate();
  check_problem(cost, a, b, "sinkhorn_unbalanced");

  ScalingSolver solver(cost, a, b, config.epsilon, config.tau, warm_start);
  TransportPlan plan;
  int iter = 0;
  while (iter < config.max_iters) {
    if (iter >= kSweepsBeforeNewton && solver.newton_allowed()) solver.newton_step();
    // Convergence is judged on the change made by a plain sweep.
    const Vector previous_u = solver.log_u();
    const Vector previous_v = solver.log_v();
    solver.sweep();
    ++iter;
    if (!solver.finite()) {
      throw NumericalError("sinkhorn_unbalanced: non-finite scaling at iteration " + std::to_string(iter));
    }
    const double change = std::max((solver.log_u() - previous_u).lpNorm<Eigen::Infinity>(),
                                   (solver.log_v() - previous_v).lpNorm<Eigen::Infinity>());
    if (change <= config.tol) {
      plan.converged = true;
      break;
    }
  }
  plan.iterations = iter;
  plan.matrix = solver.plan();
  if (!plan.matrix.allFinite()) {
    throw NumericalError("sinkhorn_unbalanced: non-finite plan at iteration " + std::to_string(iter));
  }
  plan.potentials = solver.potentials();
  fill_errors(plan, a, b);
  return plan;
}

// --- Exact OT ---------------------------------------------------------------

namespace detail {

namespace {

struct Cell {
  Index row;
  Index col;
  double flow;
};

}  // namespace

Matrix transportation_simplex(const CostMatrix& cost, const Vector& a, const Vector& b) {
  const Index rows = cost.rows();
  const Index cols = cost.cols();
  const Index nodes = rows + cols;

  // Northwest-corner start: a staircase spanning tree with rows + cols - 1 cells.
  std::vector<Cell> basis;
  basis.reserve(static_cast<std::size_t>(nodes - 1));
  {
    Vector supply = a;
    Vector demand = b;
    Index i = 0;
    Index j = 0;
    while (true) {
      const double x = std::min(supply[i], demand[j]);
      basis.push_back({i, j, x});
      supply[i] -= x;
      demand[j] -= x;
      if (i == rows - 1 && j == cols - 1) break;
      if (i == rows - 1) {
        ++j;
      } else if (j == cols - 1) {
        ++i;
      } else if (supply[i] < demand[j]) {
        ++i;
      } else {
        ++j;
      }
    }
  }

  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> is_basic =
      Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(rows, cols, false);
  for (const auto& cell : basis) is_basic(cell.row, cell.col) = true;

  const double scale = std::max(1.0, cost.cwiseAbs().maxCoeff());
  const double optimality_tol = 1e-12 * scale;
  const long max_pivots = 50L * rows * cols + 1000;
  int degenerate_run = 0;

  std::vector<std::vector<std::size_t>> adjacency(static_cast<std::size_t>(nodes));
  std::vector<double> potential(static_cast<std::size_t>(nodes));
  std::vector<char> visited(static_cast<std::size_t>(nodes));
  std::vector<std::size_t> parent_edge(static_cast<std::size_t>(nodes));
  std::vector<Index> queue;
  queue.reserve(static_cast<std::size_t>(nodes));

  // Node ids: rows are 0..rows-1, columns are rows..rows+cols-1.
  auto other_end = [rows](const Cell& cell, Index node) { return node < rows ? rows + cell.col : cell.row; };

  for (long pivot = 0; pivot < max_pivots; ++pivot) {
    for (auto& list : adjacency) list.clear();
    for (std::size_t e = 0; e < basis.size(); ++e) {
      adjacency[static_cast<std::size_t>(basis[e].row)].push_back(e);
      adjacency[static_cast<std::size_t>(rows + basis[e].col)].push_back(e);
    }

    // Potentials u_i + v_j = C_ij on basic cells, u_0 = 0.
    std::fill(visited.begin(), visited.end(), 0);
    queue.clear();
    queue.push_back(0);
    visited[0] = 1;
    potential[0] = 0.0;
    for (std::size_t head = 0; head < queue.size(); ++head) {
      const Index node = queue[head];
      for (std::size_t e : adjacency[static_cast<std::size_t>(node)]) {
        const Index next = other_end(basis[e], node);
        if (visited[static_cast<std::size_t>(next)]) continue;
        visited[static_cast<std::size_t>(next)] = 1;
        potential[static_cast<std::size_t>(next)] =
            cost(basis[e].row, basis[e].col) - potential[static_cast<std::size_t>(node)];
        queue.push_back(next);
      }
    }

    // Entering cell: most negative reduced cost, or the first negative one
    // (Bland) during long degenerate runs.
    const bool bland = degenerate_run > nodes;
    Index enter_row = -1;
    Index enter_col = -1;
    double best = -optimality_tol;
    for (Index i = 0; i < rows && !(bland && enter_row >= 0); ++i) {
      for (Index j = 0; j < cols; ++j) {
        if (is_basic(i, j)) continue;
        const double reduced = cost(i, j) - potential[static_cast<std::size_t>(i)] -
                               potential[static_cast<std::size_t>(rows + j)];
        if (reduced < best) {
          best = reduced;
          enter_row = i;
          enter_col = j;
          if (bland) break;
        }
      }
    }
    if (enter_row < 0) {
      Matrix plan = Matrix::Zero(rows, cols);
      for (const auto& cell : basis) plan(cell.row, cell.col) = std::max(0.0, cell.flow);
      return plan;
    }

    // Tree path from the entering row to the entering column.
    std::fill(visited.begin(), visited.end(), 0);
    queue.clear();
    queue.push_back(enter_row);
    visited[static_cast<std::size_t>(enter_row)] = 1;
    const Index target = rows + enter_col;
    for (std::size_t head = 0; head < queue.size() && !visited[static_cast<std::size_t>(target)]; ++head) {
      const Index node = queue[head];
      for (std::size_t e : adjacency[static_cast<std::size_t>(node)]) {
        const Index next = other_end(basis[e], node);
        if (visited[static_cast<std::size_t>(next)]) continue;
        visited[static_cast<std::size_t>(next)] = 1;
        parent_edge[static_cast<std::size_t>(next)] = e;
        queue.push_back(next);
      }
    }

    // Walking back from the column, edges alternate -, +, -, ...
    std::vector<std::size_t> minus_edges;
    std::vector<std::size_t> plus_edges;
    Index node = target;
    bool minus = true;
    while (node != enter_row) {
      const std::size_t e = parent_edge[static_cast<std::size_t>(node)];
      (minus ? minus_edges : plus_edges).push_back(e);
      minus = !minus;
      node = other_end(basis[e], node);
    }

    std::size_t leaving = minus_edges.front();
    for (std::size_t e : minus_edges) {
      if (basis[e].flow < basis[leaving].flow) leaving = e;
    }
    const double theta = std::max(0.0, basis[leaving].flow);
    degenerate_run = theta > 0.0 ? 0 : degenerate_run + 1;

    for (std::size_t e : minus_edges) basis[e].flow -= theta;
    for (std::size_t e : plus_edges) basis[e].flow += theta;
    is_basic(basis[leaving].row, basis[leaving].col) = false;
    basis[leaving] = {enter_row, enter_col, theta};
    is_basic(enter_row, enter_col) = true;
  }
  throw NumericalError("exact_ot: transportation simplex exceeded its pivot budget");
}

}  // namespace detail

TransportPlan exact_ot(const CostMatrix& cost, const Vector& a, const Vector& b, std::size_t max_entries) {
  check_problem(cost, a, b, "exact_ot");
  if (std::abs(a.sum() - b.sum()) > 1e-9) throw ConfigError("exact_ot: marginals carry different mass");

  TransportPlan plan;
  const Index n = cost.rows();
  const double uniform = 1.0 / static_cast<double>(n);
  const bool assignment_case = cost.cols() == n && (a.array() - uniform).abs().maxCoeff() <= 1e-12 &&
                               (b.array() - uniform).abs().maxCoeff() <= 1e-12;
  if (assignment_case) {
    const auto col_for_row = solve_assignment(cost);
    plan.matrix = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i) plan.matrix(i, col_for_row[static_cast<std::size_t>(i)]) = uniform;
  } else {
    const auto entries = static_cast<std::size_t>(cost.rows()) * static_cast<std::size_t>(cost.cols());
    if (entries > max_entries) {
      throw ConfigError("exact_ot: " + std::to_string(entries) + " cost entries exceed the cap of " +
                        std::to_string(max_entries));
    }
    plan.matrix = detail::transportation_simplex(cost, a, b);
  }
  plan.converged = true;
  fill_errors(plan, a, b);
  return plan;
}

}  // namespace qwp
