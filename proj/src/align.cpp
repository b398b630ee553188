#include "qwp/align.hpp"

#include <cmath>
#include <string>

#include "qwp/assignment.hpp"
#include "qwp/error.hpp"
#include "qwp/procrustes.hpp"

namespace qwp {

const char* to_string(Sampling sampling) { return sampling == Sampling::random ? "random" : "kmeanspp"; }
const char* to_string(OtMode mode) { return mode == OtMode::balanced ? "balanced" : "unbalanced"; }

Sampling parse_sampling(std::string_view text) {
  if (text == "random") return Sampling::random;
  if (text == "kmeanspp") return Sampling::kmeanspp;
  throw ConfigError("unknown sampling '" + std::string(text) + "' (expected kmeanspp or random)");
}

OtMode parse_ot_mode(std::string_view text) {
  if (text == "balanced") return OtMode::balanced;
  if (text == "unbalanced") return OtMode::unbalanced;
  throw ConfigError("unknown OT mode '" + std::string(text) + "' (expected balanced or unbalanced)");
}

const char* to_string(FwStep step) { return step == FwStep::line_search ? "line-search" : "open-loop"; }

FwStep parse_fw_step(std::string_view text) {
  if (text == "line-search") return FwStep::line_search;
  if (text == "open-loop") return FwStep::open_loop;
  throw ConfigError("unknown Frank-Wolfe step '" + std::string(text) + "' (expected line-search or open-loop)");
}

void AlignConfig::validate() const {
  if (epochs < 0) throw ConfigError("align: epochs must be nonnegative");
  if (iters_per_epoch <= 0) throw ConfigError("align: iters_per_epoch must be positive");
  if (k == 0) throw ConfigError("align: k must be positive");
  if (train_vocab == 0 || init_vocab == 0) throw ConfigError("align: vocabulary sizes must be positive");
  if (k > train_vocab) throw ConfigError("align: k exceeds train_vocab");
  if (init_vocab > train_vocab) throw ConfigError("align: init_vocab exceeds train_vocab");
  if (lloyd_steps < 0) throw ConfigError("align: lloyd_steps must be nonnegative");
  if (fw_iters < 0) throw ConfigError("align: fw_iters must be nonnegative");
  if (!(learning_rate >= 0.0)) throw ConfigError("align: learning_rate must be nonnegative");
  sinkhorn.validate();
}

// --- Convex initialization --------------------------------------------------

OrthogonalMap convex_init(const Matrix& src_head, const Matrix& tgt_head, int iters, FwStep step_rule) {
  if (src_head.rows() != tgt_head.rows() || src_head.cols() != tgt_head.cols()) {
    throw DimensionError("convex_init: head matrices must have equal shapes");
  }
  if (src_head.rows() == 0) throw DimensionError("convex_init: empty head");
  if (iters < 0) throw ConfigError("convex_init: iters must be nonnegative");
  const Index n = src_head.rows();

  const Matrix kx = src_head * src_head.transpose();
  const Matrix ky = tgt_head * tgt_head.transpose();

  // P stays doubly stochastic (unit row sums); A = Kx P and B = P Ky are
  // updated alongside it because each vertex is a permutation.
  Matrix plan = Matrix::Constant(n, n, 1.0 / static_cast<double>(n));
  Matrix kx_p = kx * plan;
  Matrix p_ky = plan * ky;
  Matrix best_plan = plan;
  double best_objective = (kx_p - p_ky).squaredNorm();

  for (int s = 1; s <= iters; ++s) {
    const Matrix residual = kx_p - p_ky;
    // Gradient 2 (Kx R - R Ky) through the low-rank factors of the Gram matrices.
    const Matrix gradient = 2.0 * (src_head * (src_head.transpose() * residual) -
                                   (residual * tgt_head) * tgt_head.transpose());
    if (!gradient.allFinite()) throw NumericalError("convex_init: non-finite gradient at iteration " + std::to_string(s));
    const auto vertex = solve_assignment(gradient);

    // Residual of the vertex, Kx S - S Ky, and the direction D = S - P.
    Matrix vertex_residual(n, n);
    for (Index i = 0; i < n; ++i) vertex_residual.col(vertex[static_cast<std::size_t>(i)]) = kx.col(i);
    for (Index i = 0; i < n; ++i) vertex_residual.row(i) -= ky.row(vertex[static_cast<std::size_t>(i)]);
    double step = 2.0 / (2.0 + static_cast<double>(s));
    if (step_rule == FwStep::line_search) {
      // Quadratic along D: f(P + t D) = f(P) + t <G, D> + t^2 ||Kx D - D Ky||^2.
      double slope = -(gradient.array() * plan.array()).sum();
      for (Index i = 0; i < n; ++i) slope += gradient(i, vertex[static_cast<std::size_t>(i)]);
      const double curvature = (vertex_residual - residual).squaredNorm();
      if (!(curvature > 0.0) || slope >= 0.0) break;  // P is already optimal
      step = std::min(1.0, -slope / (2.0 * curvature));
    }
    plan *= 1.0 - step;
    kx_p *= 1.0 - step;
    p_ky *= 1.0 - step;
    for (Index i = 0; i < n; ++i) plan(i, vertex[static_cast<std::size_t>(i)]) += step;
    for (Index i = 0; i < n; ++i) {
      const Index j = vertex[static_cast<std::size_t>(i)];
      kx_p.col(j) += step * kx.col(i);  // (Kx S)(:, j) = Kx(:, i)
      p_ky.row(i) += step * ky.row(j);  // (S Ky)(i, :) = Ky(j, :)
    }

    const double objective = (kx_p - p_ky).squaredNorm();
    if (objective < best_objective) {
      best_objective = objective;
      best_plan = plan;
    }
  }

  return nearest_orthogonal(src_head.transpose() * (best_plan / static_cast<double>(n)) * tgt_head);
}

// --- Anchors and plans ------------------------------------------------------

QuantizedDistribution random_anchors(const Matrix& points, std::size_t k, std::uint64_t seed) {
  if (k == 0 || k > static_cast<std::size_t>(points.rows())) {
    throw ConfigError("random_anchors: k must be in [1, n]");
  }
  Rng rng(seed);
  QuantizedDistribution result;
  result.centers = sample_support(points, k, rng);
  result.weights = Vector::Constant(static_cast<Index>(k), 1.0 / static_cast<double>(k));
  result.support_size = k;
  return result;
}

std::uint64_t anchor_seed(const AlignConfig& config, int epoch, int iter, bool target) {
  const auto stream = config.requantize_each_iter
                          ? (static_cast<std::uint64_t>(epoch) << 32) + static_cast<std::uint64_t>(iter) + 1
                          : (static_cast<std::uint64_t>(epoch) << 32);
  return derive_seed(config.seed, stream, target ? 1 : 0);
}

namespace {

QuantizedDistribution make_anchors(const Matrix& points, const AlignConfig& config, std::uint64_t seed,
                                   AlignTrace* trace) {
  if (config.sampling == Sampling::random) {
    if (trace) ++trace->random_anchor_calls;
    return random_anchors(points, config.k, seed);
  }
  if (trace) ++trace->quantize_calls;
  QuantizeConfig qc;
  qc.k = config.k;
  qc.lloyd_steps = config.lloyd_steps;
  qc.seed = seed;
  return quantize(points, qc);
}

TransportPlan solve_plan(const CostMatrix& cost, const Vector& a, const Vector& b, const AlignConfig& config,
                         const Potentials* warm) {
  if (config.ot == OtMode::balanced) return sinkhorn(cost, a, b, config.sinkhorn, warm);
  return sinkhorn_unbalanced(cost, a, b, config.sinkhorn, warm);
}

}  // namespace

PlanEstimate quantized_wasserstein_plan(const Matrix& x, const Matrix& y, const OrthogonalMap& w,
                                        const AlignConfig& config, std::uint64_t src_seed, std::uint64_t tgt_seed) {
  if (x.rows() < static_cast<Index>(config.k) || y.rows() < static_cast<Index>(config.k)) {
    throw ConfigError("quantized_wasserstein_plan: fewer rows than anchors");
  }
  PlanEstimate estimate;
  const QuantizedDistribution mapped = make_anchors(w.apply(x), config, src_seed, nullptr);
  estimate.target = make_anchors(y, config, tgt_seed, nullptr);
  estimate.cost = cost_matrix(mapped.centers, estimate.target.centers);
  estimate.plan = solve_plan(estimate.cost, mapped.weights, estimate.target.weights, config, nullptr);
  estimate.source = mapped;
  estimate.source.centers = mapped.centers * w.matrix().transpose();
  return estimate;
}

// --- Driver -----------------------------------------------------------------

AlignResult align(const Matrix& x_all, const Matrix& y_all, const AlignConfig& config, const AlignObserver& observer) {
  config.validate();
  if (x_all.cols() != y_all.cols()) throw DimensionError("align: source and target dimensions differ");
  if (x_all.rows() < static_cast<Index>(config.train_vocab) || y_all.rows() < static_cast<Index>(config.train_vocab)) {
    throw ConfigError("align: both spaces need at least train_vocab = " + std::to_string(config.train_vocab) + " rows");
  }
  const auto train = static_cast<Index>(config.train_vocab);
  const auto head = static_cast<Index>(config.init_vocab);
  const Matrix x = x_all.topRows(train);
  const Matrix y = y_all.topRows(train);

  AlignTrace trace;
  OrthogonalMap w = convex_init(x.topRows(head), y.topRows(head), config.fw_iters, config.fw_step);
  trace.max_orthogonality_defect = w.orthogonality_defect();

  long step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const bool closed_form = config.final_closed_form && epoch + 1 == config.epochs;
    QuantizedDistribution src_anchors;
    QuantizedDistribution tgt_anchors;
    std::uint64_t src_seed = 0;
    std::uint64_t tgt_seed = 0;
    Potentials warm;
    bool have_warm = false;
    double epoch_cost = 0.0;

    for (int iter = 0; iter < config.iters_per_epoch; ++iter) {
      if (iter == 0 || config.requantize_each_iter) {
        src_seed = anchor_seed(config, epoch, iter, false);
        tgt_seed = anchor_seed(config, epoch, iter, true);
        src_anchors = make_anchors(x, config, src_seed, &trace);
        tgt_anchors = make_anchors(y, config, tgt_seed, &trace);
        have_warm = false;
      }

      const CostMatrix cost = cost_matrix(src_anchors.centers * w.matrix(), tgt_anchors.centers);
      TransportPlan plan = solve_plan(cost, src_anchors.weights, tgt_anchors.weights, config, have_warm ? &warm : nullptr);
      ++trace.solver_calls;
      if (!plan.converged) ++trace.unconverged_solves;
      warm = plan.potentials;
      have_warm = true;

      const double value = transport_cost(cost, plan.matrix);
      if (!std::isfinite(value)) {
        throw NumericalError("align: non-finite transport cost at epoch " + std::to_string(epoch) + ", iteration " +
                             std::to_string(iter));
      }
      trace.iteration_cost.push_back(value);
      epoch_cost += value;

      // Unbalanced plans carry arbitrary mass; the update expects mass 1.
      const double mass = plan.matrix.sum();
      const Matrix coupling = config.ot == OtMode::balanced ? plan.matrix : Matrix(plan.matrix / mass);
      const double learning_rate = config.learning_rate / (1.0 + static_cast<double>(step));
      OrthogonalMap next = coupling_procrustes_update(w, src_anchors.centers, tgt_anchors.centers, coupling,
                                                      learning_rate,
                                                      closed_form ? UpdateMode::closed_form : UpdateMode::gradient);
      trace.max_orthogonality_defect = std::max(trace.max_orthogonality_defect, next.orthogonality_defect());
      if (observer) observer(IterationView{epoch, iter, src_seed, tgt_seed, w, cost, plan, next});
      w = std::move(next);
      ++step;
    }
    trace.epoch_mean_cost.push_back(epoch_cost / static_cast<double>(config.iters_per_epoch));
  }
  return AlignResult{std::move(w), std::move(trace)};
}

AlignResult align(const EmbeddingMatrix& x, const EmbeddingMatrix& y, const AlignConfig& config,
                  const AlignObserver& observer) {
  return align(x.vectors(), y.vectors(), config, observer);
}

}  // namespace qwp
