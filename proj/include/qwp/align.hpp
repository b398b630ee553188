#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

#include "qwp/embedding_io.hpp"
#include "qwp/orthogonal_map.hpp"
#include "qwp/ot_solver.hpp"
#include "qwp/quantize.hpp"
#include "qwp/types.hpp"

namespace qwp {

enum class Sampling { random, kmeanspp };
enum class OtMode { balanced, unbalanced };
/// Frank-Wolfe step: exact minimizing step along the vertex direction, or the
/// open-loop schedule 2 / (2 + s).
enum class FwStep { line_search, open_loop };

const char* to_string(Sampling sampling);
const char* to_string(OtMode mode);
Sampling parse_sampling(std::string_view text);
OtMode parse_ot_mode(std::string_view text);
const char* to_string(FwStep step);
FwStep parse_fw_step(std::string_view text);

struct AlignConfig {
  int epochs = 5;
  int iters_per_epoch = 200;
  std::size_t k = 2000;
  std::size_t train_vocab = 20000;
  std::size_t init_vocab = 2500;
  Sampling sampling = Sampling::kmeanspp;
  int lloyd_steps = 0;
  OtMode ot = OtMode::balanced;
  SinkhornConfig sinkhorn;
  std::uint64_t seed = 0;
  /// Frank-Wolfe iterations for the convex initialization.
  int fw_iters = 50;
  FwStep fw_step = FwStep::line_search;
  /// Gradient step lr0 / (1 + t), t counting iterations across epochs. The
  /// plan has mass 1, so lr0 is on the scale of a per-word rate times the batch.
  double learning_rate = 500.0;
  /// Replace the gradient steps of the last epoch by closed-form updates.
  bool final_closed_form = false;
  /// Draw fresh anchors every iteration instead of once per epoch.
  bool requantize_each_iter = false;

  void validate() const;
};

/// Frank-Wolfe on min ||Kx P - P Ky||_F^2 over doubly stochastic P (Kx, Ky
/// Gram matrices of the head rows), then the closed-form map of the coupling.
/// Linear minimization steps are exact assignments. Returns the best iterate.
OrthogonalMap convex_init(const Matrix& src_head, const Matrix& tgt_head, int iters,
                          FwStep step_rule = FwStep::line_search);

/// Uniform k-subsample with weights 1/k (the random-coreset baseline).
QuantizedDistribution random_anchors(const Matrix& points, std::size_t k, std::uint64_t seed);

struct PlanEstimate {
  TransportPlan plan;
  /// Source anchors in source coordinates and target anchors.
  QuantizedDistribution source;
  QuantizedDistribution target;
  CostMatrix cost;
};

/// Computed from scratch: anchors of X W (seeded by src_seed) and of Y
/// (tgt_seed), their cost matrix and the configured transport plan.
PlanEstimate quantized_wasserstein_plan(const Matrix& x, const Matrix& y, const OrthogonalMap& w,
                                        const AlignConfig& config, std::uint64_t src_seed, std::uint64_t tgt_seed);

/// Seeds used for the anchors of a given epoch (and iteration, when anchors
/// are redrawn every iteration).
std::uint64_t anchor_seed(const AlignConfig& config, int epoch, int iter, bool target);

struct IterationView {
  int epoch = 0;
  int iter = 0;
  std::uint64_t src_seed = 0;
  std::uint64_t tgt_seed = 0;
  const OrthogonalMap& map_before;
  const CostMatrix& cost;
  const TransportPlan& plan;
  const OrthogonalMap& map_after;
};

struct AlignTrace {
  std::vector<double> iteration_cost;
  std::vector<double> epoch_mean_cost;
  int quantize_calls = 0;
  int random_anchor_calls = 0;
  int solver_calls = 0;
  int unconverged_solves = 0;
  double max_orthogonality_defect = 0.0;
};

struct AlignResult {
  OrthogonalMap map;
  AlignTrace trace;
};

using AlignObserver = std::function<void(const IterationView&)>;

/// Convex initialization on the first init_vocab rows, then epochs x iterations
/// of (anchor plan, map update). Anchors are drawn once per epoch in source
/// coordinates and mapped by the current W. Updates are projected gradient
/// steps (closed form in the last epoch if final_closed_form is set).
AlignResult align(const Matrix& x, const Matrix& y, const AlignConfig& config, const AlignObserver& observer = {});
AlignResult align(const EmbeddingMatrix& x, const EmbeddingMatrix& y, const AlignConfig& config,
                  const AlignObserver& observer = {});

}  // namespace qwp
