#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace qwp::cli {

/// Runs one command given the arguments after the program name
/// (e.g. {"align", "--src", ...}). Returns 0 on success, 1 when a module
/// fails, 2 on flag misuse.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct BenchConfig {
  std::size_t n = 2000;
  std::size_t d = 3;
  std::size_t k = 32;
  int trials = 50;
  std::uint64_t seed = 0;
  int lloyd_steps = 0;
};

struct BenchTrial {
  double exact = 0.0;
  double quantized = 0.0;
  double random = 0.0;
  double quantized_error() const;
  double random_error() const;
};

struct BenchReport {
  std::vector<BenchTrial> trials;
  /// Fraction of trials where quantization is strictly closer to the exact cost.
  double win_rate = 0.0;
  double mean_quantized_error = 0.0;
  double mean_random_error = 0.0;
};

/// Paired Gaussian-mixture clouds per trial: exact OT cost on the full clouds
/// against k-means++ anchors and a uniform k-subsample of each cloud.
BenchReport run_quantize_bench(const BenchConfig& config);

}  // namespace qwp::cli
