#include "cli/commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <ostream>
#include <sstream>

#include "cli/manifest.hpp"
#include "qwp/align.hpp"
#include "qwp/assignment.hpp"
#include "qwp/embedding_io.hpp"
#include "qwp/error.hpp"
#include "qwp/eval.hpp"
#include "qwp/ot_solver.hpp"
#include "qwp/preprocess.hpp"
#include "qwp/quantize.hpp"
#include "qwp/random.hpp"
#include "qwp/refine.hpp"
#include "qwp/synthetic.hpp"

namespace qwp::cli {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Flag misuse that CLI11 cannot see (cross-field constraints).
struct UsageError : Error {
  using Error::Error;
};

std::string join(const std::vector<std::size_t>& values) {
  std::string text;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) text += ',';
    text += std::to_string(values[i]);
  }
  return text;
}

// Appends --key=value for every config entry not already given as a flag.
// Dotted keys (digests, timings, trace) are run metadata and are skipped.
std::vector<std::string> merge_config(std::vector<std::string> args) {
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;
  const auto values = read_key_values(path);
  for (const auto& [key, value] : values) {
    if (key == "command" || key.find('.') != std::string::npos) continue;
    const std::string flag = "--" + key;
    const bool given = std::any_of(args.begin(), args.end(), [&](const std::string& a) {
      return a == flag || a.rfind(flag + "=", 0) == 0;
    });
    if (!given) args.push_back(flag + "=" + value);
  }
  return args;
}

struct LoadedPair {
  EmbeddingMatrix src;
  EmbeddingMatrix tgt;
};

LoadedPair load_pair(const std::string& src, const std::string& tgt, std::size_t max_vocab, Manifest& manifest) {
  auto start = Clock::now();
  LoadedPair pair{load_embeddings(src, max_vocab), load_embeddings(tgt, max_vocab)};
  manifest.set("time.load", seconds_since(start));
  start = Clock::now();
  pair.src = normalize(pair.src);
  pair.tgt = normalize(pair.tgt);
  manifest.set("time.normalize", seconds_since(start));
  manifest.set("digest.src", file_digest(src));
  manifest.set("digest.tgt", file_digest(tgt));
  manifest.set("input.src_rows", static_cast<long long>(pair.src.size()));
  manifest.set("input.tgt_rows", static_cast<long long>(pair.tgt.size()));
  if (pair.src.dim() != pair.tgt.dim()) {
    throw DimensionError("source dimension " + std::to_string(pair.src.dim()) + " differs from target dimension " +
                         std::to_string(pair.tgt.dim()));
  }
  return pair;
}

OrthogonalMap load_checked_map(const std::string& path, Index dim, std::ostream& err) {
  MapLoad loaded = load_map(path);
  if (loaded.non_orthogonal) {
    err << "warning: map " << path << " is not orthogonal (defect " << loaded.orthogonality_defect << ")\n";
  }
  if (loaded.map.dim() != dim) {
    throw DimensionError("map " + path + " has dimension " + std::to_string(loaded.map.dim()) +
                         ", embeddings have " + std::to_string(dim));
  }
  return loaded.map;
}

void record(Manifest& manifest, const SinkhornConfig& s) {
  manifest.set("epsilon", s.epsilon);
  manifest.set("sinkhorn-iters", static_cast<long long>(s.max_iters));
  manifest.set("sinkhorn-tol", s.tol);
  manifest.set("tau", s.tau);
}

void record(Manifest& manifest, const AlignConfig& c) {
  manifest.set("k", static_cast<long long>(c.k));
  manifest.set("epochs", static_cast<long long>(c.epochs));
  manifest.set("iters", static_cast<long long>(c.iters_per_epoch));
  manifest.set("train-vocab", static_cast<long long>(c.train_vocab));
  manifest.set("init-vocab", static_cast<long long>(c.init_vocab));
  manifest.set("sampling", std::string(to_string(c.sampling)));
  manifest.set("lloyd", static_cast<long long>(c.lloyd_steps));
  manifest.set("ot", std::string(to_string(c.ot)));
  record(manifest, c.sinkhorn);
  manifest.set("seed", std::to_string(c.seed));
  manifest.set("fw-iters", static_cast<long long>(c.fw_iters));
  manifest.set("fw-step", std::string(to_string(c.fw_step)));
  manifest.set("lr", c.learning_rate);
  manifest.set("final-closed-form", c.final_closed_form);
  manifest.set("requantize", c.requantize_each_iter);
}

void record(Manifest& manifest, const RefineConfig& c) {
  manifest.set("epochs", static_cast<long long>(c.epochs));
  manifest.set("retrieval", std::string(to_string(c.retrieval)));
  manifest.set("csls-knn", static_cast<long long>(c.csls_knn));
  manifest.set("schedule", join(c.dict_vocab_schedule));
  manifest.set("all-pairs", !c.mutual_only);
}

void add_common(CLI::App* cmd, std::string& config, std::size_t& max_vocab, int& threads) {
  cmd->add_option("--config", config, "key=value file merged under the flags");
  cmd->add_option("--max-vocab", max_vocab, "Rows read from each embedding file")->check(CLI::PositiveNumber);
  cmd->add_option("--threads", threads, "Worker threads for retrieval")->check(CLI::PositiveNumber);
}

struct AlignArgs {
  std::string src, tgt, out, manifest, config, sampling = "kmeanspp", ot = "balanced", fw_step = "line-search";
  std::size_t max_vocab = 200000;
  int threads = 1;
  AlignConfig cfg;
};

struct RefineArgs {
  std::string src, tgt, map_in, out, manifest, config, retrieval = "csls";
  std::size_t max_vocab = 200000;
  int threads = 1;
  bool all_pairs = false;
  std::vector<std::size_t> schedule;
  RefineConfig cfg;
};

struct EvaluateArgs {
  std::string src, tgt, map, dict, manifest, config, retrieval = "nn";
  std::size_t max_vocab = 200000;
  int threads = 1;
  int cap = 10;
  int csls_knn = 10;
};

struct BenchArgs {
  std::string config;
  BenchConfig cfg;
};

int cmd_align(AlignArgs& a, std::ostream& out, std::ostream& err) {
  const auto total = Clock::now();
  a.cfg.sampling = parse_sampling(a.sampling);
  a.cfg.fw_step = parse_fw_step(a.fw_step);
  a.cfg.ot = parse_ot_mode(a.ot);
  try {
    a.cfg.validate();
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  Manifest manifest;
  manifest.set("command", std::string("align"));
  manifest.set("src", a.src);
  manifest.set("tgt", a.tgt);
  manifest.set("out", a.out);
  manifest.set("max-vocab", static_cast<long long>(a.max_vocab));
  manifest.set("threads", static_cast<long long>(a.threads));
  record(manifest, a.cfg);

  const LoadedPair pair = load_pair(a.src, a.tgt, a.max_vocab, manifest);
  auto start = Clock::now();
  const AlignResult result = align(pair.src, pair.tgt, a.cfg);
  manifest.set("time.align", seconds_since(start));
  save_map(result.map, a.out);

  const AlignTrace& trace = result.trace;
  for (std::size_t e = 0; e < trace.epoch_mean_cost.size(); ++e) {
    out << "epoch " << e + 1 << " mean cost " << format_double(trace.epoch_mean_cost[e]) << '\n';
    manifest.set("trace.epoch" + std::to_string(e + 1) + "_mean_cost", trace.epoch_mean_cost[e]);
  }
  if (trace.unconverged_solves > 0) {
    err << "warning: " << trace.unconverged_solves << " transport solves hit the iteration limit\n";
  }
  manifest.set("trace.solver_calls", static_cast<long long>(trace.solver_calls));
  manifest.set("trace.unconverged_solves", static_cast<long long>(trace.unconverged_solves));
  manifest.set("trace.max_orthogonality_defect", trace.max_orthogonality_defect);
  manifest.set("digest.out", file_digest(a.out));
  manifest.set("time.total", seconds_since(total));
  const std::string manifest_path = a.manifest.empty() ? a.out + ".manifest" : a.manifest;
  manifest.write(manifest_path);
  out << "map written to " << a.out << ", manifest " << manifest_path << '\n';
  return 0;
}

int cmd_refine(RefineArgs& a, std::ostream& out, std::ostream& err) {
  const auto total = Clock::now();
  a.cfg.retrieval = parse_retrieval(a.retrieval);
  a.cfg.mutual_only = !a.all_pairs;
  a.cfg.threads = a.threads;
  if (!a.schedule.empty()) {
    a.cfg.dict_vocab_schedule = a.schedule;
  } else {
    // Longer runs than the default schedule keep growing the window.
    while (a.cfg.dict_vocab_schedule.size() < static_cast<std::size_t>(std::max(a.cfg.epochs, 0))) {
      a.cfg.dict_vocab_schedule.push_back(a.cfg.dict_vocab_schedule.back() + 2500);
    }
  }
  try {
    a.cfg.validate();
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  Manifest manifest;
  manifest.set("command", std::string("refine"));
  manifest.set("src", a.src);
  manifest.set("tgt", a.tgt);
  manifest.set("map-in", a.map_in);
  manifest.set("out", a.out);
  manifest.set("max-vocab", static_cast<long long>(a.max_vocab));
  manifest.set("threads", static_cast<long long>(a.threads));
  record(manifest, a.cfg);

  const LoadedPair pair = load_pair(a.src, a.tgt, a.max_vocab, manifest);
  const OrthogonalMap initial = load_checked_map(a.map_in, pair.src.dim(), err);
  manifest.set("digest.map-in", file_digest(a.map_in));
  auto start = Clock::now();
  const RefineResult result = refine(pair.src.vectors(), pair.tgt.vectors(), initial, a.cfg);
  manifest.set("time.refine", seconds_since(start));
  save_map(result.map, a.out);
  for (std::size_t e = 0; e < result.dictionary_sizes.size(); ++e) {
    out << "epoch " << e + 1 << " dictionary size " << result.dictionary_sizes[e] << '\n';
    manifest.set("trace.epoch" + std::to_string(e + 1) + "_pairs", static_cast<long long>(result.dictionary_sizes[e]));
  }
  manifest.set("digest.out", file_digest(a.out));
  manifest.set("time.total", seconds_since(total));
  const std::string manifest_path = a.manifest.empty() ? a.out + ".manifest" : a.manifest;
  manifest.write(manifest_path);
  out << "map written to " << a.out << ", manifest " << manifest_path << '\n';
  return 0;
}

int cmd_evaluate(EvaluateArgs& a, std::ostream& out, std::ostream& err) {
  const auto total = Clock::now();
  EvalOptions options;
  options.retrieval.method = parse_retrieval(a.retrieval);
  options.retrieval.csls_knn = a.csls_knn;
  options.retrieval.threads = a.threads;
  options.cap = a.cap;

  Manifest manifest;
  manifest.set("command", std::string("evaluate"));
  manifest.set("src", a.src);
  manifest.set("tgt", a.tgt);
  manifest.set("map", a.map);
  manifest.set("dict", a.dict);
  manifest.set("retrieval", std::string(to_string(options.retrieval.method)));
  manifest.set("csls-knn", static_cast<long long>(a.csls_knn));
  manifest.set("cap", static_cast<long long>(a.cap));
  manifest.set("max-vocab", static_cast<long long>(a.max_vocab));
  manifest.set("threads", static_cast<long long>(a.threads));

  const LoadedPair pair = load_pair(a.src, a.tgt, a.max_vocab, manifest);
  const OrthogonalMap w = load_checked_map(a.map, pair.src.dim(), err);
  manifest.set("digest.map", file_digest(a.map));
  manifest.set("digest.dict", file_digest(a.dict));
  const LexiconLoad dictionary = load_lexicon(a.dict, pair.src, pair.tgt);
  if (dictionary.dropped_lines > 0) {
    err << "note: " << dictionary.dropped_lines << " dictionary lines reference out-of-vocabulary words\n";
  }
  auto start = Clock::now();
  const EvalReport report = evaluate(pair.src, pair.tgt, w, dictionary, options);
  manifest.set("time.evaluate", seconds_since(start));
  if (report.n_queries > 0 && report.n_skipped == report.n_queries) {
    err << "warning: every dictionary query is out of vocabulary; scores are reported as 0\n";
  }
  out << report.summary() << report.key_values();
  if (!a.manifest.empty()) {
    std::istringstream lines(report.key_values());
    std::string line;
    while (std::getline(lines, line)) {
      const auto eq = line.find('=');
      if (eq != std::string::npos) manifest.set("report." + line.substr(0, eq), line.substr(eq + 1));
    }
    manifest.set("time.total", seconds_since(total));
    manifest.write(a.manifest);
  }
  return 0;
}

int cmd_bench(const BenchArgs& a, std::ostream& out) {
  const BenchReport report = run_quantize_bench(a.cfg);
  out << "trial exact quantized random err_quantized err_random\n";
  for (std::size_t t = 0; t < report.trials.size(); ++t) {
    const BenchTrial& trial = report.trials[t];
    out << t << ' ' << format_double(trial.exact) << ' ' << format_double(trial.quantized) << ' '
        << format_double(trial.random) << ' ' << format_double(trial.quantized_error()) << ' '
        << format_double(trial.random_error()) << '\n';
  }
  out << "win_rate=" << format_double(report.win_rate) << '\n'
      << "mean_err_quantized=" << format_double(report.mean_quantized_error) << '\n'
      << "mean_err_random=" << format_double(report.mean_random_error) << '\n';
  return 0;
}

}  // namespace

double BenchTrial::quantized_error() const { return std::abs(quantized - exact); }
double BenchTrial::random_error() const { return std::abs(random - exact); }

BenchReport run_quantize_bench(const BenchConfig& config) {
  if (config.n == 0 || config.d == 0 || config.k == 0 || config.trials <= 0) {
    throw ConfigError("bench-quantize: n, d, k and trials must be positive");
  }
  if (config.k > config.n) throw ConfigError("bench-quantize: k exceeds n");
  if (config.n > static_cast<std::size_t>(kMaxAssignmentSize)) {
    throw ConfigError("bench-quantize: exact reference is capped at n = " + std::to_string(kMaxAssignmentSize));
  }
  // Weighted k x k instances go through the simplex; allow a few hundred anchors.
  const std::size_t anchor_cap = std::max<std::size_t>(kExactOtMaxEntries, 500 * 500);
  BenchReport report;
  for (int t = 0; t < config.trials; ++t) {
    const auto trial = static_cast<std::uint64_t>(t);
    Rng rng(derive_seed(config.seed, trial, 0));
    const auto [x, y] = make_mixture_pair(static_cast<Index>(config.n), static_cast<Index>(config.d), rng);

    const Vector uniform = Vector::Constant(static_cast<Index>(config.n), 1.0 / static_cast<double>(config.n));
    const CostMatrix full = cost_matrix(x, y);
    BenchTrial result;
    result.exact = transport_cost(full, exact_ot(full, uniform, uniform).matrix);

    QuantizeConfig qc;
    qc.k = config.k;
    qc.lloyd_steps = config.lloyd_steps;
    qc.seed = derive_seed(config.seed, trial, 1);
    const QuantizedDistribution qx = quantize(x, qc);
    qc.seed = derive_seed(config.seed, trial, 2);
    const QuantizedDistribution qy = quantize(y, qc);
    const CostMatrix qcost = cost_matrix(qx.centers, qy.centers);
    result.quantized = transport_cost(qcost, exact_ot(qcost, qx.weights, qy.weights, anchor_cap).matrix);

    const QuantizedDistribution rx = random_anchors(x, config.k, derive_seed(config.seed, trial, 3));
    const QuantizedDistribution ry = random_anchors(y, config.k, derive_seed(config.seed, trial, 4));
    const CostMatrix rcost = cost_matrix(rx.centers, ry.centers);
    result.random = transport_cost(rcost, exact_ot(rcost, rx.weights, ry.weights, anchor_cap).matrix);
    report.trials.push_back(result);
  }
  int wins = 0;
  for (const BenchTrial& trial : report.trials) {
    if (trial.quantized_error() < trial.random_error()) ++wins;
    report.mean_quantized_error += trial.quantized_error();
    report.mean_random_error += trial.random_error();
  }
  const auto count = static_cast<double>(report.trials.size());
  report.win_rate = wins / count;
  report.mean_quantized_error /= count;
  report.mean_random_error /= count;
  return report;
}

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Unsupervised alignment of embedding spaces with quantized optimal transport", "qwp"};
  app.require_subcommand(1);

  AlignArgs align_args;
  CLI::App* align_cmd = app.add_subcommand("align", "Estimate an orthogonal map between two embedding files");
  align_cmd->add_option("--src", align_args.src, "Source embeddings (.vec)")->required();
  align_cmd->add_option("--tgt", align_args.tgt, "Target embeddings (.vec)")->required();
  align_cmd->add_option("--out", align_args.out, "Output map path")->required();
  align_cmd->add_option("--k", align_args.cfg.k, "Anchors per side")->capture_default_str();
  align_cmd->add_option("--epochs", align_args.cfg.epochs)->capture_default_str();
  align_cmd->add_option("--iters", align_args.cfg.iters_per_epoch, "Iterations per epoch")->capture_default_str();
  align_cmd->add_option("--train-vocab", align_args.cfg.train_vocab)->capture_default_str();
  align_cmd->add_option("--init-vocab", align_args.cfg.init_vocab)->capture_default_str();
  align_cmd->add_option("--epsilon", align_args.cfg.sinkhorn.epsilon, "Entropic regularization")->capture_default_str();
  align_cmd->add_option("--sampling", align_args.sampling)->check(CLI::IsMember({"kmeanspp", "random"}))->capture_default_str();
  align_cmd->add_option("--lloyd", align_args.cfg.lloyd_steps)->check(CLI::IsMember({0, 1}))->capture_default_str();
  align_cmd->add_option("--ot", align_args.ot)->check(CLI::IsMember({"balanced", "unbalanced"}))->capture_default_str();
  align_cmd->add_option("--tau", align_args.cfg.sinkhorn.tau, "Marginal relaxation for unbalanced OT")->capture_default_str();
  align_cmd->add_option("--seed", align_args.cfg.seed)->capture_default_str();
  align_cmd->add_option("--sinkhorn-iters", align_args.cfg.sinkhorn.max_iters)->capture_default_str();
  align_cmd->add_option("--sinkhorn-tol", align_args.cfg.sinkhorn.tol)->capture_default_str();
  align_cmd->add_option("--fw-iters", align_args.cfg.fw_iters, "Frank-Wolfe iterations at initialization")->capture_default_str();
  align_cmd->add_option("--fw-step", align_args.fw_step, "Frank-Wolfe step rule")
      ->check(CLI::IsMember({"line-search", "open-loop"}))
      ->capture_default_str();
  align_cmd->add_option("--lr", align_args.cfg.learning_rate, "Initial gradient step")->capture_default_str();
  align_cmd->add_flag("--final-closed-form", align_args.cfg.final_closed_form,
                      "Closed-form map updates in the last epoch");
  align_cmd->add_flag("--requantize", align_args.cfg.requantize_each_iter, "Redraw anchors every iteration");
  align_cmd->add_option("--manifest", align_args.manifest, "Manifest path (default <out>.manifest)");
  add_common(align_cmd, align_args.config, align_args.max_vocab, align_args.threads);

  RefineArgs refine_args;
  CLI::App* refine_cmd = app.add_subcommand("refine", "Improve a map by iterated dictionary induction");
  refine_cmd->add_option("--src", refine_args.src)->required();
  refine_cmd->add_option("--tgt", refine_args.tgt)->required();
  refine_cmd->add_option("--map-in", refine_args.map_in, "Map to start from")->required();
  refine_cmd->add_option("--out", refine_args.out, "Output map path")->required();
  refine_cmd->add_option("--epochs", refine_args.cfg.epochs)->capture_default_str();
  refine_cmd->add_option("--retrieval", refine_args.retrieval)->check(CLI::IsMember({"csls", "nn"}))->capture_default_str();
  refine_cmd->add_option("--csls-knn", refine_args.cfg.csls_knn)->capture_default_str();
  refine_cmd->add_option("--schedule", refine_args.schedule, "Comma-separated dictionary windows per epoch")
      ->delimiter(',');
  refine_cmd->add_flag("--all-pairs", refine_args.all_pairs, "Keep non-mutual matches");
  refine_cmd->add_option("--manifest", refine_args.manifest, "Manifest path (default <out>.manifest)");
  add_common(refine_cmd, refine_args.config, refine_args.max_vocab, refine_args.threads);

  EvaluateArgs eval_args;
  CLI::App* eval_cmd = app.add_subcommand("evaluate", "Score a map on a bilingual dictionary");
  eval_cmd->add_option("--src", eval_args.src)->required();
  eval_cmd->add_option("--tgt", eval_args.tgt)->required();
  eval_cmd->add_option("--map", eval_args.map)->required();
  eval_cmd->add_option("--dict", eval_args.dict, "Gold dictionary, one pair per line")->required();
  eval_cmd->add_option("--retrieval", eval_args.retrieval)->check(CLI::IsMember({"nn", "csls"}))->capture_default_str();
  eval_cmd->add_option("--cap", eval_args.cap, "Rank cutoff for MRR")->check(CLI::PositiveNumber)->capture_default_str();
  eval_cmd->add_option("--csls-knn", eval_args.csls_knn)->check(CLI::PositiveNumber)->capture_default_str();
  eval_cmd->add_option("--manifest", eval_args.manifest, "Optional manifest path");
  add_common(eval_cmd, eval_args.config, eval_args.max_vocab, eval_args.threads);

  BenchArgs bench_args;
  CLI::App* bench_cmd = app.add_subcommand("bench-quantize", "Compare quantized and random-subsample OT estimates");
  bench_cmd->add_option("--n", bench_args.cfg.n)->required();
  bench_cmd->add_option("--d", bench_args.cfg.d)->required();
  bench_cmd->add_option("--k", bench_args.cfg.k)->required();
  bench_cmd->add_option("--trials", bench_args.cfg.trials)->required();
  bench_cmd->add_option("--seed", bench_args.cfg.seed)->capture_default_str();
  bench_cmd->add_option("--lloyd", bench_args.cfg.lloyd_steps)->check(CLI::IsMember({0, 1}))->capture_default_str();
  bench_cmd->add_option("--config", bench_args.config, "key=value file merged under the flags");

  std::vector<std::string> args;
  try {
    args = merge_config(raw_args);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  std::vector<const char*> argv{"qwp"};
  for (const auto& arg : args) argv.push_back(arg.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (align_cmd->parsed()) return cmd_align(align_args, out, err);
    if (refine_cmd->parsed()) return cmd_refine(refine_args, out, err);
    if (eval_cmd->parsed()) return cmd_evaluate(eval_args, out, err);
    return cmd_bench(bench_args, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace qwp::cli
