#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mbsc/baselines.hpp"
#include "mbsc/data.hpp"
#include "mbsc/graph.hpp"
#include "mbsc/metrics.hpp"
#include "mbsc/optimizer.hpp"

namespace mbsc {

enum class Method { mbsc, mbsc_e, exact, power, nystrom };

std::string to_string(Method m);
Method parse_method(const std::string& text);

/// Everything needed to reproduce one pipeline run.
struct RunConfig {
  std::string data_path;  // LibSVM file, or
  std::string gen_desc;   // "blobs:k=3,per=100" / "circles:n=400,radii=1/3"
  Method method = Method::mbsc;
  Index k = 0;
  std::string sigma = "median";  // a positive real or "median"
  Index sigma_sample = 2000;
  ExponentMode exponent = ExponentMode::distance;
  std::uint64_t seed = 0;

  // mbsc / mbsc-e
  double lambda = 0.1;
  double epsilon = 1e-8;
  int iters = 1000;
  Index batch = 0;           // l; 0 means derive from p (or n/10)
  std::optional<double> p;   // overrides batch when set
  int n_r = 1;
  ProbeMode probe_mode = ProbeMode::iid;
  GradientMode gradient = GradientMode::stochastic;
  StopCriterion criterion = StopCriterion::subspace;
  bool adagrad = true;
  double stop_tol = 1e-4;
  int check_every = 10;
  bool trace_oracle = false;  // add distance to the exact basis to the trace

  int q = 0;    // power
  Index m = 0;  // nystrom

  int restarts = 10;
  bool row_normalize = false;
  Index exact_max_n = 5000;
  std::string degree_cache;  // file name inside the output directory

  /// Throws ConfigError on inconsistent settings; called before any compute.
  void validate() const;
};

/// Seeds derived from the master seed, one independent stream per consumer.
struct DerivedSeeds {
  std::uint64_t sigma, init, probes, kmeans, baseline;
  static DerivedSeeds from(std::uint64_t master);
};

/// Parses a generator string. Unknown keys are a ConfigError.
Dataset generate_dataset(const std::string& desc, std::uint64_t default_seed);
Dataset load_source(const RunConfig& cfg);

/// Resolved affinity for `ds` (explicit sigma or the subsampled median).
AffinityConfig resolve_affinity(const Dataset& ds, const RunConfig& cfg);

struct PipelineResult {
  std::vector<int> labels;
  std::optional<double> nmi;
  MatrixXd embedding;
  FlopLedger flops;
  bool flops_counted = true;  // false for the exact solver
  std::uint64_t iterations = 0;
  bool converged = true;
  double wall_ms = 0.0;
  AffinityConfig affinity;
  ConvergenceTrace trace;
  /// Checkpoint NMI for mbsc runs when requested: (iter, flops, nmi).
  struct CurvePoint {
    std::uint64_t iter;
    std::uint64_t flops;
    double nmi;
  };
  std::vector<CurvePoint> curve;
};

struct PipelineOptions {
  std::optional<std::filesystem::path> out_dir;  // for the degree cache
  int curve_stride = 0;                          // > 0: k-means every this many iterations
};

/// graph, solver, k-means, NMI when labels exist.
PipelineResult run_pipeline(const Dataset& ds, const RunConfig& cfg, const PipelineOptions& options = {});

/// JSON record with the full configuration, derived seeds and outcome.
std::string summary_json(const Dataset& ds, const RunConfig& cfg, const PipelineResult& result);

/// Entry point of the `mbsc` executable. Exit codes: 0 ok, 1 check failed,
/// 2 configuration or input error, 3 numeric failure.
int cli_main(int argc, char** argv);

}  // namespace mbsc
