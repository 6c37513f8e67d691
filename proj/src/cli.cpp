#include "mbsc/cli.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "mbsc/kmeans.hpp"
#include "mbsc/random.hpp"
#include "mbsc/variance.hpp"

namespace mbsc {

using nlohmann::json;
namespace fs = std::filesystem;

std::string to_string(Method m) {
  switch (m) {
    case Method::mbsc: return "mbsc";
    case Method::mbsc_e: return "mbsc-e";
    case Method::exact: return "exact";
    case Method::power: return "power";
    case Method::nystrom: return "nystrom";
  }
  return "?";
}

Method parse_method(const std::string& text) {
  for (Method m : {Method::mbsc, Method::mbsc_e, Method::exact, Method::power, Method::nystrom}) {
    if (text == to_string(m)) return m;
  }
  throw ConfigError("unknown method '" + text + "' (expected mbsc|mbsc-e|exact|power|nystrom)");
}

namespace {

bool is_mbsc(Method m) { return m == Method::mbsc || m == Method::mbsc_e; }

std::optional<double> explicit_sigma(const std::string& text) {
  if (text == "median") return std::nullopt;
  double v = 0.0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || !(v > 0) || !std::isfinite(v)) {
    throw ConfigError("--sigma must be a positive number or 'median', got '" + text + "'");
  }
  return v;
}

std::string mode_name(ProbeMode m) { return m == ProbeMode::iid ? "iid" : "shuffled"; }
std::string gradient_name(GradientMode g) { return g == GradientMode::exact ? "exact" : "stochastic"; }
std::string criterion_name(StopCriterion c) { return c == StopCriterion::subspace ? "subspace" : "frobenius"; }

ProbeMode parse_probe_mode(const std::string& s) {
  if (s == "iid") return ProbeMode::iid;
  if (s == "shuffled") return ProbeMode::shuffled;
  throw ConfigError("unknown probe mode '" + s + "' (expected iid|shuffled)");
}

GradientMode parse_gradient(const std::string& s) {
  if (s == "stochastic") return GradientMode::stochastic;
  if (s == "exact") return GradientMode::exact;
  throw ConfigError("unknown gradient mode '" + s + "' (expected stochastic|exact)");
}

StopCriterion parse_criterion(const std::string& s) {
  if (s == "subspace") return StopCriterion::subspace;
  if (s == "frobenius") return StopCriterion::frobenius;
  throw ConfigError("unknown stop criterion '" + s + "' (expected subspace|frobenius)");
}

}  // namespace

void RunConfig::validate() const {
  if (data_path.empty() == gen_desc.empty()) throw ConfigError("give exactly one of --data and --gen");
  if (k < 1) throw ConfigError("--k must be at least 1");
  explicit_sigma(sigma);
  if (sigma_sample < 2) throw ConfigError("--sigma-sample must be at least 2");
  if (method == Method::power && q < 1) throw ConfigError("method power requires --q >= 1");
  if (method == Method::nystrom && m < k) throw ConfigError("method nystrom requires --m >= k");
  if (is_mbsc(method)) {
    if (!(lambda > 0) || !std::isfinite(lambda)) throw ConfigError("--lambda must be positive");
    if (!(epsilon > 0)) throw ConfigError("--epsilon must be positive");
    if (iters < 1) throw ConfigError("--iters must be at least 1");
    if (n_r < 1) throw ConfigError("--nr must be at least 1");
    if (batch < 0) throw ConfigError("--batch must be positive");
    if (p && !(*p > 0 && *p <= 1)) throw ConfigError("--p must lie in (0, 1]");
    if (p && batch > 0) throw ConfigError("--p and --batch are mutually exclusive");
    if (check_every < 1) throw ConfigError("--check-every must be at least 1");
    if (stop_tol < 0) throw ConfigError("--stop-tol must be non-negative");
  }
  if (trace_oracle && method == Method::mbsc_e) {
    throw ConfigError("--trace-oracle needs the materialized Laplacian; use method mbsc");
  }
  if (restarts < 1) throw ConfigError("--restarts must be at least 1");
  if (!degree_cache.empty()) {
    const fs::path p(degree_cache);
    if (p.is_absolute() || std::find(p.begin(), p.end(), fs::path("..")) != p.end()) {
      throw ConfigError("--degree-cache must be a relative path inside the output directory");
    }
  }
}

DerivedSeeds DerivedSeeds::from(std::uint64_t master) {
  return {stream_key(master, 1), stream_key(master, 2), stream_key(master, 3), stream_key(master, 4),
          stream_key(master, 5)};
}

// ---------------------------------------------------------------------------
// data sources

namespace {

std::map<std::string, std::string> parse_kv(const std::string& body, const std::string& desc) {
  std::map<std::string, std::string> kv;
  std::stringstream ss(body);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("generator string '" + desc + "': expected key=value, got '" + item + "'");
    kv[item.substr(0, eq)] = item.substr(eq + 1);
  }
  return kv;
}

template <class T>
T take(std::map<std::string, std::string>& kv, const std::string& key, T fallback, const std::string& desc) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  T v{};
  const std::string& s = it->second;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError("generator string '" + desc + "': bad value for " + key + ": '" + s + "'");
  }
  kv.erase(it);
  return v;
}

}  // namespace

Dataset generate_dataset(const std::string& desc, std::uint64_t default_seed) {
  const auto colon = desc.find(':');
  const std::string kind = desc.substr(0, colon);
  auto kv = parse_kv(colon == std::string::npos ? "" : desc.substr(colon + 1), desc);
  const auto seed = take<std::uint64_t>(kv, "seed", default_seed, desc);
  Dataset ds;
  try {
    if (kind == "blobs") {
      const int k = take<int>(kv, "k", 3, desc);
      const int per = take<int>(kv, "per", 100, desc);
      const int d = take<int>(kv, "d", 2, desc);
      const double spread = take<double>(kv, "spread", 0.1, desc);
      if (!kv.empty()) throw ConfigError("generator string '" + desc + "': unknown key '" + kv.begin()->first + "'");
      ds = gen_blobs(k, per, d, spread, seed);
    } else if (kind == "circles") {
      const int n = take<int>(kv, "n", 400, desc);
      const double noise = take<double>(kv, "noise", 0.05, desc);
      std::vector<double> radii = {1.0, 3.0};
      if (auto it = kv.find("radii"); it != kv.end()) {
        radii.clear();
        std::stringstream rs(it->second);
        std::string r;
        while (std::getline(rs, r, '/')) {
          double v = 0.0;
          auto [ptr, ec] = std::from_chars(r.data(), r.data() + r.size(), v);
          if (ec != std::errc() || ptr != r.data() + r.size()) {
            throw ConfigError("generator string '" + desc + "': bad radius '" + r + "'");
          }
          radii.push_back(v);
        }
        kv.erase(it);
      }
      if (!kv.empty()) throw ConfigError("generator string '" + desc + "': unknown key '" + kv.begin()->first + "'");
      ds = gen_circles(n, radii, noise, seed);
    } else {
      throw ConfigError("unknown generator '" + kind + "' (expected blobs|circles)");
    }
  } catch (const ContractViolation& e) {
    throw ConfigError(std::string("generator string '") + desc + "': " + e.what());
  }
  return ds;
}

Dataset load_source(const RunConfig& cfg) {
  if (!cfg.gen_desc.empty()) return generate_dataset(cfg.gen_desc, cfg.seed);
  return load_libsvm_file(cfg.data_path);
}

AffinityConfig resolve_affinity(const Dataset& ds, const RunConfig& cfg) {
  AffinityConfig a;
  a.mode = cfg.exponent;
  if (auto s = explicit_sigma(cfg.sigma)) {
    a.sigma = *s;
  } else {
    a.sigma = median_sigma(ds, cfg.sigma_sample, DerivedSeeds::from(cfg.seed).sigma);
  }
  return a;
}

// ---------------------------------------------------------------------------
// pipeline

namespace {

ProbeConfig probe_config(const RunConfig& cfg, Index n, std::uint64_t seed) {
  try {
    if (cfg.p) {
      ProbeConfig pc{n, *cfg.p, cfg.n_r, seed, cfg.probe_mode};
      pc.validate();
      return pc;
    }
    const Index l = cfg.batch > 0 ? cfg.batch : std::max<Index>(1, n / 10);
    return ProbeConfig::from_batch(n, l, cfg.n_r, seed, cfg.probe_mode);
  } catch (const ContractViolation& e) {
    throw ConfigError(e.what());
  }
}

MbscParams mbsc_params(const RunConfig& cfg, Index n, const DerivedSeeds& seeds) {
  MbscParams p;
  p.lambda = cfg.lambda;
  p.epsilon = cfg.epsilon;
  p.max_iters = cfg.iters;
  p.probe = probe_config(cfg, n, seeds.probes);
  p.stop_tol = cfg.stop_tol;
  p.check_every = cfg.check_every;
  p.gradient = cfg.gradient;
  p.criterion = cfg.criterion;
  p.adagrad = cfg.adagrad;
  p.init_seed = seeds.init;
  return p;
}

std::unique_ptr<StreamingLaplacian> streaming_with_cache(const Dataset& ds, const AffinityConfig& aff,
                                                         const RunConfig& cfg,
                                                         const PipelineOptions& options) {
  if (cfg.degree_cache.empty() || !options.out_dir) return build_streaming(ds, aff);
  const fs::path path = *options.out_dir / cfg.degree_cache;
  if (fs::exists(path)) {
    VectorXd degree = read_degree_cache(path.string());
    if (degree.size() != ds.size()) {
      throw ConfigError("degree cache " + path.string() + " holds " + std::to_string(degree.size()) +
                        " entries, dataset has " + std::to_string(ds.size()));
    }
    return build_streaming(ds, aff, std::move(degree));
  }
  auto provider = build_streaming(ds, aff);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_degree_cache(path.string(), provider->degree());
  return provider;
}

KmeansParams kmeans_params(const RunConfig& cfg, const DerivedSeeds& seeds) {
  KmeansParams kp;
  kp.k = static_cast<int>(cfg.k);
  kp.restarts = cfg.restarts;
  kp.seed = seeds.kmeans;
  kp.row_normalize = cfg.row_normalize;
  return kp;
}

}  // namespace

PipelineResult run_pipeline(const Dataset& ds, const RunConfig& cfg, const PipelineOptions& options) {
  cfg.validate();
  const Index n = ds.size();
  if (cfg.k >= n) throw ConfigError("--k must be smaller than the number of samples");
  if (cfg.method == Method::nystrom && cfg.m > n) throw ConfigError("--m exceeds the number of samples");
  const DerivedSeeds seeds = DerivedSeeds::from(cfg.seed);
  const KmeansParams kp = kmeans_params(cfg, seeds);

  PipelineResult out;
  const auto start = std::chrono::steady_clock::now();
  out.affinity = resolve_affinity(ds, cfg);

  switch (cfg.method) {
    case Method::mbsc:
    case Method::mbsc_e: {
      const MbscParams params = mbsc_params(cfg, n, seeds);
      std::unique_ptr<LaplacianProvider> provider;
      if (cfg.method == Method::mbsc) {
        provider = build_materialized(ds, out.affinity);
      } else {
        provider = streaming_with_cache(ds, out.affinity, cfg, options);
      }
      MbscRunOptions run;
      if (cfg.trace_oracle) {
        run.oracle_basis = exact_topk(*provider, cfg.k, {cfg.exact_max_n, ExactSolver::jacobi});
      }
      if (options.curve_stride > 0 && ds.labels) {
        run.on_checkpoint = [&](const TracePoint& tp, const MatrixXd& w) {
          if (tp.iter % static_cast<std::uint64_t>(options.curve_stride) != 0 &&
              tp.iter != static_cast<std::uint64_t>(cfg.iters))
            return;
          const auto km = kmeans(w, kp);
          out.curve.push_back({tp.iter, tp.flops, nmi(km.labels, *ds.labels)});
        };
      }
      auto result = run_mbsc(*provider, cfg.k, params, run);
      out.embedding = std::move(result.w);
      out.flops = result.flops;
      out.iterations = result.iterations;
      out.converged = result.converged;
      out.trace = std::move(result.trace);
      break;
    }
    case Method::exact: {
      auto provider = build_materialized(ds, out.affinity);
      out.embedding = exact_topk(*provider, cfg.k, {cfg.exact_max_n, ExactSolver::jacobi});
      out.flops_counted = false;
      break;
    }
    case Method::power: {
      auto provider = build_materialized(ds, out.affinity);
      auto result = power_topk(*provider, {cfg.k, cfg.q, seeds.baseline});
      out.embedding = std::move(result.w);
      const auto un = static_cast<std::uint64_t>(n);
      const auto uk = static_cast<std::uint64_t>(cfg.k);
      out.flops.gradient = power_multiply_flops(un, uk, static_cast<std::uint64_t>(cfg.q));
      out.flops.eig_svd = power_svd_flops(un, uk);
      out.flops.other = un * uk;
      out.iterations = static_cast<std::uint64_t>(cfg.q);
      break;
    }
    case Method::nystrom: {
      auto result = nystrom_embed(ds, out.affinity, {cfg.m, cfg.k, seeds.baseline});
      out.embedding = std::move(result.w);
      out.flops.other = result.flops;
      break;
    }
  }

  const auto km = kmeans(out.embedding, kp);
  out.labels = km.labels;
  if (ds.labels) out.nmi = nmi(out.labels, *ds.labels);
  out.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return out;
}

namespace {

json config_json(const RunConfig& cfg) {
  json j = {
      {"method", to_string(cfg.method)},
      {"k", cfg.k},
      {"sigma", cfg.sigma},
      {"sigma_sample", cfg.sigma_sample},
      {"exponent", to_string(cfg.exponent)},
      {"seed", cfg.seed},
      {"restarts", cfg.restarts},
      {"row_normalize", cfg.row_normalize},
  };
  if (!cfg.data_path.empty()) j["data"] = cfg.data_path;
  if (!cfg.gen_desc.empty()) j["gen"] = cfg.gen_desc;
  if (is_mbsc(cfg.method)) {
    j["lambda"] = cfg.lambda;
    j["epsilon"] = cfg.epsilon;
    j["iters"] = cfg.iters;
    j["batch"] = cfg.batch;
    j["p"] = cfg.p ? json(*cfg.p) : json(nullptr);
    j["n_r"] = cfg.n_r;
    j["probe_mode"] = mode_name(cfg.probe_mode);
    j["gradient"] = gradient_name(cfg.gradient);
    j["criterion"] = criterion_name(cfg.criterion);
    j["adagrad"] = cfg.adagrad;
    j["stop_tol"] = cfg.stop_tol;
    j["check_every"] = cfg.check_every;
    if (!cfg.degree_cache.empty()) j["degree_cache"] = cfg.degree_cache;
  }
  if (cfg.method == Method::power) j["q"] = cfg.q;
  if (cfg.method == Method::nystrom) j["m"] = cfg.m;
  if (cfg.method == Method::exact) j["exact_max_n"] = cfg.exact_max_n;
  return j;
}

json seeds_json(std::uint64_t master) {
  const auto s = DerivedSeeds::from(master);
  return {{"master", master}, {"sigma", s.sigma},   {"init", s.init},
          {"probes", s.probes}, {"kmeans", s.kmeans}, {"baseline", s.baseline}};
}

json result_json(const Dataset& ds, const RunConfig& cfg, const PipelineResult& r) {
  json j;
  j["method"] = to_string(cfg.method);
  j["dataset"] = ds.name;
  j["n"] = ds.size();
  j["d"] = ds.dim();
  j["k"] = cfg.k;
  if (cfg.method == Method::power) {
    j["m_or_q"] = cfg.q;
  } else if (cfg.method == Method::nystrom) {
    j["m_or_q"] = cfg.m;
  } else if (is_mbsc(cfg.method)) {
    j["m_or_q"] = cfg.gradient == GradientMode::exact
                      ? ds.size()
                      : probe_config(cfg, ds.size(), 0).batch_size();
  } else {
    j["m_or_q"] = nullptr;
  }
  j["nmi"] = r.nmi ? json(*r.nmi) : json(nullptr);
  if (r.flops_counted) {
    j["flops"] = r.flops.total();
    j["flops_breakdown"] = {{"gradient", r.flops.gradient}, {"projection", r.flops.projection},
                            {"retraction", r.flops.retraction}, {"eig_svd", r.flops.eig_svd},
                            {"other", r.flops.other}};
  } else {
    j["flops"] = nullptr;
  }
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  j["wall_ms"] = r.wall_ms;
  j["sigma_resolved"] = r.affinity.sigma;
  j["seed"] = cfg.seed;
  j["seeds"] = seeds_json(cfg.seed);
  j["params"] = config_json(cfg);
  return j;
}

}  // namespace

std::string summary_json(const Dataset& ds, const RunConfig& cfg, const PipelineResult& result) {
  return result_json(ds, cfg, result).dump(2);
}

// ---------------------------------------------------------------------------
// command line

namespace {

enum Exit { kOk = 0, kCheckFailed = 1, kConfig = 2, kNumeric = 3 };

bool is_numeric_failure(const std::exception& e) {
  return dynamic_cast<const DegenerateRankError*>(&e) || dynamic_cast<const StepFailure*>(&e) ||
         dynamic_cast<const IsolatedVertexError*>(&e) || dynamic_cast<const DegenerateLandmarkError*>(&e) ||
         dynamic_cast<const DuplicateCentroidError*>(&e) || dynamic_cast<const ZeroDistanceError*>(&e);
}

/// Option values kept as strings until after parsing so enum errors map to exit 2.
struct RawOptions {
  RunConfig cfg;
  std::string method = "mbsc";
  std::string exponent = "distance";
  std::string probe_mode = "iid";
  std::string gradient = "stochastic";
  std::string criterion = "subspace";
  double p = 0.0;
  bool no_adagrad = false;
  std::string out;

  RunConfig finish(const CLI::App& app) {
    RunConfig c = cfg;
    c.method = parse_method(method);
    c.exponent = parse_exponent_mode(exponent);
    c.probe_mode = parse_probe_mode(probe_mode);
    c.gradient = parse_gradient(gradient);
    c.criterion = parse_criterion(criterion);
    c.adagrad = !no_adagrad;
    if (app.count("--p") > 0) c.p = p;
    return c;
  }
};

void add_data_options(CLI::App* app, RawOptions& o) {
  app->add_option("--data", o.cfg.data_path, "LibSVM input file");
  app->add_option("--gen", o.cfg.gen_desc, "generator, e.g. blobs:k=3,per=100 or circles:n=400,radii=1/3");
  app->add_option("--k", o.cfg.k, "number of clusters / embedding dimension")->required();
  app->add_option("--sigma", o.cfg.sigma, "RBF width or 'median'")->capture_default_str();
  app->add_option("--sigma-sample", o.cfg.sigma_sample, "subsample size for the median heuristic")->capture_default_str();
  app->add_option("--exponent", o.exponent, "distance|squared-distance")->capture_default_str();
  app->add_option("--seed", o.cfg.seed, "master seed")->capture_default_str();
  app->add_option("--out", o.out, "output directory (default $MBSC_OUTPUT_DIR or ./mbsc-out)");
}

void add_solver_options(CLI::App* app, RawOptions& o) {
  app->add_option("--lambda", o.cfg.lambda, "step size")->capture_default_str();
  app->add_option("--epsilon", o.cfg.epsilon, "Adagrad epsilon")->capture_default_str();
  app->add_option("--iters", o.cfg.iters, "maximum iterations")->capture_default_str();
  app->add_option("--batch", o.cfg.batch, "columns per probe l (default n/10)");
  app->add_option("--p", o.p, "column selection probability (instead of --batch)");
  app->add_option("--nr", o.cfg.n_r, "probes per iteration N_r")->capture_default_str();
  app->add_option("--probe-mode", o.probe_mode, "iid|shuffled")->capture_default_str();
  app->add_option("--gradient", o.gradient, "stochastic|exact")->capture_default_str();
  app->add_option("--criterion", o.criterion, "subspace|frobenius")->capture_default_str();
  app->add_flag("--no-adagrad", o.no_adagrad, "plain Riemannian SGD");
  app->add_option("--stop-tol", o.cfg.stop_tol, "checkpoint change below which to stop")->capture_default_str();
  app->add_option("--check-every", o.cfg.check_every, "iterations between checkpoints")->capture_default_str();
  app->add_flag("--trace-oracle", o.cfg.trace_oracle, "record distance to the exact basis in the trace");
  app->add_option("--restarts", o.cfg.restarts, "k-means restarts")->capture_default_str();
  app->add_flag("--row-normalize", o.cfg.row_normalize, "normalize embedding rows before k-means");
  app->add_option("--exact-max-n", o.cfg.exact_max_n, "size guard for the exact solver")->capture_default_str();
  app->add_option("--degree-cache", o.cfg.degree_cache, "degree cache file inside the output directory (mbsc-e)");
}

fs::path output_dir(const std::string& flag) {
  fs::path dir;
  if (!flag.empty()) {
    dir = flag;
  } else if (const char* env = std::getenv("MBSC_OUTPUT_DIR"); env != nullptr && *env != '\0') {
    dir = env;
  } else {
    dir = "mbsc-out";
  }
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write " + path.string());
  f << text;
}

int cmd_cluster(RawOptions& raw, const CLI::App& app) {
  RunConfig cfg = raw.finish(app);
  cfg.validate();
  const fs::path dir = output_dir(raw.out);
  const Dataset ds = load_source(cfg);
  PipelineOptions options;
  options.out_dir = dir;
  const auto result = run_pipeline(ds, cfg, options);

  std::ostringstream labels;
  for (int l : result.labels) labels << l << '\n';
  write_file(dir / "labels.txt", labels.str());
  std::ostringstream trace;
  write_trace_csv(trace, result.trace);
  write_file(dir / "trace.csv", trace.str());
  const std::string summary = summary_json(ds, cfg, result);
  write_file(dir / "summary.json", summary + "\n");
  std::cout << summary << '\n';
  return kOk;
}

struct BenchCell {
  std::size_t id = 0;
  Method method = Method::mbsc;
  Index batch = 0;
  int n_r = 1;
  int q = 0;
  Index m = 0;
};

struct BenchRecord {
  bool ok = false;
  std::string error;
  PipelineResult result;
  std::uint64_t seed = 0;
  RunConfig cfg;
};

std::string fmt_double(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

int cmd_bench(RawOptions& raw, const CLI::App& app, const std::vector<std::string>& methods,
              const std::vector<Index>& batches, const std::vector<int>& nrs, const std::vector<int>& qs,
              const std::vector<Index>& ms, int reps, int jobs, int curve_stride) {
  RunConfig base = raw.finish(app);
  if (reps < 1) throw ConfigError("--reps must be at least 1");
  if (methods.empty()) throw ConfigError("--methods must name at least one method");

  std::vector<BenchCell> cells;
  for (const auto& name : methods) {
    const Method method = parse_method(name);
    if (is_mbsc(method)) {
      const std::vector<Index> ls = batches.empty() ? std::vector<Index>{base.batch} : batches;
      const std::vector<int> rs = nrs.empty() ? std::vector<int>{base.n_r} : nrs;
      for (Index l : ls)
        for (int r : rs) cells.push_back({cells.size(), method, l, r, 0, 0});
    } else if (method == Method::power) {
      if (qs.empty()) throw ConfigError("method power requires --qs");
      for (int q : qs) cells.push_back({cells.size(), method, 0, 1, q, 0});
    } else if (method == Method::nystrom) {
      if (ms.empty()) throw ConfigError("method nystrom requires --ms");
      for (Index m : ms) cells.push_back({cells.size(), method, 0, 1, 0, m});
    } else {
      cells.push_back({cells.size(), method, 0, 1, 0, 0});
    }
  }

  // Validate every cell before any compute.
  std::vector<RunConfig> cell_cfg;
  for (const auto& c : cells) {
    RunConfig cfg = base;
    cfg.method = c.method;
    cfg.batch = c.batch;
    cfg.n_r = c.n_r;
    cfg.q = c.q;
    cfg.m = c.m;
    if (c.batch > 0) cfg.p.reset();
    cfg.validate();
    cell_cfg.push_back(cfg);
  }

  const fs::path dir = output_dir(raw.out);
  const Dataset ds = load_source(base);

  // Every cell shares the per-repetition seeds, so cells differ only in the
  // method parameters.
  std::vector<std::uint64_t> rep_seeds(static_cast<std::size_t>(reps));
  for (int r = 0; r < reps; ++r) rep_seeds[static_cast<std::size_t>(r)] = stream_key(base.seed, 0xbe7c, static_cast<std::uint64_t>(r));

  const std::size_t tasks = cells.size() * static_cast<std::size_t>(reps);
  std::vector<BenchRecord> records(tasks);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t = next++; t < tasks; t = next++) {
      const std::size_t cell = t / static_cast<std::size_t>(reps);
      const std::size_t rep = t % static_cast<std::size_t>(reps);
      BenchRecord& rec = records[t];
      rec.cfg = cell_cfg[cell];
      rec.seed = rep_seeds[rep];
      rec.cfg.seed = rec.seed;
      PipelineOptions options;
      options.curve_stride = curve_stride;
      try {
        rec.result = run_pipeline(ds, rec.cfg, options);
        rec.ok = true;
      } catch (const std::exception& e) {
        rec.error = e.what();
      }
    }
  };
  const int threads = std::max(1, std::min<int>(jobs, static_cast<int>(tasks)));
  std::vector<std::thread> pool;
  for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();

  std::ostringstream csv;
  csv << "cell,method,batch,n_r,m,q,rep,seed,status,nmi,nmi_std,flops,iterations,wall_ms\n";
  std::ostringstream curves;
  curves << "cell,method,batch,n_r,rep,iter,flops,nmi\n";
  json all = json::array();
  bool any_failed = false;
  for (const auto& c : cells) {
    const RunConfig& cfg = cell_cfg[c.id];
    const std::string mstr = std::to_string(is_mbsc(c.method) ? probe_config(cfg, ds.size(), 0).batch_size() : c.m);
    const std::string prefix = std::to_string(c.id) + "," + to_string(c.method) + "," +
                               std::to_string(c.batch) + "," + std::to_string(c.n_r) + "," +
                               (c.method == Method::exact || c.method == Method::power ? "" : mstr) + "," +
                               (c.method == Method::power ? std::to_string(c.q) : "");
    std::vector<double> scores;
    for (int r = 0; r < reps; ++r) {
      const BenchRecord& rec = records[c.id * static_cast<std::size_t>(reps) + static_cast<std::size_t>(r)];
      csv << prefix << "," << r << "," << rec.seed << ",";
      json j;
      if (rec.ok) {
        const auto& res = rec.result;
        csv << "ok," << (res.nmi ? fmt_double(*res.nmi) : "") << ",,"
            << (res.flops_counted ? std::to_string(res.flops.total()) : "") << "," << res.iterations << ","
            << res.wall_ms << "\n";
        if (res.nmi) scores.push_back(*res.nmi);
        for (const auto& pt : res.curve) {
          curves << c.id << "," << to_string(c.method) << "," << c.batch << "," << c.n_r << "," << r << ","
                 << pt.iter << "," << pt.flops << "," << fmt_double(pt.nmi) << "\n";
        }
        j = result_json(ds, rec.cfg, res);
      } else {
        any_failed = true;
        csv << "error,,,,,\n";
        j = {{"status", "error"}, {"error", rec.error}, {"seed", rec.seed}, {"params", config_json(rec.cfg)}};
      }
      j["cell"] = c.id;
      j["rep"] = r;
      all.push_back(j);
    }
    double mean = 0.0, sd = 0.0;
    for (double s : scores) mean += s;
    if (!scores.empty()) mean /= static_cast<double>(scores.size());
    for (double s : scores) sd += (s - mean) * (s - mean);
    if (scores.size() > 1) sd = std::sqrt(sd / static_cast<double>(scores.size() - 1));
    csv << prefix << ",aggregate,," << (scores.size() == static_cast<std::size_t>(reps) ? "ok" : "partial") << ","
        << (scores.empty() ? "" : fmt_double(mean)) << "," << (scores.empty() ? "" : fmt_double(sd)) << ",,,\n";
  }
  write_file(dir / "bench.csv", csv.str());
  write_file(dir / "curves.csv", curves.str());
  json meta = {{"master_seed", base.seed}, {"reps", reps}, {"records", all}};
  write_file(dir / "records.json", meta.dump(2) + "\n");
  std::cout << csv.str();
  return any_failed ? kNumeric : kOk;
}

struct VarianceOptions {
  Index n = 8;
  double p = 0.25;
  int n_r = 1;
  std::uint64_t samples = 200000;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_variance_check(const VarianceOptions& o) {
  if (!(o.p > 0 && o.p <= 1)) throw ConfigError("--p must lie in (0, 1]");
  if (o.n < 2) throw ConfigError("--n must be at least 2");
  if (o.n_r < 1) throw ConfigError("--nr must be at least 1");
  if (o.samples < 10000) throw ConfigError("--samples must be at least 10000");
  const fs::path dir = output_dir(o.out);

  // Normalized Laplacian of a small Gaussian point cloud and a random unit w.
  CounterRng rng(stream_key(o.seed, 0x7a47));
  std::normal_distribution<double> gauss(0.0, 1.0);
  Dataset ds;
  ds.name = "variance-check";
  ds.points.resize(o.n, 2);
  for (Index i = 0; i < o.n; ++i)
    for (Index j = 0; j < 2; ++j) ds.points(i, j) = gauss(rng);
  const double sigma = median_sigma(ds, o.n, o.seed);
  auto l = build_materialized(ds, {sigma, ExponentMode::squared_distance});
  VectorXd w(o.n);
  for (Index i = 0; i < o.n; ++i) w(i) = gauss(rng);
  w.normalize();

  ProbeConfig probe{o.n, o.p, o.n_r, stream_key(o.seed, 0x7a48), ProbeMode::iid};
  const auto report = variance_report(*l, w, probe, o.samples);
  json j = json::parse(report.to_json());
  j["master_seed"] = o.seed;
  j["n"] = o.n;
  j["sigma"] = sigma;
  j["exponent"] = to_string(ExponentMode::squared_distance);
  write_file(dir / "variance.json", j.dump(2) + "\n");
  std::cout << j.dump(2) << '\n';
  return report.rel_error > 0.05 ? kCheckFailed : kOk;
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"Spectral clustering by stochastic optimization on the Stiefel manifold"};
  app.set_config("--config", "", "TOML configuration file (flags take precedence)");
  app.require_subcommand(1);

  RawOptions cluster_opts;
  auto* cluster = app.add_subcommand("cluster", "run one pipeline and write labels, trace and summary");
  add_data_options(cluster, cluster_opts);
  cluster->add_option("--method", cluster_opts.method, "mbsc|mbsc-e|exact|power|nystrom")->capture_default_str();
  add_solver_options(cluster, cluster_opts);
  cluster->add_option("--q", cluster_opts.cfg.q, "power iterations");
  cluster->add_option("--m", cluster_opts.cfg.m, "Nystrom landmarks");

  RawOptions bench_opts;
  std::vector<std::string> methods = {"mbsc"};
  std::vector<Index> batches, ms;
  std::vector<int> nrs, qs;
  int reps = 10;
  int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  int curve_stride = 0;
  auto* bench = app.add_subcommand("bench", "sweep methods and parameters over repetitions");
  add_data_options(bench, bench_opts);
  add_solver_options(bench, bench_opts);
  bench->add_option("--methods", methods, "methods to sweep")->delimiter(',')->capture_default_str();
  bench->add_option("--batches", batches, "values of l for mbsc")->delimiter(',');
  bench->add_option("--nrs", nrs, "values of N_r for mbsc")->delimiter(',');
  bench->add_option("--qs", qs, "values of q for power")->delimiter(',');
  bench->add_option("--ms", ms, "values of m for nystrom")->delimiter(',');
  bench->add_option("--reps", reps, "repetitions per cell")->capture_default_str();
  bench->add_option("--jobs", jobs, "worker threads")->capture_default_str();
  bench->add_option("--curve-stride", curve_stride, "iterations between NMI curve points (0: off)");

  VarianceOptions var_opts;
  auto* variance = app.add_subcommand("variance-check", "compare empirical and closed-form gradient covariance");
  variance->add_option("--n", var_opts.n, "matrix size")->capture_default_str();
  variance->add_option("--p", var_opts.p, "column selection probability")->capture_default_str();
  variance->add_option("--nr", var_opts.n_r, "probes per estimate")->capture_default_str();
  variance->add_option("--samples", var_opts.samples, "Monte Carlo replications")->capture_default_str();
  variance->add_option("--seed", var_opts.seed, "seed")->capture_default_str();
  variance->add_option("--out", var_opts.out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (cluster->parsed()) return cmd_cluster(cluster_opts, *cluster);
    if (bench->parsed()) {
      return cmd_bench(bench_opts, *bench, methods, batches, nrs, qs, ms, reps, jobs, curve_stride);
    }
    if (variance->parsed()) return cmd_variance_check(var_opts);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return is_numeric_failure(e) ? kNumeric : kConfig;
  }
  return kConfig;
}

}  // namespace mbsc
