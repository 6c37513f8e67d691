#include "mbsc/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <utility>

#include "mbsc/random.hpp"

namespace mbsc {

namespace {

bool parse_double(std::string_view tok, double& out) {
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  const auto* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

bool parse_index(std::string_view tok, long long& out) {
  const auto* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, out);
  return ec == std::errc() && ptr == end;
}

struct SparseRow {
  double label;
  std::vector<std::pair<long long, double>> entries;
};

}  // namespace

Dataset parse_libsvm(std::istream& in, std::string name) {
  std::vector<SparseRow> rows;
  long long max_index = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view(line);
    if (auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);

    std::vector<std::string_view> tokens;
    std::size_t pos = 0;
    while (pos < view.size()) {
      while (pos < view.size() && std::isspace(static_cast<unsigned char>(view[pos]))) ++pos;
      std::size_t start = pos;
      while (pos < view.size() && !std::isspace(static_cast<unsigned char>(view[pos]))) ++pos;
      if (pos > start) tokens.push_back(view.substr(start, pos - start));
    }
    if (tokens.empty()) continue;

    SparseRow row;
    if (!parse_double(tokens[0], row.label)) {
      throw ParseError(line_no, "bad label '" + std::string(tokens[0]) + "'");
    }
    long long prev = 0;
    for (std::size_t t = 1; t < tokens.size(); ++t) {
      const auto colon = tokens[t].find(':');
      if (colon == std::string_view::npos) {
        throw ParseError(line_no, "expected index:value, got '" + std::string(tokens[t]) + "'");
      }
      long long index = 0;
      double value = 0;
      if (!parse_index(tokens[t].substr(0, colon), index) || index < 1) {
        throw ParseError(line_no, "bad feature index in '" + std::string(tokens[t]) + "'");
      }
      if (!parse_double(tokens[t].substr(colon + 1), value)) {
        throw ParseError(line_no, "bad feature value in '" + std::string(tokens[t]) + "'");
      }
      if (index <= prev) {
        throw ParseError(line_no, "feature indices must be strictly increasing");
      }
      prev = index;
      row.entries.emplace_back(index, value);
    }
    max_index = std::max(max_index, prev);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw EmptyDatasetError("libsvm input contains no samples");

  Dataset ds;
  ds.name = std::move(name);
  ds.points = MatrixXd::Zero(static_cast<Index>(rows.size()), static_cast<Index>(max_index));
  std::vector<int> labels(rows.size());
  std::map<double, int> ids;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto [it, inserted] = ids.try_emplace(rows[i].label, static_cast<int>(ids.size()));
    labels[i] = it->second;
    for (const auto& [index, value] : rows[i].entries) {
      ds.points(static_cast<Index>(i), static_cast<Index>(index - 1)) = value;
    }
  }
  ds.labels = std::move(labels);
  return ds;
}

Dataset parse_libsvm_string(std::string_view text, std::string name) {
  std::istringstream in{std::string(text)};
  return parse_libsvm(in, std::move(name));
}

Dataset load_libsvm_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset file '" + path + "'");
  auto slash = path.find_last_of('/');
  Dataset ds = parse_libsvm(in, slash == std::string::npos ? path : path.substr(slash + 1));
  if (auto entry = find_registry_entry(ds.name)) ds.sigma_hint = entry->sigma;
  return ds;
}

void write_libsvm(std::ostream& out, const Dataset& ds) {
  char buf[64];
  for (Index i = 0; i < ds.size(); ++i) {
    out << (ds.labels ? (*ds.labels)[static_cast<std::size_t>(i)] : 0);
    for (Index j = 0; j < ds.dim(); ++j) {
      const double v = ds.points(i, j);
      if (v == 0.0) continue;
      auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
      out << ' ' << (j + 1) << ':' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
    }
    out << '\n';
  }
}

std::string serialize_libsvm(const Dataset& ds) {
  std::ostringstream out;
  write_libsvm(out, ds);
  return out.str();
}

Dataset gen_blobs(int k, int per_cluster, int d, double spread, std::uint64_t seed) {
  if (k < 1 || per_cluster < 1 || d < 1 || !(spread > 0)) {
    throw ContractViolation("gen_blobs: counts and spread must be positive");
  }
  CounterRng rng(stream_key(seed, 0xb10b));
  std::normal_distribution<double> gauss(0.0, 1.0);

  // Centers: rejection sampling in a cube until all pairs are >= 10*spread apart.
  const double min_sep = 10.0 * spread;
  const double side = 2.0 * min_sep * std::max(1.0, std::pow(double(k), 1.0 / d)) + min_sep;
  std::vector<VectorXd> centers;
  while (static_cast<int>(centers.size()) < k) {
    VectorXd c(d);
    for (int f = 0; f < d; ++f) c(f) = side * rng.uniform();
    bool ok = std::all_of(centers.begin(), centers.end(),
                          [&](const VectorXd& other) { return (other - c).norm() >= min_sep; });
    if (ok) centers.push_back(std::move(c));
  }

  Dataset ds;
  ds.name = "blobs";
  ds.points.resize(Index(k) * per_cluster, d);
  std::vector<int> labels(static_cast<std::size_t>(k) * per_cluster);
  Index row = 0;
  for (int c = 0; c < k; ++c) {
    for (int i = 0; i < per_cluster; ++i, ++row) {
      for (int f = 0; f < d; ++f) ds.points(row, f) = centers[c](f) + spread * gauss(rng);
      labels[static_cast<std::size_t>(row)] = c;
    }
  }
  ds.labels = std::move(labels);
  return ds;
}

Dataset gen_circles(int n, const std::vector<double>& radii, double noise, std::uint64_t seed) {
  if (n < 1 || radii.empty()) throw ContractViolation("gen_circles: need n >= 1 and one radius");
  double min_gap = radii.front();
  for (std::size_t i = 1; i < radii.size(); ++i) {
    if (!(radii[i] > radii[i - 1])) {
      throw ContractViolation("gen_circles: radii must be strictly increasing");
    }
    min_gap = std::min(min_gap, radii[i] - radii[i - 1]);
  }
  if (!(radii.front() > 0) || noise < 0 || !(noise < 0.5 * min_gap)) {
    throw ContractViolation("gen_circles: noise must be below half the radial gap");
  }

  CounterRng rng(stream_key(seed, 0xc1c1e));
  const std::size_t rings = radii.size();
  Dataset ds;
  ds.name = "circles";
  ds.points.resize(n, 2);
  std::vector<int> labels(static_cast<std::size_t>(n));
  Index row = 0;
  for (std::size_t ring = 0; ring < rings; ++ring) {
    const int count = n / int(rings) + (ring < std::size_t(n) % rings ? 1 : 0);
    for (int i = 0; i < count; ++i, ++row) {
      const double angle = 2.0 * M_PI * rng.uniform();
      const double jitter = noise * (2.0 * rng.uniform() - 1.0);
      const double r = radii[ring] + jitter;
      ds.points(row, 0) = r * std::cos(angle);
      ds.points(row, 1) = r * std::sin(angle);
      labels[static_cast<std::size_t>(row)] = static_cast<int>(ring);
    }
  }
  ds.labels = std::move(labels);
  return ds;
}

double median_sigma(const Dataset& ds, Index sample, std::uint64_t seed) {
  const Index n = ds.size();
  if (n < 2) throw ContractViolation("median_sigma: need at least two points");
  if (sample < 2) throw ContractViolation("median_sigma: sample must be at least 2");
  std::vector<Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Index(0));
  if (sample < n) {
    CounterRng rng(stream_key(seed, 0x5167a));
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(static_cast<std::size_t>(sample));
    std::sort(idx.begin(), idx.end());
  }
  std::vector<double> dist;
  dist.reserve(idx.size() * (idx.size() - 1) / 2);
  for (std::size_t a = 0; a < idx.size(); ++a)
    for (std::size_t b = a + 1; b < idx.size(); ++b)
      dist.push_back((ds.points.row(idx[a]) - ds.points.row(idx[b])).norm());

  const std::size_t mid = dist.size() / 2;
  std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid), dist.end());
  double median = dist[mid];
  if (dist.size() % 2 == 0) {
    median = 0.5 * (median + *std::max_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid)));
  }
  if (!(median > 0)) throw ZeroDistanceError("median_sigma: median pairwise distance is zero");
  return median;
}

const std::vector<RegistryEntry>& dataset_registry() {
  static const std::vector<RegistryEntry> entries = {
      {"pendigits", 10992, 16, 10, 223.61},
      {"shuttle", 58000, 9, 7, 0.45},
      {"mnist", 60000, 780, 10, 4.08},
      {"covtype-i", 100000, 54, 5, 1.15},
      {"covtype-ii", 581012, 54, 7, 1.15},
  };
  return entries;
}

std::optional<RegistryEntry> find_registry_entry(std::string_view name) {
  std::string lowered(name);
  std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (const auto& e : dataset_registry()) {
    if (lowered == e.name || lowered.rfind(e.name + ".", 0) == 0) return e;
  }
  return std::nullopt;
}

}  // namespace mbsc
