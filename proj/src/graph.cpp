#include "mbsc/graph.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

namespace mbsc {

std::string to_string(ExponentMode mode) {
  return mode == ExponentMode::distance ? "distance" : "squared-distance";
}

ExponentMode parse_exponent_mode(const std::string& text) {
  if (text == "distance") return ExponentMode::distance;
  if (text == "squared-distance" || text == "squared") return ExponentMode::squared_distance;
  throw ConfigError("unknown exponent mode '" + text + "' (expected distance|squared-distance)");
}

AffinityKernel::AffinityKernel(const MatrixXd& points, AffinityConfig cfg)
    : features_(points.transpose()), cfg_(cfg) {
  if (!(cfg.sigma > 0) || !std::isfinite(cfg.sigma)) {
    throw ContractViolation("affinity sigma must be positive and finite");
  }
  inv_sigma_sq_ = 1.0 / (cfg.sigma * cfg.sigma);
}

VectorXd compute_degrees(const AffinityKernel& kernel, Index block_columns) {
  const Index n = kernel.size();
  if (block_columns < 1) block_columns = 1;
  VectorXd degree = VectorXd::Zero(n);
  for (Index j0 = 0; j0 < n; j0 += block_columns) {
    const Index j1 = std::min(n, j0 + block_columns);
    for (Index j = j0; j < j1; ++j)
      for (Index i = 0; i < n; ++i) degree(i) += kernel(i, j);
  }
  for (Index i = 0; i < n; ++i) {
    if (!(degree(i) >= kIsolatedDegree)) throw IsolatedVertexError(static_cast<std::size_t>(i), degree(i));
  }
  return degree;
}

void LaplacianProvider::check_index(Index j) const {
  if (j < 0 || j >= size()) {
    throw ContractViolation("column index " + std::to_string(j) + " out of range [0, " +
                            std::to_string(size()) + ")");
  }
}

MatrixXd LaplacianProvider::columns(std::span<const Index> idx) const {
  MatrixXd out(size(), static_cast<Index>(idx.size()));
  for (std::size_t c = 0; c < idx.size(); ++c) {
    column_into(idx[c], out.col(static_cast<Index>(c)));
  }
  return out;
}

std::unique_ptr<MaterializedLaplacian> MaterializedLaplacian::from_matrix(MatrixXd l) {
  if (l.rows() != l.cols()) throw ContractViolation("Laplacian must be square");
  VectorXd ones = VectorXd::Ones(l.rows());
  return std::make_unique<MaterializedLaplacian>(std::move(l), std::move(ones));
}

MaterializedLaplacian::MaterializedLaplacian(MatrixXd l, VectorXd degree)
    : LaplacianProvider(std::move(degree)), l_(std::move(l)) {
  if (l_.rows() != l_.cols() || l_.rows() != size()) {
    throw ContractViolation("Laplacian and degree vector sizes disagree");
  }
}

void MaterializedLaplacian::column_into(Index j, Eigen::Ref<VectorXd> out) const {
  check_index(j);
  count_columns(1);
  out = l_.col(j);
}

void MaterializedLaplacian::add_scaled_column(Index j, double alpha, Eigen::Ref<VectorXd> out) const {
  check_index(j);
  count_columns(1);
  const double* col = l_.col(j).data();
  for (Index i = 0; i < size(); ++i) out(i) += alpha * col[i];
}

MatrixXd MaterializedLaplacian::full_matvec(const MatrixXd& w) const {
  if (w.rows() != size()) throw ContractViolation("full_matvec: shape mismatch");
  return l_ * w;
}

StreamingLaplacian::StreamingLaplacian(AffinityKernel kernel, VectorXd degree)
    : LaplacianProvider(std::move(degree)), kernel_(std::move(kernel)) {
  if (kernel_.size() != size()) throw ContractViolation("degree vector does not match dataset size");
  for (Index i = 0; i < size(); ++i) {
    if (!(this->degree()(i) >= kIsolatedDegree)) {
      throw IsolatedVertexError(static_cast<std::size_t>(i), this->degree()(i));
    }
  }
  inv_sqrt_degree_ = this->degree().cwiseSqrt().cwiseInverse();
}

void StreamingLaplacian::column_into(Index j, Eigen::Ref<VectorXd> out) const {
  check_index(j);
  count_columns(1);
  const double sj = inv_sqrt_degree_(j);
  for (Index i = 0; i < size(); ++i) out(i) = kernel_(i, j) * (inv_sqrt_degree_(i) * sj);
}

void StreamingLaplacian::add_scaled_column(Index j, double alpha, Eigen::Ref<VectorXd> out) const {
  check_index(j);
  count_columns(1);
  const double sj = inv_sqrt_degree_(j);
  for (Index i = 0; i < size(); ++i) out(i) += alpha * (kernel_(i, j) * (inv_sqrt_degree_(i) * sj));
}

MatrixXd StreamingLaplacian::full_matvec(const MatrixXd& w) const {
  if (w.rows() != size()) throw ContractViolation("full_matvec: shape mismatch");
  MatrixXd out = MatrixXd::Zero(size(), w.cols());
  VectorXd col(size());
  for (Index j = 0; j < size(); ++j) {
    column_into(j, col);
    out.noalias() += col * w.row(j);
  }
  return out;
}

std::unique_ptr<MaterializedLaplacian> build_materialized(const Dataset& ds, const AffinityConfig& cfg) {
  const Index n = ds.size();
  if (n < 2) throw ContractViolation("need at least two samples to build a graph");
  AffinityKernel kernel(ds.points, cfg);
  VectorXd degree = compute_degrees(kernel);
  const VectorXd isd = degree.cwiseSqrt().cwiseInverse();
  MatrixXd l(n, n);
  for (Index j = 0; j < n; ++j) {
    l(j, j) = 0.0;
    for (Index i = j + 1; i < n; ++i) {
      const double v = kernel(i, j) * (isd(i) * isd(j));
      l(i, j) = v;
      l(j, i) = v;
    }
  }
  return std::make_unique<MaterializedLaplacian>(std::move(l), std::move(degree));
}

std::unique_ptr<StreamingLaplacian> build_streaming(const Dataset& ds, const AffinityConfig& cfg,
                                                    std::optional<VectorXd> degree) {
  if (ds.size() < 2) throw ContractViolation("need at least two samples to build a graph");
  AffinityKernel kernel(ds.points, cfg);
  VectorXd deg = degree ? std::move(*degree) : compute_degrees(kernel);
  return std::make_unique<StreamingLaplacian>(std::move(kernel), std::move(deg));
}

namespace {

constexpr std::array<char, 8> kDegreeMagic = {'M', 'B', 'S', 'C', 'D', 'E', 'G', '1'};

template <typename T>
void put_le(std::ostream& out, T value) {
  static_assert(sizeof(T) == 8);
  std::uint64_t bits;
  std::memcpy(&bits, &value, 8);
  unsigned char bytes[8];
  for (int b = 0; b < 8; ++b) bytes[b] = static_cast<unsigned char>(bits >> (8 * b));
  out.write(reinterpret_cast<const char*>(bytes), 8);
}

template <typename T>
T get_le(std::istream& in) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw ConfigError("degree cache is truncated");
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b) bits |= std::uint64_t(bytes[b]) << (8 * b);
  T value;
  std::memcpy(&value, &bits, 8);
  return value;
}

}  // namespace

void write_degree_cache(const std::string& path, const VectorXd& degree) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write degree cache '" + path + "'");
  out.write(kDegreeMagic.data(), kDegreeMagic.size());
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(degree.size()));
  for (Index i = 0; i < degree.size(); ++i) put_le<double>(out, degree(i));
  if (!out) throw ConfigError("failed writing degree cache '" + path + "'");
}

VectorXd read_degree_cache(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open degree cache '" + path + "'");
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kDegreeMagic) {
    throw ConfigError("'" + path + "' is not a degree cache");
  }
  const auto n = get_le<std::uint64_t>(in);
  VectorXd degree(static_cast<Index>(n));
  for (Index i = 0; i < degree.size(); ++i) degree(i) = get_le<double>(in);
  return degree;
}

}  // namespace mbsc
