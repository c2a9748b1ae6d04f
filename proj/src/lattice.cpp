#include "mourrelab/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "mourrelab/errors.hpp"
#include "mourrelab/random.hpp"

namespace mourrelab {

namespace {

using Triplet = Eigen::Triplet<double>;

double max_abs(const SparseMatrix& m) {
  double out = 0.0;
  for (int k = 0; k < m.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(m, k); it; ++it) out = std::max(out, std::abs(it.value()));
  return out;
}

Symmetry detect_symmetry(const SparseMatrix& m) {
  const double scale = max_abs(m);
  if (scale == 0.0) return Symmetry::Symmetric;
  const SparseMatrix mt = m.transpose();
  const double tol = 1e-12 * scale;
  if (max_abs(SparseMatrix(m - mt)) <= tol) return Symmetry::Symmetric;
  if (max_abs(SparseMatrix(m + mt)) <= tol) return Symmetry::Antisymmetric;
  return Symmetry::General;
}

void require_same_box(const LatticeOperator& x, const LatticeOperator& y, const char* op) {
  if (!(x.box() == y.box())) throw ArgumentError(fmt::format("{}: operators live on different boxes", op));
}

void require_axis(const LatticeBox& box, int axis) {
  if (axis < 1 || axis > box.dim())
    throw ArgumentError(fmt::format("axis {} out of range 1..{}", axis, box.dim()));
}

void require_dirichlet(const LatticeBox& box, const char* what) {
  if (box.boundary() != Boundary::Dirichlet)
    throw UnsupportedError(fmt::format("{} is only defined on Dirichlet boxes (positions are ill-defined on a torus)", what));
}

}  // namespace

LatticeBox::LatticeBox(int dim, int half_side, Boundary boundary)
    : dim_(dim), half_side_(half_side), boundary_(boundary), size_(1) {
  if (dim < 1) throw ArgumentError(fmt::format("dimension must be positive, got {}", dim));
  if (half_side < 1) throw ArgumentError(fmt::format("half side must be positive, got {}", half_side));
  strides_.resize(dim);
  for (int i = 0; i < dim; ++i) {
    strides_[i] = size_;
    size_ *= static_cast<std::size_t>(side());
  }
}

bool LatticeBox::contains(std::span<const int> site) const {
  if (static_cast<int>(site.size()) != dim_) return false;
  return std::all_of(site.begin(), site.end(), [&](int c) { return std::abs(c) <= half_side_; });
}

std::size_t LatticeBox::index(std::span<const int> site) const {
  if (!contains(site)) throw ArgumentError("site lies outside the box");
  std::size_t idx = 0;
  for (int i = 0; i < dim_; ++i) idx += static_cast<std::size_t>(site[i] + half_side_) * strides_[i];
  return idx;
}

Site LatticeBox::site(std::size_t index) const {
  if (index >= size_) throw ArgumentError(fmt::format("index {} out of range", index));
  Site out(dim_);
  for (int i = 0; i < dim_; ++i) {
    out[i] = static_cast<int>(index % side()) - half_side_;
    index /= side();
  }
  return out;
}

int LatticeBox::coordinate(std::size_t index, int axis) const {
  return static_cast<int>((index / strides_[axis - 1]) % side()) - half_side_;
}

int LatticeBox::distance_to_boundary(std::size_t index) const {
  int m = 0;
  for (int i = 1; i <= dim_; ++i) m = std::max(m, std::abs(coordinate(index, i)));
  return half_side_ - m;
}

LatticeOperator::LatticeOperator(LatticeBox box, SparseMatrix entries)
    : box_(std::move(box)), entries_(std::move(entries)) {
  const auto n = static_cast<Eigen::Index>(box_.size());
  if (entries_.rows() != n || entries_.cols() != n)
    throw ArgumentError(fmt::format("operator is {}x{} but the box has {} sites", entries_.rows(), entries_.cols(), n));
  entries_.makeCompressed();
  symmetry_ = detect_symmetry(entries_);
}

LatticeOperator LatticeOperator::transpose() const { return {box_, SparseMatrix(entries_.transpose())}; }

double LatticeOperator::max_abs_entry() const { return max_abs(entries_); }

LatticeOperator operator+(const LatticeOperator& x, const LatticeOperator& y) {
  require_same_box(x, y, "operator+");
  return {x.box(), SparseMatrix(x.entries() + y.entries())};
}

LatticeOperator operator-(const LatticeOperator& x, const LatticeOperator& y) {
  require_same_box(x, y, "operator-");
  return {x.box(), SparseMatrix(x.entries() - y.entries())};
}

LatticeOperator operator*(const LatticeOperator& x, const LatticeOperator& y) {
  require_same_box(x, y, "operator*");
  return {x.box(), SparseMatrix(x.entries() * y.entries())};
}

LatticeOperator operator*(double s, const LatticeOperator& x) { return {x.box(), SparseMatrix(s * x.entries())}; }

LatticeOperator build_identity(const LatticeBox& box) {
  const auto n = static_cast<Eigen::Index>(box.size());
  SparseMatrix m(n, n);
  m.setIdentity();
  return {box, std::move(m)};
}

LatticeOperator build_diagonal(const LatticeBox& box, const Eigen::VectorXd& values) {
  if (values.size() != static_cast<Eigen::Index>(box.size()))
    throw ArgumentError("diagonal length does not match the box");
  std::vector<Triplet> trips;
  for (Eigen::Index i = 0; i < values.size(); ++i)
    if (values[i] != 0.0) trips.emplace_back(i, i, values[i]);
  SparseMatrix m(values.size(), values.size());
  m.setFromTriplets(trips.begin(), trips.end());
  return {box, std::move(m)};
}

LatticeOperator build_shift(const LatticeBox& box, int axis) {
  require_axis(box, axis);
  const int L = box.half_side();
  std::vector<Triplet> trips;
  trips.reserve(box.size());
  for (std::size_t row = 0; row < box.size(); ++row) {
    Site from = box.site(row);
    int& c = from[axis - 1];
    c -= 1;
    if (c < -L) {
      if (box.boundary() == Boundary::Dirichlet) continue;
      c += box.side();
    }
    trips.emplace_back(static_cast<int>(row), static_cast<int>(box.index(from)), 1.0);
  }
  const auto n = static_cast<Eigen::Index>(box.size());
  SparseMatrix m(n, n);
  m.setFromTriplets(trips.begin(), trips.end());
  return {box, std::move(m)};
}

LatticeOperator build_laplacian(const LatticeBox& box) {
  const auto n = static_cast<Eigen::Index>(box.size());
  SparseMatrix sum(n, n);
  for (int axis = 1; axis <= box.dim(); ++axis) {
    const SparseMatrix t = build_shift(box, axis).entries();
    sum += t + SparseMatrix(t.transpose());
  }
  return {box, std::move(sum)};
}

LatticeOperator build_position(const LatticeBox& box, int axis) {
  require_axis(box, axis);
  require_dirichlet(box, "position operator");
  Eigen::VectorXd diag(box.size());
  for (std::size_t i = 0; i < box.size(); ++i) diag[static_cast<Eigen::Index>(i)] = box.coordinate(i, axis);
  return build_diagonal(box, diag);
}

LatticeOperator build_conjugate_operator(const LatticeBox& box) {
  require_dirichlet(box, "conjugate operator");
  const auto n = static_cast<Eigen::Index>(box.size());
  SparseMatrix sum(n, n);
  for (int axis = 1; axis <= box.dim(); ++axis) {
    const SparseMatrix t = build_shift(box, axis).entries();
    const SparseMatrix q = build_position(box, axis).entries();
    const SparseMatrix s = SparseMatrix(t.transpose()) - t;
    sum += 0.5 * SparseMatrix(q * s + s * q);
  }
  return {box, std::move(sum)};
}

LatticeOperator build_commutator_symbol(const LatticeBox& box) {
  const auto n = static_cast<Eigen::Index>(box.size());
  SparseMatrix sum(n, n);
  for (int axis = 1; axis <= box.dim(); ++axis) {
    const SparseMatrix t = build_shift(box, axis).entries();
    const SparseMatrix d = t - SparseMatrix(t.transpose());
    sum -= SparseMatrix(d * d);
  }
  return {box, std::move(sum)};
}

LatticeOperator commutator(const LatticeOperator& x, const LatticeOperator& y) {
  require_same_box(x, y, "commutator");
  return {x.box(), SparseMatrix(x.entries() * y.entries() - y.entries() * x.entries())};
}

double dense_norm(const Eigen::MatrixXd& x) {
  if (x.size() == 0) return 0.0;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(x);
  return svd.singularValues()(0);
}

double symmetric_norm(const Eigen::MatrixXd& x) {
  if (x.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(x, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

double power_iteration_norm(const SparseMatrix& x, double tol, int max_iterations) {
  const Eigen::Index n = x.cols();
  Eigen::VectorXd v = Eigen::VectorXd::Ones(n) / std::sqrt(static_cast<double>(n));
  double sigma = 0.0;
  for (int it = 0; it < max_iterations; ++it) {
    const Eigen::VectorXd w = x * v;
    const double next = w.norm();
    const Eigen::VectorXd z = x.transpose() * w;
    const double zn = z.norm();
    if (zn == 0.0) return next;
    v = z / zn;
    if (it > 0 && std::abs(next - sigma) <= tol * next) return next;
    sigma = next;
  }
  throw NumericError(fmt::format("power iteration did not converge in {} iterations (last estimate {})", max_iterations, sigma),
                     sigma, v);
}

double operator_norm(const LatticeOperator& x, double tol) {
  NormOptions options;
  options.tol = tol;
  return operator_norm(x, options);
}

double operator_norm(const LatticeOperator& x, const NormOptions& options) {
  if (!(options.tol > 0.0)) throw ArgumentError("operator_norm: tolerance must be positive");
  const SparseMatrix& m = x.entries();
  std::vector<int> rows, cols;
  std::vector<char> col_used(static_cast<std::size_t>(m.cols()), 0);
  for (int r = 0; r < m.outerSize(); ++r) {
    bool any = false;
    for (SparseMatrix::InnerIterator it(m, r); it; ++it) {
      if (it.value() == 0.0) continue;
      any = true;
      col_used[static_cast<std::size_t>(it.col())] = 1;
    }
    if (any) rows.push_back(r);
  }
  for (std::size_t c = 0; c < col_used.size(); ++c)
    if (col_used[c]) cols.push_back(static_cast<int>(c));
  if (rows.empty()) return 0.0;

  const bool symmetric = x.symmetry() == Symmetry::Symmetric;
  if (symmetric) {
    // Same index set on both sides keeps the reduced block symmetric.
    std::vector<int> merged;
    std::set_union(rows.begin(), rows.end(), cols.begin(), cols.end(), std::back_inserter(merged));
    rows = cols = merged;
  }
  if (std::max(rows.size(), cols.size()) > options.dense_threshold)
    return power_iteration_norm(m, options.tol, options.max_iterations);

  std::vector<int> col_pos(static_cast<std::size_t>(m.cols()), -1);
  for (std::size_t j = 0; j < cols.size(); ++j) col_pos[static_cast<std::size_t>(cols[j])] = static_cast<int>(j);
  Eigen::MatrixXd block = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (SparseMatrix::InnerIterator it(m, rows[i]); it; ++it) {
      const int j = col_pos[static_cast<std::size_t>(it.col())];
      if (j >= 0) block(static_cast<Eigen::Index>(i), j) = it.value();
    }
  return symmetric ? symmetric_norm(block) : dense_norm(block);
}

EigenSystem eigendecompose(const LatticeOperator& h, std::size_t dense_cap) {
  if (h.size() > dense_cap)
    throw CapacityError(fmt::format("dense eigendecomposition capped at {} sites, box has {}; use a smaller box",
                                    dense_cap, h.size()));
  if (h.symmetry() != Symmetry::Symmetric) throw ArgumentError("eigendecompose: operator is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h.dense());
  if (es.info() != Eigen::Success) throw NumericError("dense eigensolver failed", 0.0, Eigen::VectorXd());
  return {h.box(), es.eigenvalues(), es.eigenvectors()};
}

double interior_identity_error(const LatticeBox& box, int samples, std::uint64_t seed) {
  require_dirichlet(box, "interior_identity_error");
  if (samples < 1) throw ArgumentError("interior_identity_error: samples must be positive");
  const LatticeOperator residual = commutator(build_conjugate_operator(box), build_laplacian(box)) -
                                   build_commutator_symbol(box);
  auto gen = keyed_engine(seed, 0);
  Eigen::VectorXd u(static_cast<Eigen::Index>(box.size()));
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    for (std::size_t i = 0; i < box.size(); ++i)
      u[static_cast<Eigen::Index>(i)] = box.distance_to_boundary(i) >= 2 ? 2.0 * uniform01(gen) - 1.0 : 0.0;
    worst = std::max(worst, residual.apply(u).cwiseAbs().maxCoeff());
  }
  return worst;
}

double fourier_mode_residual(const LatticeBox& box) {
  if (box.boundary() != Boundary::Periodic) throw ArgumentError("fourier_mode_residual needs a periodic box");
  const int side = box.side();
  const int dim = box.dim();
  const LatticeOperator symbol = build_commutator_symbol(box);
  std::vector<double> cos_table(side), sin_table(side), sin2(side);
  for (int k = 0; k < side; ++k) {
    const double t = 2.0 * M_PI * k / side;
    cos_table[k] = std::cos(t);
    sin_table[k] = std::sin(t);
    sin2[k] = std::sin(t) * std::sin(t);
  }
  // Shifted coordinates k_i = n_i + L; the phase index sum m_i k_i mod side picks the table entry.
  std::vector<std::vector<int>> shifted(box.size());
  for (std::size_t i = 0; i < box.size(); ++i) {
    shifted[i].resize(dim);
    for (int a = 0; a < dim; ++a) shifted[i][a] = box.coordinate(i, a + 1) + box.half_side();
  }
  const auto n = static_cast<Eigen::Index>(box.size());
  Eigen::VectorXd c(n), s(n);
  double worst = 0.0;
  for (std::size_t mode = 0; mode < box.size(); ++mode) {
    const auto& m = shifted[mode];
    double eigenvalue = 0.0;
    for (int a = 0; a < dim; ++a) eigenvalue += 4.0 * sin2[m[a]];
    for (std::size_t i = 0; i < box.size(); ++i) {
      long phase = 0;
      for (int a = 0; a < dim; ++a) phase += static_cast<long>(m[a]) * shifted[i][a];
      const auto p = static_cast<std::size_t>(phase % side);
      c[static_cast<Eigen::Index>(i)] = cos_table[p];
      s[static_cast<Eigen::Index>(i)] = sin_table[p];
    }
    worst = std::max(worst, (symbol.apply(c) - eigenvalue * c).cwiseAbs().maxCoeff());
    worst = std::max(worst, (symbol.apply(s) - eigenvalue * s).cwiseAbs().maxCoeff());
  }
  return worst;
}

void write_coordinate_list(std::ostream& os, const LatticeOperator& x) {
  const SparseMatrix& m = x.entries();
  for (int r = 0; r < m.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(m, r); it; ++it) fmt::print(os, "{} {} {:.17g}\n", it.row(), it.col(), it.value());
}

}  // namespace mourrelab
