#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace mourrelab {

enum class Boundary { Dirichlet, Periodic };

using Site = std::vector<int>;

// Centered box {n in Z^dim : |n_i| <= half_side} with (2L+1)^dim sites.
// Site index is sum_i (n_i + L) * side^(i-1): axis 1 varies fastest.
class LatticeBox {
 public:
  LatticeBox(int dim, int half_side, Boundary boundary = Boundary::Dirichlet);

  int dim() const { return dim_; }
  int half_side() const { return half_side_; }
  int side() const { return 2 * half_side_ + 1; }
  Boundary boundary() const { return boundary_; }
  std::size_t size() const { return size_; }

  bool contains(std::span<const int> site) const;
  std::size_t index(std::span<const int> site) const;
  Site site(std::size_t index) const;
  // Coordinate n_axis of the site at `index`; axis is 1-based.
  int coordinate(std::size_t index, int axis) const;
  // L - |n|_inf: 0 on the outer layer.
  int distance_to_boundary(std::size_t index) const;

  bool operator==(const LatticeBox&) const = default;

 private:
  int dim_;
  int half_side_;
  Boundary boundary_;
  std::size_t size_;
  std::vector<std::size_t> strides_;
};

enum class Symmetry { Symmetric, Antisymmetric, General };

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// Real square operator on the sites of a box, stored row-compressed.
// The symmetry tag is detected on construction (max |M -+ M^T| <= 1e-12 max|M|).
class LatticeOperator {
 public:
  LatticeOperator(LatticeBox box, SparseMatrix entries);

  const LatticeBox& box() const { return box_; }
  const SparseMatrix& entries() const { return entries_; }
  Symmetry symmetry() const { return symmetry_; }
  std::size_t size() const { return box_.size(); }

  Eigen::VectorXd apply(const Eigen::VectorXd& u) const { return entries_ * u; }
  Eigen::MatrixXd dense() const { return Eigen::MatrixXd(entries_); }
  LatticeOperator transpose() const;
  double max_abs_entry() const;

  friend LatticeOperator operator+(const LatticeOperator& x, const LatticeOperator& y);
  friend LatticeOperator operator-(const LatticeOperator& x, const LatticeOperator& y);
  friend LatticeOperator operator*(const LatticeOperator& x, const LatticeOperator& y);
  friend LatticeOperator operator*(double s, const LatticeOperator& x);

 private:
  LatticeBox box_;
  SparseMatrix entries_;
  Symmetry symmetry_;
};

// Dense operator on a box (functions of H, spectral projections).
struct DenseOperator {
  LatticeBox box;
  Eigen::MatrixXd matrix;
};

// Full eigensystem of a symmetric operator. Eigenvalues ascending, eigenvectors
// in the columns.
struct EigenSystem {
  LatticeBox box;
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd eigenvectors;
};

LatticeOperator build_identity(const LatticeBox& box);
LatticeOperator build_diagonal(const LatticeBox& box, const Eigen::VectorXd& values);

// (T_axis u)(n) = u(n - e_axis). Periodic boxes wrap; Dirichlet drops the
// entries that would leave the box.
LatticeOperator build_shift(const LatticeBox& box, int axis);
LatticeOperator build_laplacian(const LatticeBox& box);
// (Q_axis u)(n) = n_axis u(n). Dirichlet boxes only.
LatticeOperator build_position(const LatticeBox& box, int axis);
// A = 1/2 sum_i { Q_i (T_i^{-1} - T_i) + (T_i^{-1} - T_i) Q_i }. Antisymmetric
// as a real matrix. Dirichlet boxes only.
LatticeOperator build_conjugate_operator(const LatticeBox& box);
// -sum_j (T_j - T_j^{-1})^2, the symbol 4 sum sin^2(theta_j) on the torus.
LatticeOperator build_commutator_symbol(const LatticeBox& box);

LatticeOperator commutator(const LatticeOperator& x, const LatticeOperator& y);

struct NormOptions {
  double tol = 1e-10;
  std::size_t dense_threshold = 2000;
  int max_iterations = 200000;
};

// Largest singular value. Restricts to the nonzero rows/columns first; below
// dense_threshold the reduced matrix is handled exactly, otherwise by power
// iteration on X^T X from the normalized all-ones vector.
double operator_norm(const LatticeOperator& x, const NormOptions& options = {});
double operator_norm(const LatticeOperator& x, double tol);
double power_iteration_norm(const SparseMatrix& x, double tol, int max_iterations);
double dense_norm(const Eigen::MatrixXd& x);
// Spectral norm of a symmetric dense matrix (max |eigenvalue|).
double symmetric_norm(const Eigen::MatrixXd& x);

inline constexpr std::size_t kDefaultDenseCap = 4096;

EigenSystem eigendecompose(const LatticeOperator& h, std::size_t dense_cap = kDefaultDenseCap);

// Max entrywise |([A, Delta] + sum_j (T_j - T_j^{-1})^2) u| over `samples`
// random vectors supported at l_inf distance >= 2 from the Dirichlet boundary.
double interior_identity_error(const LatticeBox& box, int samples, std::uint64_t seed);

// Max over every real Fourier mode v = cos / sin(2 pi m.n / side) of
// ||C v - 4 sum sin^2(2 pi m_i / side) v||_inf, with C = -sum_j (T_j - T_j^{-1})^2
// on a periodic box. The modes span the space, so a small value pins the spectrum.
double fourier_mode_residual(const LatticeBox& periodic_box);

// Coordinate-list dump: "row col value" per nonzero, 17 significant digits.
void write_coordinate_list(std::ostream& os, const LatticeOperator& x);

}  // namespace mourrelab
