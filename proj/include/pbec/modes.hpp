#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace pbec {

// Molecule sites on a one-dimensional quadrature grid, in units of the
// oscillator length. Each site stands for the molecules within its weight.
struct SpatialGrid {
  std::vector<double> positions;
  std::vector<double> weights;

  std::size_t size() const { return positions.size(); }

  // Trapezoid grid of `points` sites over [-half_extent, half_extent].
  static SpatialGrid uniform(std::size_t points, double half_extent);

  // Throws a validation error if the grid is empty, weights are not
  // strictly positive or positions are not strictly increasing.
  void validate() const;
};

// Equally spaced ladder of cavity modes with Hermite-Gaussian profiles.
struct ModeBasis {
  double omega0 = 0.0;     // cutoff, THz
  double spacing = 0.0;    // THz
  double omega_zpl = 0.0;  // THz
  Eigen::VectorXd frequency;      // omega_p
  Eigen::VectorXd detuning;       // omega_zpl - omega_p
  Eigen::MatrixXd mode_function;  // modes x sites, psi_p(r_i)
  SpatialGrid grid;

  int modes() const { return static_cast<int>(frequency.size()); }
  int sites() const { return static_cast<int>(grid.size()); }

  // Weighted Gram matrix sum_i w_i psi_p psi_q.
  Eigen::MatrixXd gram() const;
};

// Builds `modes` harmonic-oscillator modes of unit oscillator length.
// Throws a validation error naming the first mode whose weighted norm or
// orthogonality deviates by more than 1e-8 on the given grid.
ModeBasis build_harmonic_basis(int modes, double omega0, double spacing,
                               double omega_zpl, SpatialGrid grid);

// Psi_pq^i = psi_p(r_i) psi_q(r_i), stored as an (M*M) x N matrix whose
// column i is the column-major flattening of the M x M site matrix Phi_i.
class OverlapTensor {
 public:
  OverlapTensor() = default;
  OverlapTensor(int modes, Eigen::MatrixXd flat);

  int modes() const { return modes_; }
  int sites() const { return static_cast<int>(flat_.cols()); }

  double operator()(int p, int q, int i) const {
    return flat_(p + modes_ * q, i);
  }
  const Eigen::MatrixXd& flat() const { return flat_; }
  Eigen::MatrixXd site(int i) const;

  // sum_i weight_i * Phi_i
  Eigen::MatrixXd weighted_sum(const Eigen::VectorXd& weight) const;

 private:
  int modes_ = 0;
  Eigen::MatrixXd flat_;
};

OverlapTensor overlap_tensor(const ModeBasis& basis);

// Builds an overlap tensor from explicit per-site M x M matrices. Each site
// matrix must be symmetric.
OverlapTensor overlap_from_sites(const std::vector<Eigen::MatrixXd>& sites);

}  // namespace pbec
