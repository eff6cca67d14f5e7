#include "pbec/modes.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "pbec/errors.hpp"

namespace pbec {

SpatialGrid SpatialGrid::uniform(std::size_t points, double half_extent) {
  if (points < 2 || !(half_extent > 0.0)) {
    throw validation_error("uniform grid needs >= 2 points and a positive extent");
  }
  SpatialGrid grid;
  grid.positions.resize(points);
  grid.weights.resize(points);
  const double h = 2.0 * half_extent / static_cast<double>(points - 1);
  for (std::size_t i = 0; i < points; ++i) {
    grid.positions[i] = -half_extent + h * static_cast<double>(i);
    grid.weights[i] = h;
  }
  grid.weights.front() = 0.5 * h;
  grid.weights.back() = 0.5 * h;
  return grid;
}

void SpatialGrid::validate() const {
  if (positions.empty()) throw validation_error("spatial grid has no sites");
  if (positions.size() != weights.size()) {
    throw validation_error("spatial grid: positions and weights differ in length");
  }
  for (std::size_t i = 0; i < positions.size(); ++i) {
    if (!(weights[i] > 0.0)) {
      throw validation_error("spatial grid: weight at site " + std::to_string(i) +
                             " is not strictly positive");
    }
    if (i > 0 && !(positions[i] > positions[i - 1])) {
      throw validation_error("spatial grid: positions not strictly increasing at site " +
                             std::to_string(i));
    }
  }
}

Eigen::MatrixXd ModeBasis::gram() const {
  const Eigen::Map<const Eigen::VectorXd> w(grid.weights.data(),
                                            static_cast<Eigen::Index>(grid.size()));
  return mode_function * w.asDiagonal() * mode_function.transpose();
}

ModeBasis build_harmonic_basis(int modes, double omega0, double spacing,
                               double omega_zpl, SpatialGrid grid) {
  if (modes < 1) throw validation_error("mode count must be >= 1");
  if (!(spacing > 0.0)) throw validation_error("mode spacing must be positive");
  grid.validate();

  ModeBasis basis;
  basis.omega0 = omega0;
  basis.spacing = spacing;
  basis.omega_zpl = omega_zpl;
  basis.frequency.resize(modes);
  basis.detuning.resize(modes);
  for (int p = 0; p < modes; ++p) {
    basis.frequency[p] = omega0 + p * spacing;
    basis.detuning[p] = omega_zpl - basis.frequency[p];
  }

  // Hermite functions via the stable three-term recurrence
  //   psi_{n+1} = sqrt(2/(n+1)) x psi_n - sqrt(n/(n+1)) psi_{n-1}.
  const int n_sites = static_cast<int>(grid.size());
  basis.mode_function.resize(modes, n_sites);
  const double norm0 = std::pow(std::numbers::pi, -0.25);
  for (int i = 0; i < n_sites; ++i) {
    const double x = grid.positions[i];
    double prev = 0.0;
    double cur = norm0 * std::exp(-0.5 * x * x);
    basis.mode_function(0, i) = cur;
    for (int n = 0; n + 1 < modes; ++n) {
      const double next = std::sqrt(2.0 / (n + 1)) * x * cur -
                          std::sqrt(static_cast<double>(n) / (n + 1)) * prev;
      prev = cur;
      cur = next;
      basis.mode_function(n + 1, i) = cur;
    }
  }
  basis.grid = std::move(grid);

  const Eigen::MatrixXd g = basis.gram();
  for (int p = 0; p < modes; ++p) {
    for (int q = 0; q < modes; ++q) {
      const double expected = p == q ? 1.0 : 0.0;
      if (std::abs(g(p, q) - expected) > 1e-8) {
        throw validation_error(
            "grid too small for mode " + std::to_string(std::max(p, q)) +
            ": weighted overlap <" + std::to_string(p) + "|" + std::to_string(q) +
            "> = " + std::to_string(g(p, q)));
      }
    }
  }
  return basis;
}

OverlapTensor::OverlapTensor(int modes, Eigen::MatrixXd flat)
    : modes_(modes), flat_(std::move(flat)) {
  if (flat_.rows() != static_cast<Eigen::Index>(modes) * modes) {
    throw contract_error("overlap tensor: row count must be modes^2");
  }
}

Eigen::MatrixXd OverlapTensor::site(int i) const {
  return Eigen::Map<const Eigen::MatrixXd>(flat_.col(i).data(), modes_, modes_);
}

Eigen::MatrixXd OverlapTensor::weighted_sum(const Eigen::VectorXd& weight) const {
  const Eigen::VectorXd v = flat_ * weight;
  return Eigen::Map<const Eigen::MatrixXd>(v.data(), modes_, modes_);
}

OverlapTensor overlap_tensor(const ModeBasis& basis) {
  const int m = basis.modes();
  const int n = basis.sites();
  Eigen::MatrixXd flat(m * m, n);
  for (int i = 0; i < n; ++i) {
    for (int q = 0; q < m; ++q) {
      for (int p = 0; p <= q; ++p) {
        const double v = basis.mode_function(p, i) * basis.mode_function(q, i);
        flat(p + m * q, i) = v;
        flat(q + m * p, i) = v;
      }
    }
  }
  return OverlapTensor(m, std::move(flat));
}

OverlapTensor overlap_from_sites(const std::vector<Eigen::MatrixXd>& sites) {
  if (sites.empty()) throw validation_error("overlap needs at least one site");
  const int m = static_cast<int>(sites.front().rows());
  Eigen::MatrixXd flat(m * m, static_cast<Eigen::Index>(sites.size()));
  for (std::size_t i = 0; i < sites.size(); ++i) {
    const auto& s = sites[i];
    if (s.rows() != m || s.cols() != m) {
      throw contract_error("overlap site matrices must all be modes x modes");
    }
    if ((s - s.transpose()).cwiseAbs().maxCoeff() != 0.0) {
      throw validation_error("overlap site matrix " + std::to_string(i) +
                             " is not symmetric");
    }
    flat.col(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const Eigen::VectorXd>(s.data(), m * m);
  }
  return OverlapTensor(m, std::move(flat));
}

}  // namespace pbec
