#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "pbec/errors.hpp"
#include "pbec/system.hpp"

namespace pbec {

// Which mode index carries the rate in the cross terms of the absorption and
// emission dissipators. kPrinted: absorption uses the rate of the annihilated
// mode, emission the rate of the created mode.
enum class RateIndexConvention { kPrinted, kSwapped };

// Full master equation for M <= 2 modes and N <= 10 two-level molecules on a
// truncated Fock space. Rates in THz.
struct ExactModel {
  int modes = 1;
  int sites = 1;
  int n_max = 3;  // Fock cutoff per mode
  Eigen::VectorXd detuning;    // M
  Eigen::VectorXd absorption;  // M
  Eigen::VectorXd emission;    // M
  Eigen::MatrixXd mode_function;  // M x N, psi_p(r_i); Psi^i_pq = psi_p psi_q
  Eigen::VectorXd pump;        // N
  double decay = 0.0;
  double loss = 0.0;
  RateIndexConvention convention = RateIndexConvention::kPrinted;
  std::size_t memory_bound = std::size_t{2} << 30;  // bytes

  int photon_states() const;  // (n_max + 1)^M
  std::size_t spin_states() const { return std::size_t{1} << sites; }
  // Hilbert dimension D = (n_max + 1)^M 2^N.
  std::size_t dimension() const;
  // Bytes needed to assemble the Liouvillian on the operator space.
  std::size_t required_bytes() const;
  double coupling(int p, int q, int i) const {
    return mode_function(p, i) * mode_function(q, i);
  }

  // Validation errors for bad shapes or negative rates, a resource error
  // when required_bytes() exceeds memory_bound.
  void validate() const;
};

// The same physics for the rate equations: one site of unit weight per
// molecule.
SystemModel to_system_model(const ExactModel& model);

using Occupation = std::array<int, 2>;

// Operators that are diagonal in the molecular configuration,
// |nu, s><n, s|, which the dynamics never leaves. Element index is
// nu + P (n + P s) with photon index sum_p n_p (n_max + 1)^p (mode 0 fastest)
// and spin bit i set when molecule i is excited.
class OperatorSpace {
 public:
  explicit OperatorSpace(const ExactModel& model);

  int modes() const { return modes_; }
  int n_max() const { return n_max_; }
  int photon_states() const { return photons_; }
  std::size_t spin_states() const { return spins_; }
  std::size_t size() const { return std::size_t(photons_) * photons_ * spins_; }

  std::size_t index(int nu, int n, std::size_t s) const {
    return std::size_t(nu) + std::size_t(photons_) * (std::size_t(n) + std::size_t(photons_) * s);
  }
  // -1 if any occupation lies outside [0, n_max].
  int photon_index(const Occupation& occ) const;
  Occupation occupation(int photon) const;
  int total(int photon) const;

 private:
  int modes_;
  int n_max_;
  int photons_;
  std::size_t spins_;
};

enum class TermKind {
  kCoherent,
  kCavityLoss,
  kPump,
  kDecay,
  kAbsorption,
  kAbsorptionConjugate,
  kEmission,
  kEmissionConjugate,
};

std::string term_name(TermKind kind);

enum class Ladder : std::uint8_t { kAnnihilate, kCreate, kRaise, kLower };

struct Factor {
  Ladder op;
  int target;  // mode or molecule
};

// Product of ladder operators; the last factor acts first.
using Monomial = std::vector<Factor>;

// coef * left X right, with right stored as its adjoint so both act on kets.
struct LiouvillianTerm {
  TermKind kind;
  Monomial left;
  Monomial right_adjoint;
  std::complex<double> coef;
  int created = -1;      // photon mode raised by the dissipator pair, if any
  int annihilated = -1;  // photon mode lowered
  int site = -1;
};

using TermFilter = std::function<bool(const LiouvillianTerm&)>;

class Liouvillian {
 public:
  explicit Liouvillian(const ExactModel& model);

  const ExactModel& model() const { return model_; }
  const OperatorSpace& space() const { return space_; }
  const std::vector<LiouvillianTerm>& terms() const { return terms_; }

  // Matrix-free action on an operator in OperatorSpace layout, optionally
  // restricted to the terms accepted by `filter`.
  Eigen::VectorXcd apply(const Eigen::VectorXcd& x, const TermFilter& filter = {}) const;

  // Elements with sum(n) - sum(nu) = offset. The stationary state lives in
  // offset 0, a_q rho in offset 1.
  std::vector<std::size_t> sector(int offset) const;
  Eigen::SparseMatrix<std::complex<double>> sector_matrix(
      const std::vector<std::size_t>& elements) const;

 private:
  template <class Emit>
  void act(std::size_t element, const LiouvillianTerm& term, Emit&& emit) const;

  ExactModel model_;
  OperatorSpace space_;
  std::vector<LiouvillianTerm> terms_;
};

// Helpers on operators in OperatorSpace layout.
std::complex<double> trace(const OperatorSpace& space, const Eigen::VectorXcd& x);
Eigen::VectorXcd adjoint(const OperatorSpace& space, const Eigen::VectorXcd& x);
// a_q X
Eigen::VectorXcd annihilate(const OperatorSpace& space, int q, const Eigen::VectorXcd& x);
// Tr[a_p^dag X]
std::complex<double> creation_trace(const OperatorSpace& space, int p,
                                    const Eigen::VectorXcd& x);

struct ExactSteadyState {
  Eigen::VectorXcd rho;
  double hermiticity_defect = 0.0;  // before symmetrization
  double min_eigenvalue = 0.0;
  double residual = 0.0;            // max |L rho|
  double cutoff_population = 0.0;   // weight on states with some n_p = n_max
  std::vector<std::string> warnings;

  Eigen::MatrixXcd photons(const OperatorSpace& space) const;  // <a_p^dag a_q>
  Eigen::VectorXd excitation(const OperatorSpace& space) const;  // <sigma+_i sigma-_i>
};

// Unit-trace null vector of the Liouvillian in the offset-0 sector. Dense
// null space for small sectors, shifted inverse iteration on the sparse
// matrix otherwise. A null space of dimension > 1 is a contract error. Cutoff population above 1e-6 is a warning, or a truncation error
// when strict.
ExactSteadyState steady_state_exact(const Liouvillian& L, bool strict = false);

// c_pq(t) = Tr[a_p^dag exp(L t)(a_q rho_ss)] by Dormand-Prince on the
// offset-1 sector.
std::vector<std::complex<double>> two_time_correlation_exact(
    const Liouvillian& L, const ExactSteadyState& ss, int p, int q,
    const std::vector<double>& grid, double rtol = 1e-9);

// Random Hermitian operator in OperatorSpace layout supported on photon
// labels <= n_max - 1, so truncated ladder products act exactly.
Eigen::VectorXcd random_test_operator(const OperatorSpace& space, std::uint64_t seed);

struct TermResidual {
  std::string term;
  double residual = 0.0;
  std::string worst;  // location of the largest residual
  bool diagnostic = false;  // reported but not part of the pass condition
};

struct StripeReport {
  std::uint64_t seed = 0;
  double tol = 1e-12;
  std::vector<TermResidual> terms;

  bool passed() const;
  // First breaching term, or empty.
  std::string failure() const;
};

// Applies every master-equation term to a random Hermitian test operator by
// brute force and compares each stripe coefficient with its closed form.
// Covers the per-term stripe contributions, the absorption cross terms on
// their own, the correlation-level contributions and the stripe bookkeeping
// identities. Requires M <= 2, N <= 4, n_max <= 3.
StripeReport verify_stripe_contributions(const ExactModel& model, std::uint64_t seed,
                                         double tol = 1e-12);

// M = 1 family sharing everything but the molecule count; per-molecule
// coupling is collective_coupling / N so the collective rates stay fixed.
struct SemiclassicalFamily {
  double detuning = 0.0;
  double absorption = 1.0;
  double emission = 1.0;
  double collective_coupling = 1.0;
  double pump = 0.5;  // per molecule
  double decay = 1.0;
  double loss = 1.0;
  int n_max = 12;

  ExactModel member(int molecules) const;
  bool operator==(const SemiclassicalFamily&) const = default;
};

struct LimitRow {
  int molecules = 0;
  double n_exact = 0.0;
  double n_semiclassical = 0.0;
  double population_discrepancy = 0.0;  // relative
  double rate_exact = 0.0;  // 1/tau of |c_00|, THz
  double rate_semiclassical = 0.0;
  double rate_discrepancy = 0.0;  // relative to the exact rate
  double cutoff_population = 0.0;
};

std::vector<LimitRow> verify_semiclassical_limit(const SemiclassicalFamily& family,
                                                 const std::vector<int>& molecules,
                                                 bool strict = false);

}  // namespace pbec
