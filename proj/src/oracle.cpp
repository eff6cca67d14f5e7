#include "pbec/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <sstream>

#include <Eigen/SparseLU>

#include "pbec/correlation.hpp"
#include "pbec/ode.hpp"
#include "pbec/semiclassical.hpp"

namespace pbec {

namespace {

using cd = std::complex<double>;

constexpr double kCutoffTolerance = 1e-6;
constexpr std::size_t kDenseSectorLimit = 512;

Factor a(int p) { return {Ladder::kAnnihilate, p}; }
Factor ad(int p) { return {Ladder::kCreate, p}; }
Factor sp(int i) { return {Ladder::kRaise, i}; }
Factor sm(int i) { return {Ladder::kLower, i}; }

bool excited(std::size_t s, int i) { return (s >> i) & 1u; }

Occupation shifted(Occupation n, int p, int by) {
  n[p] += by;
  return n;
}

std::string describe(const Occupation& occ, int modes) {
  std::string out = "(";
  for (int p = 0; p < modes; ++p) {
    if (p) out += ",";
    out += std::to_string(occ[p]);
  }
  return out + ")";
}

std::string bits(std::size_t s, int sites) {
  std::string out;
  for (int i = 0; i < sites; ++i) out += excited(s, i) ? '1' : '0';
  return out;
}

}  // namespace

int ExactModel::photon_states() const {
  int p = 1;
  for (int m = 0; m < modes; ++m) p *= n_max + 1;
  return p;
}

std::size_t ExactModel::dimension() const {
  return std::size_t(photon_states()) * spin_states();
}

std::size_t ExactModel::required_bytes() const {
  const std::size_t elements = std::size_t(photon_states()) * photon_states() * spin_states();
  // stored entries per column grow with the number of dissipator pairs
  const std::size_t per_column = 8 + 4 * std::size_t(sites) * (modes * modes + 1);
  return elements * per_column * (sizeof(cd) + sizeof(int));
}

void ExactModel::validate() const {
  if (modes < 1 || modes > 2) throw validation_error("exact model supports 1 or 2 modes");
  if (sites < 1 || sites > 10) throw validation_error("exact model supports 1 to 10 molecules");
  if (n_max < 1) throw validation_error("Fock cutoff n_max must be >= 1");
  if (detuning.size() != modes || absorption.size() != modes || emission.size() != modes) {
    throw validation_error("exact model: per-mode vectors must have " + std::to_string(modes) +
                           " entries");
  }
  if (mode_function.rows() != modes || mode_function.cols() != sites) {
    throw validation_error("exact model: mode_function must be modes x sites");
  }
  if (pump.size() != sites) throw validation_error("exact model: pump must have one rate per molecule");
  if (!(absorption.array() >= 0.0).all() || !(emission.array() >= 0.0).all()) {
    throw validation_error("exact model: absorption and emission rates must be >= 0");
  }
  if (!(pump.array() >= 0.0).all() || !(decay >= 0.0) || !(loss >= 0.0)) {
    throw validation_error("exact model: pump, decay and loss rates must be >= 0");
  }
  if (required_bytes() > memory_bound) {
    std::ostringstream msg;
    msg << "exact model needs about " << required_bytes() << " bytes for D = " << dimension()
        << ", memory bound is " << memory_bound;
    throw Error(ErrorKind::kResource, msg.str());
  }
}

SystemModel to_system_model(const ExactModel& model) {
  model.validate();
  std::vector<Eigen::MatrixXd> sites;
  for (int i = 0; i < model.sites; ++i) {
    const Eigen::VectorXd psi = model.mode_function.col(i);
    sites.push_back(psi * psi.transpose());
  }
  SystemModel out;
  out.detuning = model.detuning;
  out.absorption = model.absorption;
  out.emission = model.emission;
  out.overlap = overlap_from_sites(sites);
  out.site_weight = Eigen::VectorXd::Ones(model.sites);
  out.pump.pump = model.pump;
  out.pump.decay = model.decay;
  out.pump.loss = model.loss;
  out.validate();
  return out;
}

OperatorSpace::OperatorSpace(const ExactModel& model)
    : modes_(model.modes),
      n_max_(model.n_max),
      photons_(model.photon_states()),
      spins_(model.spin_states()) {}

int OperatorSpace::photon_index(const Occupation& occ) const {
  int index = 0;
  int stride = 1;
  for (int p = 0; p < modes_; ++p) {
    if (occ[p] < 0 || occ[p] > n_max_) return -1;
    index += occ[p] * stride;
    stride *= n_max_ + 1;
  }
  return index;
}

Occupation OperatorSpace::occupation(int photon) const {
  Occupation occ{0, 0};
  for (int p = 0; p < modes_; ++p) {
    occ[p] = photon % (n_max_ + 1);
    photon /= n_max_ + 1;
  }
  return occ;
}

int OperatorSpace::total(int photon) const {
  const Occupation occ = occupation(photon);
  return occ[0] + occ[1];
}

std::string term_name(TermKind kind) {
  switch (kind) {
    case TermKind::kCoherent: return "coherent";
    case TermKind::kCavityLoss: return "cavity loss";
    case TermKind::kPump: return "pump";
    case TermKind::kDecay: return "decay";
    case TermKind::kAbsorption: return "absorption";
    case TermKind::kAbsorptionConjugate: return "absorption h.c.";
    case TermKind::kEmission: return "emission";
    case TermKind::kEmissionConjugate: return "emission h.c.";
  }
  return "unknown";
}

namespace {

// Amplitude of mono |photon, spin>, updating the state in place; 0 when the
// product annihilates it (including raising past the cutoff).
double act_on(const OperatorSpace& space, const Monomial& mono, int& photon, std::size_t& spin) {
  double amp = 1.0;
  for (auto f = mono.rbegin(); f != mono.rend(); ++f) {
    switch (f->op) {
      case Ladder::kAnnihilate:
      case Ladder::kCreate: {
        int stride = 1;
        for (int p = 0; p < f->target; ++p) stride *= space.n_max() + 1;
        const int n = (photon / stride) % (space.n_max() + 1);
        if (f->op == Ladder::kAnnihilate) {
          if (n == 0) return 0.0;
          amp *= std::sqrt(double(n));
          photon -= stride;
        } else {
          if (n == space.n_max()) return 0.0;
          amp *= std::sqrt(double(n + 1));
          photon += stride;
        }
        break;
      }
      case Ladder::kRaise:
        if (excited(spin, f->target)) return 0.0;
        spin |= std::size_t{1} << f->target;
        break;
      case Ladder::kLower:
        if (!excited(spin, f->target)) return 0.0;
        spin &= ~(std::size_t{1} << f->target);
        break;
    }
  }
  return amp;
}

std::vector<LiouvillianTerm> build_terms(const ExactModel& md) {
  std::vector<LiouvillianTerm> terms;
  const cd I(0.0, 1.0);
  for (int p = 0; p < md.modes; ++p) {
    terms.push_back({TermKind::kCoherent, {ad(p), a(p)}, {}, -I * md.detuning[p]});
    terms.push_back({TermKind::kCoherent, {}, {ad(p), a(p)}, I * md.detuning[p]});
    if (md.loss > 0.0) {
      terms.push_back({TermKind::kCavityLoss, {a(p)}, {a(p)}, md.loss});
      terms.push_back({TermKind::kCavityLoss, {ad(p), a(p)}, {}, -0.5 * md.loss});
      terms.push_back({TermKind::kCavityLoss, {}, {ad(p), a(p)}, -0.5 * md.loss});
    }
  }
  for (int i = 0; i < md.sites; ++i) {
    const double up = md.pump[i];
    if (up > 0.0) {
      terms.push_back({TermKind::kPump, {sp(i)}, {sp(i)}, up});
      terms.push_back({TermKind::kPump, {sm(i), sp(i)}, {}, -0.5 * up});
      terms.push_back({TermKind::kPump, {}, {sm(i), sp(i)}, -0.5 * up});
    }
    if (md.decay > 0.0) {
      terms.push_back({TermKind::kDecay, {sm(i)}, {sm(i)}, md.decay});
      terms.push_back({TermKind::kDecay, {sp(i), sm(i)}, {}, -0.5 * md.decay});
      terms.push_back({TermKind::kDecay, {}, {sp(i), sm(i)}, -0.5 * md.decay});
    }
    const bool printed = md.convention == RateIndexConvention::kPrinted;
    for (int m = 0; m < md.modes; ++m) {      // created
      for (int mp = 0; mp < md.modes; ++mp) {  // annihilated
        const double psi = md.coupling(m, mp, i);
        // 1/2 Psi A [X rho, Y] + h.c. with X = a_mp s+, Y = a_m^dag s-
        const double c = 0.5 * psi * md.absorption[printed ? mp : m];
        if (c != 0.0) {
          const Monomial yx{ad(m), sm(i), a(mp), sp(i)};
          terms.push_back({TermKind::kAbsorption, {a(mp), sp(i)}, {sp(i), a(m)}, c, m, mp, i});
          terms.push_back({TermKind::kAbsorption, yx, {}, -c, m, mp, i});
          terms.push_back(
              {TermKind::kAbsorptionConjugate, {sp(i), a(m)}, {a(mp), sp(i)}, c, m, mp, i});
          terms.push_back({TermKind::kAbsorptionConjugate, {}, yx, -c, m, mp, i});
        }
        // 1/2 Psi E [X rho, Y] + h.c. with X = a_m^dag s-, Y = a_mp s+
        const double e = 0.5 * psi * md.emission[printed ? m : mp];
        if (e != 0.0) {
          const Monomial yx{a(mp), sp(i), ad(m), sm(i)};
          terms.push_back({TermKind::kEmission, {ad(m), sm(i)}, {sm(i), ad(mp)}, e, m, mp, i});
          terms.push_back({TermKind::kEmission, yx, {}, -e, m, mp, i});
          terms.push_back(
              {TermKind::kEmissionConjugate, {sm(i), ad(mp)}, {ad(m), sm(i)}, e, m, mp, i});
          terms.push_back({TermKind::kEmissionConjugate, {}, yx, -e, m, mp, i});
        }
      }
    }
  }
  return terms;
}

}  // namespace

Liouvillian::Liouvillian(const ExactModel& model)
    : model_((model.validate(), model)), space_(model), terms_(build_terms(model)) {}

template <class Emit>
void Liouvillian::act(std::size_t element, const LiouvillianTerm& term, Emit&& emit) const {
  const std::size_t P = space_.photon_states();
  int nu = int(element % P);
  int n = int((element / P) % P);
  const std::size_t s = element / (P * P);
  std::size_t s_left = s;
  std::size_t s_right = s;
  const double left = act_on(space_, term.left, nu, s_left);
  if (left == 0.0) return;
  const double right = act_on(space_, term.right_adjoint, n, s_right);
  if (right == 0.0) return;
  if (s_left != s_right) throw contract_error("Liouvillian term leaves the spin-diagonal space");
  emit(space_.index(nu, n, s_left), term.coef * (left * right));
}

Eigen::VectorXcd Liouvillian::apply(const Eigen::VectorXcd& x, const TermFilter& filter) const {
  if (std::size_t(x.size()) != space_.size()) throw contract_error("operator has wrong size");
  Eigen::VectorXcd y = Eigen::VectorXcd::Zero(x.size());
  for (const auto& term : terms_) {
    if (filter && !filter(term)) continue;
    for (std::size_t e = 0; e < space_.size(); ++e) {
      const cd v = x[Eigen::Index(e)];
      if (v == 0.0) continue;
      act(e, term, [&](std::size_t target, cd value) { y[Eigen::Index(target)] += value * v; });
    }
  }
  return y;
}

std::vector<std::size_t> Liouvillian::sector(int offset) const {
  std::vector<std::size_t> out;
  const int P = space_.photon_states();
  for (std::size_t s = 0; s < space_.spin_states(); ++s) {
    for (int n = 0; n < P; ++n) {
      for (int nu = 0; nu < P; ++nu) {
        if (space_.total(n) - space_.total(nu) == offset) out.push_back(space_.index(nu, n, s));
      }
    }
  }
  return out;
}

Eigen::SparseMatrix<cd> Liouvillian::sector_matrix(const std::vector<std::size_t>& elements) const {
  std::vector<int> position(space_.size(), -1);
  for (std::size_t j = 0; j < elements.size(); ++j) position[elements[j]] = int(j);
  std::vector<Eigen::Triplet<cd>> triplets;
  triplets.reserve(elements.size() * 16);
  for (std::size_t j = 0; j < elements.size(); ++j) {
    for (const auto& term : terms_) {
      act(elements[j], term, [&](std::size_t target, cd value) {
        if (position[target] < 0) throw contract_error("Liouvillian does not preserve the sector");
        triplets.emplace_back(position[target], int(j), value);
      });
    }
  }
  Eigen::SparseMatrix<cd> m(Eigen::Index(elements.size()), Eigen::Index(elements.size()));
  m.setFromTriplets(triplets.begin(), triplets.end());
  return m;
}

cd trace(const OperatorSpace& space, const Eigen::VectorXcd& x) {
  cd sum = 0.0;
  for (std::size_t s = 0; s < space.spin_states(); ++s) {
    for (int n = 0; n < space.photon_states(); ++n) sum += x[Eigen::Index(space.index(n, n, s))];
  }
  return sum;
}

Eigen::VectorXcd adjoint(const OperatorSpace& space, const Eigen::VectorXcd& x) {
  Eigen::VectorXcd y(x.size());
  const int P = space.photon_states();
  for (std::size_t s = 0; s < space.spin_states(); ++s) {
    for (int n = 0; n < P; ++n) {
      for (int nu = 0; nu < P; ++nu) {
        y[Eigen::Index(space.index(nu, n, s))] = std::conj(x[Eigen::Index(space.index(n, nu, s))]);
      }
    }
  }
  return y;
}

Eigen::VectorXcd annihilate(const OperatorSpace& space, int q, const Eigen::VectorXcd& x) {
  Eigen::VectorXcd y = Eigen::VectorXcd::Zero(x.size());
  const int P = space.photon_states();
  for (std::size_t s = 0; s < space.spin_states(); ++s) {
    for (int n = 0; n < P; ++n) {
      for (int nu = 0; nu < P; ++nu) {
        const Occupation occ = space.occupation(nu);
        const int up = space.photon_index(shifted(occ, q, 1));
        if (up < 0) continue;
        y[Eigen::Index(space.index(nu, n, s))] =
            std::sqrt(double(occ[q] + 1)) * x[Eigen::Index(space.index(up, n, s))];
      }
    }
  }
  return y;
}

cd creation_trace(const OperatorSpace& space, int p, const Eigen::VectorXcd& x) {
  cd sum = 0.0;
  for (std::size_t s = 0; s < space.spin_states(); ++s) {
    for (int n = 0; n < space.photon_states(); ++n) {
      const Occupation occ = space.occupation(n);
      if (occ[p] == 0) continue;
      const int nu = space.photon_index(shifted(occ, p, -1));
      sum += std::sqrt(double(occ[p])) * x[Eigen::Index(space.index(nu, n, s))];
    }
  }
  return sum;
}

Eigen::MatrixXcd ExactSteadyState::photons(const OperatorSpace& space) const {
  const int M = space.modes();
  Eigen::MatrixXcd n = Eigen::MatrixXcd::Zero(M, M);
  for (int p = 0; p < M; ++p) {
    for (int q = 0; q < M; ++q) {
      const Monomial op{ad(p), a(q)};
      for (std::size_t s = 0; s < space.spin_states(); ++s) {
        for (int from = 0; from < space.photon_states(); ++from) {
          int to = from;
          std::size_t spin = s;
          const double amp = act_on(space, op, to, spin);
          // Tr[O rho] = sum <from|rho|to> <to|O|from>
          if (amp != 0.0) n(p, q) += amp * rho[Eigen::Index(space.index(from, to, s))];
        }
      }
    }
  }
  return n;
}

Eigen::VectorXd ExactSteadyState::excitation(const OperatorSpace& space) const {
  int sites = 0;
  while ((std::size_t{1} << sites) < space.spin_states()) ++sites;
  Eigen::VectorXd f = Eigen::VectorXd::Zero(sites);
  for (std::size_t s = 0; s < space.spin_states(); ++s) {
    double pop = 0.0;
    for (int n = 0; n < space.photon_states(); ++n) pop += rho[Eigen::Index(space.index(n, n, s))].real();
    for (int i = 0; i < sites; ++i) {
      if (excited(s, i)) f[i] += pop;
    }
  }
  return f;
}

ExactSteadyState steady_state_exact(const Liouvillian& L, bool strict) {
  const OperatorSpace& space = L.space();
  const std::vector<std::size_t> elements = L.sector(0);
  const Eigen::SparseMatrix<cd> A = L.sector_matrix(elements);
  const Eigen::Index dim = A.rows();
  Eigen::VectorXcd v;

  if (std::size_t(dim) <= kDenseSectorLimit) {
    const Eigen::MatrixXcd dense(A);
    Eigen::BDCSVD<Eigen::MatrixXcd> svd(dense, Eigen::ComputeFullV);
    const Eigen::VectorXd sigma = svd.singularValues();
    const double cut = 1e-10 * std::max(sigma[0], 1e-300);
    const Eigen::Index null = (sigma.array() <= cut).count();
    if (null > 1) {
      throw contract_error("steady state is degenerate: null space of dimension " +
                           std::to_string(null) + " (disconnected sectors)");
    }
    v = svd.matrixV().col(dim - 1);
  } else {
    // shifted inverse iteration around 0 from two random starts; different
    // limits mean the null space is not one-dimensional
    double scale = 0.0;
    for (int k = 0; k < A.outerSize(); ++k) {
      double col = 0.0;
      for (Eigen::SparseMatrix<cd>::InnerIterator it(A, k); it; ++it) col += std::abs(it.value());
      scale = std::max(scale, col);
    }
    Eigen::SparseMatrix<cd> shifted_matrix = A;
    Eigen::SparseMatrix<cd> identity(dim, dim);
    identity.setIdentity();
    shifted_matrix -= (-1e-10 * scale) * identity;
    Eigen::SparseLU<Eigen::SparseMatrix<cd>> lu;
    lu.compute(shifted_matrix);
    if (lu.info() != Eigen::Success) throw contract_error("steady state: sparse factorization failed");
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> uni(0.5, 1.5);
    std::vector<Eigen::VectorXcd> limits;
    for (int start = 0; start < 2; ++start) {
      Eigen::VectorXcd w(dim);
      for (Eigen::Index j = 0; j < dim; ++j) w[j] = uni(rng);
      for (int it = 0; it < 50; ++it) {
        Eigen::VectorXcd next = lu.solve(w);
        next /= next.norm();
        const double change = std::min((next - w).norm(), (next + w).norm());
        w = std::move(next);
        if ((A * w).cwiseAbs().maxCoeff() <= 1e-13 * scale && change < 1e-12) break;
      }
      if (!w.allFinite()) throw contract_error("steady state: inverse iteration diverged");
      limits.push_back(w / w.sum());
    }
    if ((limits[0] - limits[1]).cwiseAbs().maxCoeff() > 1e-6 * limits[0].cwiseAbs().maxCoeff()) {
      throw contract_error("steady state is degenerate: inverse iteration from different starts "
                           "reaches different null vectors (disconnected sectors)");
    }
    v = limits[0];
  }

  ExactSteadyState ss;
  ss.rho = Eigen::VectorXcd::Zero(Eigen::Index(space.size()));
  for (std::size_t j = 0; j < elements.size(); ++j) ss.rho[Eigen::Index(elements[j])] = v[Eigen::Index(j)];
  const cd tr = trace(space, ss.rho);
  if (std::abs(tr) < 1e-300) throw contract_error("steady state has zero trace");
  ss.rho /= tr;
  ss.residual = (A * v / tr).cwiseAbs().maxCoeff();

  const Eigen::VectorXcd dag = adjoint(space, ss.rho);
  ss.hermiticity_defect = (ss.rho - dag).cwiseAbs().maxCoeff();
  ss.rho = 0.5 * (ss.rho + dag);

  const int P = space.photon_states();
  ss.min_eigenvalue = 1.0;
  for (std::size_t s = 0; s < space.spin_states(); ++s) {
    Eigen::MatrixXcd block(P, P);
    for (int n = 0; n < P; ++n) {
      for (int nu = 0; nu < P; ++nu) block(nu, n) = ss.rho[Eigen::Index(space.index(nu, n, s))];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(block, Eigen::EigenvaluesOnly);
    ss.min_eigenvalue = std::min(ss.min_eigenvalue, eig.eigenvalues().minCoeff());
    for (int n = 0; n < P; ++n) {
      const Occupation occ = space.occupation(n);
      bool edge = false;
      for (int p = 0; p < space.modes(); ++p) edge = edge || occ[p] == space.n_max();
      if (edge) ss.cutoff_population += block(n, n).real();
    }
  }
  if (ss.hermiticity_defect > 1e-10) {
    throw Error(ErrorKind::kVerification, "exact steady state is not Hermitian: defect " +
                                              std::to_string(ss.hermiticity_defect));
  }
  if (ss.min_eigenvalue < -1e-9) {
    throw Error(ErrorKind::kVerification, "exact steady state is not positive: eigenvalue " +
                                              std::to_string(ss.min_eigenvalue));
  }
  if (ss.cutoff_population > kCutoffTolerance) {
    std::ostringstream msg;
    msg << "Fock cutoff n_max = " << space.n_max() << " too small: population "
        << ss.cutoff_population << " at the cutoff";
    if (strict) throw Error(ErrorKind::kTruncation, msg.str());
    ss.warnings.push_back(msg.str());
  }
  return ss;
}

std::vector<cd> two_time_correlation_exact(const Liouvillian& L, const ExactSteadyState& ss,
                                           int p, int q, const std::vector<double>& grid,
                                           double rtol) {
  const OperatorSpace& space = L.space();
  if (p < 0 || q < 0 || p >= space.modes() || q >= space.modes()) {
    throw contract_error("two_time_correlation_exact: mode index out of range");
  }
  if (grid.empty() || grid.front() != 0.0) throw contract_error("time grid must start at t = 0");
  const std::vector<std::size_t> elements = L.sector(1);
  const Eigen::SparseMatrix<cd> A = L.sector_matrix(elements);
  const Eigen::VectorXcd full = annihilate(space, q, ss.rho);

  const int P = space.photon_states();
  Eigen::VectorXcd y0(Eigen::Index(elements.size()));
  Eigen::VectorXd weight = Eigen::VectorXd::Zero(Eigen::Index(elements.size()));
  for (std::size_t j = 0; j < elements.size(); ++j) {
    const std::size_t e = elements[j];
    y0[Eigen::Index(j)] = full[Eigen::Index(e)];
    const int nu = int(e % P);
    const int n = int((e / P) % P);
    const Occupation occ = space.occupation(n);
    if (occ[p] > 0 && space.photon_index(shifted(occ, p, -1)) == nu) {
      weight[Eigen::Index(j)] = std::sqrt(double(occ[p]));
    }
  }

  std::vector<cd> out(grid.size());
  if (y0.cwiseAbs().maxCoeff() == 0.0) return out;
  ode::Options opt;
  opt.rtol = rtol;
  opt.atol = rtol * y0.cwiseAbs().maxCoeff();
  ode::dopri5(
      [&](double, const Eigen::VectorXcd& y) -> Eigen::VectorXcd { return A * y; }, y0,
      std::span<const double>(grid), opt,
      [&](std::size_t k, double, const Eigen::VectorXcd& y) { out[k] = weight.dot(y); });
  return out;
}

Eigen::VectorXcd random_test_operator(const OperatorSpace& space, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  Eigen::VectorXcd x = Eigen::VectorXcd::Zero(Eigen::Index(space.size()));
  const int P = space.photon_states();
  auto inside = [&](int photon) {
    const Occupation occ = space.occupation(photon);
    for (int p = 0; p < space.modes(); ++p) {
      if (occ[p] > space.n_max() - 1) return false;
    }
    return true;
  };
  for (std::size_t s = 0; s < space.spin_states(); ++s) {
    for (int n = 0; n < P; ++n) {
      if (!inside(n)) continue;
      for (int nu = 0; nu <= n; ++nu) {
        if (!inside(nu)) continue;
        const double re = gauss(rng);
        const double im = nu == n ? 0.0 : gauss(rng);
        x[Eigen::Index(space.index(nu, n, s))] = {re, im};
        x[Eigen::Index(space.index(n, nu, s))] = {re, -im};
      }
    }
  }
  return x;
}

bool StripeReport::passed() const { return failure().empty(); }

std::string StripeReport::failure() const {
  for (const auto& t : terms) {
    if (!t.diagnostic && !(t.residual <= tol)) {
      std::ostringstream msg;
      msg << t.term << ": residual " << t.residual << " > " << tol << " at " << t.worst
          << " (seed " << seed << ")";
      return msg.str();
    }
  }
  return {};
}

namespace {

// X^k_{n,s} = <n - k, s| X |n, s>, zero outside the truncated space.
struct StripeView {
  const OperatorSpace& space;
  const Eigen::VectorXcd& x;

  cd operator()(const Occupation& k, const Occupation& n, std::size_t s) const {
    Occupation nu{0, 0};
    for (int p = 0; p < space.modes(); ++p) nu[p] = n[p] - k[p];
    const int i = space.photon_index(nu);
    const int j = space.photon_index(n);
    if (i < 0 || j < 0) return 0.0;
    return x[Eigen::Index(space.index(i, j, s))];
  }
};

using PairFilter = std::function<bool(int created, int annihilated)>;

double root(double v) { return std::sqrt(std::max(0.0, v)); }

// Closed-form stripe contribution of one kind of term at (k, n, s). Rates
// follow the printed index convention. `printed_c2` swaps in the square-root
// factor of the absorption loss term exactly as printed.
cd closed_form(TermKind kind, const ExactModel& md, const StripeView& X, const Occupation& k,
               const Occupation& n, std::size_t s, const PairFilter& pair, bool printed_c2) {
  const int M = md.modes;
  const int N = md.sites;
  cd sum = 0.0;
  switch (kind) {
    case TermKind::kCoherent: {
      double phase = 0.0;
      for (int m = 0; m < M; ++m) phase += md.detuning[m] * k[m];
      return cd(0.0, phase) * X(k, n, s);
    }
    case TermKind::kCavityLoss:
      for (int m = 0; m < M; ++m) {
        const double c0 = root((n[m] - k[m] + 1.0) * (n[m] + 1.0));
        sum += md.loss * (c0 * X(k, shifted(n, m, 1), s) - (n[m] - 0.5 * k[m]) * X(k, n, s));
      }
      return sum;
    case TermKind::kPump:
      for (int i = 0; i < N; ++i) {
        if (excited(s, i)) {
          sum += md.pump[i] * X(k, n, s & ~(std::size_t{1} << i));
        } else {
          sum -= md.pump[i] * X(k, n, s);
        }
      }
      return sum;
    case TermKind::kDecay:
      for (int i = 0; i < N; ++i) {
        if (excited(s, i)) {
          sum -= md.decay * X(k, n, s);
        } else {
          sum += md.decay * X(k, n, s | (std::size_t{1} << i));
        }
      }
      return sum;
    default:
      break;
  }

  for (int m = 0; m < M; ++m) {      // created
    for (int mp = 0; mp < M; ++mp) {  // annihilated
      if (pair && !pair(m, mp)) continue;
      const double same = m == mp ? 1.0 : 0.0;
      cd gain = 0.0;
      cd loss = 0.0;
      if (kind == TermKind::kAbsorption || kind == TermKind::kAbsorptionConjugate) {
        const bool direct = kind == TermKind::kAbsorption;
        // stripe k - k_m' + k_m (direct) or k - k_m + k_m' (conjugate)
        const Occupation kk = direct ? shifted(shifted(k, mp, -1), m, 1)
                                     : shifted(shifted(k, m, -1), mp, 1);
        const Occupation n_gain = direct ? shifted(n, m, 1) : shifted(n, mp, 1);
        const Occupation n_loss = direct ? n : shifted(shifted(n, mp, 1), m, -1);
        double c1 = 0.0;
        double c2 = 0.0;
        if (direct) {
          c1 = root((n[mp] - k[mp] + 1.0) * (n[m] + 1.0));
          c2 = printed_c2 ? root((n[m] - k[m] + 1.0 - same) * (n[mp] - k[mp]))
                          : root((n[mp] - k[mp] + 1.0 - same) * (n[m] - k[m]));
        } else {
          c1 = root((n[m] - k[m] + 1.0) * (n[mp] + 1.0));
          c2 = root((n[mp] + 1.0 - same) * n[m]);
        }
        for (int i = 0; i < N; ++i) {
          const double psi = md.coupling(m, mp, i);
          if (excited(s, i)) {
            gain += psi * X(kk, n_gain, s & ~(std::size_t{1} << i));
          } else {
            loss += psi * X(kk, n_loss, s);
          }
        }
        sum += 0.5 * md.absorption[mp] * (c1 * gain - c2 * loss);
      } else {
        const int u = m;
        const int v = mp;
        const bool direct = kind == TermKind::kEmission;
        const Occupation kk = direct ? shifted(shifted(k, u, 1), v, -1)
                                     : shifted(shifted(k, v, 1), u, -1);
        const Occupation n_gain = direct ? shifted(n, v, -1) : shifted(n, u, -1);
        const Occupation n_loss = direct ? n : shifted(shifted(n, u, -1), v, 1);
        double c1 = 0.0;
        double c2 = 0.0;
        if (direct) {
          c1 = root((n[u] - k[u]) * double(n[v]));
          c2 = root((n[u] - k[u] + same) * (n[v] - k[v] + 1.0));
        } else {
          c1 = root((n[v] - k[v]) * double(n[u]));
          c2 = root((n[u] + same) * (n[v] + 1.0));
        }
        for (int i = 0; i < N; ++i) {
          const double psi = md.coupling(u, v, i);
          if (excited(s, i)) {
            loss += psi * X(kk, n_loss, s);
          } else {
            gain += psi * X(kk, n_gain, s | (std::size_t{1} << i));
          }
        }
        sum += 0.5 * md.emission[u] * (c1 * gain - c2 * loss);
      }
    }
  }
  return sum;
}

struct Worst {
  double residual = 0.0;
  std::string where;
};

}  // namespace

StripeReport verify_stripe_contributions(const ExactModel& model, std::uint64_t seed, double tol) {
  if (model.modes > 2 || model.sites > 4 || model.n_max > 3) {
    throw contract_error("stripe verification needs M <= 2, N <= 4, n_max <= 3");
  }
  const Liouvillian L(model);
  const OperatorSpace& space = L.space();
  const Eigen::VectorXcd x = random_test_operator(space, seed);
  const StripeView view{space, x};
  const int P = space.photon_states();
  const int M = model.modes;

  StripeReport report;
  report.seed = seed;
  report.tol = tol;

  auto compare = [&](const std::string& name, TermKind kind, const PairFilter& pair,
                     bool printed_c2, const std::vector<TermKind>& brute_kinds) {
    const Eigen::VectorXcd brute = L.apply(x, [&](const LiouvillianTerm& t) {
      if (std::find(brute_kinds.begin(), brute_kinds.end(), t.kind) == brute_kinds.end()) {
        return false;
      }
      return !pair || t.created < 0 || pair(t.created, t.annihilated);
    });
    Worst worst;
    for (std::size_t s = 0; s < space.spin_states(); ++s) {
      for (int n = 0; n < P; ++n) {
        const Occupation on = space.occupation(n);
        for (int nu = 0; nu < P; ++nu) {
          const Occupation onu = space.occupation(nu);
          const Occupation k{on[0] - onu[0], on[1] - onu[1]};
          const cd expected = closed_form(kind, model, view, k, on, s, pair, printed_c2);
          const double r = std::abs(brute[Eigen::Index(space.index(nu, n, s))] - expected);
          if (r > worst.residual) {
            worst.residual = r;
            worst.where = "k=" + describe(k, M) + " n=" + describe(on, M) + " s=" +
                          bits(s, model.sites);
          }
        }
      }
    }
    report.terms.push_back({name, worst.residual, worst.where, printed_c2});
  };

  for (TermKind kind : {TermKind::kCoherent, TermKind::kCavityLoss, TermKind::kPump,
                        TermKind::kDecay, TermKind::kAbsorption,
                        TermKind::kAbsorptionConjugate, TermKind::kEmission,
                        TermKind::kEmissionConjugate}) {
    compare(term_name(kind), kind, {}, false, {kind});
  }
  if (M > 1) {
    const PairFilter cross = [](int m, int mp) { return m != mp; };
    compare("absorption m != m'", TermKind::kAbsorption, cross, false, {TermKind::kAbsorption});
    compare("absorption h.c. m != m'", TermKind::kAbsorptionConjugate, cross, false,
            {TermKind::kAbsorptionConjugate});
    compare("emission m != m'", TermKind::kEmission, cross, false, {TermKind::kEmission});
    compare("emission h.c. m != m'", TermKind::kEmissionConjugate, cross, false,
            {TermKind::kEmissionConjugate});
  }
  // printed square-root factor, kept as a diagnostic
  compare("absorption (printed C2)", TermKind::kAbsorption, {}, true, {TermKind::kAbsorption});

  // contributions to d/dt Tr[a_p^dag X]
  auto brute_trace = [&](int p, std::initializer_list<TermKind> kinds) {
    const std::vector<TermKind> list(kinds);
    return creation_trace(space, p, L.apply(x, [&](const LiouvillianTerm& t) {
      return std::find(list.begin(), list.end(), t.kind) != list.end();
    }));
  };
  // Tr[a_m^dag Pi X] with Pi projecting molecule i onto state `up`
  auto projected_trace = [&](int m, int i, bool up) {
    cd sum = 0.0;
    for (std::size_t s = 0; s < space.spin_states(); ++s) {
      if (excited(s, i) != up) continue;
      for (int n = 0; n < P; ++n) {
        const Occupation occ = space.occupation(n);
        if (occ[m] == 0) continue;
        const int nu = space.photon_index(shifted(occ, m, -1));
        sum += std::sqrt(double(occ[m])) * x[Eigen::Index(space.index(nu, n, s))];
      }
    }
    return sum;
  };
  Worst coh, cav, mol, abs_, emi;
  auto note = [&](Worst& w, int p, cd got, cd want) {
    const double r = std::abs(got - want);
    if (r > w.residual) w = {r, "p=" + std::to_string(p)};
  };
  for (int p = 0; p < M; ++p) {
    const cd c = creation_trace(space, p, x);
    note(coh, p, brute_trace(p, {TermKind::kCoherent}), cd(0.0, model.detuning[p]) * c);
    note(cav, p, brute_trace(p, {TermKind::kCavityLoss}), -0.5 * model.loss * c);
    note(mol, p, brute_trace(p, {TermKind::kPump, TermKind::kDecay}), 0.0);
    cd absorbed = 0.0;
    cd emitted = 0.0;
    for (int m = 0; m < M; ++m) {
      for (int i = 0; i < model.sites; ++i) {
        absorbed -= 0.5 * model.absorption[m] * model.coupling(p, m, i) * projected_trace(m, i, false);
        emitted += 0.5 * model.emission[m] * model.coupling(m, p, i) * projected_trace(m, i, true);
      }
    }
    note(abs_, p, brute_trace(p, {TermKind::kAbsorption, TermKind::kAbsorptionConjugate}), absorbed);
    note(emi, p, brute_trace(p, {TermKind::kEmission, TermKind::kEmissionConjugate}), emitted);
  }
  report.terms.push_back({"correlation: coherent", coh.residual, coh.where});
  report.terms.push_back({"correlation: cavity loss", cav.residual, cav.where});
  report.terms.push_back({"correlation: pump and decay", mol.residual, mol.where});
  report.terms.push_back({"correlation: absorption", abs_.residual, abs_.where});
  report.terms.push_back({"correlation: emission", emi.residual, emi.where});

  // bookkeeping identities
  const Eigen::VectorXcd lx = L.apply(x);
  report.terms.push_back({"trace preservation", std::abs(trace(space, lx)), "Tr L(X)"});
  report.terms.push_back({"hermiticity preservation",
                          (adjoint(space, lx) - L.apply(adjoint(space, x))).cwiseAbs().maxCoeff(),
                          "L(X)^dag - L(X^dag)"});
  Worst conj;
  Worst init;
  for (std::size_t s = 0; s < space.spin_states(); ++s) {
    for (int n = 0; n < P; ++n) {
      const Occupation on = space.occupation(n);
      for (int nu = 0; nu < P; ++nu) {
        const Occupation onu = space.occupation(nu);
        const Occupation k{on[0] - onu[0], on[1] - onu[1]};
        const Occupation minus_k{-k[0], -k[1]};
        const double r = std::abs(view(minus_k, onu, s) - std::conj(view(k, on, s)));
        if (r > conj.residual) conj = {r, "k=" + describe(k, M) + " n=" + describe(on, M)};
      }
    }
  }
  for (int q = 0; q < M; ++q) {
    Eigen::VectorXcd moved = Eigen::VectorXcd::Zero(x.size());
    for (std::size_t e = 0; e < space.size(); ++e) {
      int nu = int(e % P);
      const int n = int((e / P) % P);
      std::size_t spin = e / (std::size_t(P) * P);
      const double amp = act_on(space, {a(q)}, nu, spin);
      if (amp != 0.0) moved[Eigen::Index(space.index(nu, n, spin))] += amp * x[Eigen::Index(e)];
    }
    const StripeView moved_view{space, moved};
    for (std::size_t s = 0; s < space.spin_states(); ++s) {
      for (int n = 0; n < P; ++n) {
        const Occupation on = space.occupation(n);
        for (int nu = 0; nu < P; ++nu) {
          const Occupation onu = space.occupation(nu);
          const Occupation k{on[0] - onu[0], on[1] - onu[1]};
          if (onu[q] + 1 > space.n_max()) continue;  // a_q X has no source there
          const cd want = std::sqrt(double(on[q] - k[q] + 1)) * view(shifted(k, q, -1), on, s);
          const double r = std::abs(moved_view(k, on, s) - want);
          if (r > init.residual) init = {r, "q=" + std::to_string(q) + " k=" + describe(k, M)};
        }
      }
    }
  }
  report.terms.push_back({"stripe conjugation", conj.residual, conj.where});
  report.terms.push_back({"initialization identity", init.residual, init.where});
  return report;
}

ExactModel SemiclassicalFamily::member(int molecules) const {
  ExactModel md;
  md.modes = 1;
  md.sites = molecules;
  md.n_max = n_max;
  md.detuning = Eigen::VectorXd::Constant(1, detuning);
  md.absorption = Eigen::VectorXd::Constant(1, absorption);
  md.emission = Eigen::VectorXd::Constant(1, emission);
  md.mode_function = Eigen::MatrixXd::Constant(1, molecules, std::sqrt(collective_coupling / molecules));
  md.pump = Eigen::VectorXd::Constant(molecules, pump);
  md.decay = decay;
  md.loss = loss;
  return md;
}

std::vector<LimitRow> verify_semiclassical_limit(const SemiclassicalFamily& family,
                                                 const std::vector<int>& molecules,
                                                 bool strict) {
  std::vector<LimitRow> rows;
  for (int count : molecules) {
    const ExactModel md = family.member(count);
    LimitRow row;
    row.molecules = count;

    const SystemModel sc = to_system_model(md);
    const SteadyState mean_field = steady_state(sc);
    const CorrelationGenerator gen = build_generator(mean_field, sc);
    row.n_semiclassical = mean_field.state.photons(0, 0).real();
    row.rate_semiclassical = -gen.matrix(0, 0).real();

    const Liouvillian L(md);
    const ExactSteadyState ss = steady_state_exact(L, strict);
    row.n_exact = ss.photons(L.space())(0, 0).real();
    row.cutoff_population = ss.cutoff_population;

    // the exact decay is close to the mean-field one; 10 mean-field decay
    // times always contain the 1/e crossing
    const int samples = 401;
    const double end = 10.0 / row.rate_semiclassical;
    std::vector<double> grid(samples);
    for (int k = 0; k < samples; ++k) grid[k] = end * k / (samples - 1);
    const auto c = two_time_correlation_exact(L, ss, 0, 0, grid);
    row.rate_exact = 1.0 / coherence_time(grid, c).crossing;

    row.population_discrepancy = std::abs(row.n_exact - row.n_semiclassical) / row.n_exact;
    row.rate_discrepancy = std::abs(row.rate_exact - row.rate_semiclassical) / row.rate_exact;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace pbec
