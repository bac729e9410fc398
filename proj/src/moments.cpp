#include "occmom/moments.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace occmom {

MomentBasis::MomentBasis(std::size_t nvars, std::vector<std::size_t> vars, int degree)
    : nvars_(nvars), vars_(std::move(vars)), degree_(degree) {
  if (degree < 0) throw std::invalid_argument("basis degree must be non-negative");
  std::sort(vars_.begin(), vars_.end());
  if (std::adjacent_find(vars_.begin(), vars_.end()) != vars_.end())
    throw std::invalid_argument("basis variables must be distinct");
  for (auto v : vars_) {
    if (v >= nvars) throw std::out_of_range("basis variable out of range");
  }
  monomials_ = monomials_up_to(nvars, vars_, degree);
  index_.reserve(monomials_.size());
  for (std::size_t i = 0; i < monomials_.size(); ++i) index_.emplace(monomials_[i], i);
}

std::optional<std::size_t> MomentBasis::find(const Monomial& m) const {
  auto it = index_.find(m);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t MomentBasis::index(const Monomial& m) const {
  auto idx = find(m);
  if (!idx) throw std::out_of_range("monomial outside the moment basis");
  return *idx;
}

MomentBasis basis(std::size_t nvars, std::vector<std::size_t> vars, int d) {
  return MomentBasis(nvars, std::move(vars), d);
}

std::size_t moment_index(const MomentBasis& b, const Monomial& m) { return b.index(m); }

std::size_t basis_size(std::size_t n, int d) {
  // C(n + d, d) computed incrementally, exact for the sizes used here.
  std::size_t r = 1;
  for (int k = 1; k <= d; ++k) r = r * (n + static_cast<std::size_t>(k)) / static_cast<std::size_t>(k);
  return r;
}

double moment(const DiracFactor& f, const Monomial& m) {
  double acc = 0.0;
  for (Eigen::Index k = 0; k < f.points.cols(); ++k) {
    double v = f.weights(k);
    for (std::size_t r = 0; r < f.variables.size(); ++r) {
      const int e = m[f.variables[r]];
      for (int i = 0; i < e; ++i) v *= f.points(static_cast<Eigen::Index>(r), k);
    }
    acc += v;
  }
  return acc;
}

double moment(const UniformFactor& f, const Monomial& m) {
  double v = 1.0;
  for (std::size_t r = 0; r < f.variables.size(); ++r) {
    const int e = m[f.variables[r]];
    if (e == 0) continue;
    const double a = f.box(static_cast<Eigen::Index>(r), 0);
    const double b = f.box(static_cast<Eigen::Index>(r), 1);
    v *= (std::pow(b, e + 1) - std::pow(a, e + 1)) / ((e + 1) * (b - a));
  }
  return v;
}

double known_moment(const BoundarySpec& b, const Monomial& m) {
  double v = 1.0;
  if (b.dirac) v *= moment(*b.dirac, m);
  if (b.uniform) v *= moment(*b.uniform, m);
  return v;
}

namespace {

template <typename Factor>
std::vector<double> moments_over(const Factor& f, const MomentBasis& b) {
  std::vector<double> y(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) y[i] = moment(f, b[i]);
  return y;
}

}  // namespace

std::vector<double> known_moments(const DiracFactor& f, const MomentBasis& b) { return moments_over(f, b); }
std::vector<double> known_moments(const UniformFactor& f, const MomentBasis& b) { return moments_over(f, b); }

std::vector<double> known_moments(const BoundarySpec& spec, const MomentBasis& b) {
  std::vector<double> y(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) y[i] = known_moment(spec, b[i]);
  return y;
}

Eigen::MatrixXd moment_matrix(const MomentBasis& full, const std::vector<double>& y, int order) {
  if (y.size() != full.size()) throw std::invalid_argument("moment vector does not match basis");
  if (2 * order > full.degree()) throw std::invalid_argument("moment matrix order exceeds truncation");
  const std::size_t n = basis_size(full.vars().size(), order);
  Eigen::MatrixXd M(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double v = y[full.index(full[i] * full[j])];
      M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      M(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
    }
  }
  return M;
}

const char* to_string(MeasureId id) {
  switch (id) {
    case MeasureId::kInitial:
      return "initial";
    case MeasureId::kFinal:
      return "final";
    case MeasureId::kTrajectory:
      return "trajectory";
  }
  return "?";
}

}  // namespace occmom
