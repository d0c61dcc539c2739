#include "mupscope/numerics/eigen.hpp"

#include <Eigen/Eigenvalues>
#include <glog/logging.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace mupscope::numerics {

bool EigResult::all_converged() const {
  return std::all_of(converged.begin(), converged.end(), [](bool c) { return c; });
}

void orthogonalize(Vector& x, const std::vector<Vector>& basis) {
  if (basis.empty()) return;
  for (int pass = 0; pass < 4; ++pass) {
    double worst = 0.0;
    for (const Vector& b : basis) {
      const double c = b.dot(x);
      x -= c * b;
      worst = std::max(worst, std::abs(c));
    }
    const double scale = std::max(1.0, x.norm());
    if (worst <= 1e-10 * scale) return;
  }
}

namespace {

Vector random_unit(Index dim, const std::vector<Vector>& found, RngStream& rng) {
  for (int attempt = 0; attempt < 8; ++attempt) {
    Vector v = rng.gaussian_vector(dim);
    orthogonalize(v, found);
    const double n = v.norm();
    if (n > 0.0) return v / n;
  }
  throw std::runtime_error("power iteration: could not draw a start vector outside the deflated space");
}

struct SingleResult {
  double value = 0.0;
  double rayleigh = 0.0;
  int iterations = 0;
  bool converged = false;
  Vector vec;
};

SingleResult iterate_one(const LinearOperator& apply, Index dim, const std::vector<Vector>& found,
                         double ref_scale, RngStream& rng, const PowerIterationOptions& opt) {
  SingleResult out;
  bool restarted = false;
  Vector v = random_unit(dim, found, rng);
  double prev = 0.0;
  bool have_prev = false;

  int it = 0;
  while (it < opt.max_iter) {
    ++it;
    Vector av = apply(v);
    if (av.size() != dim)
      throw std::invalid_argument("power iteration: operator returned length " +
                                  std::to_string(av.size()) + ", expected " + std::to_string(dim));
    if (!av.allFinite()) throw DivergenceError("power iteration: operator produced non-finite values");
    orthogonalize(av, found);

    const double rq = v.dot(av);
    const double norm = av.norm();
    const double est = opt.symmetric ? rq : norm;

    if (norm == 0.0) {
      if (!restarted) {
        restarted = true;
        v = random_unit(dim, found, rng);
        have_prev = false;
        continue;
      }
      out.value = 0.0;
      out.rayleigh = 0.0;
      out.converged = true;
      out.vec = v;
      out.iterations = it;
      return out;
    }

    out.value = est;
    out.rayleigh = rq;
    out.vec = av / norm;
    if (have_prev) {
      const double delta = std::abs(est - prev);
      if (delta == 0.0 || delta < opt.tol * std::abs(prev) || delta <= 1e-12 * ref_scale) {
        out.converged = true;
        out.iterations = it;
        return out;
      }
    }
    prev = est;
    have_prev = true;
    v = out.vec;
  }
  out.iterations = it;
  return out;
}

}  // namespace

EigResult power_iteration_top_k(const LinearOperator& apply, Index dim, int k, RngStream& rng,
                                const PowerIterationOptions& options) {
  if (k < 1) throw std::invalid_argument("power iteration: k must be >= 1");
  if (dim < k)
    throw std::invalid_argument("power iteration: dim " + std::to_string(dim) + " < k " +
                                std::to_string(k));
  if (options.max_iter < 1) throw std::invalid_argument("power iteration: max_iter must be >= 1");

  std::vector<Vector> found;
  std::vector<SingleResult> raw;
  double ref_scale = 0.0;
  for (int i = 0; i < k; ++i) {
    SingleResult r = iterate_one(apply, dim, found, ref_scale, rng, options);
    ref_scale = std::max(ref_scale, std::abs(r.value));
    found.push_back(r.vec);
    raw.push_back(std::move(r));
  }

  std::vector<std::size_t> order(raw.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return raw[a].value > raw[b].value; });

  EigResult res;
  for (std::size_t idx : order) {
    res.eigenvalues.push_back(raw[idx].value);
    res.iterations.push_back(raw[idx].iterations);
    res.converged.push_back(raw[idx].converged);
    res.rayleigh.push_back(raw[idx].rayleigh);
    res.eigenvectors.push_back(std::move(raw[idx].vec));
  }
  return res;
}

EigResult power_iteration_top_k(const LinearOperator& apply, Index dim, int k, int max_iter,
                                double tol, RngStream& rng) {
  PowerIterationOptions opt;
  opt.max_iter = max_iter;
  opt.tol = tol;
  return power_iteration_top_k(apply, dim, k, rng, opt);
}

EigResult dense_sym_eig(const Matrix& m, bool with_vectors) {
  if (m.rows() != m.cols())
    throw std::invalid_argument("dense_sym_eig: matrix is " + std::to_string(m.rows()) + "x" +
                                std::to_string(m.cols()) + ", expected square");
  EigResult res;
  if (m.rows() == 0) return res;

  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  if (asym > 1e-10) LOG(WARNING) << "dense_sym_eig: symmetrizing input with asymmetry " << asym;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(
      sym, with_vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw std::runtime_error("dense_sym_eig: solver failed");

  const Index n = sym.rows();
  for (Index i = n - 1; i >= 0; --i) {
    res.eigenvalues.push_back(solver.eigenvalues()[i]);
    res.rayleigh.push_back(solver.eigenvalues()[i]);
    res.iterations.push_back(1);
    res.converged.push_back(true);
    if (with_vectors) res.eigenvectors.emplace_back(solver.eigenvectors().col(i));
  }
  return res;
}

}  // namespace mupscope::numerics
