#include "voisurv/gam_smoother.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "voisurv/distributions.hpp"

namespace voisurv {
namespace {

bool is_constant(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [&](double v) { return v == x.front(); });
}

Eigen::MatrixXd row_kronecker(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.cols(); ++i) {
    for (Eigen::Index j = 0; j < b.cols(); ++j) out.col(i * b.cols() + j) = a.col(i).cwiseProduct(b.col(j));
  }
  return out;
}

Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

// Penalised least squares in the reduced QR space: min |f - R b|^2 + b' S(lambda) b.
class PenalisedProblem {
 public:
  PenalisedProblem(const Eigen::MatrixXd& X, std::span<const double> y, std::vector<Eigen::MatrixXd> penalties)
      : penalties_(std::move(penalties)), n_(static_cast<double>(X.rows())) {
    Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(X);
    const Eigen::Index p = X.cols();
    R_ = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
    const Eigen::VectorXd qty = qr.householderQ().transpose() * yv;
    f_ = qty.head(p);
    rss0_ = qty.tail(qty.size() - p).squaredNorm();
    M_ = R_.transpose() * R_;
    b_ = R_.transpose() * f_;
    // Scale each penalty to the size of the data term so log-lambda ranges are comparable.
    const double mnorm = M_.norm();
    for (auto& S : penalties_) {
      const double snorm = S.norm();
      if (snorm > 0.0) S *= mnorm / snorm;
    }
  }

  struct Eval {
    Eigen::VectorXd beta;
    Eigen::MatrixXd Ainv;
    double rss = 0.0;
    double edf = 0.0;
    double gcv = 0.0;
  };

  Eval evaluate(const std::vector<double>& log_lambda) const {
    Eigen::MatrixXd A = M_;
    for (std::size_t j = 0; j < penalties_.size(); ++j) A += std::exp(log_lambda[j]) * penalties_[j];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
    const Eigen::VectorXd& d = es.eigenvalues();
    const double floor = std::max(d.maxCoeff(), 0.0) * 1e-13;
    Eigen::VectorXd dinv(d.size());
    for (Eigen::Index i = 0; i < d.size(); ++i) dinv(i) = d(i) > floor ? 1.0 / d(i) : 0.0;
    Eval e;
    e.Ainv = es.eigenvectors() * dinv.asDiagonal() * es.eigenvectors().transpose();
    e.beta = e.Ainv * b_;
    e.edf = (e.Ainv * M_).trace();
    e.rss = rss0_ + (f_ - R_ * e.beta).squaredNorm();
    const double denom = n_ - e.edf;
    e.gcv = denom > 0.0 ? n_ * e.rss / (denom * denom) : std::numeric_limits<double>::infinity();
    return e;
  }

  std::size_t n_penalties() const { return penalties_.size(); }
  double n() const { return n_; }

 private:
  std::vector<Eigen::MatrixXd> penalties_;
  Eigen::MatrixXd R_, M_;
  Eigen::VectorXd f_, b_;
  double rss0_ = 0.0;
  double n_;
};

std::vector<double> minimise_gcv(const PenalisedProblem& prob, const SmootherOptions& opt) {
  const std::size_t m = prob.n_penalties();
  std::vector<double> rho(m, 0.0);
  if (m == 0) return rho;
  auto gcv_at = [&](std::size_t j, double v) {
    std::vector<double> r = rho;
    r[j] = v;
    return prob.evaluate(r).gcv;
  };
  const double lo = opt.log_lambda_min;
  const double hi = opt.log_lambda_max;
  double best = prob.evaluate(rho).gcv;
  constexpr int kGrid = 25;
  const double step = (hi - lo) / (kGrid - 1);
  const double golden = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int sweep = 0; sweep < 20; ++sweep) {
    const double before = best;
    for (std::size_t j = 0; j < m; ++j) {
      // Coarse scan to bracket the minimum, then golden-section refinement.
      int arg = 0;
      double gbest = std::numeric_limits<double>::infinity();
      for (int g = 0; g < kGrid; ++g) {
        const double v = gcv_at(j, lo + g * step);
        if (v < gbest) {
          gbest = v;
          arg = g;
        }
      }
      double a = lo + std::max(arg - 1, 0) * step;
      double b = lo + std::min(arg + 1, kGrid - 1) * step;
      double c = b - golden * (b - a);
      double d = a + golden * (b - a);
      double fc = gcv_at(j, c);
      double fd = gcv_at(j, d);
      while (b - a > 1e-4) {
        if (fc < fd) {
          b = d;
          d = c;
          fd = fc;
          c = b - golden * (b - a);
          fc = gcv_at(j, c);
        } else {
          a = c;
          c = d;
          fc = fd;
          d = a + golden * (b - a);
          fd = gcv_at(j, d);
        }
      }
      const double cand = 0.5 * (a + b);
      const double fcand = gcv_at(j, cand);
      // Keep the current value unless the search found something no worse.
      const double fcur = gcv_at(j, rho[j]);
      if (fcand <= fcur) {
        rho[j] = cand;
        best = fcand;
      } else {
        best = fcur;
      }
    }
    if (std::abs(before - best) <= 1e-12 * std::abs(best)) break;
  }
  return rho;
}

Eigen::MatrixXd symmetric_factor(const Eigen::MatrixXd& cov) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  const Eigen::VectorXd s = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * s.asDiagonal();
}

}  // namespace

std::vector<double> place_knots(std::span<const double> x, int k) {
  std::vector<double> u(x.begin(), x.end());
  std::sort(u.begin(), u.end());
  u.erase(std::unique(u.begin(), u.end()), u.end());
  const int n = static_cast<int>(u.size());
  k = std::min(k, n);
  std::vector<double> knots;
  if (k < 2) {
    if (n >= 1) knots.push_back(u.front());
    return knots;
  }
  for (int i = 0; i < k; ++i) {
    const double pos = static_cast<double>(n - 1) * i / (k - 1);
    const int lo = static_cast<int>(std::floor(pos));
    const int hi = std::min(lo + 1, n - 1);
    const double w = pos - lo;
    knots.push_back(i == k - 1 ? u.back() : (1.0 - w) * u[lo] + w * u[hi]);
  }
  return knots;
}

CrBasis make_cr_basis(std::vector<double> knots) {
  const int k = static_cast<int>(knots.size());
  if (k < 2) throw DomainError("a cubic regression spline needs at least 2 knots");
  for (int i = 1; i < k; ++i) {
    if (!(knots[i] > knots[i - 1])) throw DomainError("knots must be strictly increasing");
  }
  CrBasis basis;
  basis.knots = std::move(knots);
  basis.F = Eigen::MatrixXd::Zero(k, k);
  basis.penalty = Eigen::MatrixXd::Zero(k, k);
  if (k == 2) return basis;  // straight line, no curvature
  const auto& x = basis.knots;
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(k - 2, k);
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(k - 2, k - 2);
  for (int i = 0; i < k - 2; ++i) {
    const double h0 = x[i + 1] - x[i];
    const double h1 = x[i + 2] - x[i + 1];
    D(i, i) = 1.0 / h0;
    D(i, i + 1) = -1.0 / h0 - 1.0 / h1;
    D(i, i + 2) = 1.0 / h1;
    B(i, i) = (h0 + h1) / 3.0;
    if (i + 1 < k - 2) {
      B(i, i + 1) = h1 / 6.0;
      B(i + 1, i) = h1 / 6.0;
    }
  }
  const Eigen::MatrixXd BinvD = B.ldlt().solve(D);
  basis.F.middleRows(1, k - 2) = BinvD;
  basis.penalty = D.transpose() * BinvD;
  basis.penalty = 0.5 * (basis.penalty + basis.penalty.transpose());
  return basis;
}

Eigen::MatrixXd CrBasis::evaluate(std::span<const double> xs) const {
  const int k = size();
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(xs.size()), k);
  for (std::size_t r = 0; r < xs.size(); ++r) {
    const double v = xs[r];
    const auto row = static_cast<Eigen::Index>(r);
    if (v < knots.front() || v > knots.back()) {
      // Linear continuation using the end slope of the natural spline.
      const bool left = v < knots.front();
      const int j = left ? 0 : k - 2;
      const double h = knots[j + 1] - knots[j];
      Eigen::RowVectorXd slope = Eigen::RowVectorXd::Zero(k);
      slope(j) -= 1.0 / h;
      slope(j + 1) += 1.0 / h;
      if (left) {
        slope -= h / 6.0 * (2.0 * F.row(j) + F.row(j + 1));
        X.row(row) = slope * (v - knots.front());
        X(row, 0) += 1.0;
      } else {
        slope += h / 6.0 * (F.row(j) + 2.0 * F.row(j + 1));
        X.row(row) = slope * (v - knots.back());
        X(row, k - 1) += 1.0;
      }
      continue;
    }
    const auto it = std::upper_bound(knots.begin(), knots.end(), v);
    int j = static_cast<int>(it - knots.begin()) - 1;
    j = std::clamp(j, 0, k - 2);
    const double h = knots[j + 1] - knots[j];
    const double am = (knots[j + 1] - v) / h;
    const double ap = (v - knots[j]) / h;
    const double cm = (std::pow(knots[j + 1] - v, 3) / h - h * (knots[j + 1] - v)) / 6.0;
    const double cp = (std::pow(v - knots[j], 3) / h - h * (v - knots[j])) / 6.0;
    X.row(row) = cm * F.row(j) + cp * F.row(j + 1);
    X(row, j) += am;
    X(row, j + 1) += ap;
  }
  return X;
}

Eigen::MatrixXd SmoothFit::simulate_fitted(const Eigen::MatrixXd& z) const {
  Eigen::MatrixXd coefs = coef_chol * z;
  coefs.colwise() += coef;
  return design * coefs;
}

SmoothFit fit_tensor_spline(std::span<const double> x1, std::span<const double> x2,
                            std::span<const double> response, const SmootherOptions& options) {
  const std::size_t K = response.size();
  if (x1.size() != K || x2.size() != K) throw DomainError("covariates and response differ in length");
  if (K < 3) throw DomainError("too few observations for a smooth");
  for (std::size_t i = 0; i < K; ++i) {
    if (!std::isfinite(x1[i]) || !std::isfinite(x2[i]) || !std::isfinite(response[i])) {
      throw DomainError("non-finite regression input");
    }
  }
  const double n = static_cast<double>(K);
  const double ybar = std::accumulate(response.begin(), response.end(), 0.0) / n;

  SmoothFit fit;
  const bool c1 = is_constant(x1);
  const bool c2 = is_constant(x2);
  if (c1 && c2) {
    fit.degenerate = true;
    fit.dimension = 0;
    fit.fitted.assign(K, ybar);
    fit.coef = Eigen::VectorXd::Constant(1, ybar);
    fit.design = Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(K), 1);
    double ss = 0.0;
    for (double v : response) ss += (v - ybar) * (v - ybar);
    fit.sigma2 = ss / (n - 1.0);
    fit.coef_chol = Eigen::MatrixXd::Constant(1, 1, std::sqrt(fit.sigma2 / n));
    fit.edf = 1.0;
    fit.gcv = n * ss / ((n - 1.0) * (n - 1.0));
    return fit;
  }

  Eigen::MatrixXd X;
  std::vector<Eigen::MatrixXd> S;
  if (!c1 && !c2) {
    const CrBasis b1 = make_cr_basis(place_knots(x1, options.basis_dimension));
    const CrBasis b2 = make_cr_basis(place_knots(x2, options.basis_dimension));
    X = row_kronecker(b1.evaluate(x1), b2.evaluate(x2));
    S.push_back(kron(b1.penalty, Eigen::MatrixXd::Identity(b2.size(), b2.size())));
    S.push_back(kron(Eigen::MatrixXd::Identity(b1.size(), b1.size()), b2.penalty));
    fit.dimension = 2;
  } else {
    const auto x = c1 ? x2 : x1;
    const CrBasis b = make_cr_basis(place_knots(x, options.basis_dimension));
    X = b.evaluate(x);
    S.push_back(b.penalty);
    fit.dimension = 1;
  }
  // Drop penalties that are identically zero (two-knot margins).
  std::erase_if(S, [](const Eigen::MatrixXd& m) { return m.norm() == 0.0; });

  // Sum-to-zero constraint: reparameterise onto the null space of the column sums.
  const Eigen::VectorXd colsum = X.colwise().sum().transpose();
  Eigen::HouseholderQR<Eigen::MatrixXd> cqr(colsum);
  const Eigen::MatrixXd Q = cqr.householderQ();
  const Eigen::MatrixXd Z = Q.rightCols(Q.cols() - 1);
  const Eigen::Index p = Z.cols() + 1;
  Eigen::MatrixXd design(X.rows(), p);
  design.col(0).setOnes();
  design.rightCols(p - 1) = X * Z;
  std::vector<Eigen::MatrixXd> penalties;
  for (const auto& s : S) {
    Eigen::MatrixXd full = Eigen::MatrixXd::Zero(p, p);
    full.bottomRightCorner(p - 1, p - 1) = Z.transpose() * s * Z;
    penalties.push_back(0.5 * (full + full.transpose()));
  }

  const PenalisedProblem prob(design, response, penalties);
  const std::vector<double> rho = minimise_gcv(prob, options);
  const auto e = prob.evaluate(rho);

  fit.coef = e.beta;
  fit.edf = e.edf;
  fit.gcv = e.gcv;
  fit.sigma2 = e.rss / std::max(n - e.edf, 1.0);
  for (double r : rho) fit.smoothing_params.push_back(std::exp(r));
  const Eigen::VectorXd fitted = design * e.beta;
  fit.fitted.assign(fitted.data(), fitted.data() + fitted.size());
  fit.coef_chol = symmetric_factor(fit.sigma2 * e.Ainv);
  fit.design = std::move(design);
  return fit;
}

}  // namespace voisurv
