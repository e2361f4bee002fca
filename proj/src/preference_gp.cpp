#include "uupl/preference_gp.hpp"

#include "uupl/errors.hpp"

#include <cmath>
#include <string>

namespace uupl {

UncertaintyLevel level_from_int(int level) {
  if (level < 1 || level > 4) {
    throw InvalidArgument("uncertainty level must be in 1..4, got " + std::to_string(level));
  }
  return static_cast<UncertaintyLevel>(level);
}

void UncertaintyFactors::validate() const {
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (!(u[i] > 0.0) || !std::isfinite(u[i])) throw InvalidArgument("uncertainty factors must be positive");
    if (i > 0 && !(u[i - 1] < u[i])) {
      throw InvalidArgument("uncertainty factors must satisfy u1 < u2 < u3 < u4");
    }
  }
}

UncertaintyFactors UncertaintyFactors::uniform(double value) {
  if (!(value > 0.0)) throw InvalidArgument("uncertainty factor must be positive");
  return UncertaintyFactors{{value, value, value, value}};
}

std::size_t PreferenceDataset::add_point(const FeaturePoint& x) {
  if (!points_.empty() && x.size() != points_.front().size()) {
    throw DimensionMismatch("dataset: point dimension mismatch");
  }
  if (x.size() == 0 || !x.allFinite()) throw InvalidArgument("dataset: invalid feature point");
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (same_point(points_[i], x)) return i;
  }
  points_.push_back(x);
  return points_.size() - 1;
}

void PreferenceDataset::add_comparison(const FeaturePoint& winner, const FeaturePoint& loser,
                                       UncertaintyLevel level) {
  if (same_point(winner, loser)) throw InvalidArgument("dataset: a point cannot be compared with itself");
  const auto w = add_point(winner);
  const auto l = add_point(loser);
  pairs_.push_back({w, l, level});
}

void PreferenceDataset::add_pair(const PreferencePair& pair) {
  if (pair.winner >= points_.size() || pair.loser >= points_.size()) {
    throw InvalidArgument("dataset: pair index out of range");
  }
  if (pair.winner == pair.loser) throw InvalidArgument("dataset: winner and loser must differ");
  level_from_int(to_int(pair.level));
  pairs_.push_back(pair);
}

double choice_probability(double delta_reward, double u) {
  if (!(u > 0.0)) throw InvalidArgument("choice_probability: u must be positive");
  return std_normal_cdf(delta_reward / u);
}

namespace {

void check_shape(const PreferenceDataset& data, const Vector& f) {
  if (static_cast<std::size_t>(f.size()) != data.num_points()) {
    throw DimensionMismatch("reward vector length does not match the number of unique points");
  }
}

}  // namespace

double log_likelihood(const PreferenceDataset& data, const Vector& f, const UncertaintyFactors& factors) {
  check_shape(data, f);
  double total = 0.0;
  for (const auto& p : data.pairs()) {
    const auto w = static_cast<Eigen::Index>(p.winner);
    const auto l = static_cast<Eigen::Index>(p.loser);
    total += log_std_normal_cdf((f[w] - f[l]) / factors[p.level]);
  }
  return total;
}

LikelihoodTerms likelihood_terms(const PreferenceDataset& data, const Vector& f,
                                 const UncertaintyFactors& factors) {
  check_shape(data, f);
  const auto n = static_cast<Eigen::Index>(data.num_points());
  LikelihoodTerms t;
  t.gradient = Vector::Zero(n);
  t.neg_hessian = Matrix::Zero(n, n);
  for (const auto& p : data.pairs()) {
    const auto w = static_cast<Eigen::Index>(p.winner);
    const auto l = static_cast<Eigen::Index>(p.loser);
    const double u = factors[p.level];
    const double z = (f[w] - f[l]) / u;
    const double lambda = inverse_mills_ratio(z);
    // d^2/dz^2 ln Phi(z) = -lambda (z + lambda), which lies in (-1, 0).
    const double curvature = lambda * (z + lambda) / (u * u);
    t.value += log_std_normal_cdf(z);
    t.gradient[w] += lambda / u;
    t.gradient[l] -= lambda / u;
    t.neg_hessian(w, w) += curvature;
    t.neg_hessian(l, l) += curvature;
    t.neg_hessian(w, l) -= curvature;
    t.neg_hessian(l, w) -= curvature;
  }
  return t;
}

Objective laplace_objective(const PreferenceDataset& data, const Matrix& K, const Vector& f,
                            const UncertaintyFactors& factors) {
  check_shape(data, f);
  if (K.rows() != f.size() || K.cols() != f.size()) throw DimensionMismatch("objective: K shape mismatch");
  Objective obj;
  if (f.size() == 0) return obj;
  const Vector alpha = solve_spd(K, f);
  const auto lik = likelihood_terms(data, f, factors);
  obj.value = lik.value - 0.5 * f.dot(alpha);
  obj.gradient = lik.gradient - alpha;
  return obj;
}

namespace {

// Work in whitened coordinates f = L v, where K = L L^T. The prior term is
// then 0.5 |v|^2 and the Newton system I + L^T W L is well conditioned.
struct Whitened {
  const PreferenceDataset& data;
  const UncertaintyFactors& factors;
  Matrix L;

  double objective(const Vector& v) const {
    return log_likelihood(data, L * v, factors) - 0.5 * v.squaredNorm();
  }
};

Matrix lower_cholesky(const Matrix& K) {
  Eigen::LLT<Matrix> llt(K);
  if (llt.info() != Eigen::Success) throw NotPositiveDefinite("laplace: covariance is not SPD");
  return llt.matrixL();
}

}  // namespace

LaplaceResult laplace_mode(const PreferenceDataset& data, const Matrix& K, const UncertaintyFactors& factors,
                           const LaplaceOptions& opts) {
  const auto n = static_cast<Eigen::Index>(data.num_points());
  if (K.rows() != n || K.cols() != n) throw DimensionMismatch("laplace: K shape mismatch");
  LaplaceResult res;
  res.f_lap = Vector::Zero(n);
  res.W = Matrix::Zero(n, n);
  if (n == 0) return res;

  const Whitened prob{data, factors, lower_cholesky(K)};
  const auto& L = prob.L;
  const Matrix I = Matrix::Identity(n, n);

  Vector v = Vector::Zero(n);
  double s_current = prob.objective(v);
  for (int it = 0;; ++it) {
    const Vector f = L * v;
    const auto lik = likelihood_terms(data, f, factors);
    // grad_f S = grad l - K^{-1} f, and K^{-1} f = L^{-T} v.
    const Vector prior_pull = L.transpose().triangularView<Eigen::Upper>().solve(v);
    const Vector grad_f = lik.gradient - prior_pull;
    res.grad_norm = grad_f.lpNorm<Eigen::Infinity>();
    if (!std::isfinite(res.grad_norm)) throw NumericalError("laplace: non-finite gradient");
    if (res.grad_norm < opts.tol) {
      res.f_lap = f;
      res.W = lik.neg_hessian;
      res.iterations = it;
      return res;
    }
    if (it >= opts.max_iter) {
      throw ConvergenceError("laplace: no convergence after " + std::to_string(it) +
                                 " iterations, |grad|_inf = " + std::to_string(res.grad_norm),
                             it, res.grad_norm);
    }

    const Matrix B = I + L.transpose() * lik.neg_hessian * L;
    Eigen::LLT<Matrix> b_llt(B);
    if (b_llt.info() != Eigen::Success) throw NumericalError("laplace: Newton system is not SPD");
    const Vector grad_v = L.transpose() * lik.gradient - v;
    const Vector step = b_llt.solve(grad_v);
    if (!step.allFinite()) throw NumericalError("laplace: non-finite Newton step");

    // Near the optimum S is flat to within rounding, so compare with some slack.
    const double slack = 1e-13 * (1.0 + std::abs(s_current));
    double t = 1.0;
    Vector v_next = v + step;
    double s_next = prob.objective(v_next);
    for (int halvings = 0; halvings < 40 && !(s_next >= s_current - slack); ++halvings) {
      t *= 0.5;
      v_next = v + t * step;
      s_next = prob.objective(v_next);
    }
    if (!(s_next >= s_current - slack)) {
      // At the floating-point floor; accept the tiny step and let the gradient test decide.
      v_next = v + t * step;
      s_next = prob.objective(v_next);
    }
    if (!std::isfinite(s_next)) throw NumericalError("laplace: objective became non-finite");
    v = std::move(v_next);
    s_current = s_next;
  }
}

Matrix posterior_covariance(const Matrix& K, const Matrix& W) {
  if (K.rows() != K.cols() || W.rows() != K.rows() || W.cols() != K.cols()) {
    throw DimensionMismatch("posterior_covariance: shape mismatch");
  }
  const auto n = K.rows();
  if (n == 0) return Matrix(0, 0);
  const Matrix L = lower_cholesky(K);
  const Matrix B = Matrix::Identity(n, n) + L.transpose() * W * L;
  Eigen::LLT<Matrix> b_llt(B);
  if (b_llt.info() != Eigen::Success) {
    throw NotPositiveDefinite("posterior_covariance: I + L^T W L is not SPD (W not PSD?)");
  }
  Matrix C = L * b_llt.solve(L.transpose());
  return 0.5 * (C + C.transpose());
}

PosteriorState PosteriorState::fit(PreferenceDataset data, const KernelConfig& kernel,
                                   const UncertaintyFactors& factors, const LaplaceOptions& opts) {
  kernel.validate();
  PosteriorState s;
  s.data_ = std::move(data);
  s.kernel_ = kernel;
  s.factors_ = factors;
  const auto n = static_cast<Eigen::Index>(s.data_.num_points());
  if (n == 0) {
    s.K_ = Matrix(0, 0);
    s.f_lap_ = Vector(0);
    s.W_ = Matrix(0, 0);
    s.alpha_ = Vector(0);
    s.cov_ = Matrix(0, 0);
    s.reduce_ = Matrix(0, 0);
    return s;
  }
  s.K_ = build_covariance(s.data_.points(), kernel);
  auto res = laplace_mode(s.data_, s.K_, factors, opts);
  s.f_lap_ = std::move(res.f_lap);
  s.W_ = std::move(res.W);
  s.iterations_ = res.iterations;
  s.alpha_ = solve_spd(s.K_, s.f_lap_);
  s.cov_ = posterior_covariance(s.K_, s.W_);
  // (K + W^{-1})^{-1} = L^{-T} (I - B^{-1}) L^{-1}, which stays defined for singular W.
  const Matrix L = lower_cholesky(s.K_);
  const Matrix I = Matrix::Identity(n, n);
  const Matrix B = I + L.transpose() * s.W_ * L;
  const Matrix M = I - B.llt().solve(I);
  const Matrix Linv = L.triangularView<Eigen::Lower>().solve(I);
  s.reduce_ = Linv.transpose() * M * Linv;
  s.reduce_ = 0.5 * (s.reduce_ + s.reduce_.transpose()).eval();
  return s;
}

PredictiveDistribution PosteriorState::predict(const FeaturePoint& x1, const FeaturePoint& x2) const {
  if (data_.num_points() > 0 &&
      (static_cast<std::size_t>(x1.size()) != data_.dim() || static_cast<std::size_t>(x2.size()) != data_.dim())) {
    throw DimensionMismatch("predict: test point dimension mismatch");
  }
  if (x1.size() != x2.size()) throw DimensionMismatch("predict: test points differ in dimension");
  PredictiveDistribution out;
  out.sigma(0, 0) = jittered_kernel(x1, x1, kernel_);
  out.sigma(1, 1) = jittered_kernel(x2, x2, kernel_);
  out.sigma(0, 1) = out.sigma(1, 0) = jittered_kernel(x1, x2, kernel_);
  if (data_.num_points() == 0) return out;

  const FeaturePoint tests[2] = {x1, x2};
  const Matrix kt = cross_covariance(data_.points(), tests, kernel_);
  out.mu = kt.transpose() * alpha_;
  const Eigen::Matrix2d reduction = kt.transpose() * reduce_ * kt;
  out.sigma -= reduction;
  out.sigma(0, 1) = out.sigma(1, 0) = 0.5 * (out.sigma(0, 1) + out.sigma(1, 0));
  for (int i = 0; i < 2; ++i) out.sigma(i, i) = std::max(out.sigma(i, i), 0.0);
  return out;
}

double PosteriorState::predict_mean(const FeaturePoint& x) const {
  if (data_.num_points() == 0) return 0.0;
  double mu = 0.0;
  for (std::size_t i = 0; i < data_.num_points(); ++i) {
    mu += jittered_kernel(data_.points()[i], x, kernel_) * alpha_[static_cast<Eigen::Index>(i)];
  }
  return mu;
}

double PosteriorState::predict_variance(const FeaturePoint& x) const {
  const double prior = jittered_kernel(x, x, kernel_);
  if (data_.num_points() == 0) return prior;
  const FeaturePoint tests[1] = {x};
  const Vector k = cross_covariance(data_.points(), tests, kernel_).col(0);
  return std::max(prior - k.dot(reduce_ * k), 0.0);
}

Vector PosteriorState::predict_means(std::span<const FeaturePoint> xs) const {
  Vector out = Vector::Zero(static_cast<Eigen::Index>(xs.size()));
  if (data_.num_points() == 0) return out;
  const Matrix kt = cross_covariance(data_.points(), xs, kernel_);
  out = kt.transpose() * alpha_;
  return out;
}

Vector PosteriorState::predict_variances(std::span<const FeaturePoint> xs) const {
  Vector out(static_cast<Eigen::Index>(xs.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) out[static_cast<Eigen::Index>(i)] = jittered_kernel(xs[i], xs[i], kernel_);
  if (data_.num_points() == 0) return out;
  const Matrix kt = cross_covariance(data_.points(), xs, kernel_);
  const Matrix ck = reduce_ * kt;
  out -= kt.cwiseProduct(ck).colwise().sum().transpose();
  return out.cwiseMax(0.0);
}

}  // namespace uupl
