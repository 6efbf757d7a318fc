#include "fbal/gp.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace fbal::gp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
const double kSqrt5 = std::sqrt(5.0);

double matern52_of_r(double r, double output_scale) {
  const double sr = kSqrt5 * r;
  return output_scale * (1.0 + sr + 5.0 * r * r / 3.0) * std::exp(-sr);
}

Matrix noisy_kernel(const Matrix& x, const GpHyperparameters& hp) {
  Matrix k = matern52_matrix(x, x, hp.lengthscales, hp.output_scale);
  k.diagonal().array() += hp.noise_scale * hp.noise_scale;
  return k;
}

}  // namespace

double matern52(const Vector& x, const Vector& x_prime, const Vector& lengthscales, double output_scale) {
  if (x.size() != x_prime.size() || x.size() != lengthscales.size())
    throw std::invalid_argument("matern52: dimension mismatch");
  const double r = ((x - x_prime).array() / lengthscales.array()).matrix().norm();
  return matern52_of_r(r, output_scale);
}

Matrix matern52_matrix(const Matrix& a, const Matrix& b, const Vector& lengthscales, double output_scale) {
  if (a.cols() != lengthscales.size() || b.cols() != lengthscales.size())
    throw std::invalid_argument("matern52_matrix: dimension mismatch");
  Matrix sq = Matrix::Zero(a.rows(), b.rows());
  for (Eigen::Index k = 0; k < a.cols(); ++k) {
    const Vector ak = a.col(k) / lengthscales[k];
    const Vector bk = b.col(k) / lengthscales[k];
    sq += (ak.replicate(1, b.rows()) - bk.transpose().replicate(a.rows(), 1)).array().square().matrix();
  }
  return sq.unaryExpr([output_scale](double s) { return matern52_of_r(std::sqrt(s), output_scale); });
}

Vector to_unconstrained(const GpHyperparameters& hp) {
  const Eigen::Index d = hp.lengthscales.size();
  Vector z(d + 2);
  z.head(d) = hp.lengthscales.array().log().matrix();
  z[d] = std::log(hp.output_scale);
  z[d + 1] = std::log(hp.noise_scale);
  return z;
}

GpHyperparameters from_unconstrained(const Vector& z) {
  const Eigen::Index d = z.size() - 2;
  return {z.head(d).array().exp().matrix(), std::exp(z[d]), std::exp(z[d + 1])};
}

std::optional<Factorization> factorize(const Matrix& inputs, const Vector& targets, const GpHyperparameters& hp) {
  const Matrix k = noisy_kernel(inputs, hp);
  if (!k.allFinite()) return std::nullopt;
  double jitter = 0.0;
  for (int attempt = 0; attempt < 6; ++attempt) {
    Matrix kj = k;
    kj.diagonal().array() += jitter;
    Eigen::LLT<Matrix> llt(kj);
    if (llt.info() == Eigen::Success && llt.matrixL().toDenseMatrix().diagonal().minCoeff() > 0.0) {
      Factorization f;
      f.lower = llt.matrixL();
      f.alpha = llt.solve(targets);
      f.jitter = jitter;
      if (f.alpha.allFinite()) return f;
    }
    jitter = jitter == 0.0 ? 1e-10 : jitter * 10.0;
  }
  return std::nullopt;
}

LogJoint::LogJoint(StandardizedData data, GpPriors priors) : data_(std::move(data)), priors_(std::move(priors)) {
  if (data_.targets.size() == 0) throw std::invalid_argument("GP log joint needs data");
  if (data_.inputs.rows() != data_.targets.size()) throw std::invalid_argument("GP data length mismatch");
}

double LogJoint::log_prior(const Vector& z, Vector* gradient) const {
  const Eigen::Index d = z.size() - 2;
  if (gradient) gradient->setZero(z.size());
  double value = 0.0;
  double g = 0.0;
  for (Eigen::Index k = 0; k < d; ++k) {
    value += priors_.lengthscale.log_density_of_log(z[k], &g);
    if (gradient) (*gradient)[k] = g;
  }
  value += priors_.output_scale.log_density_of_log(z[d], &g);
  if (gradient) (*gradient)[d] = g;
  value += priors_.noise.log_density_of_log(z[d + 1], &g);
  if (gradient) (*gradient)[d + 1] = g;
  return value;
}

double LogJoint::operator()(const Vector& z, Vector* gradient) const {
  if (static_cast<std::size_t>(z.size()) != dimension()) throw std::invalid_argument("GP parameter vector has wrong size");
  if (!z.allFinite()) {
    if (gradient) gradient->setZero(z.size());
    return kNegInf;
  }
  const GpHyperparameters hp = from_unconstrained(z);
  const Matrix& x = data_.inputs;
  const Vector& y = data_.targets;
  const auto n = x.rows();
  const auto d = x.cols();

  const auto fact = factorize(x, y, hp);
  if (!fact) {
    if (gradient) gradient->setZero(z.size());
    return kNegInf;
  }
  const double log_det_half = fact->lower.diagonal().array().log().sum();
  const double marginal = -0.5 * y.dot(fact->alpha) - log_det_half - static_cast<double>(n) * kHalfLog2Pi;
  const double value = marginal + log_prior(z, gradient);
  if (!std::isfinite(value)) {
    if (gradient) gradient->setZero(z.size());
    return kNegInf;
  }
  if (!gradient) return value;

  // d/dphi of the marginal = 1/2 tr[(alpha alpha^T - K^-1) dK/dphi]
  const auto lower = fact->lower.triangularView<Eigen::Lower>();
  Matrix k_inv = Matrix::Identity(n, n);
  lower.solveInPlace(k_inv);
  lower.transpose().solveInPlace(k_inv);
  const Matrix w = fact->alpha * fact->alpha.transpose() - k_inv;

  std::vector<Matrix> scaled_sq(static_cast<std::size_t>(d));
  Matrix r2 = Matrix::Zero(n, n);
  for (Eigen::Index k = 0; k < d; ++k) {
    const Vector xk = x.col(k) / hp.lengthscales[k];
    scaled_sq[static_cast<std::size_t>(k)] =
        (xk.replicate(1, n) - xk.transpose().replicate(n, 1)).array().square().matrix();
    r2 += scaled_sq[static_cast<std::size_t>(k)];
  }
  // dk/dlog(l_k) = s^2 (5/3) (1 + sqrt5 r) exp(-sqrt5 r) (dx_k / l_k)^2
  const Matrix common = r2.unaryExpr([&](double s) {
    const double r = std::sqrt(s);
    return hp.output_scale * (5.0 / 3.0) * (1.0 + kSqrt5 * r) * std::exp(-kSqrt5 * r);
  });
  Vector& g = *gradient;
  for (Eigen::Index k = 0; k < d; ++k)
    g[k] += 0.5 * (w.array() * common.array() * scaled_sq[static_cast<std::size_t>(k)].array()).sum();
  const Matrix kf = r2.unaryExpr([&](double s) { return matern52_of_r(std::sqrt(s), hp.output_scale); });
  g[d] += 0.5 * (w.array() * kf.array()).sum();
  g[d + 1] += hp.noise_scale * hp.noise_scale * w.trace();
  if (!g.allFinite()) {
    g.setZero();
    return kNegInf;
  }
  return value;
}

LogDensityTarget LogJoint::target() const {
  return {dimension(), [self = *this](const Vector& z, Vector& grad) { return self(z, &grad); }};
}

double log_joint(const StandardizedData& data, const GpHyperparameters& hp, const GpPriors& priors) {
  return LogJoint(data, priors)(to_unconstrained(hp));
}

Vector grad_log_joint(const StandardizedData& data, const GpHyperparameters& hp, const GpPriors& priors) {
  Vector g;
  LogJoint(data, priors)(to_unconstrained(hp), &g);
  return g;
}

GpHyperparameters sample_prior(std::size_t input_dim, const GpPriors& priors, Rng& rng) {
  GpHyperparameters hp;
  hp.lengthscales.resize(static_cast<Eigen::Index>(input_dim));
  for (Eigen::Index k = 0; k < hp.lengthscales.size(); ++k) hp.lengthscales[k] = priors.lengthscale.sample(rng);
  hp.output_scale = priors.output_scale.sample(rng);
  hp.noise_scale = priors.noise.sample(rng);
  return hp;
}

GpPosterior condition(const Dataset& data, std::vector<GpHyperparameters> draws) {
  GpPosterior post;
  post.standardizer = fit_standardizer(data);
  post.train = standardize(post.standardizer, data);
  for (const auto& hp : draws) {
    if (static_cast<std::size_t>(hp.lengthscales.size()) != data.dim())
      throw std::invalid_argument("GP lengthscales do not match data dimension");
    auto f = factorize(post.train.inputs, post.train.targets, hp);
    if (!f) throw std::runtime_error("GP covariance factorization failed after maximum jitter");
    post.factors.push_back(std::move(*f));
  }
  post.draws = std::move(draws);
  return post;
}

GpPosterior fit(const Dataset& data, const NutsConfig& nuts, const GpPriors& priors) {
  const Standardizer st = fit_standardizer(data);
  const LogJoint model(standardize(st, data), priors);
  Rng init_rng = Rng(nuts.seed, nuts.stream).split("gp-init");
  std::vector<Vector> inits;
  for (std::size_t c = 0; c < nuts.chains; ++c) {
    Rng r = init_rng.split(static_cast<std::uint64_t>(c));
    // Redraw the occasional start whose covariance cannot be factorized.
    Vector z = to_unconstrained(sample_prior(data.dim(), priors, r));
    for (int tries = 0; tries < 100 && !std::isfinite(model(z)); ++tries)
      z = to_unconstrained(sample_prior(data.dim(), priors, r));
    inits.push_back(z);
  }
  auto chains = nuts_sample(model.target(), inits, nuts);
  std::vector<GpHyperparameters> draws;
  for (const auto& chain : chains)
    for (Eigen::Index i = 0; i < chain.draws.rows(); ++i) draws.push_back(from_unconstrained(chain.draws.row(i).transpose()));
  GpPosterior post = condition(data, std::move(draws));
  post.chains = std::move(chains);
  return post;
}

GpHyperparameters find_map(const LogJoint& model, std::size_t input_dim, Rng& rng, std::size_t restarts,
                           const GpPriors& priors) {
  Vector best;
  double best_value = kNegInf;
  for (std::size_t start = 0; start < restarts; ++start) {
    Vector z = to_unconstrained(sample_prior(input_dim, priors, rng));
    Vector g;
    double value = model(z, &g);
    if (!std::isfinite(value)) continue;
    double step = 0.1;
    for (int iter = 0; iter < 500 && g.norm() > 1e-6; ++iter) {
      // Backtracking (Armijo) along the gradient.
      bool improved = false;
      while (step > 1e-12) {
        const Vector candidate = z + step * g;
        Vector cg;
        const double cv = model(candidate, &cg);
        if (std::isfinite(cv) && cv >= value + 1e-4 * step * g.squaredNorm()) {
          z = candidate;
          g = cg;
          value = cv;
          improved = true;
          step *= 2.0;
          break;
        }
        step *= 0.5;
      }
      if (!improved) break;
    }
    if (value > best_value) {
      best_value = value;
      best = z;
    }
  }
  if (best.size() == 0) throw std::runtime_error("GP MAP search found no finite starting point");
  return from_unconstrained(best);
}

GpPosterior fit_map(const Dataset& data, std::uint64_t seed, std::uint64_t stream, std::size_t restarts,
                    const GpPriors& priors) {
  const Standardizer st = fit_standardizer(data);
  const LogJoint model(standardize(st, data), priors);
  Rng rng = Rng(seed, stream).split("gp-map");
  return condition(data, {find_map(model, data.dim(), rng, restarts, priors)});
}

SinglePrediction predict_single(const GpPosterior& post, std::size_t draw, const Matrix& points) {
  if (draw >= post.draws.size()) throw std::out_of_range("GP draw index out of range");
  const GpHyperparameters& hp = post.draws[draw];
  const Factorization& f = post.factors[draw];
  const Matrix xs = post.standardizer.standardize_inputs(points);
  const Matrix k_star = matern52_matrix(post.train.inputs, xs, hp.lengthscales, hp.output_scale);  // n x m
  SinglePrediction p;
  p.mean = k_star.transpose() * f.alpha;
  const Matrix v = f.lower.triangularView<Eigen::Lower>().solve(k_star);
  p.raw_variance = (hp.output_scale - v.colwise().squaredNorm().array()).matrix().transpose();
  p.variance = p.raw_variance.cwiseMax(0.0);
  return p;
}

Prediction predict_all(const GpPosterior& post, const Matrix& points) {
  if (post.draws.empty()) throw std::logic_error("GP posterior has not been fitted");
  const Standardizer& st = post.standardizer;
  const auto m = points.rows();
  const auto cols = static_cast<Eigen::Index>(post.draws.size());
  const auto n_draws = static_cast<double>(post.draws.size());

  Prediction p;
  Matrix means(m, cols);
  Vector var_sum = Vector::Zero(m);
  p.draws.mean.resize(m, cols);
  p.draws.variance.resize(m, cols);
  for (std::size_t j = 0; j < post.draws.size(); ++j) {
    const SinglePrediction single = predict_single(post, j, points);
    const auto c = static_cast<Eigen::Index>(j);
    const double noise = post.draws[j].noise_scale * post.draws[j].noise_scale;
    means.col(c) = single.mean;
    var_sum += single.variance;
    p.draws.mean.col(c) = st.unstandardize_targets(single.mean);
    p.draws.variance.col(c) =
        ((single.variance.array() + noise) * st.target_std() * st.target_std()).matrix();
  }

  PredictiveSummary& s = p.summary;
  s.mean.resize(m);
  s.uncertainty.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double mu = means.row(i).sum() / n_draws;
    const double spread = (means.row(i).array() - mu).square().sum() / n_draws;
    s.mean[i] = st.unstandardize_target(mu);
    s.uncertainty[i] = st.unstandardize_variance(var_sum[i] / n_draws + spread);
  }
  return p;
}

PredictiveSummary predict(const GpPosterior& post, const Matrix& points) { return predict_all(post, points).summary; }

PredictiveDraws predictive_draws(const GpPosterior& post, const Matrix& points) {
  return predict_all(post, points).draws;
}

}  // namespace fbal::gp
