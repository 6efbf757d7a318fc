#include "fbal/bnn.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "fbal/numeric.hpp"

namespace fbal::bnn {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

using LayerShape = LogJoint::Layer;

std::vector<LayerShape> layer_shapes(const MlpArchitecture& arch) {
  std::vector<LayerShape> shapes;
  Eigen::Index fan_in = static_cast<Eigen::Index>(arch.input_dim);
  Eigen::Index offset = 0;
  auto add = [&](Eigen::Index fan_out) {
    shapes.push_back({fan_in, fan_out, offset});
    offset += (fan_in + 1) * fan_out;
    fan_in = fan_out;
  };
  for (std::size_t width : arch.hidden) add(static_cast<Eigen::Index>(width));
  add(1);
  return shapes;
}

using ConstMatrixMap = Eigen::Map<const Matrix>;
using ConstVectorMap = Eigen::Map<const Vector>;

// tanh through the vectorized exponential; saturates cleanly at +-1.
template <typename Derived>
void tanh_in_place(Eigen::MatrixBase<Derived>& z) {
  z = (1.0 - 2.0 / ((2.0 * z.array()).exp() + 1.0)).matrix();
}

// Activations per layer for a batch stored column-wise (features x points).
void forward_pass(const std::vector<LayerShape>& shapes, const double* w, const Matrix& x_cols,
                  std::vector<Matrix>& activations) {
  activations.resize(shapes.size() + 1);
  activations[0] = x_cols;
  for (std::size_t l = 0; l < shapes.size(); ++l) {
    const auto& s = shapes[l];
    ConstMatrixMap weight(w + s.offset, s.fan_out, s.fan_in);
    ConstVectorMap bias(w + s.offset + s.fan_in * s.fan_out, s.fan_out);
    Matrix& z = activations[l + 1];
    z.resize(s.fan_out, x_cols.cols());
    z.noalias() = weight * activations[l];
    z.colwise() += bias;
    if (l + 1 < shapes.size()) tanh_in_place(z);
  }
}

struct Workspace {
  std::vector<Matrix> activations;
  Matrix delta;
  Matrix back;
};

void check_weights(const MlpArchitecture& arch, const Vector& w) {
  if (static_cast<std::size_t>(w.size()) != arch.parameter_count())
    throw std::invalid_argument("weight vector has " + std::to_string(w.size()) + " entries, architecture needs " +
                                std::to_string(arch.parameter_count()));
}

}  // namespace

std::size_t MlpArchitecture::parameter_count() const {
  std::size_t count = 0;
  std::size_t fan_in = input_dim;
  for (std::size_t width : hidden) {
    count += (fan_in + 1) * width;
    fan_in = width;
  }
  return count + fan_in + 1;
}

std::string MlpArchitecture::name() const {
  if (hidden.empty()) return "linear";
  std::ostringstream os;
  for (std::size_t i = 0; i < hidden.size(); ++i) os << (i ? "-" : "") << hidden[i];
  return os.str();
}

std::vector<std::size_t> MlpArchitecture::parse_hidden(const std::string& name) {
  std::vector<std::size_t> widths;
  if (name == "linear") return widths;
  std::istringstream is(name);
  std::string part;
  while (std::getline(is, part, '-')) {
    std::size_t pos = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(part, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != part.size() || part.empty() || v == 0) throw std::invalid_argument("bad architecture: " + name);
    widths.push_back(v);
  }
  if (widths.empty()) throw std::invalid_argument("bad architecture: " + name);
  return widths;
}

double forward(const MlpArchitecture& arch, const Vector& weights, const Vector& x) {
  if (static_cast<std::size_t>(x.size()) != arch.input_dim) throw std::invalid_argument("input has wrong dimension");
  Matrix cols = x;
  return forward_batch(arch, weights, cols.transpose())[0];
}

Vector forward_batch(const MlpArchitecture& arch, const Vector& weights, const Matrix& x) {
  check_weights(arch, weights);
  if (static_cast<std::size_t>(x.cols()) != arch.input_dim) throw std::invalid_argument("inputs have wrong dimension");
  std::vector<Matrix> acts;
  forward_pass(layer_shapes(arch), weights.data(), x.transpose(), acts);
  return acts.back().row(0).transpose();
}

LogJoint::LogJoint(MlpArchitecture arch, StandardizedData data, ScalePrior noise_prior)
    : arch_(std::move(arch)), data_(std::move(data)), noise_prior_(std::move(noise_prior)), shapes_(layer_shapes(arch_)) {
  if (data_.targets.size() == 0) throw std::invalid_argument("log joint needs data");
  if (static_cast<std::size_t>(data_.inputs.cols()) != arch_.input_dim)
    throw std::invalid_argument("data dimension does not match architecture");
  data_.inputs.transposeInPlace();  // features x points
}

double LogJoint::operator()(const Vector& z, Vector* gradient) const {
  const std::size_t p = arch_.parameter_count();
  if (static_cast<std::size_t>(z.size()) != p + 1) throw std::invalid_argument("parameter vector has wrong size");
  const auto pi = static_cast<Eigen::Index>(p);
  const ConstVectorMap w(z.data(), pi);
  const double log_sigma = z[pi];
  const double sigma2 = std::exp(2.0 * log_sigma);
  const auto n = static_cast<double>(data_.targets.size());

  // Chains may evaluate concurrently; scratch is per thread.
  thread_local Workspace ws;
  forward_pass(shapes_, z.data(), data_.inputs, ws.activations);
  const auto& acts = ws.activations;
  const Vector residual = data_.targets - acts.back().row(0).transpose();
  const double sse = residual.squaredNorm();

  double d_noise_prior = 0.0;
  const double value = -n * (kHalfLog2Pi + log_sigma) - 0.5 * sse / sigma2 - static_cast<double>(p) * kHalfLog2Pi -
                       0.5 * w.squaredNorm() + noise_prior_.log_density_of_log(log_sigma, &d_noise_prior);
  if (!std::isfinite(value)) {
    if (gradient) gradient->setZero(z.size());
    return kNegInf;
  }
  if (!gradient) return value;

  gradient->resize(z.size());
  Vector& g = *gradient;
  // Prior on weights, then backpropagate the likelihood.
  g.head(pi) = -w;
  ws.delta = (residual / sigma2).transpose();  // 1 x n
  for (std::size_t l = shapes_.size(); l-- > 0;) {
    const auto& s = shapes_[l];
    const Matrix& input = acts[l];
    Eigen::Map<Matrix>(g.data() + s.offset, s.fan_out, s.fan_in).noalias() += ws.delta * input.transpose();
    g.segment(s.offset + s.fan_in * s.fan_out, s.fan_out) += ws.delta.rowwise().sum();
    if (l == 0) break;
    ConstMatrixMap weight(z.data() + s.offset, s.fan_out, s.fan_in);
    ws.back.resize(s.fan_in, input.cols());
    ws.back.noalias() = weight.transpose() * ws.delta;
    ws.delta = ws.back.array() * (1.0 - input.array().square());
  }
  g[pi] = -n + sse / sigma2 + d_noise_prior;
  if (!g.allFinite()) {
    g.setZero();
    return kNegInf;
  }
  return value;
}

LogDensityTarget LogJoint::target() const {
  return {dimension(), [self = *this](const Vector& z, Vector& grad) { return self(z, &grad); }};
}

Vector to_unconstrained(const BnnParameters& params) {
  Vector z(params.weights.size() + 1);
  z.head(params.weights.size()) = params.weights;
  z[params.weights.size()] = std::log(params.noise_scale);
  return z;
}

BnnParameters from_unconstrained(const Vector& z) {
  return {z.head(z.size() - 1), std::exp(z[z.size() - 1])};
}

double log_joint(const MlpArchitecture& arch, const StandardizedData& data, const BnnParameters& params,
                 const ScalePrior& noise_prior) {
  check_weights(arch, params.weights);
  if (!(params.noise_scale > 0.0)) throw std::invalid_argument("noise scale must be positive");
  return LogJoint(arch, data, noise_prior)(to_unconstrained(params));
}

Vector grad_log_joint(const MlpArchitecture& arch, const StandardizedData& data, const BnnParameters& params,
                      const ScalePrior& noise_prior) {
  check_weights(arch, params.weights);
  if (!(params.noise_scale > 0.0)) throw std::invalid_argument("noise scale must be positive");
  Vector g;
  LogJoint(arch, data, noise_prior)(to_unconstrained(params), &g);
  return g;
}

BnnParameters sample_prior(const MlpArchitecture& arch, const ScalePrior& noise_prior, Rng& rng) {
  BnnParameters params;
  params.weights.resize(static_cast<Eigen::Index>(arch.parameter_count()));
  for (Eigen::Index i = 0; i < params.weights.size(); ++i) params.weights[i] = rng.normal();
  params.noise_scale = noise_prior.sample(rng);
  return params;
}

BnnPosterior fit(const MlpArchitecture& arch, const Dataset& data, const NutsConfig& nuts,
                 const ScalePrior& noise_prior) {
  if (data.dim() != arch.input_dim) throw std::invalid_argument("dataset dimension does not match architecture");
  BnnPosterior post;
  post.arch = arch;
  post.standardizer = fit_standardizer(data);
  const LogJoint model(arch, standardize(post.standardizer, data), noise_prior);

  Rng init_rng = Rng(nuts.seed, nuts.stream).split("bnn-init");
  std::vector<Vector> inits;
  for (std::size_t c = 0; c < nuts.chains; ++c) {
    Rng r = init_rng.split(static_cast<std::uint64_t>(c));
    inits.push_back(to_unconstrained(sample_prior(arch, noise_prior, r)));
  }
  post.chains = nuts_sample(model.target(), inits, nuts);
  for (const auto& chain : post.chains)
    for (Eigen::Index i = 0; i < chain.draws.rows(); ++i) post.draws.push_back(from_unconstrained(chain.draws.row(i).transpose()));
  return post;
}

namespace {

// points x draws matrix of network outputs in standardized units
Matrix standardized_outputs(const BnnPosterior& post, const Matrix& points) {
  if (post.draws.empty()) throw std::logic_error("BNN posterior has not been fitted");
  const Matrix x = post.standardizer.standardize_inputs(points);
  Matrix out(points.rows(), static_cast<Eigen::Index>(post.draws.size()));
  for (std::size_t j = 0; j < post.draws.size(); ++j)
    out.col(static_cast<Eigen::Index>(j)) = forward_batch(post.arch, post.draws[j].weights, x);
  return out;
}

}  // namespace

Prediction predict_all(const BnnPosterior& post, const Matrix& points) {
  const Matrix g = standardized_outputs(post, points);
  const Standardizer& st = post.standardizer;
  std::vector<double> noise_var;
  for (const auto& d : post.draws) noise_var.push_back(d.noise_scale * d.noise_scale);

  Prediction p;
  p.draws.mean = (g.array() * st.target_std() + st.target_mean()).matrix();
  p.draws.variance.resize(g.rows(), g.cols());
  for (Eigen::Index j = 0; j < g.cols(); ++j)
    p.draws.variance.col(j).setConstant(st.unstandardize_variance(noise_var[static_cast<std::size_t>(j)]));

  const double mean_noise = order_invariant_mean(noise_var);
  PredictiveSummary& s = p.summary;
  s.mean.resize(points.rows());
  s.uncertainty.resize(points.rows());
  std::vector<double> row(post.draws.size());
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    for (Eigen::Index j = 0; j < g.cols(); ++j) row[static_cast<std::size_t>(j)] = g(i, j);
    const double mu = order_invariant_mean(row);
    for (auto& v : row) v = (v - mu) * (v - mu);
    const double spread = order_invariant_mean(row);
    s.mean[i] = st.unstandardize_target(mu);
    s.uncertainty[i] = st.unstandardize_variance(spread + mean_noise);
  }
  return p;
}

PredictiveSummary predict(const BnnPosterior& post, const Matrix& points) { return predict_all(post, points).summary; }

PredictiveDraws predictive_draws(const BnnPosterior& post, const Matrix& points) {
  return predict_all(post, points).draws;
}

}  // namespace fbal::bnn
