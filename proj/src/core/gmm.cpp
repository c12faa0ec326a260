#include "core/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "core/error.hpp"

namespace sitcom {

namespace {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

Vec to_vec(const Tensor& t) { return Eigen::Map<const Vec>(t.data().data(), t.size()); }

Tensor from_vec(const Vec& v) {
  return Tensor({static_cast<std::size_t>(v.size())}, std::vector<double>(v.data(), v.data() + v.size()));
}

Mat to_mat(const Tensor& t) {
  const auto d = static_cast<Eigen::Index>(t.dim(0));
  Mat m(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = t[i * d + j];
  return m;
}

}  // namespace

struct GmmPrior::Factor {
  double alpha_bar = 1.0;
  std::vector<Vec> mean;       // sqrt(ab) mu_k
  std::vector<Vec> diag_prec;  // diagonal components
  std::vector<Mat> prec;       // full components
  std::vector<double> logdet;
};

GmmPrior::GmmPrior(std::vector<double> weights, std::vector<Tensor> means, std::vector<Tensor> covariances)
    : weights_(std::move(weights)), means_(std::move(means)), covs_(std::move(covariances)) {
  require(!weights_.empty(), "gmm: at least one component required");
  require(weights_.size() == means_.size() && means_.size() == covs_.size(),
          "gmm: weights, means and covariances must have equal counts");
  dim_ = means_[0].size();
  double total = 0.0;
  for (double w : weights_) {
    require(std::isfinite(w) && w >= 0.0, "gmm: weights must be finite and non-negative");
    total += w;
  }
  require(total > 0.0, "gmm: weights sum to zero");
  for (double& w : weights_) w /= total;

  for (std::size_t k = 0; k < means_.size(); ++k) {
    means_[k] = means_[k].reshaped({means_[k].size()});
    if (means_[k].size() != dim_) fail(ErrorCode::kShapeMismatch, "gmm: component means differ in dimension");
    const Tensor& c = covs_[k];
    if (c.rank() == 1) {
      if (c.size() != dim_) fail(ErrorCode::kShapeMismatch, "gmm: diagonal covariance " + shape_str(c.shape()));
      for (double v : c.values()) require(v > 0.0, "gmm: diagonal covariance entries must be positive");
    } else {
      if (c.rank() != 2 || c.dim(0) != dim_ || c.dim(1) != dim_)
        fail(ErrorCode::kShapeMismatch, "gmm: covariance shape " + shape_str(c.shape()));
      const Mat m = to_mat(c);
      require((m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + m.cwiseAbs().maxCoeff()),
              "gmm: covariance not symmetric");
      Eigen::LLT<Mat> llt(m);
      require(llt.info() == Eigen::Success, "gmm: covariance not positive definite");
    }
  }
}

GmmPrior GmmPrior::parse_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t d = 0;
  std::vector<double> w;
  std::vector<Tensor> mu, var;
  int lineno = 0;
  auto bad = [&](const std::string& why) {
    fail(ErrorCode::kConfig, "gmm text line " + std::to_string(lineno) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) continue;
    if (key == "dim") {
      long long v = 0;
      if (!(ls >> v) || v <= 0) bad("dim must be a positive integer");
      d = static_cast<std::size_t>(v);
    } else if (key == "component") {
      if (d == 0) bad("'dim' must precede components");
      double weight = 0.0;
      std::string tok;
      if (!(ls >> weight)) bad("missing weight");
      if (!(ls >> tok) || tok != "mean") bad("expected 'mean'");
      std::vector<double> m(d), v(d);
      for (auto& x : m)
        if (!(ls >> x)) bad("mean needs " + std::to_string(d) + " values");
      if (!(ls >> tok) || tok != "var") bad("expected 'var'");
      for (auto& x : v)
        if (!(ls >> x)) bad("var needs " + std::to_string(d) + " values");
      if (ls >> tok) bad("trailing token '" + tok + "'");
      w.push_back(weight);
      mu.push_back(Tensor::vector(std::move(m)));
      var.push_back(Tensor::vector(std::move(v)));
    } else {
      bad("unknown key '" + key + "'");
    }
  }
  if (w.empty()) fail(ErrorCode::kConfig, "gmm text: no components");
  return GmmPrior(std::move(w), std::move(mu), std::move(var));
}

GmmPrior GmmPrior::load_text(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorCode::kIo, "cannot open gmm file " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_text(ss.str());
}

std::string GmmPrior::to_text() const {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "dim " << dim_ << "\n";
  for (std::size_t k = 0; k < components(); ++k) {
    require(diagonal(k), "gmm: only diagonal priors have a text form");
    out << "component " << weights_[k] << " mean";
    for (double v : means_[k].values()) out << ' ' << v;
    out << " var";
    for (double v : covs_[k].values()) out << ' ' << v;
    out << "\n";
  }
  return out.str();
}

Tensor GmmPrior::sample(Rng& rng) const {
  double u = rng.uniform();
  std::size_t k = 0;
  for (; k + 1 < weights_.size(); ++k) {
    if (u < weights_[k]) break;
    u -= weights_[k];
  }
  Tensor z = rng.normal_tensor({dim_});
  Tensor out = means_[k];
  if (diagonal(k)) {
    for (std::size_t i = 0; i < dim_; ++i) out[i] += std::sqrt(covs_[k][i]) * z[i];
  } else {
    Eigen::LLT<Mat> llt(to_mat(covs_[k]));
    const Vec lz = llt.matrixL() * to_vec(z);
    for (std::size_t i = 0; i < dim_; ++i) out[i] += lz[static_cast<Eigen::Index>(i)];
  }
  return out;
}

std::shared_ptr<const GmmPrior::Factor> GmmPrior::factor(double alpha_bar) const {
  require(alpha_bar > 0.0 && alpha_bar <= 1.0, "gmm: alpha_bar must lie in (0, 1]");
  std::lock_guard lock(cache_mutex_);
  if (auto it = cache_.find(alpha_bar); it != cache_.end()) return it->second;

  auto f = std::make_shared<Factor>();
  f->alpha_bar = alpha_bar;
  const double sa = std::sqrt(alpha_bar);
  const auto d = static_cast<Eigen::Index>(dim_);
  for (std::size_t k = 0; k < components(); ++k) {
    f->mean.push_back(sa * to_vec(means_[k]));
    if (diagonal(k)) {
      Vec c = alpha_bar * to_vec(covs_[k]);
      c.array() += 1.0 - alpha_bar;
      f->diag_prec.push_back(c.cwiseInverse());
      f->prec.emplace_back();
      f->logdet.push_back(c.array().log().sum());
    } else {
      Mat c = alpha_bar * to_mat(covs_[k]);
      c.diagonal().array() += 1.0 - alpha_bar;
      Eigen::LLT<Mat> llt(c);
      if (llt.info() != Eigen::Success) fail(ErrorCode::kNumeric, "gmm: diffused covariance not SPD");
      f->prec.push_back(llt.solve(Mat::Identity(d, d)));
      f->diag_prec.emplace_back();
      f->logdet.push_back(2.0 * Vec(llt.matrixL().toDenseMatrix().diagonal()).array().log().sum());
    }
  }
  // Schedules have at most a few thousand distinct levels.
  if (cache_.size() > 4096) cache_.clear();
  cache_.emplace(alpha_bar, f);
  return f;
}

GmmPrior::ScoreEval GmmPrior::evaluate(const Tensor& x, double alpha_bar) const {
  if (x.size() != dim_) fail(ErrorCode::kShapeMismatch, "gmm: point " + shape_str(x.shape()) + " vs dim " + std::to_string(dim_));
  const auto f = factor(alpha_bar);
  const Vec xv = to_vec(x);
  const std::size_t K = components();
  std::vector<double> logp(K);
  ScoreEval ev;
  ev.component_score.reserve(K);
  const double log2pi = std::log(2.0 * std::numbers::pi);
  for (std::size_t k = 0; k < K; ++k) {
    const Vec diff = xv - f->mean[k];
    const Vec pd = diagonal(k) ? Vec(f->diag_prec[k].cwiseProduct(diff)) : Vec(f->prec[k] * diff);
    logp[k] = std::log(weights_[k]) - 0.5 * (diff.dot(pd) + f->logdet[k] + static_cast<double>(dim_) * log2pi);
    ev.component_score.push_back(from_vec(-pd));
  }
  const double mx = *std::max_element(logp.begin(), logp.end());
  double z = 0.0;
  for (double lp : logp) z += std::exp(lp - mx);
  ev.resp.resize(K);
  ev.score = Tensor({dim_}, 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    ev.resp[k] = std::exp(logp[k] - mx) / z;
    for (std::size_t i = 0; i < dim_; ++i) ev.score[i] += ev.resp[k] * ev.component_score[k][i];
  }
  return ev;
}

double GmmPrior::log_density(const Tensor& x, double alpha_bar) const {
  if (x.size() != dim_) fail(ErrorCode::kShapeMismatch, "gmm: point " + shape_str(x.shape()));
  const auto f = factor(alpha_bar);
  const Vec xv = to_vec(x);
  const double log2pi = std::log(2.0 * std::numbers::pi);
  std::vector<double> logp(components());
  for (std::size_t k = 0; k < components(); ++k) {
    const Vec diff = xv - f->mean[k];
    const double q = diagonal(k) ? diff.dot(f->diag_prec[k].cwiseProduct(diff)) : diff.dot(f->prec[k] * diff);
    logp[k] = std::log(weights_[k]) - 0.5 * (q + f->logdet[k] + static_cast<double>(dim_) * log2pi);
  }
  const double mx = *std::max_element(logp.begin(), logp.end());
  double z = 0.0;
  for (double lp : logp) z += std::exp(lp - mx);
  return mx + std::log(z);
}

Tensor GmmPrior::score(const Tensor& x, double alpha_bar) const { return evaluate(x, alpha_bar).score; }

Tensor GmmPrior::hessian_vector(const ScoreEval& ev, const Tensor& g, double alpha_bar) const {
  const auto f = factor(alpha_bar);
  const Vec gv = to_vec(g);
  const Vec sbar = to_vec(ev.score);
  Vec out = Vec::Zero(static_cast<Eigen::Index>(dim_));
  // H = -sum r_k P_k + sum r_k (s_k - sbar)(s_k - sbar)^T
  for (std::size_t k = 0; k < components(); ++k) {
    const double r = ev.resp[k];
    if (r == 0.0) continue;
    if (diagonal(k)) out -= r * f->diag_prec[k].cwiseProduct(gv);
    else out -= r * (f->prec[k] * gv);
    const Vec c = to_vec(ev.component_score[k]) - sbar;
    out += r * c * c.dot(gv);
  }
  return from_vec(out);
}

GmmScoreModel::GmmScoreModel(std::shared_ptr<const GmmPrior> prior, std::shared_ptr<const NoiseSchedule> sched)
    : prior_(std::move(prior)), sched_(std::move(sched)) {
  require(prior_ != nullptr && sched_ != nullptr, "GmmScoreModel: null prior or schedule");
}

ad::Var GmmScoreModel::eps(ad::Graph& g, ad::Var x, std::span<const int> times) const {
  const Tensor& xv = x.value();
  const std::size_t batch = check_model_input(*this, xv, times);
  const std::size_t d = dim();

  struct Row {
    double ab;
    GmmPrior::ScoreEval ev;
  };
  auto rows = std::make_shared<std::vector<Row>>();
  rows->reserve(batch);
  Tensor out(xv.shape(), 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    const int t = times.size() == 1 ? times[0] : times[b];
    if (t < 1 || t > sched_->T()) fail(ErrorCode::kInvalidArgument, "GmmScoreModel: time " + std::to_string(t) + " outside 1..T");
    const double ab = sched_->alpha_bar(t);
    Tensor row({d}, std::vector<double>(xv.data().begin() + b * d, xv.data().begin() + (b + 1) * d));
    auto ev = prior_->evaluate(row, ab);
    const double c = -std::sqrt(1.0 - ab);
    for (std::size_t i = 0; i < d; ++i) out[b * d + i] = c * ev.score[i];
    rows->push_back({ab, std::move(ev)});
  }

  auto prior = prior_;
  return g.record("gmm_eps", {x}, std::move(out), [rows, prior, d](const ad::BackwardContext& ctx) {
    Tensor* gx = ctx.grad_in[0];
    if (!gx) return;
    for (std::size_t b = 0; b < rows->size(); ++b) {
      const Row& r = (*rows)[b];
      Tensor go({d}, std::vector<double>(ctx.grad_out.data().begin() + b * d,
                                         ctx.grad_out.data().begin() + (b + 1) * d));
      const Tensor hg = prior->hessian_vector(r.ev, go, r.ab);
      const double c = -std::sqrt(1.0 - r.ab);
      for (std::size_t i = 0; i < d; ++i) (*gx)[b * d + i] += c * hg[i];
    }
  });
}

Tensor gaussian_posterior_mean_given_xt(const Tensor& mu, const Tensor& sigma, const Tensor& x_t,
                                        double alpha_bar) {
  require(x_t.size() == mu.size(), "posterior mean: x_t and mu differ in size");
  Mat s;
  if (sigma.rank() == 1) {
    require(sigma.size() == mu.size(), "posterior mean: covariance size");
    s = to_vec(sigma).asDiagonal();
  } else {
    require(sigma.rank() == 2 && sigma.dim(0) == mu.size() && sigma.dim(1) == mu.size(), "posterior mean: covariance shape");
    s = to_mat(sigma);
  }
  const double sa = std::sqrt(alpha_bar);
  Mat c = alpha_bar * s;
  c.diagonal().array() += 1.0 - alpha_bar;
  const Vec r = to_vec(x_t) - sa * to_vec(mu);
  const Vec out = to_vec(mu) + sa * s * c.ldlt().solve(r);
  return from_vec(out);
}

Tensor squared_exponential_covariance(std::size_t side, double variance, double lengthscale, double jitter) {
  require(side >= 1 && variance > 0.0 && lengthscale > 0.0 && jitter >= 0.0,
          "squared_exponential_covariance: invalid parameters");
  const std::size_t n = side * side;
  Tensor c({n, n}, 0.0);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      const double dr = static_cast<double>(a / side) - static_cast<double>(b / side);
      const double dc = static_cast<double>(a % side) - static_cast<double>(b % side);
      c[a * n + b] = variance * std::exp(-(dr * dr + dc * dc) / (2.0 * lengthscale * lengthscale));
    }
    c[a * n + a] += jitter;
  }
  return c;
}

}  // namespace sitcom
