#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "core/rng.hpp"
#include "core/schedule.hpp"
#include "core/score_model.hpp"
#include "core/tensor.hpp"

namespace sitcom {

// Gaussian mixture sum_k w_k N(mu_k, Sigma_k). Covariances are [d] (diagonal)
// or [d, d] (full, SPD).
class GmmPrior {
 public:
  GmmPrior(std::vector<double> weights, std::vector<Tensor> means, std::vector<Tensor> covariances);
  // Copies share nothing; the factor cache starts empty.
  GmmPrior(const GmmPrior& o) : dim_(o.dim_), weights_(o.weights_), means_(o.means_), covs_(o.covs_) {}
  GmmPrior& operator=(const GmmPrior&) = delete;

  // Text format, one component per line:
  //   dim <d>
  //   component <weight> mean <m_1..m_d> var <v_1..v_d>
  // '#' starts a comment. Weights are normalized on load.
  static GmmPrior parse_text(const std::string& text);
  static GmmPrior load_text(const std::filesystem::path& path);
  std::string to_text() const;  // diagonal priors only

  std::size_t dim() const noexcept { return dim_; }
  std::size_t components() const noexcept { return weights_.size(); }
  const std::vector<double>& weights() const noexcept { return weights_; }
  const Tensor& mean(std::size_t k) const { return means_.at(k); }
  const Tensor& covariance(std::size_t k) const { return covs_.at(k); }
  bool diagonal(std::size_t k) const { return covs_.at(k).rank() == 1; }

  Tensor sample(Rng& rng) const;

  // Law of sqrt(ab) x0 + sqrt(1-ab) eta for x0 ~ prior: components
  // N(sqrt(ab) mu_k, ab Sigma_k + (1-ab) I).
  double log_density(const Tensor& x, double alpha_bar) const;
  Tensor score(const Tensor& x, double alpha_bar) const;
  // Score together with the symmetric Hessian-vector map of log p.
  struct ScoreEval {
    Tensor score;
    std::vector<double> resp;            // posterior responsibilities
    std::vector<Tensor> component_score; // -C_k^{-1}(x - m_k)
  };
  ScoreEval evaluate(const Tensor& x, double alpha_bar) const;
  // H g for the log-density Hessian H at the point where `ev` was computed.
  Tensor hessian_vector(const ScoreEval& ev, const Tensor& g, double alpha_bar) const;

 private:
  struct Factor;  // per-alpha_bar precision matrices and log-determinants
  std::shared_ptr<const Factor> factor(double alpha_bar) const;

  std::size_t dim_ = 0;
  std::vector<double> weights_;
  std::vector<Tensor> means_;
  std::vector<Tensor> covs_;

  mutable std::mutex cache_mutex_;
  mutable std::map<double, std::shared_ptr<const Factor>> cache_;
};

// Exact eps for data drawn from a GmmPrior: eps = -sqrt(1 - ab_t) * score.
class GmmScoreModel final : public ScoreModel {
 public:
  GmmScoreModel(std::shared_ptr<const GmmPrior> prior, std::shared_ptr<const NoiseSchedule> sched);

  std::size_t dim() const override { return prior_->dim(); }
  ad::Var eps(ad::Graph& g, ad::Var x, std::span<const int> times) const override;
  using ScoreModel::eps;

  const GmmPrior& prior() const { return *prior_; }

 private:
  std::shared_ptr<const GmmPrior> prior_;
  std::shared_ptr<const NoiseSchedule> sched_;
};

// Closed-form E[x0 | x_t] for a single Gaussian N(mu, Sigma):
// mu + sqrt(ab) Sigma (ab Sigma + (1-ab) I)^{-1} (x_t - sqrt(ab) mu).
Tensor gaussian_posterior_mean_given_xt(const Tensor& mu, const Tensor& sigma, const Tensor& x_t,
                                        double alpha_bar);

// Squared-exponential covariance on a side x side grid:
// variance * exp(-|p_i - p_j|^2 / (2 l^2)) + jitter on the diagonal.
Tensor squared_exponential_covariance(std::size_t side, double variance, double lengthscale,
                                      double jitter);

}  // namespace sitcom
