#pragma once

#include <string>

#include "xglad/model.hpp"
#include "xglad/tensor.hpp"

namespace xglad {

enum class Estimator { infonce, js, dv };

// Negative-pair convention for the contrastive loss. "paper" keeps the
// positive pair out of the denominator and draws negatives from the same
// view; "cross_view" is the standard NT-Xent form with cross-view negatives
// and the positive included.
enum class NegativeMode { paper, cross_view };

Estimator parse_estimator(const std::string& s);
std::string estimator_name(Estimator e);
NegativeMode parse_negative_mode(const std::string& s);
std::string negative_mode_name(NegativeMode m);

struct LossConfig {
  Estimator estimator = Estimator::infonce;
  double temperature = 0.2;
  double beta = 0.0;  // SKL weight; meaningful only with two extractors
  NegativeMode negative_mode = NegativeMode::paper;

  void validate() const;
};

// Symmetric bidirectional contrastive loss over aligned embedding rows:
//   -(1/2B) sum_i [ l(h_i, h*_i) + l(h*_i, h_i) ]
// with l(h_i, h*_i) = log( exp(cos(h_i,h*_i)/tau) / sum_{j != i} exp(cos(h_i,h_j)/tau) )
// in paper mode; the mirrored term draws its negatives from the dual view.
Tensor info_nce_loss(const Tensor& h, const Tensor& h_star, double tau,
                     NegativeMode mode = NegativeMode::paper);

// Softplus-based JS lower bound with critic T = cos(.,.)/tau, positives
// (h_i, h*_i) and cross-view negatives (h_i, h*_j), returned sign-flipped
// as a loss.
Tensor js_mi_loss(const Tensor& h, const Tensor& h_star, double tau);

// Donsker-Varadhan bound E_pos[T] - log(E_neg[exp T]) with the same critic
// and pairing, returned sign-flipped as a loss.
Tensor dv_mi_loss(const Tensor& h, const Tensor& h_star, double tau);

// Mean over entries of the symmetrized Bernoulli KL divergence
// (1/2)[KL(p_i||q_i) + KL(q_i||p_i)]. Entries are silently clamped into
// [1e-6, 1-1e-6]; strict mode errors on entries at 0 or 1 exactly.
Tensor skl_divergence(const Tensor& p, const Tensor& q, bool strict = false);

// Full training loss for one batch: the estimator loss, plus
// beta * SKL(lifted p', dual extractor's p*) in two-extractor mode.
Tensor training_loss(const BatchForward& out, const LossConfig& cfg, bool two_extractor);

// Anomaly score of one embedding pair against a fixed negative pool:
//   s = -(1/2) [ l(h, h*) + l(h*, h) ]
// where negatives come from the pool's matching view, excluding
// exclude_index when the sample itself is a pool member (-1 otherwise).
// Higher scores are more anomalous. Pool similarities are summed in sorted
// order, so the score does not depend on the pool's row ordering.
double anomaly_score(const Tensor& h, const Tensor& h_star, const Tensor& pool_h,
                     const Tensor& pool_h_star, double tau, int exclude_index = -1);

}  // namespace xglad
