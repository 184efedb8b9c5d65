#include "xglad/objective.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace xglad {

Estimator parse_estimator(const std::string& s) {
  if (s == "infonce") return Estimator::infonce;
  if (s == "js") return Estimator::js;
  if (s == "dv") return Estimator::dv;
  throw ConfigError("unknown estimator '" + s + "' (expected infonce, js, dv)");
}

std::string estimator_name(Estimator e) {
  switch (e) {
    case Estimator::infonce: return "infonce";
    case Estimator::js: return "js";
    case Estimator::dv: return "dv";
  }
  return "?";
}

NegativeMode parse_negative_mode(const std::string& s) {
  if (s == "paper") return NegativeMode::paper;
  if (s == "cross_view") return NegativeMode::cross_view;
  throw ConfigError("unknown negative_mode '" + s + "' (expected paper, cross_view)");
}

std::string negative_mode_name(NegativeMode m) {
  return m == NegativeMode::paper ? "paper" : "cross_view";
}

void LossConfig::validate() const {
  if (!(temperature > 0.0)) throw ConfigError("loss: temperature must be positive");
  if (beta < 0.0) throw ConfigError("loss: beta must be non-negative");
}

namespace {

void check_batch(const Tensor& h, const Tensor& h_star) {
  if (!h.same_shape(h_star))
    throw DimensionError("loss: embedding matrices must have equal shape");
  if (h.rows() < 2)
    throw UsageError("loss: batch size " + std::to_string(h.rows()) +
                     " too small, need at least one negative");
}

Tensor eye_mask(int n) {
  Tensor t(n, n);
  for (int i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

Tensor offdiag_mask(int n) {
  Tensor t(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) t.at(i, j) = i == j ? 0.0 : 1.0;
  return t;
}

}  // namespace

Tensor info_nce_loss(const Tensor& h, const Tensor& h_star, double tau, NegativeMode mode) {
  check_batch(h, h_star);
  const int b = h.rows();
  const Tensor eye = eye_mask(b);
  const Tensor cross = cosine_matrix(h, h_star);
  const Tensor pos = scale(row_sum(mul(cross, eye)), 1.0 / tau);  // diagonal, B x 1

  Tensor denom_fwd, denom_bwd;
  if (mode == NegativeMode::paper) {
    const Tensor off = offdiag_mask(b);
    denom_fwd = row_sum(mul(exp(scale(cosine_matrix(h, h), 1.0 / tau)), off));
    denom_bwd = row_sum(mul(exp(scale(cosine_matrix(h_star, h_star), 1.0 / tau)), off));
  } else {
    denom_fwd = row_sum(exp(scale(cross, 1.0 / tau)));
    denom_bwd = row_sum(exp(scale(transpose(cross), 1.0 / tau)));
  }
  const Tensor terms = add(sub(pos, log(denom_fwd)), sub(pos, log(denom_bwd)));
  return scale(sum_all(terms), -0.5 / b);
}

Tensor js_mi_loss(const Tensor& h, const Tensor& h_star, double tau) {
  check_batch(h, h_star);
  const int b = h.rows();
  const Tensor t = scale(cosine_matrix(h, h_star), 1.0 / tau);
  // loss = -( E_pos[-sp(-T)] - E_neg[sp(T)] ) = E_pos[sp(-T)] + E_neg[sp(T)]
  const Tensor pos = sum_all(mul(softplus(scale(t, -1.0)), eye_mask(b)));
  const Tensor neg = sum_all(mul(softplus(t), offdiag_mask(b)));
  return add(scale(pos, 1.0 / b), scale(neg, 1.0 / (static_cast<double>(b) * (b - 1))));
}

Tensor dv_mi_loss(const Tensor& h, const Tensor& h_star, double tau) {
  check_batch(h, h_star);
  const int b = h.rows();
  const Tensor t = scale(cosine_matrix(h, h_star), 1.0 / tau);
  const Tensor pos = scale(sum_all(mul(t, eye_mask(b))), 1.0 / b);
  const Tensor neg_mean =
      scale(sum_all(mul(exp(t), offdiag_mask(b))), 1.0 / (static_cast<double>(b) * (b - 1)));
  // loss = -( E_pos[T] - log E_neg[exp T] )
  return sub(log(neg_mean), pos);
}

Tensor skl_divergence(const Tensor& p, const Tensor& q, bool strict) {
  if (!p.same_shape(q)) throw DimensionError("skl_divergence: shape mismatch");
  if (p.size() == 0) throw UsageError("skl_divergence: empty input");
  constexpr double kEps = 1e-6;
  if (strict) {
    for (std::size_t i = 0; i < p.size(); ++i)
      if (p.values()[i] <= 0.0 || p.values()[i] >= 1.0 || q.values()[i] <= 0.0 ||
          q.values()[i] >= 1.0)
        throw DomainError("skl_divergence: entry outside (0,1) in strict mode");
  }
  const Tensor a = clamp(p, kEps, 1.0 - kEps);
  const Tensor b = clamp(q, kEps, 1.0 - kEps);
  Tensor ones(p.rows(), p.cols());
  for (auto& v : ones.values()) v = 1.0;
  const Tensor oa = sub(ones, a);
  const Tensor ob = sub(ones, b);
  // KL(Ber(a) || Ber(b)) = a log(a/b) + (1-a) log((1-a)/(1-b))
  const Tensor kl_ab = add(mul(a, sub(log(a), log(b))), mul(oa, sub(log(oa), log(ob))));
  const Tensor kl_ba = add(mul(b, sub(log(b), log(a))), mul(ob, sub(log(ob), log(oa))));
  return scale(sum_all(add(kl_ab, kl_ba)), 0.5 / static_cast<double>(p.size()));
}

Tensor training_loss(const BatchForward& out, const LossConfig& cfg, bool two_extractor) {
  cfg.validate();
  if (cfg.beta > 0.0 && !two_extractor)
    throw ConfigError("training_loss: beta > 0 requires the two-extractor variant");
  Tensor loss;
  switch (cfg.estimator) {
    case Estimator::infonce:
      loss = info_nce_loss(out.h, out.h_star, cfg.temperature, cfg.negative_mode);
      break;
    case Estimator::js: loss = js_mi_loss(out.h, out.h_star, cfg.temperature); break;
    case Estimator::dv: loss = dv_mi_loss(out.h, out.h_star, cfg.temperature); break;
  }
  if (two_extractor && cfg.beta > 0.0)
    loss = add(loss, scale(skl_divergence(out.p_lifted, out.p_star), cfg.beta));
  return loss;
}

namespace {

double plain_cosine(const Tensor& a, int row_a, const Tensor& b, int row_b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (int k = 0; k < a.cols(); ++k) {
    const double x = a.at(row_a, k), y = b.at(row_b, k);
    dot += x * y;
    na += x * x;
    nb += y * y;
  }
  return dot / ((std::sqrt(na) + 1e-8) * (std::sqrt(nb) + 1e-8));
}

// log sum_j exp(cos_j / tau) over pool rows, skipping `exclude`; terms are
// added in sorted order so the result is independent of pool ordering.
double log_partition(const Tensor& query, const Tensor& pool, double tau, int exclude) {
  std::vector<double> sims;
  sims.reserve(static_cast<std::size_t>(pool.rows()));
  for (int j = 0; j < pool.rows(); ++j) {
    if (j == exclude) continue;
    sims.push_back(plain_cosine(query, 0, pool, j));
  }
  std::sort(sims.begin(), sims.end());
  double acc = 0.0;
  for (double s : sims) acc += std::exp(s / tau);
  return std::log(acc);
}

}  // namespace

double anomaly_score(const Tensor& h, const Tensor& h_star, const Tensor& pool_h,
                     const Tensor& pool_h_star, double tau, int exclude_index) {
  if (!pool_h.same_shape(pool_h_star))
    throw DimensionError("anomaly_score: pool matrices must have equal shape");
  if (pool_h.rows() < 2)
    throw UsageError("anomaly_score: negative pool needs at least 2 rows");
  if (h.cols() != pool_h.cols() || h_star.cols() != pool_h.cols() || h.rows() != 1 ||
      h_star.rows() != 1)
    throw DimensionError("anomaly_score: embeddings must be 1 x pool-dim rows");
  const double pos = plain_cosine(h, 0, h_star, 0) / tau;
  const double l_fwd = pos - log_partition(h, pool_h, tau, exclude_index);
  const double l_bwd = pos - log_partition(h_star, pool_h_star, tau, exclude_index);
  return -0.5 * (l_fwd + l_bwd);
}

}  // namespace xglad
