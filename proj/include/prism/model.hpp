#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "prism/errors.hpp"
#include "prism/kernel.hpp"
#include "prism/rng.hpp"

// Reward model and training objective. The loss couples three pieces:
//
//   total = mean_i softplus(-(delta_i - lambda1 K_i)) + lambda2 R_global,
//
// where delta_i is the preferred-minus-rejected reward margin, K_i is the
// invariance mixture kernel between the pair's shortcut features, and
// R_global is the sum of squared correlations between pooled rewards and each
// shortcut feature. Gradients are computed analytically in one pass.

namespace prism {

enum class Arch { linear, one_hidden_tanh };

struct RewardParams {
  Arch arch = Arch::linear;
  std::size_t input_dim = 0;
  std::size_t hidden = 0;        // 0 for linear
  std::vector<double> w_in;      // linear: input_dim; mlp: hidden x input_dim row-major
  std::vector<double> b_hidden;  // mlp only
  std::vector<double> w_out;     // mlp only
  double b_out = 0.0;
};

inline void validate(const RewardParams& p) {
  if (p.input_dim == 0) throw ShapeError("reward params: input_dim must be positive");
  if (p.arch == Arch::linear) {
    if (p.w_in.size() != p.input_dim || !p.b_hidden.empty() || !p.w_out.empty() ||
        p.hidden != 0)
      throw ShapeError("reward params: inconsistent linear shapes");
  } else {
    if (p.hidden == 0) throw ShapeError("reward params: hidden must be positive");
    if (p.w_in.size() != p.hidden * p.input_dim || p.b_hidden.size() != p.hidden ||
        p.w_out.size() != p.hidden)
      throw ShapeError("reward params: inconsistent mlp shapes");
  }
}

inline RewardParams zero_params(Arch arch, std::size_t input_dim, std::size_t hidden) {
  RewardParams p;
  p.arch = arch;
  p.input_dim = input_dim;
  if (arch == Arch::linear) {
    p.hidden = 0;
    p.w_in.assign(input_dim, 0.0);
  } else {
    p.hidden = hidden;
    p.w_in.assign(hidden * input_dim, 0.0);
    p.b_hidden.assign(hidden, 0.0);
    p.w_out.assign(hidden, 0.0);
  }
  validate(p);
  return p;
}

// Linear starts at zero (the objective is already non-degenerate there); the
// tanh net needs symmetry breaking or every hidden unit learns the same thing.
inline RewardParams init_params(Arch arch, std::size_t input_dim, std::size_t hidden,
                                Rng& rng) {
  RewardParams p = zero_params(arch, input_dim, hidden);
  if (arch == Arch::one_hidden_tanh) {
    double scale_in = 1.0 / std::sqrt(static_cast<double>(input_dim));
    for (auto& w : p.w_in) w = scale_in * rng.normal();
    double scale_out = 1.0 / std::sqrt(static_cast<double>(hidden));
    for (auto& w : p.w_out) w = scale_out * rng.normal();
  }
  return p;
}

inline double reward_forward(const RewardParams& p, std::span<const double> input) {
  if (input.size() != p.input_dim)
    throw ShapeError("reward_forward: input size " + std::to_string(input.size()) +
                     " does not match input_dim " + std::to_string(p.input_dim));
  if (p.arch == Arch::linear) {
    double r = p.b_out;
    for (std::size_t i = 0; i < p.input_dim; ++i) r += p.w_in[i] * input[i];
    return r;
  }
  double r = p.b_out;
  for (std::size_t a = 0; a < p.hidden; ++a) {
    double u = p.b_hidden[a];
    const double* row = p.w_in.data() + a * p.input_dim;
    for (std::size_t i = 0; i < p.input_dim; ++i) u += row[i] * input[i];
    r += p.w_out[a] * std::tanh(u);
  }
  return r;
}

// log(1 + e^x) without overflow on large x or log-of-zero on very negative x.
inline double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

inline double preference_prob(double reward_w, double reward_l) {
  return sigmoid(reward_w - reward_l);
}

// Mean negative log-likelihood of the preferred side winning.
inline double bt_loss(std::span<const double> margins) {
  if (margins.empty()) throw DataError("bt_loss: empty margin list");
  double acc = 0.0;
  for (double d : margins) acc += softplus(-d);
  return acc / static_cast<double>(margins.size());
}

// Sample Pearson correlation (ddof 1) with epsilon-guarded denominators so
// constant inputs give 0 instead of NaN.
inline double pearson_corr(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("pearson_corr: size mismatch");
  if (a.size() < 2) throw DataError("pearson_corr: need at least 2 samples");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double cab = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double da = a[i] - ma, db = b[i] - mb;
    cab += da * db;
    va += da * da;
    vb += db * db;
  }
  cab /= (n - 1.0);
  va = std::sqrt(va / (n - 1.0));
  vb = std::sqrt(vb / (n - 1.0));
  return cab / ((va + 1e-8) * (vb + 1e-8));
}

// Sum over shortcuts of squared reward-feature correlation.
inline double global_decorrelation(std::span<const double> rewards,
                                   const std::vector<std::vector<double>>& features) {
  double acc = 0.0;
  for (const auto& f : features) {
    double p = pearson_corr(rewards, f);
    acc += p * p;
  }
  return acc;
}

// One preference batch in model space: concatenated inputs plus the
// standardized shortcut features used by the penalty terms.
struct PreferenceBatch {
  std::vector<std::vector<double>> input_w, input_l;
  std::vector<std::vector<double>> feat_w, feat_l;

  std::size_t size() const { return input_w.size(); }
  std::size_t n_shortcuts() const { return feat_w.empty() ? 0 : feat_w[0].size(); }

  void validate() const {
    const std::size_t b = input_w.size();
    if (b < 2) throw DataError("batch: need at least 2 preference pairs, got " +
                               std::to_string(b));
    if (input_l.size() != b || feat_w.size() != b || feat_l.size() != b)
      throw ShapeError("batch: per-side list lengths differ");
    const std::size_t p = input_w[0].size();
    const std::size_t j = feat_w[0].size();
    if (j == 0) throw ShapeError("batch: no shortcut features");
    for (std::size_t i = 0; i < b; ++i) {
      if (input_w[i].size() != p || input_l[i].size() != p)
        throw ShapeError("batch: ragged inputs at row " + std::to_string(i));
      if (feat_w[i].size() != j || feat_l[i].size() != j)
        throw ShapeError("batch: ragged features at row " + std::to_string(i));
    }
  }
};

struct LossBreakdown {
  double total = 0.0;
  double bt_term = 0.0;    // margin likelihood including the kernel penalty
  double kinv_mean = 0.0;  // mean invariance kernel over the batch
  double rglobal = 0.0;    // decorrelation penalty before lambda2
};

struct ModelGradients {
  std::vector<double> w_in, b_hidden, w_out;
  double b_out = 0.0;
  std::vector<double> logits;
};

namespace detail {

struct ForwardCache {
  double reward = 0.0;
  std::vector<double> tanh_u;  // mlp activation per hidden unit
};

inline ForwardCache forward_cached(const RewardParams& p,
                                   std::span<const double> input) {
  ForwardCache c;
  if (p.arch == Arch::linear) {
    c.reward = reward_forward(p, input);
    return c;
  }
  if (input.size() != p.input_dim)
    throw ShapeError("reward_forward: input size does not match input_dim");
  c.tanh_u.resize(p.hidden);
  double r = p.b_out;
  for (std::size_t a = 0; a < p.hidden; ++a) {
    double u = p.b_hidden[a];
    const double* row = p.w_in.data() + a * p.input_dim;
    for (std::size_t i = 0; i < p.input_dim; ++i) u += row[i] * input[i];
    c.tanh_u[a] = std::tanh(u);
    r += p.w_out[a] * c.tanh_u[a];
  }
  c.reward = r;
  return c;
}

inline void accumulate_reward_grad(const RewardParams& p, std::span<const double> input,
                                   const ForwardCache& cache, double coeff,
                                   ModelGradients& g) {
  if (coeff == 0.0) return;
  g.b_out += coeff;
  if (p.arch == Arch::linear) {
    for (std::size_t i = 0; i < p.input_dim; ++i) g.w_in[i] += coeff * input[i];
    return;
  }
  for (std::size_t a = 0; a < p.hidden; ++a) {
    double t = cache.tanh_u[a];
    g.w_out[a] += coeff * t;
    double q = coeff * p.w_out[a] * (1.0 - t * t);
    g.b_hidden[a] += q;
    double* row = g.w_in.data() + a * p.input_dim;
    for (std::size_t i = 0; i < p.input_dim; ++i) row[i] += q * input[i];
  }
}

}  // namespace detail

// Loss and analytic gradients in one pass. With lambda1 = lambda2 = 0 the
// bt_term accumulates exactly like bt_loss over the same margins, bitwise.
inline std::pair<LossBreakdown, ModelGradients> prism_loss_gradients(
    const PreferenceBatch& batch, const RewardParams& params,
    const KernelMixConfig& mix, double lambda1, double lambda2) {
  batch.validate();
  validate(params);
  validate(mix);
  const std::size_t B = batch.size();
  const std::size_t J = batch.n_shortcuts();
  if (mix.logits.size() != J)
    throw ShapeError("prism loss: mixture size does not match shortcut count");

  std::vector<detail::ForwardCache> cw(B), cl(B);
  for (std::size_t i = 0; i < B; ++i) {
    cw[i] = detail::forward_cached(params, batch.input_w[i]);
    cl[i] = detail::forward_cached(params, batch.input_l[i]);
  }

  const std::vector<double> alpha = softmax(mix.logits);
  std::vector<double> kinv(B);
  std::vector<std::vector<double>> bumps(B, std::vector<double>(J));
  for (std::size_t i = 0; i < B; ++i) {
    double k = 0.0;
    for (std::size_t j = 0; j < J; ++j) {
      double d = batch.feat_w[i][j] - batch.feat_l[i][j];
      double e = std::exp(-(d * d) / (mix.widths[j] * mix.widths[j]));
      bumps[i][j] = e;
      k += alpha[j] * e;
    }
    kinv[i] = k;
  }

  LossBreakdown loss;
  std::vector<double> dloss_dz(B);
  double bt_acc = 0.0, kinv_acc = 0.0;
  for (std::size_t i = 0; i < B; ++i) {
    double delta = cw[i].reward - cl[i].reward;
    double z = delta - lambda1 * kinv[i];
    bt_acc += softplus(-z);
    kinv_acc += kinv[i];
    dloss_dz[i] = -sigmoid(-z) / static_cast<double>(B);
  }
  loss.bt_term = bt_acc / static_cast<double>(B);
  loss.kinv_mean = kinv_acc / static_cast<double>(B);

  ModelGradients grads;
  grads.w_in.assign(params.w_in.size(), 0.0);
  grads.b_hidden.assign(params.b_hidden.size(), 0.0);
  grads.w_out.assign(params.w_out.size(), 0.0);
  grads.logits.assign(J, 0.0);

  // margin path: dz/ddelta = 1, dz/dlogit_l = -lambda1 alpha_l (E_il - K_i)
  std::vector<double> coeff_w(B), coeff_l(B);
  for (std::size_t i = 0; i < B; ++i) {
    coeff_w[i] = dloss_dz[i];
    coeff_l[i] = -dloss_dz[i];
    if (lambda1 != 0.0) {
      for (std::size_t j = 0; j < J; ++j)
        grads.logits[j] +=
            dloss_dz[i] * (-lambda1) * alpha[j] * (bumps[i][j] - kinv[i]);
    }
  }

  // decorrelation path over the pooled 2B rewards
  if (lambda2 != 0.0) {
    const std::size_t n = 2 * B;
    const double nd = static_cast<double>(n);
    std::vector<double> rho(n);
    for (std::size_t i = 0; i < B; ++i) {
      rho[i] = cw[i].reward;
      rho[B + i] = cl[i].reward;
    }
    double rho_mean = 0.0;
    for (double r : rho) rho_mean += r;
    rho_mean /= nd;
    double rho_var = 0.0;
    for (double r : rho) rho_var += (r - rho_mean) * (r - rho_mean);
    const double sigma_r = std::sqrt(rho_var / (nd - 1.0));

    double rg = 0.0;
    std::vector<double> dR_drho(n, 0.0);
    std::vector<double> phi(n);
    for (std::size_t j = 0; j < J; ++j) {
      for (std::size_t i = 0; i < B; ++i) {
        phi[i] = batch.feat_w[i][j];
        phi[B + i] = batch.feat_l[i][j];
      }
      double phi_mean = 0.0;
      for (double f : phi) phi_mean += f;
      phi_mean /= nd;
      double cov = 0.0, phi_var = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        double dr = rho[k] - rho_mean, df = phi[k] - phi_mean;
        cov += dr * df;
        phi_var += df * df;
      }
      cov /= (nd - 1.0);
      const double sigma_f = std::sqrt(phi_var / (nd - 1.0));
      const double denom = (sigma_r + 1e-8) * (sigma_f + 1e-8);
      const double pcc = cov / denom;
      rg += pcc * pcc;
      for (std::size_t k = 0; k < n; ++k) {
        double dcov = (phi[k] - phi_mean) / (nd - 1.0);
        double dpcc = dcov / denom;
        if (sigma_r > 0.0) {
          double dsr = (rho[k] - rho_mean) / ((nd - 1.0) * sigma_r);
          dpcc -= cov * dsr / ((sigma_r + 1e-8) * denom);
        }
        dR_drho[k] += 2.0 * pcc * dpcc;
      }
    }
    loss.rglobal = rg;
    for (std::size_t i = 0; i < B; ++i) {
      coeff_w[i] += lambda2 * dR_drho[i];
      coeff_l[i] += lambda2 * dR_drho[B + i];
    }
  }

  for (std::size_t i = 0; i < B; ++i) {
    detail::accumulate_reward_grad(params, batch.input_w[i], cw[i], coeff_w[i], grads);
    detail::accumulate_reward_grad(params, batch.input_l[i], cl[i], coeff_l[i], grads);
  }

  loss.total = loss.bt_term + lambda2 * loss.rglobal;
  return {loss, grads};
}

inline LossBreakdown prism_loss(const PreferenceBatch& batch, const RewardParams& params,
                                const KernelMixConfig& mix, double lambda1,
                                double lambda2) {
  return prism_loss_gradients(batch, params, mix, lambda1, lambda2).first;
}

// Parameter vector layout: w_in, b_hidden, w_out, b_out, mixture logits.
inline std::vector<double> flatten(const RewardParams& p,
                                   const std::vector<double>& logits) {
  std::vector<double> out;
  out.reserve(p.w_in.size() + p.b_hidden.size() + p.w_out.size() + 1 + logits.size());
  out.insert(out.end(), p.w_in.begin(), p.w_in.end());
  out.insert(out.end(), p.b_hidden.begin(), p.b_hidden.end());
  out.insert(out.end(), p.w_out.begin(), p.w_out.end());
  out.push_back(p.b_out);
  out.insert(out.end(), logits.begin(), logits.end());
  return out;
}

inline void unflatten(std::span<const double> flat, RewardParams& p,
                      std::vector<double>& logits) {
  std::size_t expect = p.w_in.size() + p.b_hidden.size() + p.w_out.size() + 1 +
                       logits.size();
  if (flat.size() != expect)
    throw ShapeError("unflatten: flat vector has wrong length");
  std::size_t k = 0;
  for (auto& v : p.w_in) v = flat[k++];
  for (auto& v : p.b_hidden) v = flat[k++];
  for (auto& v : p.w_out) v = flat[k++];
  p.b_out = flat[k++];
  for (auto& v : logits) v = flat[k++];
}

inline std::vector<double> flatten_grads(const ModelGradients& g) {
  std::vector<double> out;
  out.reserve(g.w_in.size() + g.b_hidden.size() + g.w_out.size() + 1 + g.logits.size());
  out.insert(out.end(), g.w_in.begin(), g.w_in.end());
  out.insert(out.end(), g.b_hidden.begin(), g.b_hidden.end());
  out.insert(out.end(), g.w_out.begin(), g.w_out.end());
  out.push_back(g.b_out);
  out.insert(out.end(), g.logits.begin(), g.logits.end());
  return out;
}

}  // namespace prism
