#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include <boost/math/special_functions/digamma.hpp>

#include "mrb/error.hpp"
#include "mrb/nig.hpp"
#include "mrb/quality.hpp"
#include "mrb/volume.hpp"

namespace mrb {

constexpr double kCharbonnierEpsilon = 1e-4;

/// mean sqrt((x - y)^2 + eps): a differentiable L1.
inline double charbonnier(const Volume& x, const Volume& y, double eps = kCharbonnierEpsilon) {
  detail::require_same_dims(x, y);
  if (!(eps > 0.0)) fail(ErrorKind::DomainError, "Charbonnier epsilon must be positive");
  // Accumulate the excess over the sqrt(eps) floor so x == y returns the floor exactly.
  const double floor = std::sqrt(eps);
  double excess = 0.0;
  const auto a = x.values();
  const auto b = y.values();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    excess += d * d / (std::sqrt(d * d + eps) + floor);
  }
  return floor + excess / static_cast<double>(a.size());
}

/// mean |1 - SSIM_i^2| over per-sample SSIM values.
inline double ssim_loss(std::span<const double> ssim_values) {
  if (ssim_values.empty()) return 0.0;
  double acc = 0.0;
  for (double s : ssim_values) acc += std::abs(1.0 - s * s);
  return acc / static_cast<double>(ssim_values.size());
}

/// SSIM loss with each SL slice as one sample, scored by whole-slice SSIM.
inline double ssim_loss(const Volume& x, const Volume& y) {
  detail::require_same_dims(x, y);
  std::vector<double> values;
  for (std::size_t k = 0; k < x.dims().sl; ++k) {
    values.push_back(detail::ssim_of(x.slice(k), y.slice(k), {}));
  }
  return ssim_loss(values);
}

// NIG loss terms at one voxel, with partial derivatives for gradient checks.
struct NigTerm {
  double nll = 0.0;
  double reg = 0.0;
  double dnll_dgamma = 0.0;
  double dnll_dv = 0.0;
  double dnll_dalpha = 0.0;
  double dnll_dbeta = 0.0;
  double dreg_dgamma = 0.0;  // subgradient 0 at y == gamma
};

inline NigTerm nig_term(double y, double gamma, double v, double alpha, double beta) {
  if (!(v > 0.0) || !(alpha > 1.0) || !(beta > 0.0)) {
    fail(ErrorKind::DomainError, "NIG loss needs v > 0, alpha > 1, beta > 0");
  }
  const double r = y - gamma;
  const double omega = 2.0 * beta * (1.0 + v);
  const double q = r * r * v + omega;

  NigTerm t;
  t.nll = 0.5 * std::log(std::numbers::pi / v) - alpha * std::log(omega) + (alpha + 0.5) * std::log(q) +
          std::lgamma(alpha) - std::lgamma(alpha + 0.5);
  t.reg = std::abs(r) * (2.0 * v + alpha);

  t.dnll_dgamma = -(alpha + 0.5) * 2.0 * r * v / q;
  t.dnll_dv = -0.5 / v - alpha * 2.0 * beta / omega + (alpha + 0.5) * (r * r + 2.0 * beta) / q;
  t.dnll_dalpha = -std::log(omega) + std::log(q) + boost::math::digamma(alpha) - boost::math::digamma(alpha + 0.5);
  t.dnll_dbeta = -alpha / beta + (alpha + 0.5) * 2.0 * (1.0 + v) / q;
  t.dreg_dgamma = r > 0.0 ? -(2.0 * v + alpha) : (r < 0.0 ? (2.0 * v + alpha) : 0.0);
  return t;
}

struct NigLoss {
  double nll = 0.0;
  double reg = 0.0;
  double total(double lambda) const { return nll + lambda * reg; }
};

/// Voxel means of the NIG negative log-likelihood and evidence regularizer.
inline NigLoss nig_loss(const Volume& y, const NigMaps& m) {
  detail::require_same_dims(y, m.gamma);
  m.validate();
  NigLoss out;
  const std::size_t n = y.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto t = nig_term(y.values()[i], m.gamma.values()[i], m.v.values()[i], m.alpha.values()[i],
                            m.beta.values()[i]);
    out.nll += t.nll;
    out.reg += t.reg;
  }
  out.nll /= static_cast<double>(n);
  out.reg /= static_cast<double>(n);
  return out;
}

struct LossWeights {
  double alpha1 = 0.5;   // SSIM loss
  double alpha2 = 1.0;   // NIG loss
  double lambda = 0.01;  // NIG regularizer
  double epsilon = kCharbonnierEpsilon;
};

struct LossBreakdown {
  double charbonnier = 0.0;
  double ssim_loss = 0.0;
  double nig_nll = 0.0;
  double nig_reg = 0.0;
  double total = 0.0;
  LossWeights weights;
  bool uncertainty = false;
};

/// Charbonnier + alpha1 SSIM loss, plus alpha2 (NLL + lambda Reg) when NIG maps are given.
inline LossBreakdown combined_loss(const Volume& restored, const Volume& reference,
                                   const std::optional<NigMaps>& nig = std::nullopt, const LossWeights& w = {}) {
  LossBreakdown b;
  b.weights = w;
  b.charbonnier = charbonnier(restored, reference, w.epsilon);
  b.ssim_loss = ssim_loss(restored, reference);
  b.total = b.charbonnier + w.alpha1 * b.ssim_loss;
  if (nig) {
    const auto l = nig_loss(reference, *nig);
    b.uncertainty = true;
    b.nig_nll = l.nll;
    b.nig_reg = l.reg;
    b.total += w.alpha2 * (l.nll + w.lambda * l.reg);
  }
  return b;
}

}  // namespace mrb
