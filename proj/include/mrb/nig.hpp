#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "mrb/error.hpp"
#include "mrb/volume.hpp"

namespace mrb {

// Per-voxel Normal-Inverse-Gamma hyperparameters (gamma, v, alpha, beta).
struct NigMaps {
  Volume gamma;
  Volume v;
  Volume alpha;
  Volume beta;

  /// Throws DomainError unless v > 0, alpha > 1 and beta > 0 everywhere.
  void validate() const {
    const Dims& d = gamma.dims();
    if (!(v.dims() == d && alpha.dims() == d && beta.dims() == d)) {
      fail(ErrorKind::DimensionMismatch, "NIG maps must share dims");
    }
    for (std::size_t n = 0; n < d.total(); ++n) {
      if (!(v.values()[n] > 0.0f) || !(alpha.values()[n] > 1.0f) || !(beta.values()[n] > 0.0f)) {
        fail(ErrorKind::DomainError, "NIG parameters out of domain at voxel " + std::to_string(n) +
                                         " (need v > 0, alpha > 1, beta > 0)");
      }
    }
  }
};

struct NigMoments {
  Volume prediction;  // E[mu] = gamma
  Volume aleatoric;   // E[sigma^2] = beta / (alpha - 1)
  Volume epistemic;   // Var[mu] = beta / (v (alpha - 1))
};

inline NigMoments nig_moments(const NigMaps& m) {
  m.validate();
  const Dims& d = m.gamma.dims();
  std::vector<float> aleatoric(d.total()), epistemic(d.total());
  for (std::size_t n = 0; n < d.total(); ++n) {
    const double v = m.v.values()[n];
    const double a = m.alpha.values()[n];
    const double b = m.beta.values()[n];
    aleatoric[n] = static_cast<float>(b / (a - 1.0));
    epistemic[n] = static_cast<float>(b / (v * (a - 1.0)));
  }
  return {m.gamma, Volume(d, std::move(aleatoric), m.gamma.spacing()),
          Volume(d, std::move(epistemic), m.gamma.spacing())};
}

struct SliceValue {
  std::size_t slice = 0;
  double value = 0.0;
};

/// Arithmetic mean of each SL slice.
inline std::vector<SliceValue> mean_epistemic_per_slice(const Volume& epistemic) {
  std::vector<SliceValue> out;
  out.reserve(epistemic.dims().sl);
  for (std::size_t k = 0; k < epistemic.dims().sl; ++k) {
    double acc = 0.0;
    const auto s = epistemic.slice(k);
    for (float x : s) acc += x;
    out.push_back({k, acc / static_cast<double>(s.size())});
  }
  return out;
}

}  // namespace mrb
