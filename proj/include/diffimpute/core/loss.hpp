#pragma once

#include <cmath>

#include "diffimpute/core/error.hpp"
#include "diffimpute/core/tensor.hpp"

namespace diffimpute {

/// Mean over elements of the smooth-L1 (Huber) penalty with threshold `beta`,
/// evaluated on d = target - pred. Differentiable form: ops::smooth_l1_loss.
template <class Real>
Real smooth_l1(const Tensor<Real>& pred, const Tensor<Real>& target, Real beta) {
    require_same_shape(pred, target, "smooth_l1");
    if (!(beta > 0)) throw InputError("smooth_l1: beta must be positive");
    Real total = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const Real d = target[i] - pred[i];
        const Real ad = std::abs(d);
        total += ad < beta ? Real(0.5) * d * d / beta : ad - Real(0.5) * beta;
    }
    return total / Real(pred.size());
}

} // namespace diffimpute
