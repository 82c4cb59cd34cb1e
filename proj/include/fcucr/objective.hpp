#pragma once

#include "fcucr/distill.hpp"
#include "fcucr/seqrec.hpp"

namespace fcucr {

struct LossBreakdown {
  double rec_loss = 0.0;
  double dist_loss = 0.0;
  double lambda = 0.0;
  double total = 0.0;  // rec_loss + lambda * dist_loss
};

struct ObjectiveResult {
  GradientSet grads;
  LossBreakdown loss;
};

struct ObjectiveInputs {
  const Session* session = nullptr;
  const Vector* rho = nullptr;  // fused prototype, treated as a constant input
  const NegativeSet* negatives = nullptr;
  double lambda = 0.0;
  // Trace of the frozen previous-step encoder on the same session, or null
  // at the first step. Ignored when lambda == 0.
  const EncoderTrace* frozen = nullptr;
  DistillTarget distill_target = DistillTarget::kAllPositions;
};

// Exact gradients of rec_loss + lambda * dist_loss w.r.t. every entry of the
// shared and private parameters. Throws NumericalError naming the first
// non-finite block.
ObjectiveResult backward(const SharedParams& phi, const PrivateParams& psi,
                         const ObjectiveInputs& in);

// Convenience overload encoding the session under the snapshot first.
ObjectiveResult backward(const SharedParams& phi, const PrivateParams& psi, const Session& session,
                         const Vector& rho, const NegativeSet& negatives, double lambda,
                         const EncoderSnapshot* previous,
                         DistillTarget target = DistillTarget::kAllPositions);

}  // namespace fcucr
