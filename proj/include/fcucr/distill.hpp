#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fcucr/seqrec.hpp"

namespace fcucr {

// Which hidden states the self-distillation term aligns.
enum class DistillTarget {
  kAllPositions,  // h_1..h_m
  kPrototype,     // h_m only
};

// Frozen copy of a client's encoder at the end of step `step`.
class EncoderSnapshot {
 public:
  EncoderSnapshot(SharedParams params, int step) : params_(std::move(params)), step_(step) {}

  const SharedParams& params() const { return params_; }
  int step() const { return step_; }
  bool operator==(const EncoderSnapshot&) const = default;

 private:
  SharedParams params_;
  int step_;
};

EncoderSnapshot snapshot(const SharedParams& phi, int step);

// Loss value and dL/dh_j (j = 1..m) for the current encoder's trace.
struct DistillTerms {
  double loss = 0.0;
  std::vector<Vector> dh;
};

// MSE between the current and frozen hidden states of the same session,
// averaged over positions and dimensions. Gradient is one-sided.
DistillTerms distill_terms(const EncoderTrace& current, const EncoderTrace& frozen,
                           DistillTarget target);

struct DistillResult {
  double loss = 0.0;
  SharedParams grad;  // w.r.t. the current encoder only
};

// Throws ProtocolError when the snapshot is absent (distillation must be
// disabled at t = 1).
DistillResult dist_loss(const SharedParams& current, const EncoderSnapshot* frozen,
                        std::span<const ItemId> items,
                        DistillTarget target = DistillTarget::kAllPositions);

// Number of distill_terms evaluations in this process.
std::uint64_t dist_loss_invocations();

}  // namespace fcucr
