#include "fcucr/distill.hpp"

#include <atomic>

#include "fcucr/errors.hpp"

namespace fcucr {

namespace {
std::atomic<std::uint64_t> g_invocations{0};
}

EncoderSnapshot snapshot(const SharedParams& phi, int step) {
  if (step < 1) throw ProtocolError("snapshot: step must be >= 1");
  return EncoderSnapshot(phi, step);
}

DistillTerms distill_terms(const EncoderTrace& current, const EncoderTrace& frozen,
                           DistillTarget target) {
  g_invocations.fetch_add(1, std::memory_order_relaxed);
  const std::size_t m = current.length();
  if (m == 0) throw DataError("distillation needs a non-empty session");
  if (frozen.length() != m || frozen.items != current.items) {
    throw ShapeError("distill_terms: traces must cover the same session");
  }
  const auto d = current.prototype().size();
  DistillTerms out;
  out.dh.assign(m, Vector::Zero(d));
  const std::size_t first = target == DistillTarget::kPrototype ? m : 1;
  const double denom = static_cast<double>((m - first + 1) * static_cast<std::size_t>(d));
  for (std::size_t j = first; j <= m; ++j) {
    const Vector diff = current.state(j) - frozen.state(j);
    out.loss += diff.squaredNorm();
    out.dh[j - 1] = (2.0 / denom) * diff;
  }
  out.loss /= denom;
  return out;
}

DistillResult dist_loss(const SharedParams& current, const EncoderSnapshot* frozen,
                        std::span<const ItemId> items, DistillTarget target) {
  if (frozen == nullptr) throw ProtocolError("dist_loss: no previous encoder snapshot");
  const EncoderTrace cur = encode_session(current, items);
  const EncoderTrace old = encode_session(frozen->params(), items);
  DistillTerms terms = distill_terms(cur, old, target);
  DistillResult out{terms.loss, SharedParams::zeros_like(current)};
  encoder_backward(current, cur, terms.dh, out.grad);
  return out;
}

std::uint64_t dist_loss_invocations() { return g_invocations.load(std::memory_order_relaxed); }

}  // namespace fcucr
