#include "fcucr/objective.hpp"

#include <cmath>
#include <optional>

#include "fcucr/errors.hpp"

namespace fcucr {

namespace {

template <class Params>
void check_finite(const Params& p) {
  Params::visit(p, [](std::string_view name, const auto& a) {
    if (!a.allFinite()) throw NumericalError(std::string(name), "non-finite gradient");
  });
}

}  // namespace

ObjectiveResult backward(const SharedParams& phi, const PrivateParams& psi,
                         const ObjectiveInputs& in) {
  const Session& session = *in.session;
  const Vector& rho = *in.rho;
  const NegativeSet& negatives = *in.negatives;
  const std::size_t m = session.size();
  if (m < 2) throw DataError("backward: session length must be >= 2");
  if (negatives.size() != m - 1) throw ShapeError("backward: one negative row per position");
  const int d = phi.dim();

  ObjectiveResult out{{SharedParams::zeros_like(phi), PrivateParams::zeros_like(psi)}, {}};
  auto& gs = out.grads.shared;
  auto& gh = out.grads.head;

  const EncoderTrace tr = encode_session(phi, session.items);
  std::vector<Vector> dh(m, Vector::Zero(d));

  const double positions = static_cast<double>(m - 1);
  double rec = 0.0;
  for (std::size_t j = 0; j + 1 < m; ++j) {
    const HeadTrace ht = head_forward(psi, tr.state(j + 1), rho);
    const double norm = 1.0 / (static_cast<double>(1 + negatives[j].size()) * positions);
    Vector dq = Vector::Zero(d);
    auto accumulate = [&](ItemId item, double label) {
      const double s = phi.embedding.row(item).dot(ht.query);
      rec += (label > 0.5 ? softplus(-s) : softplus(s)) * norm;
      const double ds = (sigmoid(s) - label) * norm;
      dq.noalias() += ds * phi.embedding.row(item).transpose();
      gs.embedding.row(item).noalias() += ds * ht.query.transpose();
    };
    accumulate(session.items[j + 1], 1.0);
    for (ItemId n : negatives[j]) accumulate(n, 0.0);

    gh.w2.noalias() += dq * ht.hidden.transpose();
    gh.b2 += dq;
    const Vector da1 = (psi.w2.transpose() * dq)
                           .cwiseProduct(Vector::Ones(ht.hidden.size()) - ht.hidden.cwiseAbs2());
    gh.w1.noalias() += da1 * ht.input.transpose();
    gh.b1 += da1;
    // Only the h half of the head input feeds back; rho is constant.
    dh[j].noalias() += (psi.w1.transpose() * da1).head(d);
  }
  out.loss.rec_loss = rec;
  out.loss.lambda = in.lambda;

  if (in.lambda != 0.0 && in.frozen != nullptr) {
    DistillTerms terms = distill_terms(tr, *in.frozen, in.distill_target);
    out.loss.dist_loss = terms.loss;
    for (std::size_t j = 0; j < m; ++j) dh[j].noalias() += in.lambda * terms.dh[j];
  }
  out.loss.total = out.loss.rec_loss + in.lambda * out.loss.dist_loss;
  if (!std::isfinite(out.loss.total)) throw NumericalError("loss", "non-finite objective");

  encoder_backward(phi, tr, dh, gs);
  check_finite(gs);
  check_finite(gh);
  return out;
}

ObjectiveResult backward(const SharedParams& phi, const PrivateParams& psi, const Session& session,
                         const Vector& rho, const NegativeSet& negatives, double lambda,
                         const EncoderSnapshot* previous, DistillTarget target) {
  std::optional<EncoderTrace> frozen;
  if (previous != nullptr && lambda != 0.0) frozen = encode_session(previous->params(), session.items);
  ObjectiveInputs in{&session, &rho, &negatives, lambda, frozen ? &*frozen : nullptr, target};
  return backward(phi, psi, in);
}

}  // namespace fcucr
