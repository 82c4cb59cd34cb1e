// Independent reference implementations used by the tests. Everything here is
// written with plain loops over std::vector so it shares no code path with
// the Eigen implementation under test. Arithmetic is in long double so that
// central differences resolve gradient entries near 1e-8.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "fcucr/distill.hpp"
#include "fcucr/objective.hpp"
#include "fcucr/seqrec.hpp"

namespace fcucr::oracle {

using Real = long double;
using Vec = std::vector<Real>;

inline Real sig(Real x) { return 1.0L / (1.0L + std::exp(-x)); }

inline Vec matvec(const Matrix& m, const Vec& x) {
  Vec out(static_cast<std::size_t>(m.rows()), 0.0L);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[static_cast<std::size_t>(i)] += m(i, j) * x[static_cast<std::size_t>(j)];
  return out;
}

inline Vec to_vec(const Vector& v) { return Vec(v.data(), v.data() + v.size()); }

inline std::vector<double> to_double(const Vec& v) { return std::vector<double>(v.begin(), v.end()); }

inline Vec embedding_row(const SharedParams& phi, ItemId item) {
  Vec out;
  for (Eigen::Index j = 0; j < phi.embedding.cols(); ++j) out.push_back(phi.embedding(item, j));
  return out;
}

// Straight-line transcription of one gated-recurrence step.
inline Vec gru_step(const SharedParams& p, const Vec& x, const Vec& h) {
  const std::size_t d = h.size();
  Vec wz = matvec(p.w_z, x), uz = matvec(p.u_z, h);
  Vec wr = matvec(p.w_r, x), ur = matvec(p.u_r, h);
  Vec z(d), r(d), rh(d), out(d);
  for (std::size_t i = 0; i < d; ++i) {
    z[i] = sig(wz[i] + uz[i] + p.b_z[static_cast<Eigen::Index>(i)]);
    r[i] = sig(wr[i] + ur[i] + p.b_r[static_cast<Eigen::Index>(i)]);
    rh[i] = r[i] * h[i];
  }
  Vec wh = matvec(p.w_h, x), uh = matvec(p.u_h, rh);
  for (std::size_t i = 0; i < d; ++i) {
    const Real c = std::tanh(wh[i] + uh[i] + p.b_h[static_cast<Eigen::Index>(i)]);
    out[i] = (1.0L - z[i]) * h[i] + z[i] * c;
  }
  return out;
}

// States h_1..h_m.
inline std::vector<Vec> encode(const SharedParams& p, const std::vector<ItemId>& items) {
  Vec h(static_cast<std::size_t>(p.dim()), 0.0L);
  std::vector<Vec> out;
  for (ItemId item : items) {
    h = gru_step(p, embedding_row(p, item), h);
    out.push_back(h);
  }
  return out;
}

inline Vec query(const PrivateParams& psi, const Vec& h, const Vec& rho) {
  Vec in = h;
  in.insert(in.end(), rho.begin(), rho.end());
  Vec a = matvec(psi.w1, in);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = std::tanh(a[i] + psi.b1[static_cast<Eigen::Index>(i)]);
  Vec q = matvec(psi.w2, a);
  for (std::size_t i = 0; i < q.size(); ++i) q[i] += psi.b2[static_cast<Eigen::Index>(i)];
  return q;
}

inline Real dot(const Vec& a, const Vec& b) {
  Real s = 0.0L;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline Real score(const SharedParams& phi, const Vec& q, ItemId item) {
  return dot(q, embedding_row(phi, item));
}

// Binary cross-entropy with sampled negatives, averaged per position and
// normalized by (1 + S).
inline Real bce_loss(const SharedParams& phi, const PrivateParams& psi, const std::vector<ItemId>& items,
                       const Vec& rho, const NegativeSet& negs) {
  const auto states = encode(phi, items);
  Real total = 0.0L;
  for (std::size_t j = 0; j + 1 < items.size(); ++j) {
    const Vec q = query(psi, states[j], rho);
    Real l = -std::log(sig(score(phi, q, items[j + 1])));
    for (ItemId n : negs[j]) l -= std::log(1.0L - sig(score(phi, q, n)));
    total += l / static_cast<Real>(1 + negs[j].size());
  }
  return total / static_cast<Real>(items.size() - 1);
}

inline Real mse(const std::vector<Vec>& a, const std::vector<Vec>& b) {
  Real s = 0.0L;
  std::size_t n = 0;
  for (std::size_t j = 0; j < a.size(); ++j)
    for (std::size_t i = 0; i < a[j].size(); ++i, ++n) s += (a[j][i] - b[j][i]) * (a[j][i] - b[j][i]);
  return s / static_cast<Real>(n);
}

// Scalar total objective: BCE + lambda * MSE over all positions.
inline Real objective(const SharedParams& phi, const PrivateParams& psi, const std::vector<ItemId>& items,
                        const Vec& rho, const NegativeSet& negs, double lambda, const SharedParams* prev) {
  Real total = bce_loss(phi, psi, items, rho, negs);
  if (prev != nullptr && lambda != 0.0) total += lambda * mse(encode(phi, items), encode(*prev, items));
  return total;
}

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t entries = 0;
};

// Central differences of `loss` against `analytic` over every entry of every
// array in `params`. Relative error uses max(|a|, |n|, floor) as denominator.
template <class Params>
GradCheck check_gradients(Params& params, const Params& analytic, const std::function<Real()>& loss,
                          double step = 1e-5, double floor = 1e-8) {
  GradCheck out;
  auto p = flat_arrays(params);
  auto g = flat_arrays(analytic);
  for (std::size_t b = 0; b < p.size(); ++b) {
    for (std::size_t i = 0; i < p[b].size(); ++i) {
      const double orig = p[b][i];
      p[b][i] = orig + step;
      const Real up = loss();
      p[b][i] = orig - step;
      const Real down = loss();
      p[b][i] = orig;
      // The perturbed points are exact doubles; measure the actual spacing.
      const Real spacing = static_cast<Real>(orig + step) - static_cast<Real>(orig - step);
      const double numeric = static_cast<double>((up - down) / spacing);
      const double a = g[b][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), floor});
      out.max_rel_error = std::max(out.max_rel_error, std::abs(a - numeric) / denom);
      ++out.entries;
    }
  }
  return out;
}

}  // namespace fcucr::oracle
