#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "fcucr/data.hpp"
#include "fcucr/rng.hpp"

namespace fcucr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Shared representation module: item embeddings plus a gated recurrent
// encoder. Rows of `embedding` are item vectors. Federated-averaged.
struct SharedParams {
  Matrix embedding;  // catalog x d
  Matrix w_z, u_z, w_r, u_r, w_h, u_h;  // d x d
  Vector b_z, b_r, b_h;                 // d

  int dim() const { return static_cast<int>(embedding.cols()); }
  int catalog_size() const { return static_cast<int>(embedding.rows()); }

  // Visits every array in checkpoint order with its name.
  template <class Self, class Fn>
  static void visit(Self& self, Fn&& fn) {
    fn("embedding", self.embedding);
    fn("w_z", self.w_z);
    fn("u_z", self.u_z);
    fn("b_z", self.b_z);
    fn("w_r", self.w_r);
    fn("u_r", self.u_r);
    fn("b_r", self.b_r);
    fn("w_h", self.w_h);
    fn("u_h", self.u_h);
    fn("b_h", self.b_h);
  }

  static SharedParams zeros_like(const SharedParams& other);
  bool operator==(const SharedParams& other) const;
};

// Private prediction head: q = W2 tanh(W1 [h; rho] + b1) + b2. Never uploaded.
struct PrivateParams {
  Matrix w1;  // d_h x 2d
  Vector b1;  // d_h
  Matrix w2;  // d x d_h
  Vector b2;  // d

  int dim() const { return static_cast<int>(w2.rows()); }
  int hidden() const { return static_cast<int>(w1.rows()); }

  template <class Self, class Fn>
  static void visit(Self& self, Fn&& fn) {
    fn("head.w1", self.w1);
    fn("head.b1", self.b1);
    fn("head.w2", self.w2);
    fn("head.b2", self.b2);
  }

  static PrivateParams zeros_like(const PrivateParams& other);
  bool operator==(const PrivateParams& other) const;
};

struct GradientSet {
  SharedParams shared;
  PrivateParams head;
};

// ---------------------------------------------------------------------------
// Generic array helpers over SharedParams / PrivateParams.

template <class Params>
std::vector<std::span<double>> flat_arrays(Params& p) {
  std::vector<std::span<double>> out;
  Params::visit(p, [&](std::string_view, auto& a) {
    out.emplace_back(a.data(), static_cast<std::size_t>(a.size()));
  });
  return out;
}

template <class Params>
std::vector<std::span<const double>> flat_arrays(const Params& p) {
  std::vector<std::span<const double>> out;
  Params::visit(p, [&](std::string_view, const auto& a) {
    out.emplace_back(a.data(), static_cast<std::size_t>(a.size()));
  });
  return out;
}

template <class Params>
bool all_finite(const Params& p) {
  bool ok = true;
  Params::visit(p, [&](std::string_view, const auto& a) { ok = ok && a.allFinite(); });
  return ok;
}

// ---------------------------------------------------------------------------
// Initialization

struct ModelShape {
  int catalog_size = 0;
  int dim = 50;
  int hidden = 50;
};

// Uniform(-0.1, 0.1) weights from the seeded generator, zero biases.
SharedParams init_shared(const ModelShape& shape, Rng& rng);
PrivateParams init_head(const ModelShape& shape, Rng& rng);

struct InitialParams {
  SharedParams shared;
  PrivateParams head;
};
InitialParams init_params(const ModelShape& shape, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Encoder

// Per-step activations kept for backpropagation.
struct EncoderTrace {
  std::vector<ItemId> items;
  std::vector<Vector> h;  // h[0] = h_0 = 0, h[j] = state after items[j-1]
  std::vector<Vector> z, r, c;

  // Hidden state after consuming the first `j` items (j >= 1).
  const Vector& state(std::size_t j) const { return h[j]; }
  const Vector& prototype() const { return h.back(); }
  std::size_t length() const { return items.size(); }
};

// Runs the gated recurrence over `items` from a zero state.
// Throws DataError naming the position of an out-of-range item.
EncoderTrace encode_session(const SharedParams& phi, std::span<const ItemId> items);

// Final hidden state h_m.
Vector session_prototype(const SharedParams& phi, std::span<const ItemId> items);

// Accumulates into `grad` the encoder gradients given dL/dh_j for j = 1..m
// (dh[j-1] is the gradient for the state after item j).
void encoder_backward(const SharedParams& phi, const EncoderTrace& trace,
                      std::span<const Vector> dh, SharedParams& grad);

// ---------------------------------------------------------------------------
// Prediction head

struct HeadTrace {
  Vector input;   // [h; rho]
  Vector hidden;  // tanh(W1 input + b1)
  Vector query;   // W2 hidden + b2
};

HeadTrace head_forward(const PrivateParams& psi, const Vector& h, const Vector& rho);
Vector head_query(const PrivateParams& psi, const Vector& h, const Vector& rho);

// score(i) = q . E[i] for each candidate.
std::vector<double> score_items(const PrivateParams& psi, const Vector& h, const Vector& rho,
                                const Matrix& embedding, std::span<const ItemId> candidates);

double sigmoid(double x);
// log(1 + exp(x)) without overflow.
double softplus(double x);

// ---------------------------------------------------------------------------
// Recommendation loss

// negatives[j] holds the sampled negatives for the prediction made after
// item j+1 (target items[j+1]).
using NegativeSet = std::vector<std::vector<ItemId>>;

// Draws `per_position` distinct negatives per position uniformly from the
// catalog minus the session's own items. Throws DataError if the catalog is
// too small.
NegativeSet sample_negatives(const Session& session, int catalog_size, int per_position, Rng& rng);

// Mean over positions of [-log s(s+) - sum log(1 - s(s-))] / (1 + S).
double rec_loss(const SharedParams& phi, const PrivateParams& psi, const Session& session,
                const Vector& rho, const NegativeSet& negatives);

// ---------------------------------------------------------------------------
// Adam

struct AdamConfig {
  double lr = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<std::vector<double>> m, v;
  std::int64_t step = 0;

  bool empty() const { return m.empty(); }
  void reset() {
    m.clear();
    v.clear();
    step = 0;
  }
};

// One bias-corrected Adam update over parallel parameter/gradient arrays.
// A fresh (empty) state is zero-initialized to match the parameter shapes.
void adam_step(std::span<const std::span<double>> params,
               std::span<const std::span<const double>> grads, AdamState& state,
               const AdamConfig& config);

template <class Params>
void adam_step(Params& params, const Params& grads, AdamState& state, const AdamConfig& config) {
  auto p = flat_arrays(params);
  auto g = flat_arrays(grads);
  adam_step(std::span<const std::span<double>>(p), std::span<const std::span<const double>>(g),
            state, config);
}

}  // namespace fcucr
