#include "fcucr/seqrec.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "fcucr/errors.hpp"

namespace fcucr {

namespace {

template <class Params>
Params zeros_like_impl(const Params& other) {
  Params out = other;
  Params::visit(out, [](std::string_view, auto& a) { a.setZero(); });
  return out;
}

template <class Params>
bool equal_impl(const Params& a, const Params& b) {
  auto fa = flat_arrays(a);
  auto fb = flat_arrays(b);
  if (fa.size() != fb.size()) return false;
  for (std::size_t i = 0; i < fa.size(); ++i) {
    if (!std::equal(fa[i].begin(), fa[i].end(), fb[i].begin(), fb[i].end())) return false;
  }
  return true;
}

Vector sigmoid_vec(const Vector& x) {
  return x.unaryExpr([](double v) { return fcucr::sigmoid(v); });
}

}  // namespace

SharedParams SharedParams::zeros_like(const SharedParams& other) { return zeros_like_impl(other); }
bool SharedParams::operator==(const SharedParams& other) const {
  return embedding.rows() == other.embedding.rows() && embedding.cols() == other.embedding.cols() &&
         equal_impl(*this, other);
}
PrivateParams PrivateParams::zeros_like(const PrivateParams& other) { return zeros_like_impl(other); }
bool PrivateParams::operator==(const PrivateParams& other) const {
  return w1.rows() == other.w1.rows() && w1.cols() == other.w1.cols() && equal_impl(*this, other);
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) {
  if (x > 0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

// ---------------------------------------------------------------------------

namespace {

Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::uniform_real_distribution<double> dist(-0.1, 0.1);
  Matrix m(rows, cols);
  // Column-major fill order is part of the determinism contract.
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

void check_shape(const ModelShape& s) {
  if (s.dim < 2 || s.hidden < 2) throw ConfigError("model dims must be >= 2");
  if (s.catalog_size < 1) throw ConfigError("catalog_size must be >= 1");
}

}  // namespace

SharedParams init_shared(const ModelShape& shape, Rng& rng) {
  check_shape(shape);
  const int d = shape.dim;
  SharedParams p;
  p.embedding = uniform_matrix(shape.catalog_size, d, rng);
  p.w_z = uniform_matrix(d, d, rng);
  p.u_z = uniform_matrix(d, d, rng);
  p.w_r = uniform_matrix(d, d, rng);
  p.u_r = uniform_matrix(d, d, rng);
  p.w_h = uniform_matrix(d, d, rng);
  p.u_h = uniform_matrix(d, d, rng);
  p.b_z = Vector::Zero(d);
  p.b_r = Vector::Zero(d);
  p.b_h = Vector::Zero(d);
  return p;
}

PrivateParams init_head(const ModelShape& shape, Rng& rng) {
  check_shape(shape);
  PrivateParams p;
  p.w1 = uniform_matrix(shape.hidden, 2 * shape.dim, rng);
  p.b1 = Vector::Zero(shape.hidden);
  p.w2 = uniform_matrix(shape.dim, shape.hidden, rng);
  p.b2 = Vector::Zero(shape.dim);
  return p;
}

InitialParams init_params(const ModelShape& shape, std::uint64_t seed) {
  Rng rng(splitmix64(seed));
  InitialParams out{init_shared(shape, rng), {}};
  out.head = init_head(shape, rng);
  return out;
}

// ---------------------------------------------------------------------------

EncoderTrace encode_session(const SharedParams& phi, std::span<const ItemId> items) {
  const int d = phi.dim();
  EncoderTrace tr;
  tr.items.assign(items.begin(), items.end());
  tr.h.reserve(items.size() + 1);
  tr.h.push_back(Vector::Zero(d));
  for (std::size_t j = 0; j < items.size(); ++j) {
    const ItemId item = items[j];
    if (item < 0 || item >= phi.catalog_size()) {
      throw DataError("item id " + std::to_string(item) + " out of range at position " +
                      std::to_string(j));
    }
    const Vector x = phi.embedding.row(item).transpose();
    const Vector& prev = tr.h.back();
    Vector z = sigmoid_vec(phi.w_z * x + phi.u_z * prev + phi.b_z);
    Vector r = sigmoid_vec(phi.w_r * x + phi.u_r * prev + phi.b_r);
    Vector c = (phi.w_h * x + phi.u_h * r.cwiseProduct(prev) + phi.b_h).array().tanh().matrix();
    Vector h = (Vector::Ones(d) - z).cwiseProduct(prev) + z.cwiseProduct(c);
    tr.z.push_back(std::move(z));
    tr.r.push_back(std::move(r));
    tr.c.push_back(std::move(c));
    tr.h.push_back(std::move(h));
  }
  return tr;
}

Vector session_prototype(const SharedParams& phi, std::span<const ItemId> items) {
  return encode_session(phi, items).prototype();
}

void encoder_backward(const SharedParams& phi, const EncoderTrace& tr, std::span<const Vector> dh,
                      SharedParams& grad) {
  const std::size_t m = tr.length();
  if (dh.size() != m) throw ShapeError("encoder_backward: one gradient per position expected");
  const int d = phi.dim();
  Vector carry = Vector::Zero(d);  // dL/dh_j flowing back from step j+1
  for (std::size_t jj = m; jj-- > 0;) {
    const Vector g = dh[jj] + carry;
    const Vector& prev = tr.h[jj];
    const Vector& z = tr.z[jj];
    const Vector& r = tr.r[jj];
    const Vector& c = tr.c[jj];
    const ItemId item = tr.items[jj];
    const Vector x = phi.embedding.row(item).transpose();

    const Vector dz = g.cwiseProduct(c - prev);
    const Vector dc = g.cwiseProduct(z);
    Vector dprev = g.cwiseProduct(Vector::Ones(d) - z);

    const Vector da_c = dc.cwiseProduct((Vector::Ones(d) - c.cwiseProduct(c)));
    const Vector rprev = r.cwiseProduct(prev);
    grad.w_h.noalias() += da_c * x.transpose();
    grad.u_h.noalias() += da_c * rprev.transpose();
    grad.b_h += da_c;
    Vector dx = phi.w_h.transpose() * da_c;
    const Vector drprev = phi.u_h.transpose() * da_c;
    dprev += drprev.cwiseProduct(r);
    const Vector dr = drprev.cwiseProduct(prev);

    const Vector da_r = dr.cwiseProduct(r.cwiseProduct(Vector::Ones(d) - r));
    grad.w_r.noalias() += da_r * x.transpose();
    grad.u_r.noalias() += da_r * prev.transpose();
    grad.b_r += da_r;
    dx.noalias() += phi.w_r.transpose() * da_r;
    dprev.noalias() += phi.u_r.transpose() * da_r;

    const Vector da_z = dz.cwiseProduct(z.cwiseProduct(Vector::Ones(d) - z));
    grad.w_z.noalias() += da_z * x.transpose();
    grad.u_z.noalias() += da_z * prev.transpose();
    grad.b_z += da_z;
    dx.noalias() += phi.w_z.transpose() * da_z;
    dprev.noalias() += phi.u_z.transpose() * da_z;

    grad.embedding.row(item) += dx.transpose();
    carry = std::move(dprev);
  }
}

// ---------------------------------------------------------------------------

HeadTrace head_forward(const PrivateParams& psi, const Vector& h, const Vector& rho) {
  const int d = psi.dim();
  if (h.size() != d || rho.size() != d || psi.w1.cols() != 2 * d) {
    throw ShapeError("head_forward: expected h and rho of size " + std::to_string(d));
  }
  HeadTrace t;
  t.input.resize(2 * d);
  t.input << h, rho;
  t.hidden = (psi.w1 * t.input + psi.b1).array().tanh().matrix();
  t.query = psi.w2 * t.hidden + psi.b2;
  return t;
}

Vector head_query(const PrivateParams& psi, const Vector& h, const Vector& rho) {
  return head_forward(psi, h, rho).query;
}

std::vector<double> score_items(const PrivateParams& psi, const Vector& h, const Vector& rho,
                                const Matrix& embedding, std::span<const ItemId> candidates) {
  if (embedding.cols() != psi.dim()) throw ShapeError("score_items: embedding width mismatch");
  const Vector q = head_query(psi, h, rho);
  std::vector<double> out;
  out.reserve(candidates.size());
  for (ItemId i : candidates) {
    if (i < 0 || i >= embedding.rows()) throw DataError("score_items: candidate out of range");
    out.push_back(embedding.row(i).dot(q));
  }
  return out;
}

// ---------------------------------------------------------------------------

NegativeSet sample_negatives(const Session& session, int catalog_size, int per_position,
                             Rng& rng) {
  if (per_position < 1) throw ConfigError("negatives per position must be >= 1");
  const std::unordered_set<ItemId> own(session.items.begin(), session.items.end());
  const auto available = static_cast<std::int64_t>(catalog_size) - static_cast<std::int64_t>(own.size());
  if (available < per_position) {
    throw DataError("catalog too small to draw " + std::to_string(per_position) +
                    " distinct negatives for client " + std::to_string(session.client));
  }
  std::uniform_int_distribution<ItemId> pick(0, catalog_size - 1);
  NegativeSet out(session.size() >= 1 ? session.size() - 1 : 0);
  for (auto& row : out) {
    while (static_cast<int>(row.size()) < per_position) {
      const ItemId i = pick(rng);
      if (own.contains(i) || std::find(row.begin(), row.end(), i) != row.end()) continue;
      row.push_back(i);
    }
  }
  return out;
}

double rec_loss(const SharedParams& phi, const PrivateParams& psi, const Session& session,
                const Vector& rho, const NegativeSet& negatives) {
  const std::size_t m = session.size();
  if (m < 2) throw DataError("rec_loss: session length must be >= 2");
  if (negatives.size() != m - 1) throw ShapeError("rec_loss: one negative row per position");
  const EncoderTrace tr = encode_session(phi, session.items);
  double total = 0.0;
  for (std::size_t j = 0; j + 1 < m; ++j) {
    const Vector q = head_query(psi, tr.state(j + 1), rho);
    double pos = softplus(-phi.embedding.row(session.items[j + 1]).dot(q));
    for (ItemId n : negatives[j]) pos += softplus(phi.embedding.row(n).dot(q));
    total += pos / static_cast<double>(1 + negatives[j].size());
  }
  return total / static_cast<double>(m - 1);
}

// ---------------------------------------------------------------------------

void adam_step(std::span<const std::span<double>> params,
               std::span<const std::span<const double>> grads, AdamState& state,
               const AdamConfig& cfg) {
  if (params.size() != grads.size()) throw ShapeError("adam_step: block count mismatch");
  if (state.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.size(), 0.0);
      state.v.emplace_back(p.size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("adam_step: state shape mismatch");
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto p = params[b];
    auto g = grads[b];
    auto& m = state.m[b];
    auto& v = state.v[b];
    if (g.size() != p.size() || m.size() != p.size()) throw ShapeError("adam_step: array size mismatch");
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

}  // namespace fcucr
