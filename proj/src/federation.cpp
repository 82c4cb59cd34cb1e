#include "fcucr/federation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <thread>
#include <unordered_set>

#include "fcucr/checkpoint.hpp"
#include "fcucr/errors.hpp"

namespace fcucr {

void validate(const RunConfig& c) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
  };
  require(c.lambda >= 0.0 && std::isfinite(c.lambda), "lambda must be >= 0");
  require(c.k >= 0, "k must be >= 0");
  require(c.epochs >= 0, "epochs must be >= 0");
  require(c.rounds >= 0, "rounds must be >= 0");
  require(c.lr > 0.0, "lr must be > 0");
  require(c.dim >= 2 && c.hidden >= 2, "dim and hidden must be >= 2");
  require(c.negatives >= 1, "negatives must be >= 1");
  require(c.window >= 0, "window must be >= 0 (0 = unbounded)");
  require(c.transfer_interval >= 1, "transfer_interval must be >= 1");
  require(c.ldp_std >= 0.0 && std::isfinite(c.ldp_std), "ldp_std must be >= 0");
  require(c.patience >= 0, "patience must be >= 0");
  require(c.eval_candidates >= 0, "eval_candidates must be >= 0");
  require(c.threads >= 1, "threads must be >= 1");
}

// ---------------------------------------------------------------------------

AggregationWeights compute_weights(std::span<const std::size_t> sizes) {
  if (sizes.empty()) throw ProtocolError("compute_weights: no participants");
  const double total = static_cast<double>(std::accumulate(sizes.begin(), sizes.end(), std::size_t{0}));
  if (total <= 0.0) throw ProtocolError("compute_weights: all participants have empty data");
  AggregationWeights w;
  w.alpha.reserve(sizes.size());
  for (std::size_t s : sizes) w.alpha.push_back(static_cast<double>(s) / total);
  return w;
}

SharedParams aggregate(std::span<const SharedParams> uploads, const AggregationWeights& weights) {
  if (uploads.empty()) throw ProtocolError("aggregate: empty participant set");
  if (weights.alpha.size() != uploads.size()) throw ShapeError("aggregate: one weight per upload");
  SharedParams out = SharedParams::zeros_like(uploads.front());
  auto dst = flat_arrays(out);
  for (std::size_t u = 0; u < uploads.size(); ++u) {
    auto src = flat_arrays(uploads[u]);
    if (src.size() != dst.size()) throw ShapeError("aggregate: block count mismatch");
    const double a = weights.alpha[u];
    for (std::size_t b = 0; b < dst.size(); ++b) {
      if (src[b].size() != dst[b].size()) throw ShapeError("aggregate: array shape mismatch");
      for (std::size_t i = 0; i < dst[b].size(); ++i) dst[b][i] += a * src[b][i];
    }
  }
  return out;
}

double laplace_noise(double stddev, Rng& rng) {
  const double scale = stddev / std::sqrt(2.0);
  std::uniform_real_distribution<double> unif(-0.5, 0.5);
  double u = 0.0;
  do {
    u = unif(rng);
  } while (u == -0.5);
  const double mag = -scale * std::log1p(-2.0 * std::abs(u));
  return u < 0.0 ? -mag : mag;
}

void apply_ldp(std::span<double> values, double stddev, Rng& rng) {
  if (stddev < 0.0) throw ConfigError("ldp std must be >= 0");
  if (stddev == 0.0) return;
  for (double& v : values) v += laplace_noise(stddev, rng);
}

void apply_ldp(SharedParams& params, double stddev, Rng& rng) {
  for (auto block : flat_arrays(params)) apply_ldp(block, stddev, rng);
}

// ---------------------------------------------------------------------------

const Session* session_for_round(const ClientDataset& data, int round, bool reuse_last) {
  if (data.train.empty() || round < 1) return nullptr;
  const auto idx = static_cast<std::size_t>(round - 1);
  if (idx < data.train.size()) return &data.train[idx];
  return reuse_last ? &data.train.back() : nullptr;
}

PrototypeEntry client_prototype(const SharedParams& global, const ClientDataset& data, int round,
                                bool reuse_last) {
  const Session* s = session_for_round(data, round, reuse_last);
  if (s == nullptr) {
    throw ProtocolError("client " + std::to_string(data.client) + " has no session for round " +
                        std::to_string(round));
  }
  return PrototypeEntry{data.client, round, session_prototype(global, s->items)};
}

ClientUpdateResult client_update(ClientState& client, const SharedParams& start,
                                 const Session& session, int round, const RunConfig& config) {
  ClientUpdateResult out{start, {}, {}, false, {}};
  if (config.reset_shared_optimizer) client.shared_opt.reset();
  if (!config.persist_head_optimizer) client.head_opt.reset();

  std::optional<EncoderTrace> frozen;
  if (config.lambda != 0.0 && client.snapshot) {
    frozen = encode_session(client.snapshot->params(), session.items);
  }
  const AdamConfig adam{config.lr};
  const Vector& rho = client.rho.rho;
  try {
    PrivateParams head = client.head;
    AdamState head_opt = client.head_opt;
    AdamState shared_opt = client.shared_opt;
    for (int e = 0; e < config.epochs; ++e) {
      Rng rng = make_stream(config.seed, Stream::kNegatives, static_cast<std::uint64_t>(client.id),
                            (static_cast<std::uint64_t>(round) << 20) | static_cast<std::uint64_t>(e));
      const NegativeSet negs = sample_negatives(session, out.shared.catalog_size(), config.negatives, rng);
      ObjectiveInputs in{&session, &rho, &negs, config.lambda, frozen ? &*frozen : nullptr,
                         config.distill_target};
      ObjectiveResult res = backward(out.shared, head, in);
      out.loss = res.loss;
      out.epoch_losses.push_back(res.loss.total);
      adam_step(out.shared, res.grads.shared, shared_opt, adam);
      adam_step(head, res.grads.head, head_opt, adam);
      if (!all_finite(out.shared)) throw NumericalError("shared", "non-finite parameters after update");
      if (!all_finite(head)) throw NumericalError("head", "non-finite parameters after update");
    }
    client.head = std::move(head);
    client.head_opt = std::move(head_opt);
    client.shared_opt = std::move(shared_opt);
  } catch (const NumericalError& err) {
    out.failed = true;
    out.failure = err.what();
    out.shared = start;
    return out;
  }
  client.snapshot = snapshot(out.shared, round);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

// Runs fn(i) for i in [0, n) over up to `threads` workers. Each index writes
// only its own slot, so results do not depend on scheduling.
template <class Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

Federation::Federation(RunConfig config, const Dataset& dataset)
    : config_(std::move(config)),
      dataset_(&dataset),
      kb_(config_.window > 0 ? std::optional<int>(config_.window) : std::nullopt) {
  validate(config_);
  if (dataset.clients.empty()) throw DataError("dataset has no clients");
  if (dataset.catalog_size < 1) throw DataError("dataset catalog is empty");
  for (const auto& c : dataset.clients) {
    auto check = [&](const Session& s) {
      for (ItemId i : s.items)
        if (i < 0 || i >= dataset.catalog_size)
          throw DataError("client " + std::to_string(c.client) + " references item " +
                          std::to_string(i) + " outside catalog of size " +
                          std::to_string(dataset.catalog_size));
    };
    for (const auto& s : c.train) check(s);
    if (c.val) check(*c.val);
    if (c.test) check(*c.test);
  }
  const ModelShape shape{dataset.catalog_size, config_.dim, config_.hidden};
  Rng init_rng = make_stream(config_.seed, Stream::kInit);
  global_ = init_shared(shape, init_rng);
  for (const auto& c : dataset.clients) {
    ClientState state;
    state.id = c.client;
    Rng head_rng = make_stream(config_.seed, Stream::kHeadInit, static_cast<std::uint64_t>(c.client));
    state.head = init_head(shape, head_rng);
    state.rho = fuse({}, config_.dim, 0);
    clients_.push_back(std::move(state));
  }
}

bool Federation::has_session(std::size_t i, int round) const {
  return session_for_round(dataset_->clients[i], round, config_.reuse_last_session) != nullptr;
}

Payload Federation::upload(ClientId client, int round, Payload::Kind kind, std::string bytes) const {
  Payload p{client, round, kind, std::move(bytes)};
  if (observer_) observer_(p);
  return p;
}

ModelView Federation::view(std::size_t i) const {
  return ModelView{&global_, &clients_[i].head, &clients_[i].rho.rho};
}

RoundReport Federation::evaluate(int round) const {
  const auto start = Clock::now();
  RoundReport rep;
  rep.round = round;
  const std::size_t n = clients_.size();
  struct Slot {
    std::optional<SessionMetrics> current, first, test, val;
  };
  std::vector<Slot> slots(n);
  const int current_round = std::max(round, 1);
  parallel_for(n, config_.threads, [&](std::size_t i) {
    const auto& data = dataset_->clients[i];
    const EvalOptions opts{kCutoff, config_.eval_candidates, config_.seed};
    const ModelView mv = view(i);
    if (const Session* s = session_for_round(data, current_round, config_.reuse_last_session)) {
      slots[i].current = evaluate_session(mv, *s, opts);
    }
    slots[i].first = evaluate_session(mv, data.first, opts);
    if (data.test) slots[i].test = evaluate_session(mv, *data.test, opts);
    if (data.val) slots[i].val = evaluate_session(mv, *data.val, opts);
  });

  auto mean = [&](auto member, double& hr, double& ndcg) {
    std::size_t count = 0;
    hr = ndcg = 0.0;
    for (const auto& s : slots) {
      const auto& m = s.*member;
      if (!m) continue;
      hr += m->hr;
      ndcg += m->ndcg;
      ++count;
    }
    if (count) {
      hr /= static_cast<double>(count);
      ndcg /= static_cast<double>(count);
    }
  };
  mean(&Slot::current, rep.hr_current, rep.ndcg_current);
  mean(&Slot::first, rep.hr_first, rep.ndcg_first);
  mean(&Slot::test, rep.hr_test, rep.ndcg_test);
  mean(&Slot::val, rep.hr_val, rep.ndcg_val);
  rep.kb_size = kb_.size();
  rep.seconds_eval = seconds_since(start);
  return rep;
}

RoundReport Federation::run_round(int round) {
  if (round < 1) throw ProtocolError("rounds are numbered from 1");
  const std::size_t n = clients_.size();
  std::vector<char> active(n, 0);
  for (std::size_t i = 0; i < n; ++i) active[i] = has_session(i, round) ? 1 : 0;
  const auto participants = static_cast<std::size_t>(std::count(active.begin(), active.end(), 1));
  if (participants == 0) throw ProtocolError("round " + std::to_string(round) + " has no participants");

  // Prototypes from the freshly received global encoder.
  auto t0 = Clock::now();
  std::vector<std::optional<Payload>> proto_payloads(n);
  parallel_for(n, config_.threads, [&](std::size_t i) {
    if (!active[i]) return;
    PrototypeEntry e = client_prototype(global_, dataset_->clients[i], round, config_.reuse_last_session);
    if (config_.ldp_prototypes && config_.ldp_std > 0.0) {
      Rng rng = make_stream(config_.seed, Stream::kLdpPrototype, static_cast<std::uint64_t>(e.client),
                            static_cast<std::uint64_t>(round));
      apply_ldp(std::span<double>(e.vector.data(), static_cast<std::size_t>(e.vector.size())),
                config_.ldp_std, rng);
    }
    proto_payloads[i] = Payload{e.client, round, Payload::Kind::kPrototype,
                                serialize_prototype(e.vector, round)};
  });
  const double t_proto = seconds_since(t0);

  // Server: knowledge base and transfer.
  t0 = Clock::now();
  std::vector<PrototypeEntry> entries;
  std::vector<Vector> queries(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!proto_payloads[i]) continue;
    const Payload p = upload(proto_payloads[i]->client, round, Payload::Kind::kPrototype,
                             std::move(proto_payloads[i]->bytes));
    queries[i] = deserialize_prototype(p.bytes);
    clients_[i].last_prototype = queries[i];
    entries.push_back(PrototypeEntry{p.client, round, queries[i]});
  }
  kb_.insert(std::move(entries), round);
  kb_.prune(round);
  const bool transfer = (round - 1) % config_.transfer_interval == 0;
  if (transfer) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i]) continue;
      if (config_.no_transfer || config_.k == 0) {
        clients_[i].rho = fuse({}, config_.dim, round);
        continue;
      }
      const auto top = kb_.retrieve_topk(clients_[i].id, queries[i], static_cast<std::size_t>(config_.k));
      clients_[i].rho = fuse(top, config_.dim, round);
    }
  }
  const double t_transfer = seconds_since(t0);

  // Local training.
  t0 = Clock::now();
  std::vector<ClientUpdateResult> results(n);
  std::vector<std::optional<Payload>> shared_payloads(n);
  parallel_for(n, config_.threads, [&](std::size_t i) {
    if (!active[i]) return;
    const Session* s = session_for_round(dataset_->clients[i], round, config_.reuse_last_session);
    results[i] = client_update(clients_[i], global_, *s, round, config_);
    if (results[i].failed) return;
    SharedParams upload_params = results[i].shared;
    if (config_.ldp_std > 0.0) {
      Rng rng = make_stream(config_.seed, Stream::kLdp, static_cast<std::uint64_t>(clients_[i].id),
                            static_cast<std::uint64_t>(round));
      apply_ldp(upload_params, config_.ldp_std, rng);
    }
    shared_payloads[i] = Payload{clients_[i].id, round, Payload::Kind::kShared, serialize(upload_params, round)};
  });
  const double t_train = seconds_since(t0);

  // Aggregation over the clients that finished.
  t0 = Clock::now();
  RoundReport rep;
  std::vector<SharedParams> uploads;
  std::vector<std::size_t> sizes;
  double rec = 0.0, dist = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!active[i]) {
      ++rep.skipped;
      continue;
    }
    if (results[i].failed) {
      ++rep.failed;
      continue;
    }
    const Payload p = upload(clients_[i].id, round, Payload::Kind::kShared, std::move(shared_payloads[i]->bytes));
    uploads.push_back(deserialize_shared(p.bytes));
    sizes.push_back(session_for_round(dataset_->clients[i], round, config_.reuse_last_session)->size());
    rec += results[i].loss.rec_loss;
    dist += results[i].loss.dist_loss;
  }
  if (!uploads.empty()) {
    global_ = aggregate(uploads, compute_weights(sizes));
    rec /= static_cast<double>(uploads.size());
    dist /= static_cast<double>(uploads.size());
  }
  const double t_agg = seconds_since(t0);

  RoundReport eval = evaluate(round);
  eval.rec_loss = rec;
  eval.dist_loss = dist;
  eval.participants = static_cast<int>(uploads.size());
  eval.failed = rep.failed;
  eval.skipped = rep.skipped;
  eval.transfer_round = transfer;
  eval.seconds_prototype = t_proto;
  eval.seconds_transfer = t_transfer;
  eval.seconds_train = t_train;
  eval.seconds_aggregate = t_agg;
  return eval;
}

ProbabilityHistogram Federation::test_histogram(int bins) const {
  std::vector<ScoredSample> samples;
  for (std::size_t i = 0; i < clients_.size(); ++i) {
    const auto& data = dataset_->clients[i];
    if (!data.test) continue;
    std::vector<ItemId> interacted;
    for (const auto& s : data.train) interacted.insert(interacted.end(), s.items.begin(), s.items.end());
    if (data.val) interacted.insert(interacted.end(), data.val->items.begin(), data.val->items.end());
    interacted.insert(interacted.end(), data.test->items.begin(), data.test->items.end());
    Rng rng = make_stream(config_.seed, Stream::kHistogram, static_cast<std::uint64_t>(data.client));
    auto part = labeled_samples(view(i), *data.test, interacted, rng);
    samples.insert(samples.end(), part.begin(), part.end());
  }
  return prob_histogram(samples, bins);
}

void Federation::save_checkpoint(const std::filesystem::path& dir) const {
  write_file(dir / "shared.ckpt", serialize(global_));
  for (const auto& c : clients_) {
    const auto base = dir / "clients" / std::to_string(c.id);
    write_file(base.string() + ".head.ckpt", serialize(c.head));
    write_file(base.string() + ".rho.ckpt", serialize_prototype(c.rho.rho, c.rho.round));
    if (c.snapshot) write_file(base.string() + ".snapshot.ckpt", serialize(*c.snapshot));
  }
}

void Federation::load_checkpoint(const std::filesystem::path& dir) {
  SharedParams g = deserialize_shared(read_file(dir / "shared.ckpt"));
  if (g.catalog_size() != dataset_->catalog_size || g.dim() != config_.dim) {
    throw DataError("checkpoint shape does not match dataset/config");
  }
  global_ = std::move(g);
  for (auto& c : clients_) {
    const auto base = (dir / "clients" / std::to_string(c.id)).string();
    c.head = deserialize_head(read_file(base + ".head.ckpt"));
    const ArrayDump rho = decode_dump(read_file(base + ".rho.ckpt"));
    c.rho = fuse({}, config_.dim, rho.step);
    c.rho.rho = deserialize_prototype(encode_dump(rho));
    const auto snap = std::filesystem::path(base + ".snapshot.ckpt");
    if (std::filesystem::exists(snap)) c.snapshot = deserialize_snapshot(read_file(snap));
  }
}

// ---------------------------------------------------------------------------

ExperimentResult run_experiment(const RunConfig& config, const Dataset& dataset,
                                const ExperimentHooks& hooks) {
  Federation fed(config, dataset);
  if (hooks.on_payload) fed.set_payload_observer(hooks.on_payload);
  ExperimentResult out;
  out.rounds.push_back(fed.evaluate(0));
  if (hooks.on_round) hooks.on_round(fed, out.rounds.back());

  const bool has_val = std::any_of(dataset.clients.begin(), dataset.clients.end(),
                                   [](const ClientDataset& c) { return c.val.has_value(); });
  out.best_val_hr = out.rounds.front().hr_val;
  int since_best = 0;
  for (int t = 1; t <= config.rounds; ++t) {
    bool any = false;
    for (std::size_t i = 0; i < dataset.clients.size() && !any; ++i) any = fed.has_session(i, t);
    if (!any) break;
    out.rounds.push_back(fed.run_round(t));
    const RoundReport& rep = out.rounds.back();
    if (hooks.on_round) hooks.on_round(fed, rep);
    if (!has_val) continue;
    if (rep.hr_val > out.best_val_hr) {
      out.best_val_hr = rep.hr_val;
      out.best_round = t;
      since_best = 0;
    } else if (config.patience > 0 && ++since_best >= config.patience) {
      out.early_stopped = true;
      break;
    }
  }
  out.histogram = fed.test_histogram();
  if (!hooks.checkpoint_dir.empty()) fed.save_checkpoint(hooks.checkpoint_dir);
  return out;
}

}  // namespace fcucr
