#include "fcucr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <unordered_set>

#include "fcucr/errors.hpp"

namespace fcucr {

RankResult rank_of(ItemId target, std::span<const ItemId> candidates,
                   std::span<const double> scores) {
  if (candidates.size() != scores.size()) throw ShapeError("rank_of: one score per candidate");
  auto it = std::find(candidates.begin(), candidates.end(), target);
  if (it == candidates.end()) throw std::invalid_argument("rank_of: target not among candidates");
  const double ts = scores[static_cast<std::size_t>(it - candidates.begin())];
  int rank = 1;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (scores[i] > ts || (scores[i] == ts && candidates[i] < target)) ++rank;
  }
  return RankResult{target, rank, static_cast<int>(candidates.size())};
}

int hr_at_n(int rank, int n) { return rank >= 1 && rank <= n ? 1 : 0; }

double ndcg_at_n(int rank, int n) {
  if (rank < 1 || rank > n) return 0.0;
  return 1.0 / std::log2(static_cast<double>(rank) + 1.0);
}

SessionMetrics evaluate_session(const ModelView& model, const Session& session,
                                const EvalOptions& options) {
  const SharedParams& phi = *model.shared;
  const std::size_t m = session.size();
  if (m < 2) throw DataError("evaluate_session: session length must be >= 2");
  const int catalog = phi.catalog_size();
  const EncoderTrace tr = encode_session(phi, session.items);

  Rng rng = make_stream(options.seed, Stream::kEvalNegatives,
                        static_cast<std::uint64_t>(session.client),
                        static_cast<std::uint64_t>(session.step));
  std::vector<char> consumed(static_cast<std::size_t>(catalog), 0);
  SessionMetrics out;
  for (std::size_t j = 0; j + 1 < m; ++j) {
    consumed[static_cast<std::size_t>(session.items[j])] = 1;
    const ItemId target = session.items[j + 1];
    const Vector q = head_query(*model.head, tr.state(j + 1), *model.rho);

    std::vector<ItemId> cands;
    if (options.sampled_candidates > 0) {
      cands.push_back(target);
      std::vector<ItemId> pool;
      for (ItemId i = 0; i < catalog; ++i) {
        if (i != target && !consumed[static_cast<std::size_t>(i)]) pool.push_back(i);
      }
      const std::size_t want = std::min(pool.size(), static_cast<std::size_t>(options.sampled_candidates));
      for (std::size_t n = 0; n < want; ++n) {
        std::uniform_int_distribution<std::size_t> pick(n, pool.size() - 1);
        std::swap(pool[n], pool[pick(rng)]);
        cands.push_back(pool[n]);
      }
    } else {
      cands.reserve(static_cast<std::size_t>(catalog));
      for (ItemId i = 0; i < catalog; ++i) {
        if (i == target || !consumed[static_cast<std::size_t>(i)]) cands.push_back(i);
      }
    }
    std::vector<double> scores;
    scores.reserve(cands.size());
    for (ItemId i : cands) scores.push_back(phi.embedding.row(i).dot(q));
    RankResult r = rank_of(target, cands, scores);
    out.hr += hr_at_n(r.rank, options.cutoff);
    out.ndcg += ndcg_at_n(r.rank, options.cutoff);
    out.positions.push_back(r);
  }
  out.hr /= static_cast<double>(m - 1);
  out.ndcg /= static_cast<double>(m - 1);
  return out;
}

// ---------------------------------------------------------------------------

std::vector<ForgettingPoint> forgetting_curve(std::span<const RoundReport> history) {
  std::vector<ForgettingPoint> out;
  for (const auto& r : history) {
    if (r.round >= 1) out.push_back({r.round, r.hr_first, r.ndcg_first});
  }
  return out;
}

void write_rounds_csv(std::ostream& out, std::span<const RoundReport> history, bool record_timing) {
  out << "round,hr10_current,ndcg10_current,hr10_first,ndcg10_first,hr10_test,ndcg10_test,"
         "rec_loss,dist_loss,participants,seconds\n";
  char buf[512];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof buf, "%d,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%d,%.6f\n",
                  r.round, r.hr_current, r.ndcg_current, r.hr_first, r.ndcg_first, r.hr_test,
                  r.ndcg_test, r.rec_loss, r.dist_loss, r.participants,
                  record_timing ? r.seconds() : 0.0);
    out << buf;
  }
}

// ---------------------------------------------------------------------------

std::vector<ScoredSample> labeled_samples(const ModelView& model, const Session& session,
                                          std::span<const ItemId> interacted, Rng& rng) {
  const SharedParams& phi = *model.shared;
  const int catalog = phi.catalog_size();
  const std::unordered_set<ItemId> seen(interacted.begin(), interacted.end());
  std::vector<ItemId> pool;
  for (ItemId i = 0; i < catalog; ++i) {
    if (!seen.contains(i)) pool.push_back(i);
  }
  const EncoderTrace tr = encode_session(phi, session.items);
  std::vector<ScoredSample> out;
  for (std::size_t j = 0; j + 1 < session.size(); ++j) {
    const Vector q = head_query(*model.head, tr.state(j + 1), *model.rho);
    out.push_back({sigmoid(phi.embedding.row(session.items[j + 1]).dot(q)), true});
    if (pool.empty()) continue;
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    out.push_back({sigmoid(phi.embedding.row(pool[pick(rng)]).dot(q)), false});
  }
  return out;
}

ProbabilityHistogram prob_histogram(std::span<const ScoredSample> samples, int bins) {
  if (bins < 1) throw ConfigError("prob_histogram: bins must be >= 1");
  ProbabilityHistogram h;
  h.pos_mass.assign(static_cast<std::size_t>(bins), 0.0);
  h.neg_mass.assign(static_cast<std::size_t>(bins), 0.0);
  double pos_sum = 0.0, neg_sum = 0.0;
  for (const auto& s : samples) {
    auto bin = static_cast<std::size_t>(std::clamp(static_cast<int>(s.probability * bins), 0, bins - 1));
    if (s.positive) {
      h.pos_mass[bin] += 1.0;
      pos_sum += s.probability;
      ++h.pos_count;
    } else {
      h.neg_mass[bin] += 1.0;
      neg_sum += s.probability;
      ++h.neg_count;
    }
  }
  if (h.pos_count) {
    for (auto& x : h.pos_mass) x /= static_cast<double>(h.pos_count);
    pos_sum /= static_cast<double>(h.pos_count);
  }
  if (h.neg_count) {
    for (auto& x : h.neg_mass) x /= static_cast<double>(h.neg_count);
    neg_sum /= static_cast<double>(h.neg_count);
  }
  h.separation = pos_sum - neg_sum;
  return h;
}

void write_histogram_csv(std::ostream& out, const ProbabilityHistogram& hist) {
  out << "bin_lo,bin_hi,pos_mass,neg_mass\n";
  const auto bins = static_cast<double>(hist.bins());
  char buf[256];
  for (std::size_t b = 0; b < hist.bins(); ++b) {
    std::snprintf(buf, sizeof buf, "%.6g,%.6g,%.10g,%.10g\n", static_cast<double>(b) / bins,
                  static_cast<double>(b + 1) / bins, hist.pos_mass[b], hist.neg_mass[b]);
    out << buf;
  }
}

}  // namespace fcucr
