#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "fcucr/seqrec.hpp"

namespace fcucr {

inline constexpr int kCutoff = 10;

struct RankResult {
  ItemId target = 0;
  int rank = 1;  // 1 = best
  int candidates = 0;
};

// rank = 1 + #{strictly greater score} + #{equal score with smaller item id}.
// Throws std::invalid_argument if target is not among the candidates.
RankResult rank_of(ItemId target, std::span<const ItemId> candidates, std::span<const double> scores);

int hr_at_n(int rank, int n = kCutoff);
double ndcg_at_n(int rank, int n = kCutoff);

// The pieces of a client's model needed to score items.
struct ModelView {
  const SharedParams* shared = nullptr;
  const PrivateParams* head = nullptr;
  const Vector* rho = nullptr;
};

struct EvalOptions {
  int cutoff = kCutoff;
  // 0 ranks against the full catalog; otherwise the target plus this many
  // sampled non-consumed items.
  int sampled_candidates = 0;
  std::uint64_t seed = 0;
};

struct SessionMetrics {
  std::vector<RankResult> positions;
  double hr = 0.0;
  double ndcg = 0.0;
};

// For each position j the candidates are the catalog minus items consumed at
// positions 1..j (the target itself always stays ranked).
SessionMetrics evaluate_session(const ModelView& model, const Session& session,
                                const EvalOptions& options = {});

// ---------------------------------------------------------------------------

struct RoundReport {
  int round = 0;
  double hr_current = 0.0, ndcg_current = 0.0;
  double hr_first = 0.0, ndcg_first = 0.0;
  double hr_test = 0.0, ndcg_test = 0.0;
  double hr_val = 0.0, ndcg_val = 0.0;
  double rec_loss = 0.0, dist_loss = 0.0;
  int participants = 0;
  int failed = 0;
  int skipped = 0;
  bool transfer_round = false;
  std::size_t kb_size = 0;
  // Wall-clock per phase: prototypes, knowledge base/transfer, local
  // training, aggregation, evaluation.
  double seconds_prototype = 0.0, seconds_transfer = 0.0, seconds_train = 0.0,
         seconds_aggregate = 0.0, seconds_eval = 0.0;

  double seconds() const {
    return seconds_prototype + seconds_transfer + seconds_train + seconds_aggregate;
  }
};

struct ForgettingPoint {
  int round = 0;
  double hr = 0.0;
  double ndcg = 0.0;
};

// First-session HR@10/NDCG@10 series over executed rounds (round >= 1).
std::vector<ForgettingPoint> forgetting_curve(std::span<const RoundReport> history);

// `round,hr10_current,...,participants,seconds` with a header line. With
// record_timing false the seconds column is written as 0.
void write_rounds_csv(std::ostream& out, std::span<const RoundReport> history, bool record_timing);

// ---------------------------------------------------------------------------

struct ProbabilityHistogram {
  std::vector<double> pos_mass;
  std::vector<double> neg_mass;
  double separation = 0.0;  // mean(pos prob) - mean(neg prob)
  std::size_t pos_count = 0, neg_count = 0;

  std::size_t bins() const { return pos_mass.size(); }
};

struct ScoredSample {
  double probability = 0.0;  // sigmoid(score)
  bool positive = false;
};

// 1:1 labeled samples from one session: for each position the true next item
// and one uniformly drawn item outside `interacted`.
std::vector<ScoredSample> labeled_samples(const ModelView& model, const Session& session,
                                          std::span<const ItemId> interacted, Rng& rng);

// Normalized histograms of predicted probability per class over [0, 1].
ProbabilityHistogram prob_histogram(std::span<const ScoredSample> samples, int bins = 20);

void write_histogram_csv(std::ostream& out, const ProbabilityHistogram& hist);

}  // namespace fcucr
