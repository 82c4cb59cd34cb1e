#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fcucr/data.hpp"
#include "fcucr/distill.hpp"
#include "fcucr/knowledge_base.hpp"
#include "fcucr/metrics.hpp"
#include "fcucr/objective.hpp"
#include "fcucr/seqrec.hpp"

namespace fcucr {

struct RunConfig {
  double lambda = 10.0;       // distillation weight
  int k = 20;                 // retrieved prototypes per client
  int epochs = 4;             // local epochs per round
  int rounds = 40;            // communication rounds
  double lr = 0.1;
  int dim = 50;
  int hidden = 50;
  int negatives = 4;          // sampled negatives per position
  int window = 0;             // knowledge-base window in rounds, 0 = unbounded
  int transfer_interval = 1;  // rounds between retrieval/fusion
  double ldp_std = 0.0;
  bool ldp_prototypes = false;
  int patience = 5;           // 0 disables early stopping
  std::uint64_t seed = 42;
  bool no_transfer = false;
  DistillTarget distill_target = DistillTarget::kAllPositions;
  bool reset_shared_optimizer = true;
  bool persist_head_optimizer = true;
  bool reuse_last_session = true;
  int eval_candidates = 0;    // 0 = full catalog
  int threads = 1;
  bool record_timing = true;
};

// Throws ConfigError on out-of-range fields.
void validate(const RunConfig& config);

// ---------------------------------------------------------------------------
// Aggregation and privacy

struct AggregationWeights {
  std::vector<double> alpha;
};

// alpha_u = m_u / sum_v m_v. Throws ProtocolError on an empty or zero-sized set.
AggregationWeights compute_weights(std::span<const std::size_t> session_sizes);

// Entrywise weighted mean of every array.
SharedParams aggregate(std::span<const SharedParams> uploads, const AggregationWeights& weights);

// One Laplace draw with the given standard deviation (scale std / sqrt 2).
double laplace_noise(double stddev, Rng& rng);

// Adds independent Laplace noise of standard deviation `stddev` to every
// entry. stddev == 0 leaves the values untouched.
void apply_ldp(std::span<double> values, double stddev, Rng& rng);
void apply_ldp(SharedParams& params, double stddev, Rng& rng);

// ---------------------------------------------------------------------------
// Clients

struct ClientState {
  ClientId id = 0;
  PrivateParams head;
  AdamState head_opt;
  AdamState shared_opt;
  std::optional<EncoderSnapshot> snapshot;
  FusedPrototype rho;
  std::optional<Vector> last_prototype;
};

// Session consumed at round t, or nullopt if the client has none.
const Session* session_for_round(const ClientDataset& data, int round, bool reuse_last);

// Encodes the round's session with the freshly received global encoder.
PrototypeEntry client_prototype(const SharedParams& global, const ClientDataset& data, int round,
                                bool reuse_last = true);

struct ClientUpdateResult {
  SharedParams shared;
  LossBreakdown loss;  // last epoch
  std::vector<double> epoch_losses;
  bool failed = false;
  std::string failure;
};

// E epochs of full-session Adam steps on rec_loss + lambda * dist_loss,
// starting from `start`. Updates the head, optimizer states and snapshot in
// `client`; returns the trained shared parameters.
ClientUpdateResult client_update(ClientState& client, const SharedParams& start,
                                 const Session& session, int round, const RunConfig& config);

// ---------------------------------------------------------------------------
// Server

// Everything a client sends to the server, as serialized bytes.
struct Payload {
  enum class Kind { kPrototype, kShared };
  ClientId client = 0;
  int round = 0;
  Kind kind = Kind::kPrototype;
  std::string bytes;
};
using PayloadObserver = std::function<void(const Payload&)>;

class Federation {
 public:
  // Throws ConfigError on invalid config, DataError on an empty dataset.
  Federation(RunConfig config, const Dataset& dataset);

  // Evaluation only, with the current global encoder and each client's head.
  RoundReport evaluate(int round) const;

  // Prototype collection, knowledge-base update and transfer, local
  // training, LDP and aggregation, then evaluation.
  RoundReport run_round(int round);

  // Observes every client->server payload before the server decodes it.
  void set_payload_observer(PayloadObserver observer) { observer_ = std::move(observer); }

  const RunConfig& config() const { return config_; }
  const Dataset& dataset() const { return *dataset_; }
  const SharedParams& global() const { return global_; }
  const std::vector<ClientState>& clients() const { return clients_; }
  const KnowledgeBase& knowledge_base() const { return kb_; }
  bool has_session(std::size_t client_index, int round) const;

  // Restores state written by save_checkpoint.
  void load_checkpoint(const std::filesystem::path& dir);
  void save_checkpoint(const std::filesystem::path& dir) const;

  ProbabilityHistogram test_histogram(int bins = 20) const;

 private:
  Payload upload(ClientId client, int round, Payload::Kind kind, std::string bytes) const;
  ModelView view(std::size_t i) const;

  RunConfig config_;
  const Dataset* dataset_;
  SharedParams global_;
  std::vector<ClientState> clients_;
  KnowledgeBase kb_;
  PayloadObserver observer_;
};

struct ExperimentResult {
  std::vector<RoundReport> rounds;  // rounds[0] is the initial evaluation
  int best_round = 0;
  double best_val_hr = 0.0;
  bool early_stopped = false;
  ProbabilityHistogram histogram;
};

struct ExperimentHooks {
  PayloadObserver on_payload;
  std::function<void(const Federation&, const RoundReport&)> on_round;
  // Directory for the final checkpoint, or empty to skip.
  std::filesystem::path checkpoint_dir;
};

// Runs rounds 1..config.rounds with early stopping on validation HR@10.
ExperimentResult run_experiment(const RunConfig& config, const Dataset& dataset,
                                const ExperimentHooks& hooks = {});

}  // namespace fcucr
