#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace fcucr {

using ClientId = std::int32_t;
using ItemId = std::int32_t;

struct Interaction {
  ClientId client = 0;
  ItemId item = 0;
  std::int64_t timestamp = 0;
};

// One client's ordered item sequence for one time step (step >= 1).
struct Session {
  ClientId client = 0;
  int step = 1;
  std::vector<ItemId> items;

  std::size_t size() const { return items.size(); }
  bool operator==(const Session&) const = default;
};

struct ClientDataset {
  ClientId client = 0;
  std::vector<Session> train;
  std::optional<Session> val;
  std::optional<Session> test;
  // Copy of train step 1, never modified after construction.
  Session first;

  bool operator==(const ClientDataset&) const = default;
};

struct Dataset {
  int catalog_size = 0;
  std::vector<ClientDataset> clients;
  // Original raw ids, indexed by dense id. Empty for synthetic data.
  std::vector<std::string> raw_item_ids;
  std::vector<std::string> raw_client_ids;

  bool operator==(const Dataset&) const = default;
};

// ---------------------------------------------------------------------------
// Segmentation and splits

// Sessions per client, keyed by client id, in chronological order.
using SessionsByClient = std::map<ClientId, std::vector<Session>>;

// Splits a (client, timestamp)-sorted log into sessions. A new session starts
// when the gap to the previous interaction of the same client is strictly
// greater than gap_seconds. Sessions shorter than 2 are dropped and steps are
// numbered 1.. over the surviving sessions.
SessionsByClient segment_sessions(const std::vector<Interaction>& sorted,
                                  std::int64_t gap_seconds);

// Assigns the last session to test, the second-to-last to validation and the
// rest to training. Items of val/test that never occur in any client's
// training sessions are removed; sessions left with fewer than 2 items become
// absent.
std::vector<ClientDataset> build_splits(const SessionsByClient& sessions);

// ---------------------------------------------------------------------------
// Raw logs

struct RawLogOptions {
  // Rows whose optional 4th column equals one of these labels are skipped.
  std::set<std::string> drop_labels;
};

struct RawLog {
  std::vector<Interaction> interactions;  // sorted by (client, timestamp)
  std::vector<std::string> raw_item_ids;
  std::vector<std::string> raw_client_ids;
  std::size_t catalog_size() const { return raw_item_ids.size(); }
};

// Reads `client_id<TAB>item_id<TAB>timestamp[<TAB>label]` rows. A first row
// whose timestamp field is not an integer is treated as a header. Raw ids are
// remapped to dense ranges in lexicographic/numeric order of the raw id.
RawLog read_tsv(std::istream& in, const RawLogOptions& options = {});
RawLog read_tsv(const std::filesystem::path& path, const RawLogOptions& options = {});

// ---------------------------------------------------------------------------
// Bundles

struct DatasetSummary {
  std::size_t users = 0;
  std::size_t items = 0;
  std::size_t sessions = 0;
  double mean_length = 0.0;
};

DatasetSummary summarize(const Dataset& dataset);

// Writes meta.json and sessions.jsonl into dir (created if needed).
void write_bundle(const Dataset& dataset, const std::filesystem::path& dir);
Dataset read_bundle(const std::filesystem::path& dir);

// 64-bit FNV-1a over the bundle's canonical serialization.
std::uint64_t fingerprint(const Dataset& dataset);

// ---------------------------------------------------------------------------
// Synthetic drifting-preference data

struct SyntheticConfig {
  int n_clients = 50;
  int catalog_size = 100;
  int n_sessions = 8;
  int session_length = 8;
  int n_clusters = 5;
  double drift_rate = 0.3;
  std::uint64_t seed = 1;
  int latent_dim = 8;
  // Softmax sharpness of item affinity.
  double temperature = 0.25;
  // Spread of client preferences around their cluster centroid.
  double client_spread = 0.3;
};

struct SyntheticDataset {
  Dataset dataset;
  std::vector<int> cluster_of;  // by client id
  // Latent preference vector per client and step (steps 1..n_sessions).
  std::vector<std::vector<std::vector<double>>> preferences;
};

SyntheticDataset gen_synthetic(const SyntheticConfig& config);

}  // namespace fcucr
