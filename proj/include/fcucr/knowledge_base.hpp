#pragma once

#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include "fcucr/seqrec.hpp"

namespace fcucr {

struct PrototypeEntry {
  ClientId client = 0;
  int round = 0;
  Vector vector;
};

struct FusedPrototype {
  Vector rho;
  std::vector<std::pair<ClientId, int>> sources;  // (client, round)
  int round = 0;

  bool empty_sourced() const { return sources.empty(); }
};

// Cosine similarity; 0 when either vector has zero norm.
double cosine_similarity(const Vector& a, const Vector& b);

// Server-side store of per-round client prototypes with optional sliding
// window over rounds.
class KnowledgeBase {
 public:
  // window_rounds == nullopt keeps every round.
  explicit KnowledgeBase(std::optional<int> window_rounds = std::nullopt);

  // Adds one round of prototypes. Throws ProtocolError on a duplicate
  // (client, round) key or when an entry's round differs from `round`.
  void insert(std::vector<PrototypeEntry> entries, int round);

  // Up to k entries of clients other than `client`, by cosine similarity
  // descending, ties broken by older round then smaller client id.
  std::vector<PrototypeEntry> retrieve_topk(ClientId client, const Vector& query,
                                            std::size_t k) const;

  // Drops entries with round <= current_round - window. No-op if unbounded.
  void prune(int current_round);

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::vector<PrototypeEntry>& entries() const { return entries_; }
  std::optional<int> window() const { return window_; }

  // Line format: `client,round,v_1,...,v_d` with round-trip precision.
  void dump(std::ostream& out) const;
  static KnowledgeBase restore(std::istream& in, std::optional<int> window_rounds = std::nullopt);

 private:
  std::optional<int> window_;
  std::vector<PrototypeEntry> entries_;
  std::set<std::pair<ClientId, int>> keys_;
};

// Unweighted mean of the entries; zero vector of size `dim` when empty.
FusedPrototype fuse(std::span<const PrototypeEntry> entries, int dim, int round = 0);

}  // namespace fcucr
