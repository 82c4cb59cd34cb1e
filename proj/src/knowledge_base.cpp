#include "fcucr/knowledge_base.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "fcucr/errors.hpp"

namespace fcucr {

double cosine_similarity(const Vector& a, const Vector& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

KnowledgeBase::KnowledgeBase(std::optional<int> window_rounds) : window_(window_rounds) {
  if (window_ && *window_ < 1) throw ConfigError("knowledge base window must be >= 1");
}

void KnowledgeBase::insert(std::vector<PrototypeEntry> entries, int round) {
  std::stable_sort(entries.begin(), entries.end(),
                   [](const PrototypeEntry& a, const PrototypeEntry& b) { return a.client < b.client; });
  std::set<std::pair<ClientId, int>> batch;
  for (const auto& e : entries) {
    if (e.round != round) throw ProtocolError("kb_insert: entry round differs from insert round");
    const auto key = std::make_pair(e.client, e.round);
    if (keys_.contains(key) || !batch.insert(key).second) {
      throw ProtocolError("kb_insert: duplicate prototype for client " + std::to_string(e.client) +
                          " at round " + std::to_string(e.round));
    }
    if (!entries_.empty() && e.vector.size() != entries_.front().vector.size()) {
      throw ShapeError("kb_insert: prototype dimension mismatch");
    }
  }
  for (auto& e : entries) {
    keys_.emplace(e.client, e.round);
    entries_.push_back(std::move(e));
  }
}

std::vector<PrototypeEntry> KnowledgeBase::retrieve_topk(ClientId client, const Vector& query,
                                                         std::size_t k) const {
  struct Candidate {
    double sim;
    const PrototypeEntry* entry;
  };
  std::vector<Candidate> cands;
  cands.reserve(entries_.size());
  for (const auto& e : entries_) {
    if (e.client == client) continue;
    cands.push_back({cosine_similarity(query, e.vector), &e});
  }
  const std::size_t take = std::min(k, cands.size());
  auto better = [](const Candidate& a, const Candidate& b) {
    if (a.sim != b.sim) return a.sim > b.sim;
    if (a.entry->round != b.entry->round) return a.entry->round < b.entry->round;
    return a.entry->client < b.entry->client;
  };
  std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(take), cands.end(),
                    better);
  std::vector<PrototypeEntry> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.push_back(*cands[i].entry);
  return out;
}

void KnowledgeBase::prune(int current_round) {
  if (!window_) return;
  const int cutoff = current_round - *window_;
  std::erase_if(entries_, [cutoff](const PrototypeEntry& e) { return e.round <= cutoff; });
  std::erase_if(keys_, [cutoff](const auto& key) { return key.second <= cutoff; });
}

void KnowledgeBase::dump(std::ostream& out) const {
  char buf[32];
  for (const auto& e : entries_) {
    out << e.client << ',' << e.round;
    for (Eigen::Index i = 0; i < e.vector.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", e.vector[i]);
      out << ',' << buf;
    }
    out << '\n';
  }
}

KnowledgeBase KnowledgeBase::restore(std::istream& in, std::optional<int> window_rounds) {
  KnowledgeBase kb(window_rounds);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, ',');) fields.push_back(f);
    if (fields.size() < 3) throw DataError("kb restore: line " + std::to_string(line_no) + " too short");
    try {
      PrototypeEntry e;
      e.client = std::stoi(fields[0]);
      e.round = std::stoi(fields[1]);
      e.vector.resize(static_cast<Eigen::Index>(fields.size() - 2));
      for (std::size_t i = 2; i < fields.size(); ++i) e.vector[static_cast<Eigen::Index>(i - 2)] = std::stod(fields[i]);
      const int round = e.round;
      kb.insert({std::move(e)}, round);
    } catch (const std::logic_error& err) {
      if (dynamic_cast<const ProtocolError*>(&err)) throw;
      throw DataError("kb restore: line " + std::to_string(line_no) + ": " + err.what());
    }
  }
  return kb;
}

FusedPrototype fuse(std::span<const PrototypeEntry> entries, int dim, int round) {
  FusedPrototype out;
  out.round = round;
  out.rho = Vector::Zero(dim);
  if (entries.empty()) return out;
  for (const auto& e : entries) {
    if (e.vector.size() != dim) throw ShapeError("fuse: dimension mismatch");
    out.rho += e.vector;
    out.sources.emplace_back(e.client, e.round);
  }
  out.rho /= static_cast<double>(entries.size());
  return out;
}

}  // namespace fcucr
