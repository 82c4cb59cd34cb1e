#include "fcucr/data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "fcucr/errors.hpp"

namespace fcucr {

SessionsByClient segment_sessions(const std::vector<Interaction>& sorted,
                                  std::int64_t gap_seconds) {
  if (gap_seconds <= 0) throw ConfigError("gap_seconds must be positive");
  SessionsByClient out;
  std::size_t i = 0;
  while (i < sorted.size()) {
    const ClientId client = sorted[i].client;
    auto& sessions = out[client];
    std::vector<ItemId> current{sorted[i].item};
    auto flush = [&] {
      if (current.size() >= 2) {
        sessions.push_back(Session{client, static_cast<int>(sessions.size()) + 1, current});
      }
      current.clear();
    };
    std::size_t j = i + 1;
    for (; j < sorted.size() && sorted[j].client == client; ++j) {
      if (sorted[j].timestamp < sorted[j - 1].timestamp) {
        throw DataError("interactions not sorted by timestamp for client " +
                        std::to_string(client));
      }
      if (sorted[j].timestamp - sorted[j - 1].timestamp > gap_seconds) flush();
      current.push_back(sorted[j].item);
    }
    flush();
    if (sessions.empty()) out.erase(client);
    i = j;
  }
  return out;
}

namespace {

std::optional<Session> filter_unseen(const Session& s, const std::unordered_set<ItemId>& seen) {
  Session kept{s.client, s.step, {}};
  for (ItemId item : s.items) {
    if (seen.contains(item)) kept.items.push_back(item);
  }
  if (kept.items.size() < 2) return std::nullopt;
  return kept;
}

}  // namespace

std::vector<ClientDataset> build_splits(const SessionsByClient& sessions) {
  std::vector<ClientDataset> out;
  std::unordered_set<ItemId> train_items;
  for (const auto& [client, list] : sessions) {
    if (list.empty()) continue;
    ClientDataset ds;
    ds.client = client;
    const std::size_t n = list.size();
    const std::size_t n_train = n >= 3 ? n - 2 : 1;
    ds.train.assign(list.begin(), list.begin() + static_cast<std::ptrdiff_t>(n_train));
    if (n >= 3) ds.val = list[n - 2];
    if (n >= 2) ds.test = list[n - 1];
    ds.first = ds.train.front();
    for (const auto& s : ds.train) train_items.insert(s.items.begin(), s.items.end());
    out.push_back(std::move(ds));
  }
  for (auto& ds : out) {
    if (ds.val) ds.val = filter_unseen(*ds.val, train_items);
    if (ds.test) ds.test = filter_unseen(*ds.test, train_items);
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return fields;
}

std::optional<std::int64_t> parse_int(const std::string& s) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

// Numeric ids sort numerically, everything else lexicographically after them.
bool raw_id_less(const std::string& a, const std::string& b) {
  auto na = parse_int(a), nb = parse_int(b);
  if (na && nb) return *na < *nb;
  if (na != nb && (na || nb)) return na.has_value();
  return a < b;
}

std::vector<std::string> dense_order(const std::set<std::string>& ids) {
  std::vector<std::string> v(ids.begin(), ids.end());
  std::sort(v.begin(), v.end(), raw_id_less);
  return v;
}

}  // namespace

RawLog read_tsv(std::istream& in, const RawLogOptions& options) {
  struct Row {
    std::string client, item;
    std::int64_t ts;
  };
  std::vector<Row> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_tabs(line);
    if (fields.size() < 3 || fields.size() > 4) {
      throw DataError("line " + std::to_string(line_no) + ": expected 3 or 4 tab-separated fields");
    }
    auto ts = parse_int(fields[2]);
    if (!ts) {
      if (rows.empty() && line_no == 1) continue;  // header
      throw DataError("line " + std::to_string(line_no) + ": bad timestamp '" + fields[2] + "'");
    }
    if (fields[0].empty() || fields[1].empty()) {
      throw DataError("line " + std::to_string(line_no) + ": empty id");
    }
    if (fields.size() == 4 && options.drop_labels.contains(fields[3])) continue;
    rows.push_back(Row{fields[0], fields[1], *ts});
  }

  std::set<std::string> items, clients;
  for (const auto& r : rows) {
    items.insert(r.item);
    clients.insert(r.client);
  }
  RawLog log;
  log.raw_item_ids = dense_order(items);
  log.raw_client_ids = dense_order(clients);
  std::map<std::string, ItemId> item_index;
  std::map<std::string, ClientId> client_index;
  for (std::size_t i = 0; i < log.raw_item_ids.size(); ++i)
    item_index[log.raw_item_ids[i]] = static_cast<ItemId>(i);
  for (std::size_t i = 0; i < log.raw_client_ids.size(); ++i)
    client_index[log.raw_client_ids[i]] = static_cast<ClientId>(i);

  log.interactions.reserve(rows.size());
  for (const auto& r : rows) {
    log.interactions.push_back({client_index.at(r.client), item_index.at(r.item), r.ts});
  }
  // Stable: equal timestamps keep file order.
  std::stable_sort(log.interactions.begin(), log.interactions.end(),
                   [](const Interaction& a, const Interaction& b) {
                     if (a.client != b.client) return a.client < b.client;
                     return a.timestamp < b.timestamp;
                   });
  return log;
}

RawLog read_tsv(const std::filesystem::path& path, const RawLogOptions& options) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return read_tsv(in, options);
}

// ---------------------------------------------------------------------------

DatasetSummary summarize(const Dataset& dataset) {
  DatasetSummary s;
  s.users = dataset.clients.size();
  s.items = static_cast<std::size_t>(dataset.catalog_size);
  std::size_t total = 0;
  for (const auto& c : dataset.clients) {
    auto add = [&](const Session& x) {
      ++s.sessions;
      total += x.size();
    };
    for (const auto& x : c.train) add(x);
    if (c.val) add(*c.val);
    if (c.test) add(*c.test);
  }
  s.mean_length = s.sessions ? static_cast<double>(total) / static_cast<double>(s.sessions) : 0.0;
  return s;
}

namespace {

using nlohmann::json;

json session_record(const Session& s, const char* split) {
  return json{{"client", s.client}, {"split", split}, {"step", s.step}, {"items", s.items}};
}

std::string meta_text(const Dataset& d) {
  json index = json::array();
  for (const auto& c : d.clients) {
    index.push_back(json{{"client", c.client},
                         {"train", c.train.size()},
                         {"val", c.val.has_value()},
                         {"test", c.test.has_value()}});
  }
  json meta{{"format", "fcucr-bundle/1"},
            {"catalog_size", d.catalog_size},
            {"clients", d.clients.size()},
            {"index", index},
            {"raw_item_ids", d.raw_item_ids},
            {"raw_client_ids", d.raw_client_ids}};
  return meta.dump(1) + "\n";
}

std::string sessions_text(const Dataset& d) {
  std::string out;
  for (const auto& c : d.clients) {
    for (const auto& s : c.train) out += session_record(s, "train").dump() + "\n";
    if (c.val) out += session_record(*c.val, "val").dump() + "\n";
    if (c.test) out += session_record(*c.test, "test").dump() + "\n";
  }
  return out;
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw DataError("cannot write " + p.string());
  out << text;
}

}  // namespace

void write_bundle(const Dataset& dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text(dir / "meta.json", meta_text(dataset));
  write_text(dir / "sessions.jsonl", sessions_text(dataset));
}

Dataset read_bundle(const std::filesystem::path& dir) {
  std::ifstream meta_in(dir / "meta.json");
  if (!meta_in) throw DataError("missing " + (dir / "meta.json").string());
  Dataset d;
  std::map<ClientId, std::size_t> position;
  try {
    json meta = json::parse(meta_in);
    d.catalog_size = meta.at("catalog_size").get<int>();
    d.raw_item_ids = meta.value("raw_item_ids", std::vector<std::string>{});
    d.raw_client_ids = meta.value("raw_client_ids", std::vector<std::string>{});
    for (const auto& e : meta.at("index")) {
      ClientDataset c;
      c.client = e.at("client").get<ClientId>();
      position[c.client] = d.clients.size();
      d.clients.push_back(std::move(c));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("bad meta.json: ") + e.what());
  }

  std::ifstream in(dir / "sessions.jsonl");
  if (!in) throw DataError("missing " + (dir / "sessions.jsonl").string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      json r = json::parse(line);
      Session s{r.at("client").get<ClientId>(), r.at("step").get<int>(),
                r.at("items").get<std::vector<ItemId>>()};
      for (ItemId item : s.items) {
        if (item < 0 || item >= d.catalog_size) {
          throw DataError("sessions.jsonl line " + std::to_string(line_no) +
                          ": item id out of range");
        }
      }
      auto it = position.find(s.client);
      if (it == position.end()) {
        throw DataError("sessions.jsonl line " + std::to_string(line_no) + ": unknown client");
      }
      auto& c = d.clients[it->second];
      const std::string split = r.at("split").get<std::string>();
      if (split == "train") {
        c.train.push_back(std::move(s));
      } else if (split == "val") {
        c.val = std::move(s);
      } else if (split == "test") {
        c.test = std::move(s);
      } else {
        throw DataError("sessions.jsonl line " + std::to_string(line_no) + ": bad split");
      }
    } catch (const json::exception& e) {
      throw DataError("sessions.jsonl line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  for (auto& c : d.clients) {
    if (c.train.empty()) throw DataError("client " + std::to_string(c.client) + " has no training sessions");
    c.first = c.train.front();
  }
  return d;
}

std::uint64_t fingerprint(const Dataset& dataset) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](const std::string& s) {
    for (unsigned char ch : s) {
      h ^= ch;
      h *= 0x100000001b3ULL;
    }
  };
  feed(meta_text(dataset));
  feed(sessions_text(dataset));
  return h;
}

}  // namespace fcucr
