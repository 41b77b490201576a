#include "maint/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

namespace maint {

namespace fs = std::filesystem;

FormatSpec FormatSpec::taobao() {
  FormatSpec s;
  s.behavior_rename = {{"pv", "click"}, {"fav", "collect"}};
  s.min_user_events = 10;
  s.min_item_events = 20;
  return s;
}

FormatSpec FormatSpec::retailrocket() {
  FormatSpec s;
  s.timestamp_col = 0;
  s.user_col = 1;
  s.behavior_col = 2;
  s.item_col = 3;
  s.category_col = -1;
  s.has_header = true;
  s.timestamp_divisor = 1000;
  s.behavior_rename = {{"transaction", "buy"}, {"addtocart", "cart"}};
  s.min_user_events = 5;
  s.min_item_events = 10;
  return s;
}

FormatSpec FormatSpec::generic() { return FormatSpec{}; }

namespace {

std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, delim)) out.push_back(field);
  if (!line.empty() && line.back() == delim) out.push_back("");
  return out;
}

bool parse_ll(const std::string& s, long long* out) {
  if (s.empty()) return false;
  char* end = nullptr;
  errno = 0;
  long long v = std::strtoll(s.c_str(), &end, 10);
  if (errno != 0 || end != s.c_str() + s.size()) return false;
  *out = v;
  return true;
}

}  // namespace

ParseResult parse_events(const std::string& path, const FormatSpec& spec) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open event log: " + path);

  ParseResult res;
  std::string line;
  bool first = true;
  std::size_t total = 0;
  const int max_col = std::max({spec.user_col, spec.item_col, spec.category_col,
                                spec.behavior_col, spec.timestamp_col});
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (first && spec.has_header) {
      first = false;
      continue;
    }
    first = false;
    if (line.empty()) continue;
    ++total;
    auto fields = split_line(line, spec.delimiter);
    if (static_cast<int>(fields.size()) <= max_col) {
      ++res.malformed_lines;
      continue;
    }
    BehaviorRecord r;
    r.user_id = fields[spec.user_col];
    r.item_id = fields[spec.item_col];
    r.category_id = spec.category_col >= 0 ? fields[spec.category_col] : "unknown";
    r.behavior_type = fields[spec.behavior_col];
    long long ts;
    if (!parse_ll(fields[spec.timestamp_col], &ts) || ts < 0 || r.user_id.empty() ||
        r.item_id.empty() || r.behavior_type.empty() || r.category_id.empty()) {
      ++res.malformed_lines;
      continue;
    }
    r.timestamp = ts / spec.timestamp_divisor;
    auto it = spec.behavior_rename.find(r.behavior_type);
    if (it != spec.behavior_rename.end()) r.behavior_type = it->second;
    res.records.push_back(std::move(r));
  }
  if (total > 0 && res.malformed_lines * 2 > total)
    throw FormatError("more than half of " + std::to_string(total) +
                      " lines malformed in " + path);
  std::stable_sort(res.records.begin(), res.records.end(),
                   [](const BehaviorRecord& a, const BehaviorRecord& b) {
                     if (a.user_id != b.user_id) return a.user_id < b.user_id;
                     return a.timestamp < b.timestamp;
                   });
  return res;
}

CategoryTree load_category_tree(const std::string& path, char delimiter) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open category tree: " + path);
  CategoryTree tree;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_line(line, delimiter);
    if (fields.empty() || fields[0].empty()) continue;
    if (first && fields[0] == "categoryid") {  // header
      first = false;
      continue;
    }
    first = false;
    tree[fields[0]] = fields.size() > 1 ? fields[1] : "";
  }
  return tree;
}

std::map<std::string, std::vector<std::string>> load_item_categories(
    const std::string& path, char delimiter) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open item properties: " + path);
  std::map<std::string, std::vector<std::string>> out;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_line(line, delimiter);
    if (first && !fields.empty() && fields[0] == "timestamp") {
      first = false;
      continue;
    }
    first = false;
    if (fields.size() < 4 || fields[2] != "categoryid") continue;
    out[fields[1]].push_back(fields[3]);
  }
  return out;
}

namespace {

std::size_t node_depth(const CategoryTree& tree, const std::string& node,
                       std::map<std::string, std::size_t>& memo) {
  std::size_t depth = 0;
  std::string cur = node;
  std::vector<std::string> path;
  while (true) {
    auto m = memo.find(cur);
    if (m != memo.end()) {
      depth = m->second;
      break;
    }
    path.push_back(cur);
    if (path.size() > tree.size() + 1)
      throw DataError("category tree cycle involving node " + node);
    auto it = tree.find(cur);
    if (it == tree.end() || it->second.empty()) break;  // root
    cur = it->second;
  }
  for (auto it = path.rbegin(); it != path.rend(); ++it) memo[*it] = ++depth;
  return memo.count(node) ? memo[node] : depth;
}

}  // namespace

std::map<std::string, std::string> resolve_lowest_category(
    const CategoryTree& tree,
    const std::map<std::string, std::vector<std::string>>& item_categories) {
  std::map<std::string, std::size_t> depth_memo;
  std::map<std::string, std::string> out;
  for (const auto& [item, cats] : item_categories) {
    std::string best;
    std::size_t best_depth = 0;
    for (const std::string& c : cats) {
      std::size_t d = node_depth(tree, c, depth_memo);
      if (d > best_depth || (d == best_depth && (best.empty() || c < best))) {
        best = c;
        best_depth = d;
      }
    }
    if (!best.empty()) out[item] = best;
  }
  return out;
}

void apply_categories(std::vector<BehaviorRecord>& records,
                      const std::map<std::string, std::string>& item_category) {
  for (auto& r : records) {
    auto it = item_category.find(r.item_id);
    if (it != item_category.end()) r.category_id = it->second;
  }
}

std::vector<BehaviorRecord> filter_dataset(const std::vector<BehaviorRecord>& records,
                                           std::size_t min_user_events,
                                           std::size_t min_item_events,
                                           const std::string& target_behavior,
                                           bool iterate) {
  std::vector<BehaviorRecord> cur = records;
  while (true) {
    std::map<std::string, std::size_t> user_count, item_count;
    for (const auto& r : cur) {
      ++user_count[r.user_id];
      ++item_count[r.item_id];
    }
    std::vector<BehaviorRecord> next;
    next.reserve(cur.size());
    for (const auto& r : cur) {
      if (user_count[r.user_id] >= min_user_events &&
          item_count[r.item_id] >= min_item_events)
        next.push_back(r);
    }
    bool stable = next.size() == cur.size();
    cur = std::move(next);
    if (stable || !iterate) break;
  }
  // each user must keep at least one target-type event
  std::map<std::string, bool> has_target;
  for (const auto& r : cur)
    if (r.behavior_type == target_behavior) has_target[r.user_id] = true;
  std::vector<BehaviorRecord> out;
  out.reserve(cur.size());
  for (const auto& r : cur)
    if (has_target.count(r.user_id)) out.push_back(r);
  if (out.empty()) throw EmptyDatasetError("filtering removed every record");
  return out;
}

std::size_t bucketize_interval(long long delta_seconds) {
  if (delta_seconds < 0)
    throw std::invalid_argument("bucketize_interval: negative interval " +
                                std::to_string(delta_seconds));
  static constexpr long long bounds[] = {60,    300,    1800,   3600,
                                         14400, 86400,  604800, 2592000};
  std::size_t b = 0;
  for (long long lim : bounds) {
    if (delta_seconds < lim) return b;
    ++b;
  }
  return 8;
}

void recompute_target_positions(UserSequence& seq, std::size_t target_behavior) {
  seq.target_positions.clear();
  for (std::size_t i = 0; i < seq.events.size(); ++i)
    if (seq.events[i].behavior == target_behavior) seq.target_positions.push_back(i);
}

void recompute_buckets(UserSequence& seq) {
  for (std::size_t i = 0; i + 1 < seq.events.size(); ++i)
    seq.events[i].bucket =
        bucketize_interval(seq.events[i + 1].timestamp - seq.events[i].timestamp);
  if (!seq.events.empty()) seq.events.back().bucket = kTerminalBucket;
}

std::vector<UserSequence> truncate_sequences(std::vector<UserSequence> sequences,
                                             std::size_t target_behavior,
                                             std::size_t max_len) {
  if (max_len < 1) throw std::invalid_argument("truncate_sequences: max_len must be >= 1");
  std::vector<UserSequence> out;
  out.reserve(sequences.size());
  for (auto& seq : sequences) {
    if (seq.events.size() > max_len)
      seq.events.erase(seq.events.begin(),
                       seq.events.begin() + (seq.events.size() - max_len));
    recompute_target_positions(seq, target_behavior);
    if (!seq.target_positions.empty()) out.push_back(std::move(seq));
  }
  return out;
}

ProcessedDataset build_sequences(const std::vector<BehaviorRecord>& records,
                                 const std::string& target_behavior,
                                 std::size_t max_len) {
  ProcessedDataset ds;
  ds.max_len = max_len;
  ds.target_behavior = ds.behaviors.encode(target_behavior);

  std::vector<UserSequence> seqs;
  const std::string* cur_user = nullptr;
  for (const auto& r : records) {
    if (!cur_user || r.user_id != *cur_user) {
      seqs.push_back(UserSequence{ds.users.encode(r.user_id), {}, {}});
      cur_user = &r.user_id;
    }
    Event e;
    e.item = ds.items.encode(r.item_id);
    e.category = ds.categories.encode(r.category_id);
    e.behavior = ds.behaviors.encode(r.behavior_type);
    e.timestamp = r.timestamp;
    seqs.back().events.push_back(e);
  }
  for (auto& s : seqs) {
    recompute_buckets(s);
    recompute_target_positions(s, ds.target_behavior);
  }
  ds.split = split_leave_one_out(std::move(seqs), ds.target_behavior, max_len);
  return ds;
}

DatasetSplit split_leave_one_out(std::vector<UserSequence> sequences,
                                 std::size_t target_behavior, std::size_t max_len) {
  DatasetSplit split;
  for (auto& seq : sequences) {
    recompute_target_positions(seq, target_behavior);
    if (seq.target_positions.empty()) continue;  // nothing to test on

    EvalTarget test, val;
    const std::size_t test_pos = seq.target_positions.back();
    test.item = seq.events[test_pos].item;
    test.category = seq.events[test_pos].category;
    test.present = true;
    seq.events.erase(seq.events.begin() + test_pos);

    recompute_target_positions(seq, target_behavior);
    if (!seq.target_positions.empty()) {
      const std::size_t val_pos = seq.target_positions.back();
      val.item = seq.events[val_pos].item;
      val.category = seq.events[val_pos].category;
      val.present = true;
      seq.events.erase(seq.events.begin() + val_pos);
    }

    // drop every remaining training event on the test item
    std::erase_if(seq.events, [&](const Event& e) { return e.item == test.item; });

    if (seq.events.size() > max_len)
      seq.events.erase(seq.events.begin(),
                       seq.events.begin() + (seq.events.size() - max_len));
    if (seq.events.empty()) continue;  // no history left to predict from

    recompute_buckets(seq);
    recompute_target_positions(seq, target_behavior);

    split.train.push_back(std::move(seq));
    split.test.push_back(test);
    split.validation.push_back(val);
    split.negatives.emplace_back();
  }
  return split;
}

std::vector<std::size_t> sample_negatives(const std::vector<bool>& interacted,
                                          std::size_t n_items, std::size_t user,
                                          std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> candidates;
  for (std::size_t i = 1; i < n_items; ++i)
    if (i >= interacted.size() || !interacted[i]) candidates.push_back(i);
  if (candidates.size() < n)
    throw ProtocolError("user " + std::to_string(user) + " has only " +
                        std::to_string(candidates.size()) +
                        " non-interacted items, need " + std::to_string(n));
  std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + user + 1);
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, candidates.size() - 1);
    std::swap(candidates[i], candidates[pick(rng)]);
  }
  candidates.resize(n);
  return candidates;
}

void sample_all_negatives(ProcessedDataset& ds, std::size_t n, std::uint64_t seed) {
  ds.split.excluded_users.clear();
  for (std::size_t u = 0; u < ds.split.train.size(); ++u) {
    std::vector<bool> interacted(ds.items.size(), false);
    for (const Event& e : ds.split.train[u].events) interacted[e.item] = true;
    if (ds.split.test[u].present) interacted[ds.split.test[u].item] = true;
    if (ds.split.validation[u].present) interacted[ds.split.validation[u].item] = true;
    try {
      ds.split.negatives[u] =
          sample_negatives(interacted, ds.items.size(), ds.split.train[u].user, n, seed);
    } catch (const ProtocolError&) {
      ds.split.negatives[u].clear();
      ds.split.excluded_users.push_back(u);
    }
  }
}

std::optional<double> conversion_rate(const std::vector<BehaviorRecord>& records,
                                      const std::string& behavior_type,
                                      const std::string& target_type) {
  if (behavior_type == target_type)
    throw std::invalid_argument("conversion_rate: behavior equals target type");
  // records are (user, time)-sorted; walk each (user, item) group
  std::map<std::pair<std::string, std::string>, std::vector<std::size_t>> support_pos;
  std::map<std::pair<std::string, std::string>, std::size_t> last_target_pos;
  std::size_t denom = 0, numer = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    auto key = std::make_pair(r.user_id, r.item_id);
    if (r.behavior_type == behavior_type) {
      ++denom;
      support_pos[key].push_back(i);
    } else if (r.behavior_type == target_type) {
      last_target_pos[key] = i;
    }
  }
  if (denom == 0) return std::nullopt;
  for (const auto& [key, positions] : support_pos) {
    auto it = last_target_pos.find(key);
    if (it == last_target_pos.end()) continue;
    for (std::size_t p : positions)
      if (p < it->second) ++numer;
  }
  return static_cast<double>(numer) / static_cast<double>(denom);
}

SyntheticResult generate_synthetic(const SyntheticSpec& spec) {
  if (spec.n_users == 0 || spec.n_items == 0 || spec.n_categories == 0 ||
      spec.n_behavior_types < 2)
    throw std::invalid_argument("generate_synthetic: counts must be positive");
  if (spec.noise_fraction < 0.0 || spec.noise_fraction >= 1.0)
    throw std::invalid_argument("generate_synthetic: noise fraction must be in [0,1)");

  static const char* kSupportNames[] = {"click", "cart", "collect", "view"};
  std::vector<std::string> support;
  for (std::size_t b = 0; b + 1 < spec.n_behavior_types; ++b)
    support.push_back(b < 4 ? kSupportNames[b] : "s" + std::to_string(b + 1));

  // item k belongs to category k % n_categories
  std::vector<std::vector<std::size_t>> cat_items(spec.n_categories);
  for (std::size_t k = 0; k < spec.n_items; ++k)
    cat_items[k % spec.n_categories].push_back(k);

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  auto zipf_pick = [&](const std::vector<std::size_t>& items) {
    // rank r gets weight (r+1)^-s
    double total = 0.0;
    for (std::size_t r = 0; r < items.size(); ++r)
      total += std::pow(static_cast<double>(r + 1), -spec.preference_strength);
    double x = u01(rng) * total;
    for (std::size_t r = 0; r < items.size(); ++r) {
      x -= std::pow(static_cast<double>(r + 1), -spec.preference_strength);
      if (x <= 0.0) return items[r];
    }
    return items.back();
  };

  SyntheticResult out;
  for (std::size_t u = 0; u < spec.n_users; ++u) {
    const std::size_t pref = rng() % spec.n_categories;
    long long ts = 1'600'000'000LL;
    const std::size_t n_buys =
        spec.min_buys + (spec.max_buys > spec.min_buys
                             ? rng() % (spec.max_buys - spec.min_buys + 1)
                             : 0);
    for (std::size_t s = 0; s < n_buys; ++s) {
      std::size_t intent = pref;
      if (u01(rng) < spec.intent_drift) intent = rng() % spec.n_categories;
      const std::size_t n_support =
          spec.min_support_per_buy +
          (spec.max_support_per_buy > spec.min_support_per_buy
               ? rng() % (spec.max_support_per_buy - spec.min_support_per_buy + 1)
               : 0);
      for (std::size_t e = 0; e < n_support; ++e) {
        std::size_t item;
        ++out.support_events;
        if (u01(rng) < spec.noise_fraction) {
          item = rng() % spec.n_items;
          ++out.noise_events;
        } else {
          item = zipf_pick(cat_items[intent]);
        }
        BehaviorRecord r;
        r.user_id = "u" + std::to_string(u);
        r.item_id = "i" + std::to_string(item);
        r.category_id = "c" + std::to_string(item % spec.n_categories);
        r.behavior_type = support[rng() % support.size()];
        r.timestamp = ts;
        ts += 60;
        out.records.push_back(std::move(r));
      }
      const std::size_t buy_item = zipf_pick(cat_items[pref]);
      BehaviorRecord r;
      r.user_id = "u" + std::to_string(u);
      r.item_id = "i" + std::to_string(buy_item);
      r.category_id = "c" + std::to_string(buy_item % spec.n_categories);
      r.behavior_type = "buy";
      r.timestamp = ts;
      ts += 7200;
      out.records.push_back(std::move(r));
    }
  }
  std::stable_sort(out.records.begin(), out.records.end(),
                   [](const BehaviorRecord& a, const BehaviorRecord& b) {
                     if (a.user_id != b.user_id) return a.user_id < b.user_id;
                     return a.timestamp < b.timestamp;
                   });
  return out;
}

std::vector<Batch> make_batches(const DatasetSplit& split, std::size_t batch_size,
                                std::uint64_t seed, std::size_t epoch) {
  if (batch_size < 1) throw std::invalid_argument("make_batches: batch_size must be >= 1");
  std::vector<std::size_t> order(split.train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + epoch);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    Batch b;
    const std::size_t end = std::min(start + batch_size, order.size());
    b.rows = end - start;
    for (std::size_t i = start; i < end; ++i) {
      b.seq_indices.push_back(order[i]);
      b.max_len = std::max(b.max_len, split.train[order[i]].events.size());
    }
    const std::size_t cells = b.rows * b.max_len;
    b.items.assign(cells, 0);
    b.categories.assign(cells, 0);
    b.behaviors.assign(cells, 0);
    b.buckets.assign(cells, 0);
    b.event_mask.assign(cells, false);
    b.target_mask.assign(cells, false);
    for (std::size_t r = 0; r < b.rows; ++r) {
      const UserSequence& seq = split.train[b.seq_indices[r]];
      for (std::size_t n = 0; n < seq.events.size(); ++n) {
        const std::size_t c = r * b.max_len + n;
        b.items[c] = seq.events[n].item;
        b.categories[c] = seq.events[n].category;
        b.behaviors[c] = seq.events[n].behavior;
        b.buckets[c] = seq.events[n].bucket;
        b.event_mask[c] = true;
      }
      for (std::size_t p : seq.target_positions) b.target_mask[r * b.max_len + p] = true;
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

namespace {

void write_vocab(const fs::path& path, const Vocab& v) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (std::size_t i = 1; i < v.size(); ++i) out << v.decode(i) << "\n";
}

Vocab read_vocab(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  Vocab v;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    v.encode(line);
  }
  return v;
}

}  // namespace

void save_dataset(const std::string& dir, const ProcessedDataset& ds) {
  fs::create_directories(dir);
  const fs::path root(dir);
  write_vocab(root / "users.vocab", ds.users);
  write_vocab(root / "items.vocab", ds.items);
  write_vocab(root / "categories.vocab", ds.categories);
  write_vocab(root / "behaviors.vocab", ds.behaviors);

  {
    std::ofstream meta(root / "meta.txt");
    meta << "target_behavior:" << ds.behaviors.decode(ds.target_behavior) << "\n";
    meta << "max_len:" << ds.max_len << "\n";
  }
  {
    std::ofstream out(root / "sequences.txt");
    for (const UserSequence& seq : ds.split.train) {
      out << seq.user;
      for (const Event& e : seq.events)
        out << "\t" << e.item << ":" << e.category << ":" << e.behavior << ":"
            << e.bucket;
      out << "\n";
    }
  }
  {
    std::ofstream out(root / "split.txt");
    for (std::size_t u = 0; u < ds.split.train.size(); ++u) {
      out << "user:" << ds.split.train[u].user << "\n";
      if (ds.split.test[u].present)
        out << "test_item:" << ds.split.test[u].item
            << "\ntest_category:" << ds.split.test[u].category << "\n";
      if (ds.split.validation[u].present)
        out << "val_item:" << ds.split.validation[u].item
            << "\nval_category:" << ds.split.validation[u].category << "\n";
      if (!ds.split.negatives[u].empty()) {
        out << "negatives:";
        for (std::size_t i = 0; i < ds.split.negatives[u].size(); ++i)
          out << (i ? "," : "") << ds.split.negatives[u][i];
        out << "\n";
      }
      out << "\n";
    }
  }
}

ProcessedDataset load_dataset(const std::string& dir) {
  const fs::path root(dir);
  if (!fs::exists(root / "meta.txt"))
    throw IoError("not a dataset directory: " + dir);
  ProcessedDataset ds;
  ds.users = read_vocab(root / "users.vocab");
  ds.items = read_vocab(root / "items.vocab");
  ds.categories = read_vocab(root / "categories.vocab");
  ds.behaviors = read_vocab(root / "behaviors.vocab");

  {
    std::ifstream meta(root / "meta.txt");
    std::string line;
    std::string target;
    while (std::getline(meta, line)) {
      auto colon = line.find(':');
      if (colon == std::string::npos) continue;
      const std::string key = line.substr(0, colon), val = line.substr(colon + 1);
      if (key == "target_behavior") target = val;
      if (key == "max_len") ds.max_len = std::stoul(val);
    }
    auto t = ds.behaviors.lookup(target);
    if (!t) throw FormatError("meta.txt names unknown target behavior '" + target + "'");
    ds.target_behavior = *t;
  }
  {
    std::ifstream in(root / "sequences.txt");
    if (!in) throw IoError("missing sequences.txt in " + dir);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::istringstream ss(line);
      std::string tok;
      UserSequence seq;
      std::getline(ss, tok, '\t');
      seq.user = std::stoul(tok);
      while (std::getline(ss, tok, '\t')) {
        Event e;
        if (std::sscanf(tok.c_str(), "%zu:%zu:%zu:%zu", &e.item, &e.category,
                        &e.behavior, &e.bucket) != 4)
          throw FormatError("bad event quadruple '" + tok + "' in sequences.txt");
        seq.events.push_back(e);
      }
      recompute_target_positions(seq, ds.target_behavior);
      ds.split.train.push_back(std::move(seq));
    }
  }
  ds.split.test.assign(ds.split.train.size(), {});
  ds.split.validation.assign(ds.split.train.size(), {});
  ds.split.negatives.assign(ds.split.train.size(), {});
  {
    std::ifstream in(root / "split.txt");
    if (!in) throw IoError("missing split.txt in " + dir);
    std::map<std::size_t, std::size_t> row_of_user;
    for (std::size_t i = 0; i < ds.split.train.size(); ++i)
      row_of_user[ds.split.train[i].user] = i;
    std::string line;
    std::size_t row = SIZE_MAX;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto colon = line.find(':');
      if (colon == std::string::npos) continue;
      const std::string key = line.substr(0, colon), val = line.substr(colon + 1);
      if (key == "user") {
        auto it = row_of_user.find(std::stoul(val));
        if (it == row_of_user.end())
          throw FormatError("split.txt names unknown user " + val);
        row = it->second;
      } else if (row == SIZE_MAX) {
        throw FormatError("split.txt entry before any user line");
      } else if (key == "test_item") {
        ds.split.test[row].item = std::stoul(val);
        ds.split.test[row].present = true;
      } else if (key == "test_category") {
        ds.split.test[row].category = std::stoul(val);
      } else if (key == "val_item") {
        ds.split.validation[row].item = std::stoul(val);
        ds.split.validation[row].present = true;
      } else if (key == "val_category") {
        ds.split.validation[row].category = std::stoul(val);
      } else if (key == "negatives") {
        std::istringstream ns(val);
        std::string n;
        while (std::getline(ns, n, ',')) ds.split.negatives[row].push_back(std::stoul(n));
      }
    }
  }
  return ds;
}

DatasetStats compute_stats(const std::vector<BehaviorRecord>& records,
                           const std::string& target_behavior) {
  DatasetStats st;
  std::map<std::string, bool> users, items, cats;
  for (const auto& r : records) {
    users[r.user_id] = true;
    items[r.item_id] = true;
    cats[r.category_id] = true;
    ++st.behavior_counts[r.behavior_type];
  }
  st.n_users = users.size();
  st.n_items = items.size();
  st.n_categories = cats.size();
  for (const auto& [beh, cnt] : st.behavior_counts) {
    if (beh == target_behavior) continue;
    st.conversion_rates[beh] = conversion_rate(records, beh, target_behavior);
  }
  return st;
}

}  // namespace maint
