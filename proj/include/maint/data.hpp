#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace maint {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct EmptyDatasetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ProtocolError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One raw interaction.
struct BehaviorRecord {
  std::string user_id;
  std::string item_id;
  std::string category_id;
  std::string behavior_type;
  long long timestamp = 0;  // seconds since epoch
};

// Bidirectional string<->index map. Index 0 is reserved for padding.
class Vocab {
 public:
  Vocab() : strings_{"<pad>"} {}

  std::size_t encode(const std::string& s) {
    auto it = index_.find(s);
    if (it != index_.end()) return it->second;
    strings_.push_back(s);
    index_.emplace(s, strings_.size() - 1);
    return strings_.size() - 1;
  }

  std::optional<std::size_t> lookup(const std::string& s) const {
    auto it = index_.find(s);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  const std::string& decode(std::size_t i) const { return strings_.at(i); }

  std::size_t size() const { return strings_.size(); }  // includes padding

 private:
  std::vector<std::string> strings_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Column layout of a delimited event log.
struct FormatSpec {
  char delimiter = ',';
  int user_col = 0;
  int item_col = 1;
  int category_col = 2;  // -1: not present in this file
  int behavior_col = 3;
  int timestamp_col = 4;
  bool has_header = false;
  long long timestamp_divisor = 1;  // e.g. 1000 for millisecond logs
  std::map<std::string, std::string> behavior_rename;
  std::string target_behavior = "buy";
  std::size_t min_user_events = 0;
  std::size_t min_item_events = 0;

  static FormatSpec taobao();
  static FormatSpec retailrocket();
  static FormatSpec generic();
};

struct ParseResult {
  std::vector<BehaviorRecord> records;
  std::size_t malformed_lines = 0;
};

// Parses a delimited log; malformed lines are counted and skipped; records
// come back stably sorted by (user, timestamp, input order).
ParseResult parse_events(const std::string& path, const FormatSpec& spec);

// Category tree utilities (Retailrocket-style hierarchical categories).
using CategoryTree = std::map<std::string, std::string>;  // child -> parent

CategoryTree load_category_tree(const std::string& path, char delimiter = ',');

// item_properties-style file: timestamp,itemid,property,value; rows whose
// property column equals "categoryid" assign a category to the item.
std::map<std::string, std::vector<std::string>> load_item_categories(
    const std::string& path, char delimiter = ',');

// Keeps each item's deepest category node; equal depths tie-break to the
// lexicographically smallest node id. Throws DataError on a cycle.
std::map<std::string, std::string> resolve_lowest_category(
    const CategoryTree& tree,
    const std::map<std::string, std::vector<std::string>>& item_categories);

void apply_categories(std::vector<BehaviorRecord>& records,
                      const std::map<std::string, std::string>& item_category);

// Removes users/items below the thresholds until a fixed point (or once if
// iterate=false), then drops users without any target-type event.
std::vector<BehaviorRecord> filter_dataset(const std::vector<BehaviorRecord>& records,
                                           std::size_t min_user_events,
                                           std::size_t min_item_events,
                                           const std::string& target_behavior,
                                           bool iterate = true);

// Time-interval buckets: [0,60,300,1800,3600,14400,86400,604800,2592000,inf)
// map to 0..8; the final event of a sequence uses the terminal bucket.
constexpr std::size_t kNumBuckets = 10;
constexpr std::size_t kTerminalBucket = 9;
std::size_t bucketize_interval(long long delta_seconds);

struct Event {
  std::size_t item = 0;
  std::size_t category = 0;
  std::size_t behavior = 0;
  std::size_t bucket = kTerminalBucket;
  long long timestamp = 0;
};

struct UserSequence {
  std::size_t user = 0;
  std::vector<Event> events;
  std::vector<std::size_t> target_positions;
};

void recompute_target_positions(UserSequence& seq, std::size_t target_behavior);
void recompute_buckets(UserSequence& seq);

// Keeps the most recent max_len events per sequence; sequences left without a
// target event are dropped.
std::vector<UserSequence> truncate_sequences(std::vector<UserSequence> sequences,
                                             std::size_t target_behavior,
                                             std::size_t max_len = 20);

struct EvalTarget {
  std::size_t item = 0;
  std::size_t category = 0;
  bool present = false;
};

struct DatasetSplit {
  std::vector<UserSequence> train;                   // one per kept user
  std::vector<EvalTarget> test;                      // aligned with train
  std::vector<EvalTarget> validation;                // aligned with train
  std::vector<std::vector<std::size_t>> negatives;   // aligned; empty until sampled
  std::vector<std::size_t> excluded_users;           // too few negative candidates
};

struct ProcessedDataset {
  Vocab users, items, categories, behaviors;
  std::size_t target_behavior = 0;
  std::size_t max_len = 20;
  DatasetSplit split;
};

// Encodes filtered records into per-user index sequences. Records must be
// sorted by (user, timestamp, input order) as parse_events leaves them.
ProcessedDataset build_sequences(const std::vector<BehaviorRecord>& records,
                                 const std::string& target_behavior,
                                 std::size_t max_len = 20);

// Leave-one-out: test = last target event, validation = second-to-last; both
// removed; remaining training events with the test item deleted; then
// truncation to max_len. Users with a single target get a test entry only.
DatasetSplit split_leave_one_out(std::vector<UserSequence> sequences,
                                 std::size_t target_behavior, std::size_t max_len);

// n distinct never-interacted items, uniform without replacement,
// deterministic in (seed, user index).
std::vector<std::size_t> sample_negatives(const std::vector<bool>& interacted,
                                          std::size_t n_items, std::size_t user,
                                          std::size_t n, std::uint64_t seed);

// Fills split.negatives (and excluded_users) for every user with a test
// target.
void sample_all_negatives(ProcessedDataset& ds, std::size_t n, std::uint64_t seed);

// Fraction of behavior_type events that precede, for the same (user, item),
// a later target_type event. nullopt when the type never occurs.
std::optional<double> conversion_rate(const std::vector<BehaviorRecord>& records,
                                      const std::string& behavior_type,
                                      const std::string& target_type);

struct SyntheticSpec {
  std::size_t n_users = 1000;
  std::size_t n_items = 300;
  std::size_t n_categories = 10;
  std::size_t n_behavior_types = 3;  // "buy" plus n-1 support types
  double preference_strength = 1.0;  // Zipf exponent for in-category item choice
  double intent_drift = 0.0;         // prob. a session intent differs from preference
  double noise_fraction = 0.0;       // support events drawn uniformly over the catalog
  std::size_t min_buys = 4;
  std::size_t max_buys = 6;
  std::size_t min_support_per_buy = 2;
  std::size_t max_support_per_buy = 4;
  std::uint64_t seed = 1;
};

struct SyntheticResult {
  std::vector<BehaviorRecord> records;
  std::size_t noise_events = 0;
  std::size_t support_events = 0;
};

// Planted-structure generator: buys follow a per-user preferred category,
// support events follow session intents, a noise fraction is uniform.
SyntheticResult generate_synthetic(const SyntheticSpec& spec);

struct Batch {
  std::vector<std::size_t> seq_indices;  // into split.train
  std::size_t rows = 0;
  std::size_t max_len = 0;
  // rows x max_len, row-major, index-0 padded
  std::vector<std::size_t> items, categories, behaviors, buckets;
  std::vector<bool> event_mask;
  std::vector<bool> target_mask;
};

// Seeded per-epoch shuffle over training sequences.
std::vector<Batch> make_batches(const DatasetSplit& split, std::size_t batch_size,
                                std::uint64_t seed, std::size_t epoch);

void save_dataset(const std::string& dir, const ProcessedDataset& ds);
ProcessedDataset load_dataset(const std::string& dir);

struct DatasetStats {
  std::size_t n_users = 0, n_items = 0, n_categories = 0;
  std::map<std::string, std::size_t> behavior_counts;
  std::map<std::string, std::optional<double>> conversion_rates;
};

DatasetStats compute_stats(const std::vector<BehaviorRecord>& records,
                           const std::string& target_behavior);

}  // namespace maint
