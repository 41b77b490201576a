#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "maint/config.hpp"
#include "maint/data.hpp"
#include "maint/evaluation.hpp"
#include "maint/model.hpp"
#include "maint/training.hpp"

namespace fs = std::filesystem;
using namespace maint;

namespace {

// exit 2: the user gave us something unusable; exit 1: we failed internally
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require_file(const std::string& path) {
  if (!fs::exists(path)) throw UsageError("no such file: " + path);
}

std::string default_out_dir() {
  const char* env = std::getenv("MAINT_RUN_DIR");
  return env && *env ? env : "run";
}

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ',')) out.push_back(part);
  return out;
}

FormatSpec preset_for(const std::string& name) {
  if (name == "taobao") return FormatSpec::taobao();
  if (name == "retailrocket") return FormatSpec::retailrocket();
  if (name == "generic") return FormatSpec::generic();
  throw UsageError("unknown format '" + name + "' (valid: taobao, retailrocket, generic)");
}

RunConfig load_run_config(const std::string& config_path,
                          const std::vector<std::string>& overrides) {
  RunConfig cfg;
  if (!config_path.empty()) {
    require_file(config_path);
    cfg.load_file(config_path);
  }
  for (const std::string& o : overrides) cfg.apply_override(o);
  return cfg;
}

void fill_sizes(ModelConfig& cfg, const ProcessedDataset& ds) {
  cfg.n_items = ds.items.size();
  cfg.n_categories = ds.categories.size();
  cfg.n_behaviors = ds.behaviors.size();
}

std::size_t find_user(const ProcessedDataset& ds, const std::string& user_id) {
  auto idx = ds.users.lookup(user_id);
  if (!idx) throw UsageError("unknown user: " + user_id);
  for (std::size_t u = 0; u < ds.split.train.size(); ++u)
    if (ds.split.train[u].user == *idx) return u;
  throw UsageError("user " + user_id + " has no sequence in this dataset");
}

// Further truncation for history-length sweeps; the stored split is the cap.
void limit_history(DatasetSplit& split, std::size_t max_len, std::size_t target) {
  for (UserSequence& seq : split.train) {
    if (seq.events.size() > max_len)
      seq.events.erase(seq.events.begin(),
                       seq.events.end() - static_cast<std::ptrdiff_t>(max_len));
    recompute_target_positions(seq, target);
  }
}

std::string stats_text(const DatasetStats& stats, const std::string& target) {
  std::ostringstream os;
  os << "users: " << stats.n_users << "\n";
  os << "items: " << stats.n_items << "\n";
  os << "categories: " << stats.n_categories << "\n";
  os << "behavior counts:\n";
  for (const auto& [behavior, count] : stats.behavior_counts)
    os << "  " << behavior << ": " << count << "\n";
  os << "conversion rates (toward '" << target << "'):\n";
  for (const auto& [behavior, rate] : stats.conversion_rates) {
    if (behavior == target) continue;
    os << "  " << behavior << ": ";
    if (rate)
      os << std::fixed << std::setprecision(2) << *rate << std::defaultfloat;
    else
      os << "undefined";
    os << "\n";
  }
  return os.str();
}

struct TrainArtifacts {
  FitResult fit_result;
  std::unique_ptr<Model> model;
};

TrainArtifacts run_training(const ProcessedDataset& ds, const RunConfig& cfg) {
  ModelConfig mc = cfg.model;
  fill_sizes(mc, ds);
  TrainArtifacts out;
  out.model = std::make_unique<Model>(mc, cfg.seed);
  DatasetSplit split = ds.split;
  if (cfg.max_len < ds.max_len) limit_history(split, cfg.max_len, ds.target_behavior);
  out.fit_result = fit(*out.model, split, cfg.train);
  return out;
}

std::string loss_curve_csv(const FitResult& r) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "epoch,train_loss,validation_hr10\n";
  for (const auto& h : r.history)
    os << h.epoch << "," << h.train_loss << "," << h.validation_hr10 << "\n";
  return os.str();
}

// ---------------------------------------------------------------- commands

int cmd_preprocess(const std::string& input, const std::string& format,
                   const std::string& out_dir, const std::string& category_tree,
                   const std::string& item_properties, const std::string& target,
                   long min_user, long min_item, std::size_t max_len,
                   std::size_t negatives, std::uint64_t seed) {
  require_file(input);
  FormatSpec spec = preset_for(format);
  if (!target.empty()) spec.target_behavior = target;
  if (min_user >= 0) spec.min_user_events = static_cast<std::size_t>(min_user);
  if (min_item >= 0) spec.min_item_events = static_cast<std::size_t>(min_item);

  ParseResult parsed = parse_events(input, spec);
  if (!category_tree.empty() || !item_properties.empty()) {
    if (category_tree.empty() || item_properties.empty())
      throw UsageError("--category-tree and --item-properties must be given together");
    require_file(category_tree);
    require_file(item_properties);
    apply_categories(parsed.records,
                     resolve_lowest_category(load_category_tree(category_tree),
                                             load_item_categories(item_properties)));
  }

  DatasetStats pre = compute_stats(parsed.records, spec.target_behavior);
  std::vector<BehaviorRecord> filtered =
      filter_dataset(parsed.records, spec.min_user_events, spec.min_item_events,
                     spec.target_behavior);
  if (filtered.empty())
    throw UsageError("no records survive filtering (thresholds: user >= " +
                     std::to_string(spec.min_user_events) + ", item >= " +
                     std::to_string(spec.min_item_events) + ")");

  ProcessedDataset ds = build_sequences(filtered, spec.target_behavior, max_len);
  sample_all_negatives(ds, negatives, seed);
  save_dataset(out_dir, ds);

  std::ostringstream summary;
  summary << "input: " << input << "\n";
  summary << "malformed lines skipped: " << parsed.malformed_lines << "\n";
  summary << "== pre-filter ==\n" << stats_text(pre, spec.target_behavior);
  summary << "== post-filter ==\n"
          << stats_text(compute_stats(filtered, spec.target_behavior),
                        spec.target_behavior);
  summary << "sequences written: " << ds.split.train.size() << "\n";
  summary << "users excluded (too few negative candidates): "
          << ds.split.excluded_users.size() << "\n";
  write_text(fs::path(out_dir) / "stats.txt", summary.str());
  std::cout << summary.str() << "dataset written to " << out_dir << "\n";
  return 0;
}

int cmd_stats(const std::string& data, const std::string& format,
              const std::string& target) {
  require_file(data);
  FormatSpec spec = preset_for(format);
  if (!target.empty()) spec.target_behavior = target;
  ParseResult parsed = parse_events(data, spec);
  std::cout << stats_text(compute_stats(parsed.records, spec.target_behavior),
                          spec.target_behavior);
  return 0;
}

int cmd_synth(const std::string& out_dir, const SyntheticSpec& spec,
              std::size_t max_len, std::size_t negatives) {
  SyntheticResult result = generate_synthetic(spec);
  ProcessedDataset ds = build_sequences(result.records, "buy", max_len);
  sample_all_negatives(ds, negatives, spec.seed);
  save_dataset(out_dir, ds);
  std::cout << "events: " << result.records.size() << " (support " << result.support_events
            << ", noise " << result.noise_events << ")\n";
  std::cout << "sequences: " << ds.split.train.size() << "\n";
  std::cout << "dataset written to " << out_dir << "\n";
  return 0;
}

int cmd_train(const std::string& data, const std::string& config_path,
              const std::vector<std::string>& overrides, const std::string& out_dir) {
  ProcessedDataset ds = load_dataset(data);
  RunConfig cfg = load_run_config(config_path, overrides);
  fs::create_directories(out_dir);
  write_text(fs::path(out_dir) / "config.txt", cfg.echo());
  std::cout << "effective configuration:\n" << cfg.echo();

  TrainArtifacts art = run_training(ds, cfg);
  save_checkpoint((fs::path(out_dir) / "checkpoint.bin").string(), art.fit_result.best);
  write_text(fs::path(out_dir) / "loss_curve.csv", loss_curve_csv(art.fit_result));

  std::cout << "epochs run: " << art.fit_result.history.size() << "\n";
  std::cout << "best epoch: " << art.fit_result.best_epoch << "\n";
  std::cout << "best validation HR@10: " << art.fit_result.best_hr10 << "\n";
  std::cout << "checkpoint written to " << out_dir << "/checkpoint.bin\n";
  return 0;
}

Model load_model_for(const ProcessedDataset& ds, const std::string& checkpoint_path,
                     Checkpoint* out_ckpt = nullptr) {
  require_file(checkpoint_path);
  Checkpoint ckpt = load_checkpoint(checkpoint_path);
  if (ckpt.model_config.n_items != ds.items.size() ||
      ckpt.model_config.n_categories != ds.categories.size() ||
      ckpt.model_config.n_behaviors != ds.behaviors.size())
    throw UsageError(
        "checkpoint/dataset mismatch: checkpoint expects vocab sizes (items " +
        std::to_string(ckpt.model_config.n_items) + ", categories " +
        std::to_string(ckpt.model_config.n_categories) + ", behaviors " +
        std::to_string(ckpt.model_config.n_behaviors) + "), dataset has (" +
        std::to_string(ds.items.size()) + ", " + std::to_string(ds.categories.size()) +
        ", " + std::to_string(ds.behaviors.size()) + ")");
  Model model(ckpt.model_config, 0);
  restore(model, ckpt);
  if (out_ckpt) *out_ckpt = std::move(ckpt);
  return model;
}

int cmd_evaluate(const std::string& data, const std::string& checkpoint_path,
                 const std::string& k_list, std::size_t n_seeds, std::uint64_t seed,
                 std::size_t negatives, const std::string& out_dir) {
  ProcessedDataset ds = load_dataset(data);
  Model model = load_model_for(ds, checkpoint_path);

  std::vector<std::size_t> ks;
  for (const std::string& k : split_csv(k_list)) {
    try {
      ks.push_back(std::stoul(k));
    } catch (const std::exception&) {
      throw UsageError("--K values must be integers, got '" + k + "'");
    }
  }
  if (ks.empty()) throw UsageError("--K must name at least one cutoff");
  if (n_seeds < 1) throw UsageError("--seeds must be at least 1");

  std::ostringstream text, csv;
  csv << std::setprecision(17) << "metric,K,seed,value\n";
  std::map<std::pair<std::string, std::size_t>, std::vector<double>> series;
  for (std::size_t s = 0; s < n_seeds; ++s) {
    sample_all_negatives(ds, negatives, seed + s);
    EvalReport report = evaluate(model, ds.split, ks);
    text << "== seed " << seed + s << " ==\n" << format_report(report);
    for (std::size_t i = 0; i < ks.size(); ++i) {
      csv << "HR," << ks[i] << "," << seed + s << "," << report.hr[i] << "\n";
      csv << "NDCG," << ks[i] << "," << seed + s << "," << report.ndcg[i] << "\n";
      series[{"HR", ks[i]}].push_back(report.hr[i]);
      series[{"NDCG", ks[i]}].push_back(report.ndcg[i]);
    }
  }
  text << "== aggregate over " << n_seeds << " seed(s) ==\n";
  for (const auto& [key, values] : series) {
    SeedAggregate agg = aggregate(values);
    text << key.first << "@" << key.second << ": mean " << agg.mean << " stddev "
         << agg.stddev << "\n";
  }
  std::cout << text.str();
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_text(fs::path(out_dir) / "report.txt", text.str());
    write_text(fs::path(out_dir) / "report.csv", csv.str());
  }
  return 0;
}

std::string ablation_label(Variant v) {
  switch (v) {
    case Variant::full: return "MAINT";
    case Variant::no_projection: return "MAINT-MP";
    case Variant::vanilla_lstm: return "MAINT-BLSTM";
    case Variant::vanilla_attention: return "MAINT-RAtt";
    case Variant::concat_fusion: return "MAINT-MGFus";
  }
  return "?";
}

int cmd_ablate(const std::string& data, const std::string& variants_arg,
               std::size_t n_seeds, const std::string& config_path,
               const std::vector<std::string>& overrides, const std::string& out_dir) {
  ProcessedDataset ds = load_dataset(data);
  RunConfig base = load_run_config(config_path, overrides);
  if (n_seeds < 1) throw UsageError("--seeds must be at least 1");

  std::vector<Variant> variants{Variant::full};
  if (!variants_arg.empty())
    for (const std::string& name : split_csv(variants_arg))
      variants.push_back(parse_variant(name));  // ConfigError lists valid names

  struct Row {
    std::string label;
    SeedAggregate hr, ndcg;
    double p_hr = -1.0, p_ndcg = -1.0;  // -1: t-test not run
    bool sig_hr = false, sig_ndcg = false;
  };
  std::vector<Row> rows;
  for (Variant v : variants) {
    RunConfig cfg = base;
    cfg.model.variant = v;
    std::vector<double> hr10s, ndcg10s;
    for (std::size_t s = 0; s < n_seeds; ++s) {
      cfg.seed = base.seed + s;
      cfg.train.seed = cfg.seed;
      TrainArtifacts art = run_training(ds, cfg);
      EvalReport report = evaluate(*art.model, ds.split, {10});
      hr10s.push_back(report.hr_at(10));
      ndcg10s.push_back(report.ndcg_at(10));
    }
    Row row;
    row.label = ablation_label(v);
    row.hr = aggregate(hr10s);
    row.ndcg = aggregate(ndcg10s);
    rows.push_back(std::move(row));
  }
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (n_seeds < 2) break;
    TTestResult th = seed_compare(rows[i].hr.values, rows[0].hr.values);
    TTestResult tn = seed_compare(rows[i].ndcg.values, rows[0].ndcg.values);
    rows[i].p_hr = th.p_value;
    rows[i].sig_hr = th.significant;
    rows[i].p_ndcg = tn.p_value;
    rows[i].sig_ndcg = tn.significant;
  }

  std::ostringstream text, csv;
  csv << std::setprecision(17) << "model,HR@10,NDCG@10,p_HR,p_NDCG,significant\n";
  text << std::left << std::setw(14) << "model" << std::right << std::setw(10) << "HR@10"
       << std::setw(10) << "NDCG@10" << std::setw(10) << "p_HR" << std::setw(10)
       << "p_NDCG" << std::setw(6) << "sig" << "\n";
  for (const Row& r : rows) {
    const bool has_p = r.p_hr >= 0.0;
    csv << r.label << "," << r.hr.mean << "," << r.ndcg.mean << ",";
    if (has_p)
      csv << r.p_hr << "," << r.p_ndcg;
    else
      csv << ",";
    csv << "," << ((r.sig_hr || r.sig_ndcg) ? 1 : 0) << "\n";
    std::ostringstream ph, pn;
    if (has_p) {
      ph << std::fixed << std::setprecision(4) << r.p_hr;
      pn << std::fixed << std::setprecision(4) << r.p_ndcg;
    } else {
      ph << "-";
      pn << "-";
    }
    text << std::left << std::setw(14) << r.label << std::right << std::fixed
         << std::setprecision(4) << std::setw(10) << r.hr.mean << std::setw(10)
         << r.ndcg.mean << std::defaultfloat << std::setw(10) << ph.str()
         << std::setw(10) << pn.str() << std::setw(6)
         << ((r.sig_hr || r.sig_ndcg) ? "*" : "") << "\n";
  }
  std::cout << text.str();
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_text(fs::path(out_dir) / "ablation.txt", text.str());
    write_text(fs::path(out_dir) / "ablation.csv", csv.str());
  }
  return 0;
}

int cmd_sweep(const std::string& data, const std::string& param,
              const std::string& values_arg, const std::string& config_path,
              const std::vector<std::string>& overrides, const std::string& out_dir) {
  ProcessedDataset ds = load_dataset(data);
  RunConfig base = load_run_config(config_path, overrides);
  const std::vector<std::string> supported{"J", "d", "gamma", "max_len"};
  if (std::find(supported.begin(), supported.end(), param) == supported.end())
    throw UsageError("unsupported sweep parameter '" + param +
                     "' (valid: J, d, gamma, max_len)");

  std::vector<std::string> values = split_csv(values_arg);
  if (values.empty()) throw UsageError("--values must name at least one value");

  std::ostringstream text, csv;
  csv << std::setprecision(17) << "param,value,HR@2,HR@6,HR@10,NDCG@2,NDCG@6,NDCG@10\n";
  text << std::left << std::setw(10) << param << std::right << std::setw(9) << "HR@2"
       << std::setw(9) << "HR@6" << std::setw(9) << "HR@10" << std::setw(9) << "N@2"
       << std::setw(9) << "N@6" << std::setw(9) << "N@10" << "\n";
  for (const std::string& value : values) {
    RunConfig cfg = base;
    try {
      if (param == "J") cfg.model.aspects = std::stoul(value);
      else if (param == "d") cfg.model.d = std::stoul(value);
      else if (param == "gamma") cfg.model.gamma = std::stod(value);
      else cfg.max_len = std::stoul(value);
    } catch (const std::exception&) {
      throw UsageError("--values entry '" + value + "' is not numeric");
    }
    if (param == "max_len" && cfg.max_len > ds.max_len)
      throw UsageError("max_len " + value + " exceeds the dataset's stored history cap " +
                       std::to_string(ds.max_len) + "; re-run preprocess/synth");
    TrainArtifacts art = run_training(ds, cfg);
    EvalReport r = evaluate(*art.model, ds.split);
    csv << param << "," << value;
    for (double h : r.hr) csv << "," << h;
    for (double n : r.ndcg) csv << "," << n;
    csv << "\n";
    text << std::left << std::setw(10) << value << std::right << std::fixed
         << std::setprecision(4);
    for (double h : r.hr) text << std::setw(9) << h;
    for (double n : r.ndcg) text << std::setw(9) << n;
    text << std::defaultfloat << "\n";
  }
  std::cout << text.str();
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_text(fs::path(out_dir) / "sweep.txt", text.str());
    write_text(fs::path(out_dir) / "sweep.csv", csv.str());
  }
  return 0;
}

int cmd_recommend(const std::string& checkpoint_path, const std::string& data,
                  const std::string& user, std::size_t k) {
  ProcessedDataset ds = load_dataset(data);
  Model model = load_model_for(ds, checkpoint_path);
  const std::size_t u = find_user(ds, user);
  const UserSequence& seq = ds.split.train[u];

  Tape tape;
  ForwardTrace trace = model.forward_full(tape, seq);
  const Tensor& probs = tape.value(trace.item_probs);

  std::vector<bool> interacted(ds.items.size(), false);
  for (const Event& e : seq.events) interacted[e.item] = true;

  std::vector<std::pair<double, std::size_t>> scored;
  for (std::size_t i = 1; i < ds.items.size(); ++i)
    if (!interacted[i]) scored.emplace_back(probs[i], i);
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;  // ties: ascending item index
  });
  if (scored.size() > k) scored.resize(k);
  std::cout << "rank,item,score\n" << std::setprecision(17);
  for (std::size_t r = 0; r < scored.size(); ++r)
    std::cout << r + 1 << "," << ds.items.decode(scored[r].second) << ","
              << scored[r].first << "\n";
  return 0;
}

int cmd_explain(const std::string& checkpoint_path, const std::string& data,
                const std::string& user, const std::string& out_path) {
  ProcessedDataset ds = load_dataset(data);
  Model model = load_model_for(ds, checkpoint_path);
  const std::size_t u = find_user(ds, user);
  const UserSequence& seq = ds.split.train[u];

  Tape tape;
  ForwardTrace trace = model.forward_full(tape, seq);
  const std::size_t J = trace.alpha.size();

  std::ostringstream os;
  os << std::setprecision(17);
  os << "position,item,category,behavior,bucket";
  for (std::size_t j = 0; j < J; ++j) os << ",alpha_" << j + 1;
  os << "\n";
  for (std::size_t n = 0; n < seq.events.size(); ++n) {
    const Event& e = seq.events[n];
    os << n << "," << ds.items.decode(e.item) << "," << ds.categories.decode(e.category)
       << "," << ds.behaviors.decode(e.behavior) << "," << e.bucket;
    for (std::size_t j = 0; j < J; ++j) os << "," << tape.value(trace.alpha[j])[n];
    os << "\n";
  }
  os << "aspect,beta\n";
  for (std::size_t j = 0; j < J; ++j) {
    os << j + 1 << ",";
    if (j < trace.gate.size())
      os << tape.value(trace.gate[j]).item();
    else
      os << "n/a";  // concat fusion has no gates
    os << "\n";
  }
  write_text(out_path, os.str());
  std::cout << "explanation written to " << out_path << "\n";
  return 0;
}

int cmd_gradcheck(const std::string& config_path,
                  const std::vector<std::string>& overrides) {
  RunConfig cfg = load_run_config(config_path, overrides);
  ModelConfig mc = cfg.model;
  if (config_path.empty() && overrides.empty()) {
    mc.d = 4;
    mc.aspects = 2;
  }
  mc.n_items = 12;
  mc.n_categories = 4;
  mc.n_behaviors = 3;
  mc.dropout_rate = 0.0;  // forced off: the check must be deterministic

  Model model(mc, cfg.seed);
  UserSequence seq;
  seq.user = 1;
  const std::size_t items[] = {5, 3, 7, 2, 9, 4};
  const std::size_t cats[] = {1, 2, 3, 1, 2, 3};
  const std::size_t behaviors[] = {2, 1, 2, 1, 2, 1};
  for (std::size_t n = 0; n < 6; ++n)
    seq.events.push_back({items[n], cats[n], behaviors[n], n % 10,
                          static_cast<long long>(n) * 60});
  recompute_target_positions(seq, 1);

  std::vector<GradCheckGroup> groups = gradient_check(model, {seq});
  std::vector<std::string> offenders;
  std::cout << std::left << std::setw(28) << "parameter" << "worst_rel_err\n";
  for (const GradCheckGroup& g : groups) {
    std::cout << std::left << std::setw(28) << g.name << std::scientific
              << std::setprecision(3) << g.worst_rel_err << std::defaultfloat << "\n";
    if (g.worst_rel_err >= 1e-4) offenders.push_back(g.name);
  }
  if (!offenders.empty()) {
    std::cout << "FAIL:";
    for (const std::string& name : offenders) std::cout << " " << name;
    std::cout << "\n";
    return 1;
  }
  std::cout << "PASS: all " << groups.size() << " parameter groups under 1e-4\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-aspect interest network for multi-behavioral sequential recommendation"};
  app.require_subcommand(1);

  // preprocess
  auto* preprocess = app.add_subcommand("preprocess", "Ingest a raw event log");
  std::string pp_input, pp_format = "generic", pp_out, pp_tree, pp_props, pp_target;
  long pp_min_user = -1, pp_min_item = -1;
  std::size_t pp_max_len = 20, pp_negatives = 100;
  std::uint64_t pp_seed = 1;
  preprocess->add_option("--input", pp_input, "Raw event log")->required();
  preprocess->add_option("--format", pp_format, "taobao|retailrocket|generic");
  preprocess->add_option("--out", pp_out, "Output dataset directory")->required();
  preprocess->add_option("--category-tree", pp_tree, "Category hierarchy file");
  preprocess->add_option("--item-properties", pp_props, "Item property file");
  preprocess->add_option("--target", pp_target, "Target behavior (default: preset)");
  preprocess->add_option("--min-user", pp_min_user, "Min events per user");
  preprocess->add_option("--min-item", pp_min_item, "Min events per item");
  preprocess->add_option("--max-len", pp_max_len, "History cap per user");
  preprocess->add_option("--negatives", pp_negatives, "Negatives per user");
  preprocess->add_option("--seed", pp_seed, "Negative-sampling seed");

  // stats
  auto* stats = app.add_subcommand("stats", "Behavior counts and conversion rates");
  std::string st_data, st_format = "generic", st_target;
  stats->add_option("--data", st_data, "Raw event log")->required();
  stats->add_option("--format", st_format, "taobao|retailrocket|generic");
  stats->add_option("--target", st_target, "Target behavior (default: preset)");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a planted-structure dataset");
  SyntheticSpec sy_spec;
  std::string sy_out;
  std::size_t sy_max_len = 20, sy_negatives = 100;
  synth->add_option("--out", sy_out, "Output dataset directory")->required();
  synth->add_option("--users", sy_spec.n_users, "Number of users");
  synth->add_option("--items", sy_spec.n_items, "Catalog size");
  synth->add_option("--categories", sy_spec.n_categories, "Number of categories");
  synth->add_option("--behaviors", sy_spec.n_behavior_types, "Behavior types");
  synth->add_option("--noise", sy_spec.noise_fraction, "Uniform-noise fraction");
  synth->add_option("--drift", sy_spec.intent_drift, "Session intent drift");
  synth->add_option("--zipf", sy_spec.preference_strength, "In-category Zipf exponent");
  synth->add_option("--seed", sy_spec.seed, "Generator seed");
  synth->add_option("--max-len", sy_max_len, "History cap per user");
  synth->add_option("--negatives", sy_negatives, "Negatives per user");

  // train
  auto* train = app.add_subcommand("train", "Train a model");
  std::string tr_data, tr_config, tr_out = default_out_dir();
  std::vector<std::string> tr_set;
  train->add_option("--data", tr_data, "Dataset directory")->required();
  train->add_option("--config", tr_config, "key=value config file");
  train->add_option("--set", tr_set, "Config overrides (key=value)");
  train->add_option("--out", tr_out, "Run directory");

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "Multi-seed ranking evaluation");
  std::string ev_data, ev_ckpt, ev_ks = "2,6,10", ev_out;
  std::size_t ev_seeds = 5, ev_negatives = 100;
  std::uint64_t ev_seed = 1;
  eval->add_option("--data", ev_data, "Dataset directory")->required();
  eval->add_option("--checkpoint", ev_ckpt, "Checkpoint file")->required();
  eval->add_option("--K", ev_ks, "Comma-separated cutoffs");
  eval->add_option("--seeds", ev_seeds, "Number of seeds");
  eval->add_option("--seed", ev_seed, "Base seed");
  eval->add_option("--negatives", ev_negatives, "Negatives per user");
  eval->add_option("--out", ev_out, "Report directory");

  // ablate
  auto* ablate = app.add_subcommand("ablate", "Variant comparison with t-tests");
  std::string ab_data, ab_variants = "mp,blstm,ratt,mgfus", ab_config, ab_out;
  std::size_t ab_seeds = 3;
  std::vector<std::string> ab_set;
  ablate->add_option("--data", ab_data, "Dataset directory")->required();
  ablate->add_option("--variants", ab_variants, "mp,blstm,ratt,mgfus subset");
  ablate->add_option("--seeds", ab_seeds, "Seeds per variant");
  ablate->add_option("--config", ab_config, "key=value config file");
  ablate->add_option("--set", ab_set, "Config overrides (key=value)");
  ablate->add_option("--out", ab_out, "Report directory");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Hyper-parameter sweep");
  std::string sw_data, sw_param, sw_values, sw_config, sw_out;
  std::vector<std::string> sw_set;
  sweep->add_option("--data", sw_data, "Dataset directory")->required();
  sweep->add_option("--param", sw_param, "J|d|gamma|max_len")->required();
  sweep->add_option("--values", sw_values, "Comma-separated values")->required();
  sweep->add_option("--config", sw_config, "key=value config file");
  sweep->add_option("--set", sw_set, "Config overrides (key=value)");
  sweep->add_option("--out", sw_out, "Report directory");

  // recommend
  auto* recommend = app.add_subcommand("recommend", "Top-k items for one user");
  std::string rc_ckpt, rc_data, rc_user;
  std::size_t rc_k = 10;
  recommend->add_option("--checkpoint", rc_ckpt, "Checkpoint file")->required();
  recommend->add_option("--data", rc_data, "Dataset directory")->required();
  recommend->add_option("--user", rc_user, "User id")->required();
  recommend->add_option("--k", rc_k, "List length");

  // explain
  auto* explain = app.add_subcommand("explain", "Attention and gate dump for one user");
  std::string ex_ckpt, ex_data, ex_user, ex_out;
  explain->add_option("--checkpoint", ex_ckpt, "Checkpoint file")->required();
  explain->add_option("--data", ex_data, "Dataset directory")->required();
  explain->add_option("--user", ex_user, "User id")->required();
  explain->add_option("--out", ex_out, "Output file")->required();

  // gradcheck
  auto* gradcheck = app.add_subcommand("gradcheck", "End-to-end gradient check");
  std::string gc_config;
  std::vector<std::string> gc_set;
  gradcheck->add_option("--config", gc_config, "key=value config file");
  gradcheck->add_option("--set", gc_set, "Config overrides (key=value)");

  try {
    app.parse(argc, argv);
    if (*preprocess)
      return cmd_preprocess(pp_input, pp_format, pp_out, pp_tree, pp_props, pp_target,
                            pp_min_user, pp_min_item, pp_max_len, pp_negatives, pp_seed);
    if (*stats) return cmd_stats(st_data, st_format, st_target);
    if (*synth) return cmd_synth(sy_out, sy_spec, sy_max_len, sy_negatives);
    if (*train) return cmd_train(tr_data, tr_config, tr_set, tr_out);
    if (*eval)
      return cmd_evaluate(ev_data, ev_ckpt, ev_ks, ev_seeds, ev_seed, ev_negatives,
                          ev_out);
    if (*ablate) return cmd_ablate(ab_data, ab_variants, ab_seeds, ab_config, ab_set, ab_out);
    if (*sweep) return cmd_sweep(sw_data, sw_param, sw_values, sw_config, sw_set, sw_out);
    if (*recommend) return cmd_recommend(rc_ckpt, rc_data, rc_user, rc_k);
    if (*explain) return cmd_explain(ex_ckpt, ex_data, ex_user, ex_out);
    if (*gradcheck) return cmd_gradcheck(gc_config, gc_set);
    return 2;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
}
