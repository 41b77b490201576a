#include "maint/training.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "maint/finite_diff.hpp"

namespace maint {

void TrainConfig::validate() const {
  if (learning_rate <= 0.0) throw TrainingError("learning_rate must be positive");
  if (batch_size < 1) throw TrainingError("batch_size must be at least 1");
  if (patience < 1) throw TrainingError("patience must be at least 1");
}

std::vector<SupervisionTuple> step_targets(const UserSequence& seq) {
  std::vector<SupervisionTuple> out;
  const auto& pos = seq.target_positions;
  for (std::size_t m = 0; m + 1 < pos.size(); ++m) {
    SupervisionTuple t;
    t.visible_events = pos[m + 1];
    t.visible_targets = m + 1;
    t.label_item = seq.events[pos[m + 1]].item;
    t.label_category = seq.events[pos[m + 1]].category;
    out.push_back(t);
  }
  return out;
}

Tape::Var compute_loss(Model& model, Tape& tape,
                       const std::vector<const UserSequence*>& sequences,
                       bool training, std::mt19937_64& rng) {
  const ModelConfig& cfg = model.config();
  Tape::Var loss = Tape::kNone;
  for (const UserSequence* seq : sequences) {
    for (const SupervisionTuple& t : step_targets(*seq)) {
      ForwardTrace trace = model.forward(tape, *seq, t.visible_events,
                                         t.visible_targets, training, rng);
      Tape::Var term = tape.cross_entropy(trace.item_probs, t.label_item);
      if (cfg.gamma != 0.0)
        term = tape.add(term, tape.affine(tape.cross_entropy(trace.cat_probs,
                                                             t.label_category),
                                          cfg.gamma, 0.0));
      loss = (loss == Tape::kNone) ? term : tape.add(loss, term);
    }
  }
  Tape::Var reg = tape.affine(tape.l2_penalty(model.parameters()), cfg.lambda, 0.0);
  return (loss == Tape::kNone) ? reg : tape.add(loss, reg);
}

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t x = seed * 0x9E3779B97F4A7C15ULL + salt;
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  return x;
}

}  // namespace

EpochStats train_epoch(Model& model, const DatasetSplit& split,
                       const TrainConfig& config, std::size_t epoch) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  std::vector<Batch> batches = make_batches(split, config.batch_size, config.seed, epoch);
  std::mt19937_64 dropout_rng(mix_seed(config.seed, 0xD0u + epoch));
  AdamConfig adam;
  adam.lr = config.learning_rate;

  EpochStats stats;
  stats.epoch = epoch;
  double loss_sum = 0.0;
  for (std::size_t b = 0; b < batches.size(); ++b) {
    Tape tape;
    std::vector<const UserSequence*> seqs;
    for (std::size_t idx : batches[b].seq_indices) {
      seqs.push_back(&split.train[idx]);
      stats.n_tuples += step_targets(split.train[idx]).size();
    }
    Tape::Var loss = compute_loss(model, tape, seqs, true, dropout_rng);
    const double loss_value = tape.value(loss).item();
    if (!std::isfinite(loss_value))
      throw TrainingError("non-finite loss (" + std::to_string(loss_value) +
                          ") in epoch " + std::to_string(epoch) + ", batch " +
                          std::to_string(b));
    model.zero_gradients();
    tape.backward(loss);
    adam_step(model.parameters(), adam);
    loss_sum += loss_value;
    ++stats.n_batches;
  }
  stats.mean_batch_loss = stats.n_batches ? loss_sum / stats.n_batches : 0.0;
  stats.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  stats.tuples_per_second = stats.seconds > 0.0 ? stats.n_tuples / stats.seconds : 0.0;
  return stats;
}

Checkpoint snapshot(Model& model, const TrainConfig& config, std::size_t epoch,
                    const std::vector<double>& validation_history) {
  Checkpoint c;
  c.model_config = model.config();
  c.train_config = config;
  c.epoch = epoch;
  c.validation_history = validation_history;
  for (Parameter* p : model.parameters()) {
    ParamSnapshot s;
    s.name = p->name;
    s.value = p->value;
    s.adam_m = p->adam_m;
    s.adam_v = p->adam_v;
    s.step_count = static_cast<std::uint64_t>(p->step_count);
    c.params.push_back(std::move(s));
  }
  return c;
}

void restore(Model& model, const Checkpoint& ckpt) {
  std::vector<Parameter*> params = model.parameters();
  if (params.size() != ckpt.params.size())
    throw CheckpointError("checkpoint has " + std::to_string(ckpt.params.size()) +
                          " parameters, model expects " + std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const ParamSnapshot& s = ckpt.params[i];
    if (params[i]->name != s.name)
      throw CheckpointError("parameter order mismatch: model has " + params[i]->name +
                            ", checkpoint has " + s.name);
    if (params[i]->value.shape() != s.value.shape())
      throw CheckpointError("shape mismatch for " + s.name);
    params[i]->value = s.value;
    params[i]->adam_m = s.adam_m;
    params[i]->adam_v = s.adam_v;
    params[i]->step_count = static_cast<long>(s.step_count);
    params[i]->zero_grad();
  }
}

namespace {

constexpr char kMagic[8] = {'M', 'A', 'I', 'N', 'T', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

std::string shape_str(const Tensor& t) {
  std::string s;
  for (std::size_t i = 0; i < t.rank(); ++i) {
    if (i) s += "x";
    s += std::to_string(t.dim(i));
  }
  return t.rank() ? s : "scalar";
}

std::vector<std::size_t> parse_shape(const std::string& s) {
  if (s == "scalar") return {};
  std::vector<std::size_t> dims;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, 'x')) dims.push_back(std::stoul(part));
  return dims;
}

std::string config_text(const Checkpoint& c) {
  std::ostringstream os;
  const ModelConfig& m = c.model_config;
  os << "model.d=" << m.d << "\n";
  os << "model.aspects=" << m.aspects << "\n";
  os << "model.gamma=" << m.gamma << "\n";
  os << "model.lambda=" << m.lambda << "\n";
  os << "model.dropout=" << m.dropout_rate << "\n";
  os << "model.n_items=" << m.n_items << "\n";
  os << "model.n_categories=" << m.n_categories << "\n";
  os << "model.n_behaviors=" << m.n_behaviors << "\n";
  os << "model.n_buckets=" << m.n_buckets << "\n";
  os << "model.variant=" << variant_name(m.variant) << "\n";
  os << "model.prefix_masking=" << (m.prefix_masking ? 1 : 0) << "\n";
  const TrainConfig& t = c.train_config;
  os << "train.learning_rate=" << t.learning_rate << "\n";
  os << "train.batch_size=" << t.batch_size << "\n";
  os << "train.max_epochs=" << t.max_epochs << "\n";
  os << "train.patience=" << t.patience << "\n";
  os << "train.seed=" << t.seed << "\n";
  os << "epoch=" << c.epoch << "\n";
  os << "validation_history=";
  for (std::size_t i = 0; i < c.validation_history.size(); ++i) {
    if (i) os << ",";
    os << c.validation_history[i];
  }
  os << "\n";
  return os.str();
}

void apply_config_line(Checkpoint& c, const std::string& key, const std::string& val) {
  ModelConfig& m = c.model_config;
  TrainConfig& t = c.train_config;
  if (key == "model.d") m.d = std::stoul(val);
  else if (key == "model.aspects") m.aspects = std::stoul(val);
  else if (key == "model.gamma") m.gamma = std::stod(val);
  else if (key == "model.lambda") m.lambda = std::stod(val);
  else if (key == "model.dropout") m.dropout_rate = std::stod(val);
  else if (key == "model.n_items") m.n_items = std::stoul(val);
  else if (key == "model.n_categories") m.n_categories = std::stoul(val);
  else if (key == "model.n_behaviors") m.n_behaviors = std::stoul(val);
  else if (key == "model.n_buckets") m.n_buckets = std::stoul(val);
  else if (key == "model.variant") m.variant = parse_variant(val);
  else if (key == "model.prefix_masking") m.prefix_masking = val != "0";
  else if (key == "train.learning_rate") t.learning_rate = std::stod(val);
  else if (key == "train.batch_size") t.batch_size = std::stoul(val);
  else if (key == "train.max_epochs") t.max_epochs = std::stoul(val);
  else if (key == "train.patience") t.patience = std::stoul(val);
  else if (key == "train.seed") t.seed = std::stoull(val);
  else if (key == "epoch") c.epoch = std::stoul(val);
  else if (key == "validation_history") {
    std::stringstream ss(val);
    std::string part;
    while (std::getline(ss, part, ',')) c.validation_history.push_back(std::stod(part));
  } else {
    throw CheckpointError("unknown checkpoint config key: " + key);
  }
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ostringstream manifest;
  manifest << config_text(ckpt);
  std::uint64_t offset = 0;  // in bytes from the payload start
  for (const ParamSnapshot& s : ckpt.params) {
    manifest << "param=" << s.name << " " << shape_str(s.value) << " " << offset << " "
             << s.step_count << "\n";
    offset += 3 * s.value.size() * sizeof(double);  // value, adam_m, adam_v
  }
  const std::string mtext = manifest.str();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open " + path + " for writing");
  out.write(kMagic, sizeof(kMagic));
  std::uint32_t version = kVersion;
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  std::uint64_t msize = mtext.size();
  out.write(reinterpret_cast<const char*>(&msize), sizeof(msize));
  out.write(mtext.data(), static_cast<std::streamsize>(mtext.size()));
  for (const ParamSnapshot& s : ckpt.params)
    for (const Tensor* t : {&s.value, &s.adam_m, &s.adam_v})
      out.write(reinterpret_cast<const char*>(t->data()),
                static_cast<std::streamsize>(t->size() * sizeof(double)));
  if (!out) throw CheckpointError("write failed for " + path);
  out.close();

  std::ofstream meta(path + ".meta", std::ios::trunc);
  meta << config_text(ckpt);
  for (const ParamSnapshot& s : ckpt.params)
    meta << "param=" << s.name << " " << shape_str(s.value) << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw CheckpointError(path + ": bad magic bytes");
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (!in || version != kVersion)
    throw CheckpointError(path + ": unsupported version " + std::to_string(version));
  std::uint64_t msize = 0;
  in.read(reinterpret_cast<char*>(&msize), sizeof(msize));
  if (!in) throw CheckpointError(path + ": truncated header");
  std::string mtext(msize, '\0');
  in.read(mtext.data(), static_cast<std::streamsize>(msize));
  if (!in) throw CheckpointError(path + ": truncated manifest");

  Checkpoint c;
  struct Entry {
    std::string name;
    std::vector<std::size_t> dims;
    std::uint64_t offset = 0, step = 0;
  };
  std::vector<Entry> entries;
  std::istringstream ms(mtext);
  std::string line;
  while (std::getline(ms, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw CheckpointError("bad manifest line: " + line);
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    if (key == "param") {
      std::istringstream ps(val);
      Entry e;
      std::string shape;
      if (!(ps >> e.name >> shape >> e.offset >> e.step))
        throw CheckpointError("bad param manifest line: " + line);
      e.dims = parse_shape(shape);
      entries.push_back(std::move(e));
    } else {
      apply_config_line(c, key, val);
    }
  }

  for (const Entry& e : entries) {
    ParamSnapshot s;
    s.name = e.name;
    s.step_count = e.step;
    for (Tensor* t : {&s.value, &s.adam_m, &s.adam_v}) {
      *t = Tensor(e.dims);
      in.read(reinterpret_cast<char*>(t->data()),
              static_cast<std::streamsize>(t->size() * sizeof(double)));
      if (!in) throw CheckpointError(path + ": truncated payload at " + e.name);
    }
    c.params.push_back(std::move(s));
  }
  return c;
}

FitResult fit(Model& model, const DatasetSplit& split, const TrainConfig& config) {
  config.validate();
  bool has_validation = false;
  for (std::size_t u = 0; u < split.train.size(); ++u)
    if (split.validation[u].present && !split.negatives[u].empty()) has_validation = true;
  if (!has_validation)
    throw TrainingError("fit: no validation targets with sampled negatives");

  FitResult result;
  std::vector<double> val_history;
  std::size_t since_improvement = 0;
  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    EpochStats stats = train_epoch(model, split, config, epoch);
    EvalReport report = evaluate(model, split, {10}, EvalSet::validation);
    const double hr10 = report.hr_at(10);
    val_history.push_back(hr10);
    result.history.push_back({epoch, stats.mean_batch_loss, hr10});
    if (result.history.size() == 1 || hr10 > result.best_hr10) {
      result.best_hr10 = hr10;
      result.best_epoch = epoch;
      result.best = snapshot(model, config, epoch, val_history);
      since_improvement = 0;
    } else if (++since_improvement >= config.patience) {
      break;
    }
  }
  restore(model, result.best);
  return result;
}

std::vector<GradCheckGroup> gradient_check(Model& model,
                                           const std::vector<UserSequence>& sequences,
                                           double h) {
  std::vector<const UserSequence*> seqs;
  for (const UserSequence& s : sequences) seqs.push_back(&s);

  auto loss_value = [&]() {
    Tape tape;
    std::mt19937_64 rng(1);
    return tape.value(compute_loss(model, tape, seqs, false, rng)).item();
  };

  Tape tape;
  std::mt19937_64 rng(1);
  Tape::Var loss = compute_loss(model, tape, seqs, false, rng);
  model.zero_gradients();
  tape.backward(loss);

  std::vector<GradCheckGroup> out;
  for (Parameter* p : model.parameters()) {
    Tensor fd = finite_diff_gradient(loss_value, *p, h);
    GradCheckGroup g;
    g.name = p->name;
    for (std::size_t k = 0; k < p->value.size(); ++k)
      g.worst_rel_err = std::max(g.worst_rel_err, rel_err(p->grad[k], fd[k]));
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace maint
