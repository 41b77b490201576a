#include "maint/model.hpp"

#include <cmath>

namespace maint {

Variant parse_variant(const std::string& name) {
  if (name == "full") return Variant::full;
  if (name == "no-projection" || name == "mp") return Variant::no_projection;
  if (name == "vanilla-lstm" || name == "blstm") return Variant::vanilla_lstm;
  if (name == "vanilla-attention" || name == "ratt") return Variant::vanilla_attention;
  if (name == "concat-fusion" || name == "mgfus") return Variant::concat_fusion;
  throw ConfigError("unknown variant '" + name +
                    "' (valid: full, no-projection, vanilla-lstm, vanilla-attention, "
                    "concat-fusion)");
}

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::no_projection: return "no-projection";
    case Variant::vanilla_lstm: return "vanilla-lstm";
    case Variant::vanilla_attention: return "vanilla-attention";
    case Variant::concat_fusion: return "concat-fusion";
  }
  return "?";
}

void ModelConfig::validate() const {
  if (d < 1) throw ConfigError("d must be >= 1");
  if (aspects < 1) throw ConfigError("aspects must be >= 1");
  if (gamma < 0) throw ConfigError("gamma must be >= 0");
  if (lambda < 0) throw ConfigError("lambda must be >= 0");
  if (dropout_rate < 0 || dropout_rate >= 1)
    throw ConfigError("dropout_rate must be in [0,1)");
  if (n_items < 2 || n_categories < 2 || n_behaviors < 2)
    throw ConfigError("vocab sizes must include at least one non-padding entry");
}

namespace {

Parameter glorot(const std::string& name, std::size_t rows, std::size_t cols,
                 std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> u(-limit, limit);
  Tensor t({rows, cols});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = u(rng);
  return Parameter(name, std::move(t));
}

Parameter glorot_vec(const std::string& name, std::size_t n, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(n + 1));
  std::uniform_real_distribution<double> u(-limit, limit);
  Tensor t({n});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = u(rng);
  return Parameter(name, std::move(t));
}

Parameter zeros_vec(const std::string& name, std::size_t n) {
  return Parameter(name, Tensor({n}));
}

Parameter const_vec(const std::string& name, std::size_t n, double v) {
  Tensor t({n});
  t.fill(v);
  return Parameter(name, std::move(t));
}

LstmCell make_lstm(const std::string& prefix, std::size_t d, std::size_t gate_in,
                   std::size_t cand_in, std::mt19937_64& rng) {
  LstmCell c;
  c.Wi = glorot(prefix + ".W_input", d, gate_in, rng);
  c.Wf = glorot(prefix + ".W_forget", d, gate_in, rng);
  c.Wc = glorot(prefix + ".W_cell", d, cand_in, rng);
  c.Wo = glorot(prefix + ".W_output", d, gate_in, rng);
  c.bi = zeros_vec(prefix + ".b_input", d);
  c.bf = const_vec(prefix + ".b_forget", d, 1.0);  // standard forget-gate bias
  c.bc = zeros_vec(prefix + ".b_cell", d);
  c.bo = zeros_vec(prefix + ".b_output", d);
  return c;
}

}  // namespace

Model::Model(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  std::mt19937_64 rng(seed);
  const std::size_t d = config_.d;
  const std::size_t J = config_.effective_aspects();

  params_.emb_item = glorot("embedding.item", config_.n_items, d, rng);
  params_.emb_category = glorot("embedding.category", config_.n_categories, d, rng);
  params_.emb_behavior = glorot("embedding.behavior", config_.n_behaviors, d, rng);
  params_.emb_bucket = glorot("embedding.bucket", config_.n_buckets, d, rng);
  // padding rows stay zero and receive no gradient
  for (Parameter* e :
       {&params_.emb_item, &params_.emb_category, &params_.emb_behavior,
        &params_.emb_bucket})
    for (std::size_t c = 0; c < d; ++c) e->value[c] = 0.0;

  params_.target_lstm = make_lstm("target_lstm", d, 3 * d, 3 * d, rng);
  const std::size_t gate_in =
      config_.variant == Variant::vanilla_lstm ? 3 * d : 5 * d;
  params_.behavior_lstm = make_lstm("behavior_lstm", d, gate_in, 3 * d, rng);

  params_.aspect.resize(J);
  for (std::size_t j = 0; j < J; ++j) {
    AspectParams& a = params_.aspect[j];
    const std::string p = "aspect" + std::to_string(j);
    a.projection = glorot(p + ".projection", d, d, rng);
    a.attn_query = glorot(p + ".attn_query", d, d, rng);
    a.attn_key = glorot(p + ".attn_key", d, d, rng);
    a.attn_bias = zeros_vec(p + ".attn_bias", d);
    a.attn_score = glorot_vec(p + ".attn_score", d, rng);
    a.attn_value = glorot(p + ".attn_value", d, d, rng);
    a.fuse_w = glorot_vec(p + ".fuse_w", 2 * d, rng);
    a.fuse_b = Parameter(p + ".fuse_b", Tensor::scalar(0.0));
    a.fuse_cat = glorot(p + ".fuse_cat", d, 2 * d, rng);
  }
  params_.out_proj = glorot("out_proj", d, J * d, rng);
  params_.head_item = glorot("head.item", config_.n_items, d, rng);
  params_.head_category = glorot("head.category", config_.n_categories, d, rng);
}

std::vector<Parameter*> Model::parameters() {
  std::vector<Parameter*> out{&params_.emb_item, &params_.emb_category};
  if (config_.variant != Variant::vanilla_lstm) {
    out.push_back(&params_.emb_behavior);
    out.push_back(&params_.emb_bucket);
  }
  for (LstmCell* c : {&params_.target_lstm, &params_.behavior_lstm})
    for (Parameter* p : {&c->Wi, &c->Wf, &c->Wc, &c->Wo, &c->bi, &c->bf, &c->bc, &c->bo})
      out.push_back(p);
  for (AspectParams& a : params_.aspect) {
    if (config_.variant != Variant::no_projection) out.push_back(&a.projection);
    if (config_.variant != Variant::vanilla_attention) out.push_back(&a.attn_query);
    out.push_back(&a.attn_key);
    out.push_back(&a.attn_bias);
    out.push_back(&a.attn_score);
    out.push_back(&a.attn_value);
    if (config_.variant == Variant::concat_fusion) {
      out.push_back(&a.fuse_cat);
    } else {
      out.push_back(&a.fuse_w);
      out.push_back(&a.fuse_b);
    }
  }
  out.push_back(&params_.out_proj);
  out.push_back(&params_.head_item);
  out.push_back(&params_.head_category);
  return out;
}

void Model::zero_gradients() {
  for (Parameter* p : parameters()) p->zero_grad();
}

EmbeddedEvent Model::embed_event(Tape& tape, std::size_t item, std::size_t category,
                                 std::size_t behavior, std::size_t bucket) {
  auto row_or_zero = [&](Parameter& table, std::size_t idx) {
    if (idx == 0) return tape.constant(Tensor({config_.d}));
    return tape.param_row(table, idx);
  };
  EmbeddedEvent e;
  e.p = row_or_zero(params_.emb_item, item);
  e.q = row_or_zero(params_.emb_category, category);
  e.r = row_or_zero(params_.emb_behavior, behavior);
  e.s = row_or_zero(params_.emb_bucket, bucket);
  return e;
}

std::vector<Tape::Var> Model::target_lstm(Tape& tape,
                                          const std::vector<EmbeddedEvent>& targets) {
  std::vector<Tape::Var> hidden;
  Tape::Var h = tape.constant(Tensor({config_.d}));
  Tape::Var c = tape.constant(Tensor({config_.d}));
  LstmCell& cell = params_.target_lstm;
  for (const EmbeddedEvent& e : targets) {
    Tape::Var x = tape.concat({e.p, e.q, h});
    Tape::Var i = tape.sigmoid(tape.linear(tape.param(cell.Wi), x, tape.param(cell.bi)));
    Tape::Var f = tape.sigmoid(tape.linear(tape.param(cell.Wf), x, tape.param(cell.bf)));
    Tape::Var g = tape.tanh_(tape.linear(tape.param(cell.Wc), x, tape.param(cell.bc)));
    Tape::Var o = tape.sigmoid(tape.linear(tape.param(cell.Wo), x, tape.param(cell.bo)));
    c = tape.add(tape.mul(f, c), tape.mul(i, g));
    h = tape.mul(o, tape.tanh_(c));
    hidden.push_back(h);
  }
  return hidden;
}

std::vector<Tape::Var> Model::behavior_lstm(Tape& tape,
                                            const std::vector<EmbeddedEvent>& events,
                                            const std::vector<bool>* mask) {
  std::vector<Tape::Var> hidden;
  Tape::Var h = tape.constant(Tensor({config_.d}));
  Tape::Var c = tape.constant(Tensor({config_.d}));
  LstmCell& cell = params_.behavior_lstm;
  const bool specifics = config_.variant != Variant::vanilla_lstm;
  for (std::size_t n = 0; n < events.size(); ++n) {
    if (mask && !(*mask)[n]) {
      // padded step: carry state, emit zero
      hidden.push_back(tape.constant(Tensor({config_.d})));
      continue;
    }
    const EmbeddedEvent& e = events[n];
    Tape::Var xg = specifics ? tape.concat({e.p, e.q, e.r, e.s, h})
                             : tape.concat({e.p, e.q, h});
    Tape::Var xc = tape.concat({e.p, e.q, h});  // candidate excludes r, s
    Tape::Var i = tape.sigmoid(tape.linear(tape.param(cell.Wi), xg, tape.param(cell.bi)));
    Tape::Var f = tape.sigmoid(tape.linear(tape.param(cell.Wf), xg, tape.param(cell.bf)));
    Tape::Var g = tape.tanh_(tape.linear(tape.param(cell.Wc), xc, tape.param(cell.bc)));
    Tape::Var o = tape.sigmoid(tape.linear(tape.param(cell.Wo), xg, tape.param(cell.bo)));
    c = tape.add(tape.mul(f, c), tape.mul(i, g));
    h = tape.mul(o, tape.tanh_(c));
    hidden.push_back(h);
  }
  return hidden;
}

std::vector<Tape::Var> Model::project_aspects(Tape& tape, Tape::Var pref_hidden) {
  std::vector<Tape::Var> out;
  if (config_.variant == Variant::no_projection) {
    out.push_back(pref_hidden);
    return out;
  }
  for (AspectParams& a : params_.aspect)
    out.push_back(tape.linear(tape.param(a.projection), pref_hidden));
  return out;
}

std::pair<Tape::Var, Tape::Var> Model::refinement_attention(
    Tape& tape, std::size_t aspect, Tape::Var pref_aspect,
    const std::vector<Tape::Var>& event_hidden, const std::vector<bool>* mask) {
  AspectParams& a = params_.aspect.at(aspect);
  const bool with_query = config_.variant != Variant::vanilla_attention;
  Tape::Var query_term = Tape::kNone;
  if (with_query) query_term = tape.linear(tape.param(a.attn_query), pref_aspect);

  std::vector<Tape::Var> scores;
  Tape::Var score_v = tape.param(a.attn_score);
  Tape::Var bias_v = tape.param(a.attn_bias);
  for (std::size_t n = 0; n < event_hidden.size(); ++n) {
    if (mask && !(*mask)[n]) {
      scores.push_back(tape.scalar(kMaskSentinel));
      continue;
    }
    Tape::Var pre = tape.linear(tape.param(a.attn_key), event_hidden[n]);
    if (with_query) pre = tape.add(pre, query_term);
    pre = tape.add(pre, bias_v);
    scores.push_back(tape.dot(score_v, tape.tanh_(pre)));
  }
  if (scores.empty()) throw EmptyDistributionError("refinement_attention: no events");
  Tape::Var alpha = tape.softmax(tape.concat(scores));

  Tape::Var acc = Tape::kNone;
  for (std::size_t n = 0; n < event_hidden.size(); ++n) {
    if (mask && !(*mask)[n]) continue;
    Tape::Var term = tape.scale_by(tape.linear(tape.param(a.attn_value), event_hidden[n]),
                                   tape.pick(alpha, n));
    acc = (acc == Tape::kNone) ? term : tape.add(acc, term);
  }
  return {acc, alpha};
}

std::pair<Tape::Var, Tape::Var> Model::gated_fusion(Tape& tape, std::size_t aspect,
                                                    Tape::Var pref, Tape::Var intent) {
  AspectParams& a = params_.aspect.at(aspect);
  if (config_.variant == Variant::concat_fusion) {
    Tape::Var fused = tape.linear(tape.param(a.fuse_cat), tape.concat({pref, intent}));
    return {fused, Tape::kNone};
  }
  Tape::Var pre =
      tape.add(tape.dot(tape.param(a.fuse_w), tape.concat({pref, intent})),
               tape.param(a.fuse_b));
  Tape::Var beta = tape.sigmoid(pre);
  Tape::Var fused = tape.add(tape.scale_by(pref, tape.affine(beta, -1.0, 1.0)),
                             tape.scale_by(intent, beta));
  return {fused, beta};
}

Tape::Var Model::finalize(Tape& tape, const std::vector<Tape::Var>& fused, bool training,
                          std::mt19937_64& rng) {
  Tape::Var cat = fused.size() == 1 ? fused[0] : tape.concat(fused);
  Tape::Var dropped = tape.dropout(cat, config_.dropout_rate, training, rng);
  return tape.linear(tape.param(params_.out_proj), dropped);
}

std::pair<Tape::Var, Tape::Var> Model::predict(Tape& tape, Tape::Var final_repr) {
  auto head = [&](Parameter& W) {
    Tape::Var logits = tape.linear(tape.param(W), final_repr);
    Tensor pad_mask({W.value.dim(0)});
    pad_mask[0] = kMaskSentinel;  // padding index never predicted
    return tape.softmax(tape.add(logits, tape.constant(std::move(pad_mask))));
  };
  return {head(params_.head_item), head(params_.head_category)};
}

ForwardTrace Model::forward(Tape& tape, const UserSequence& seq,
                            std::size_t visible_events, std::size_t visible_targets,
                            bool training, std::mt19937_64& rng) {
  const std::size_t attend_len =
      config_.prefix_masking ? visible_events : seq.events.size();
  if (attend_len == 0)
    throw ProtocolError("forward: user " + std::to_string(seq.user) +
                        " has no visible events");

  ForwardTrace trace;

  std::vector<EmbeddedEvent> target_inputs;
  for (std::size_t m = 0; m < visible_targets && m < seq.target_positions.size(); ++m) {
    const Event& e = seq.events.at(seq.target_positions[m]);
    target_inputs.push_back(embed_event(tape, e.item, e.category, e.behavior, e.bucket));
  }
  trace.target_hidden = target_lstm(tape, target_inputs);
  Tape::Var pref_hidden = trace.target_hidden.empty() ? tape.constant(Tensor({config_.d}))
                                                      : trace.target_hidden.back();

  std::vector<EmbeddedEvent> attended;
  for (std::size_t n = 0; n < attend_len; ++n) {
    const Event& e = seq.events[n];
    attended.push_back(embed_event(tape, e.item, e.category, e.behavior, e.bucket));
  }
  trace.event_hidden = behavior_lstm(tape, attended);

  trace.pref_aspect = project_aspects(tape, pref_hidden);
  const std::size_t J = trace.pref_aspect.size();
  for (std::size_t j = 0; j < J; ++j) {
    auto [intent, alpha] =
        refinement_attention(tape, j, trace.pref_aspect[j], trace.event_hidden);
    trace.intent_aspect.push_back(intent);
    trace.alpha.push_back(alpha);
    auto [fused, beta] = gated_fusion(tape, j, trace.pref_aspect[j], intent);
    trace.fused_aspect.push_back(fused);
    if (beta != Tape::kNone) trace.gate.push_back(beta);
  }
  trace.final_repr = finalize(tape, trace.fused_aspect, training, rng);
  auto [yi, yc] = predict(tape, trace.final_repr);
  trace.item_probs = yi;
  trace.cat_probs = yc;
  return trace;
}

ForwardTrace Model::forward_full(Tape& tape, const UserSequence& seq) {
  std::mt19937_64 rng(0);  // unused at inference
  return forward(tape, seq, seq.events.size(), seq.target_positions.size(), false, rng);
}

}  // namespace maint
