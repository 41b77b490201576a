#pragma once

#include <random>
#include <string>
#include <vector>

#include "maint/autograd.hpp"
#include "maint/data.hpp"
#include "maint/optim.hpp"

namespace maint {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Variant {
  full,
  no_projection,     // MAINT-MP: single aspect, identity projection
  vanilla_lstm,      // MAINT-BLSTM: gates ignore behavior type and time bucket
  vanilla_attention, // MAINT-RAtt: score drops the preference query term
  concat_fusion,     // MAINT-MGFus: concatenation + projection instead of gate
};

Variant parse_variant(const std::string& name);
std::string variant_name(Variant v);

struct ModelConfig {
  std::size_t d = 64;        // embedding and hidden size
  std::size_t aspects = 3;   // J
  double gamma = 1.0;        // category-loss weight
  double lambda = 1e-5;      // L2 coefficient
  double dropout_rate = 0.2;
  std::size_t n_items = 0;       // vocab sizes, padding index included
  std::size_t n_categories = 0;
  std::size_t n_behaviors = 0;
  std::size_t n_buckets = kNumBuckets + 1;  // bucket indices are used directly
  Variant variant = Variant::full;
  bool prefix_masking = true;  // false: full-sequence attention at every step

  void validate() const;
  std::size_t effective_aspects() const {
    return variant == Variant::no_projection ? 1 : aspects;
  }
};

// One LSTM cell; gate_in / cand_in are the gate and candidate input widths.
struct LstmCell {
  Parameter Wi, Wf, Wc, Wo;
  Parameter bi, bf, bc, bo;
};

struct AspectParams {
  Parameter projection;   // W^P_j, d x d (absent use for no_projection)
  Parameter attn_query;   // W^Q_j, d x d
  Parameter attn_key;     // W^K_j, d x d
  Parameter attn_bias;    // b^A_j, d
  Parameter attn_score;   // v_j, d
  Parameter attn_value;   // W^V_j, d x d
  Parameter fuse_w;       // w_j, 2d
  Parameter fuse_b;       // scalar
  Parameter fuse_cat;     // W^cat_j, d x 2d (concat_fusion variant only)
};

struct ModelParams {
  Parameter emb_item, emb_category, emb_behavior, emb_bucket;  // rows x d, row 0 fixed 0
  LstmCell target_lstm;
  LstmCell behavior_lstm;
  std::vector<AspectParams> aspect;
  Parameter out_proj;       // W^rho, d x (J*d)
  Parameter head_item;      // W^{O,I}, n_items x d
  Parameter head_category;  // W^{O,C}, n_categories x d
};

struct EmbeddedEvent {
  Tape::Var p, q, r, s;
};

// Everything a single forward pass produced, for loss, explanation and tests.
struct ForwardTrace {
  std::vector<Tape::Var> target_hidden;  // h^S_m per visible target step
  std::vector<Tape::Var> event_hidden;   // h^D_n per attended event
  std::vector<Tape::Var> pref_aspect;    // h~S_j
  std::vector<Tape::Var> intent_aspect;  // h~D_j
  std::vector<Tape::Var> alpha;          // per aspect, 1-D over attended events
  std::vector<Tape::Var> gate;           // beta_j (empty under concat fusion)
  std::vector<Tape::Var> fused_aspect;   // h~H_j
  Tape::Var final_repr = Tape::kNone;    // h^F
  Tape::Var item_probs = Tape::kNone;    // y^I
  Tape::Var cat_probs = Tape::kNone;     // y^C
};

class Model {
 public:
  Model(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  ModelParams& params() { return params_; }
  const ModelParams& params() const { return params_; }

  // All trainable parameters in a fixed, named order.
  std::vector<Parameter*> parameters();

  void zero_gradients();

  // --- building blocks (exposed for tests and explanation) ---

  // Row lookups; padding index 0 yields a constant zero vector (no gradient).
  EmbeddedEvent embed_event(Tape& tape, std::size_t item, std::size_t category,
                            std::size_t behavior, std::size_t bucket);

  // Standard LSTM over concatenated [p,q] inputs, zero initial state.
  std::vector<Tape::Var> target_lstm(Tape& tape,
                                     const std::vector<EmbeddedEvent>& targets);

  // Behavior-enhanced LSTM: gates consume [p,q,r,s,h], the cell candidate only
  // [p,q,h]. Masked steps carry state through and emit a zero hidden vector.
  std::vector<Tape::Var> behavior_lstm(Tape& tape,
                                       const std::vector<EmbeddedEvent>& events,
                                       const std::vector<bool>* mask = nullptr);

  // h~S_j for j = 1..J (identity under no_projection).
  std::vector<Tape::Var> project_aspects(Tape& tape, Tape::Var pref_hidden);

  // Returns (h~D_j, alpha row). Masked positions get exactly-zero weight.
  std::pair<Tape::Var, Tape::Var> refinement_attention(
      Tape& tape, std::size_t aspect, Tape::Var pref_aspect,
      const std::vector<Tape::Var>& event_hidden, const std::vector<bool>* mask = nullptr);

  // Returns (h~H_j, beta_j); beta is kNone under concat fusion.
  std::pair<Tape::Var, Tape::Var> gated_fusion(Tape& tape, std::size_t aspect,
                                               Tape::Var pref, Tape::Var intent);

  Tape::Var finalize(Tape& tape, const std::vector<Tape::Var>& fused, bool training,
                     std::mt19937_64& rng);

  // (y^I, y^C); padding index is masked out of both distributions.
  std::pair<Tape::Var, Tape::Var> predict(Tape& tape, Tape::Var final_repr);

  // Full pass. visible_events bounds the attended history; visible_targets the
  // target-LSTM steps. Throws ProtocolError when no event is visible.
  ForwardTrace forward(Tape& tape, const UserSequence& seq, std::size_t visible_events,
                       std::size_t visible_targets, bool training, std::mt19937_64& rng);

  // Inference pass over the user's whole stored history.
  ForwardTrace forward_full(Tape& tape, const UserSequence& seq);

 private:
  ModelConfig config_;
  ModelParams params_;
};

}  // namespace maint
