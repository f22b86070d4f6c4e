#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "tabqa/autodiff.hpp"
#include "tabqa/decompose.hpp"
#include "tabqa/question.hpp"

namespace tabqa::neural {

using ad::Mat;
using Vec = Eigen::VectorXd;

inline constexpr const char* kCheckpointVersion = "1";

struct ModelConfig {
  std::size_t vocab_size = 0;  // taken from the vocabulary when zero
  std::size_t embed_dim = 16;
  std::size_t hidden_dim = 16;
  std::size_t encoder_layers = 1;
  double dropout = 0.0;
  std::size_t max_len = kMaxQuestionTokens;
  double learning_rate = 1e-2;
  double lr_decay = 1e-2;  // step size is learning_rate / (1 + lr_decay * epoch)
  std::uint64_t seed = 42;
  double init_scale = 0.3;
  bool use_condition = true;
  bool use_attention = true;
  bool use_copy = true;

  /// Sizes and rates of the full-scale model.
  static ModelConfig full_scale() {
    ModelConfig c;
    c.embed_dim = 256;
    c.hidden_dim = 256;
    c.encoder_layers = 2;
    c.dropout = 0.1;
    c.learning_rate = 1e-4;
    c.lr_decay = 0;
    return c;
  }

  void validate() const {
    if (vocab_size < 1 || embed_dim < 1 || hidden_dim < 1 || encoder_layers < 1 || max_len < 1)
      throw PreconditionError("model dimensions must be at least 1");
    if (!(dropout >= 0 && dropout < 1)) throw PreconditionError("dropout must be in [0, 1)");
    if (!(learning_rate > 0)) throw PreconditionError("learning rate must be positive");
    if (!(lr_decay >= 0)) throw PreconditionError("lr_decay must be non-negative");
    if (use_copy && !use_attention) throw PreconditionError("copying needs attention");
  }
};

inline nlohmann::json to_json(const ModelConfig& c) {
  return {{"vocab_size", c.vocab_size},         {"embed_dim", c.embed_dim},         {"hidden_dim", c.hidden_dim},
          {"encoder_layers", c.encoder_layers}, {"dropout", c.dropout},             {"max_len", c.max_len},
          {"learning_rate", c.learning_rate},   {"lr_decay", c.lr_decay},          {"seed", c.seed},                   {"init_scale", c.init_scale},
          {"use_condition", c.use_condition},   {"use_attention", c.use_attention}, {"use_copy", c.use_copy}};
}

inline ModelConfig config_from_json(const nlohmann::json& j, ModelConfig c = {}) {
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
  c.encoder_layers = j.value("encoder_layers", c.encoder_layers);
  c.dropout = j.value("dropout", c.dropout);
  c.max_len = j.value("max_len", c.max_len);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.lr_decay = j.value("lr_decay", c.lr_decay);
  c.seed = j.value("seed", c.seed);
  c.init_scale = j.value("init_scale", c.init_scale);
  c.use_condition = j.value("use_condition", c.use_condition);
  c.use_attention = j.value("use_attention", c.use_attention);
  c.use_copy = j.value("use_copy", c.use_copy);
  return c;
}

// ---------------------------------------------------------------------------
// Vocabulary

class Vocab {
public:
  static constexpr std::size_t kSos = 0, kEos = 1, kUnk = 2;

  Vocab() {
    for (const char* m : {"<sos>", "<eos>", "<unk>", "<N>", "<T>", "<C>"}) add(m);
  }

  std::size_t add(const std::string& w) {
    auto it = index_.find(w);
    if (it != index_.end()) return it->second;
    words_.push_back(w);
    index_[w] = words_.size() - 1;
    return words_.size() - 1;
  }
  std::optional<std::size_t> find(const std::string& w) const {
    auto it = index_.find(w);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  std::size_t id(const std::string& w) const { return find(w).value_or(kUnk); }
  const std::string& word(std::size_t i) const { return words_.at(i); }
  std::size_t size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }

private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> index_;
};

// ---------------------------------------------------------------------------
// Training data

struct TrainingPair {
  std::vector<std::string> input;  // serialized question tokens
  QuestionClass condition = QuestionClass::ComplexTypeI;
  std::vector<std::string> target1;
  std::vector<std::string> target2;
};

/// Vocabulary over every token of the pairs, in order of first appearance.
inline Vocab build_vocab(const std::vector<TrainingPair>& pairs) {
  Vocab v;
  for (const auto& p : pairs) {
    for (const auto& w : p.input) v.add(w);
    for (const auto& w : p.target1) v.add(w);
    for (const auto& w : p.target2) v.add(w);
  }
  return v;
}

/// Source sequence mapped for the model: in-vocabulary ids for the encoder,
/// plus an extended id space where each distinct unknown source word gets
/// id vocab_size + k so that it can be copied.
struct Source {
  std::vector<std::size_t> ids;       // encoder ids (unknown -> <unk>)
  std::vector<std::size_t> ext_ids;   // extended ids
  std::vector<std::string> oov;       // extended words, index k -> id V+k
  std::vector<std::string> words;
};

inline Source make_source(const std::vector<std::string>& words, const Vocab& v) {
  Source s;
  s.words = words;
  for (const auto& w : words) {
    auto id = v.find(w);
    s.ids.push_back(id.value_or(Vocab::kUnk));
    if (id) {
      s.ext_ids.push_back(*id);
    } else {
      auto it = std::find(s.oov.begin(), s.oov.end(), w);
      std::size_t k = static_cast<std::size_t>(it - s.oov.begin());
      if (it == s.oov.end()) s.oov.push_back(w);
      s.ext_ids.push_back(v.size() + k);
    }
  }
  return s;
}

inline std::size_t target_id(const std::string& w, const Vocab& v, const Source& s, bool copy) {
  if (auto id = v.find(w)) return *id;
  if (copy)
    for (std::size_t k = 0; k < s.oov.size(); ++k)
      if (s.oov[k] == w) return v.size() + k;
  return Vocab::kUnk;
}

// ---------------------------------------------------------------------------
// Parameters

/// Portable uniform draw in [0, 1) from a 64-bit engine.
inline double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

struct ModelState {
  ModelConfig config;
  Vocab vocab;
  std::map<std::string, Mat> params;  // ordered: stable checkpoints and iteration

  Mat& operator[](const std::string& k) { return params.at(k); }
  const Mat& operator[](const std::string& k) const { return params.at(k); }

  bool finite() const {
    for (const auto& [k, m] : params)
      if (!m.allFinite()) return false;
    return true;
  }
  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& [k, m] : params) n += static_cast<std::size_t>(m.size());
    return n;
  }
};

namespace detail {

inline void gru_shapes(std::map<std::string, Mat>& p, const std::string& pre, std::size_t in, std::size_t h) {
  long I = static_cast<long>(in), H = static_cast<long>(h);
  for (const char* g : {"z", "r", "n"}) {
    p[pre + ".W_" + g] = Mat::Zero(H, I);
    p[pre + ".U_" + g] = Mat::Zero(H, H);
    p[pre + ".b_" + g] = Mat::Zero(H, 1);
  }
}

} // namespace detail

/// Zero-valued parameters with the shapes implied by the config.
inline ModelState zero_state(ModelConfig cfg, Vocab vocab) {
  if (cfg.vocab_size == 0) cfg.vocab_size = vocab.size();
  if (cfg.vocab_size != vocab.size()) throw PreconditionError("vocab_size does not match the vocabulary");
  cfg.validate();
  ModelState m{cfg, std::move(vocab), {}};
  long V = static_cast<long>(cfg.vocab_size), E = static_cast<long>(cfg.embed_dim), H = static_cast<long>(cfg.hidden_dim);
  auto& p = m.params;
  p["W_emb"] = Mat::Zero(E, V);
  for (std::size_t l = 0; l < cfg.encoder_layers; ++l) {
    std::size_t in = l == 0 ? cfg.embed_dim : 2 * cfg.hidden_dim;
    detail::gru_shapes(p, "enc" + std::to_string(l) + ".fwd", in, cfg.hidden_dim);
    detail::gru_shapes(p, "enc" + std::to_string(l) + ".bwd", in, cfg.hidden_dim);
  }
  p["W_proj"] = Mat::Zero(H, 2 * H);
  p["b_proj"] = Mat::Zero(H, 1);
  p["W_c"] = Mat::Zero(2, H);
  p["b_c"] = Mat::Zero(2, 1);
  p["W_q1"] = Mat::Zero(H, H + 2);
  p["b_q1"] = Mat::Zero(H, 1);
  p["W_q2"] = Mat::Zero(H, H + 2);
  p["b_q2"] = Mat::Zero(H, 1);
  detail::gru_shapes(p, "dec", cfg.embed_dim, cfg.hidden_dim);
  p["W_attn"] = Mat::Zero(H, 2 * H);
  p["W_out"] = Mat::Zero(V, H);
  p["b_out"] = Mat::Zero(V, 1);
  p["v_c1"] = Mat::Zero(H, 1);
  p["v_c2"] = Mat::Zero(H, 1);
  p["v_c3"] = Mat::Zero(E, 1);
  return m;
}

/// Uniform(-init_scale, init_scale) weights, zero biases, from cfg.seed.
inline ModelState init_state(ModelConfig cfg, Vocab vocab) {
  auto m = zero_state(std::move(cfg), std::move(vocab));
  std::mt19937_64 rng(m.config.seed);
  for (auto& [name, w] : m.params) {
    auto leaf = name.substr(name.rfind('.') == std::string::npos ? 0 : name.rfind('.') + 1);
    if (leaf.rfind("b_", 0) == 0) continue;
    for (long i = 0; i < w.size(); ++i) w.data()[i] = (2 * unit(rng) - 1) * m.config.init_scale;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Forward graph

/// One forward pass recorded on a tape. Parameters are bound lazily so that
/// a gradient map can be attached.
class Graph {
public:
  Graph(const ModelState& m, std::map<std::string, Mat>* grads = nullptr, std::mt19937_64* dropout_rng = nullptr)
      : m_(m), grads_(grads), rng_(dropout_rng) {}

  ad::Tape tape;

  ad::Var p(const std::string& name) {
    auto it = bound_.find(name);
    if (it != bound_.end()) return it->second;
    Mat* g = grads_ ? &grads_->at(name) : nullptr;
    auto v = tape.param(m_[name], g);
    bound_[name] = v;
    return v;
  }

  ad::Var zeros(std::size_t rows) { return tape.constant(Mat::Zero(static_cast<long>(rows), 1)); }

  ad::Var dropout(ad::Var x) {
    double rate = m_.config.dropout;
    if (!rng_ || rate <= 0) return x;
    Mat mask(tape.val(x).rows(), 1);
    for (long i = 0; i < mask.rows(); ++i) mask(i, 0) = unit(*rng_) < rate ? 0.0 : 1.0 / (1.0 - rate);
    return tape.cmul(x, tape.constant(mask));
  }

  ad::Var embed(std::size_t id) { return tape.col(p("W_emb"), id); }

  ad::Var linear(const std::string& W, ad::Var x) { return tape.matmul(p(W), x); }
  ad::Var affine(const std::string& W, const std::string& b, ad::Var x) { return tape.add(linear(W, x), p(b)); }

  /// h' = (1 - z) * n + z * h with z, r gates and candidate n.
  ad::Var gru(const std::string& pre, ad::Var x, ad::Var h) {
    auto gate = [&](const char* g) {
      std::string s = g;
      return tape.add(affine(pre + ".W_" + s, pre + ".b_" + s, x), linear(pre + ".U_" + s, h));
    };
    auto z = tape.sigmoid(gate("z"));
    auto r = tape.sigmoid(gate("r"));
    auto n = tape.tanh(tape.add(affine(pre + ".W_n", pre + ".b_n", x), linear(pre + ".U_n", tape.cmul(r, h))));
    return tape.add(tape.cmul(tape.one_minus(z), n), tape.cmul(z, h));
  }

  struct Encoded {
    std::vector<ad::Var> states;
    ad::Var summary;
    ad::Var matrix;  // H x n, one column per state
  };

  Encoded encode(const std::vector<std::size_t>& ids) {
    const auto& c = m_.config;
    if (ids.empty()) throw LengthError("encoder input is empty");
    if (ids.size() > c.max_len)
      throw LengthError("input has " + std::to_string(ids.size()) + " tokens, limit is " + std::to_string(c.max_len));
    std::vector<ad::Var> layer;
    for (auto id : ids) layer.push_back(dropout(embed(id)));
    std::vector<ad::Var> fwd, bwd;
    for (std::size_t l = 0; l < c.encoder_layers; ++l) {
      std::string pre = "enc" + std::to_string(l);
      std::size_t n = layer.size();
      fwd.assign(n, {});
      bwd.assign(n, {});
      auto h = zeros(c.hidden_dim);
      for (std::size_t i = 0; i < n; ++i) fwd[i] = h = gru(pre + ".fwd", layer[i], h);
      h = zeros(c.hidden_dim);
      for (std::size_t i = n; i-- > 0;) bwd[i] = h = gru(pre + ".bwd", layer[i], h);
      for (std::size_t i = 0; i < n; ++i) {
        layer[i] = tape.vcat(fwd[i], bwd[i]);
        if (l + 1 < c.encoder_layers) layer[i] = dropout(layer[i]);
      }
    }
    Encoded e;
    for (auto s : layer) e.states.push_back(affine("W_proj", "b_proj", s));
    e.summary = affine("W_proj", "b_proj", tape.vcat(fwd.back(), bwd.front()));
    e.matrix = tape.hcat(e.states);
    return e;
  }

  ad::Var condition(QuestionClass cls) {
    Mat c = Mat::Zero(2, 1);
    if (m_.config.use_condition) {
      if (cls == QuestionClass::ComplexTypeI) c(1, 0) = 1;
      else if (cls == QuestionClass::ComplexTypeII) c(0, 0) = 1;
      else throw ConditionError("simple questions are not decomposed");
    }
    return tape.constant(c);
  }

  ad::Var split(ad::Var h, ad::Var c, int which) {
    std::string k = std::to_string(which);
    return tape.tanh(affine("W_q" + k, "b_q" + k, tape.vcat(h, c)));
  }

  struct Attention {
    ad::Var weights, context, state;
  };

  Attention attend(ad::Var h_t, const Encoded& enc, std::optional<std::size_t> force = std::nullopt) {
    Attention a;
    if (force) {
      Mat w = Mat::Zero(static_cast<long>(enc.states.size()), 1);
      w(static_cast<long>(*force), 0) = 1;
      a.weights = tape.constant(w);
    } else {
      a.weights = tape.softmax(tape.matmul(tape.transpose(enc.matrix), h_t));
    }
    a.context = tape.matmul(enc.matrix, a.weights);
    a.state = tape.tanh(linear("W_attn", tape.vcat(a.context, h_t)));
    return a;
  }

  ad::Var copy_gate(ad::Var h_t, ad::Var ctx, ad::Var w_prev) {
    auto s = tape.add(tape.add(tape.matmul(tape.transpose(p("v_c1")), h_t), tape.matmul(tape.transpose(p("v_c2")), ctx)),
                      tape.matmul(tape.transpose(p("v_c3")), w_prev));
    return tape.sigmoid(s);
  }

  struct Step {
    ad::Var hidden;        // next recurrent state
    ad::Var dist;          // over the extended vocabulary
    ad::Var attention;     // valid when attention is on
    ad::Var gate;          // valid when copying is on
    bool has_attention = false, has_gate = false;
  };

  struct StepForce {
    std::optional<double> gate;
    std::optional<std::size_t> attend_to;
  };

  Step step(std::size_t prev_ext_id, ad::Var h_prev, const Encoded& enc, const Source& src,
            const StepForce& force = {}) {
    const auto& c = m_.config;
    std::size_t V = c.vocab_size;
    auto w = embed(prev_ext_id < V ? prev_ext_id : Vocab::kUnk);
    Step s;
    s.hidden = gru("dec", w, h_prev);
    ad::Var out_state = s.hidden;
    Attention att;
    if (c.use_attention) {
      att = attend(s.hidden, enc, force.attend_to);
      out_state = att.state;
      s.attention = att.weights;
      s.has_attention = true;
    }
    auto vocab = tape.softmax(affine("W_out", "b_out", out_state));
    if (!c.use_copy) {
      s.dist = vocab;
      return s;
    }
    std::size_t ext = V + src.oov.size();
    Mat scatter = Mat::Zero(static_cast<long>(ext), static_cast<long>(src.ext_ids.size()));
    for (std::size_t j = 0; j < src.ext_ids.size(); ++j) scatter(static_cast<long>(src.ext_ids[j]), static_cast<long>(j)) = 1;
    auto copied = tape.matmul(tape.constant(scatter), att.weights);
    ad::Var pc;
    if (force.gate) {
      Mat g(1, 1);
      g(0, 0) = *force.gate;
      pc = tape.constant(g);
    } else {
      pc = copy_gate(s.hidden, att.context, w);
    }
    s.gate = pc;
    s.has_gate = true;
    s.dist = tape.add(tape.scale_by(tape.pad_rows(vocab, src.oov.size()), tape.one_minus(pc)), tape.scale_by(copied, pc));
    return s;
  }

  /// Teacher-forced NLL of one target sequence (plus <eos>). Counts
  /// argmax hits into `correct` and target positions into `total`.
  ad::Var sequence_loss(ad::Var h0, const Encoded& enc, const Source& src, const std::vector<std::string>& target,
                        std::size_t& correct, std::size_t& total) {
    std::vector<std::size_t> ids;
    for (const auto& w : target) ids.push_back(target_id(w, m_.vocab, src, m_.config.use_copy));
    ids.push_back(Vocab::kEos);
    if (ids.size() > m_.config.max_len + 1) throw LengthError("target longer than max_len");
    auto h = h0;
    std::size_t prev = Vocab::kSos;
    ad::Var loss = tape.constant(Mat::Zero(1, 1));
    for (auto y : ids) {
      auto s = step(prev, h, enc, src);
      loss = tape.sub(loss, tape.log_clamped(tape.at(s.dist, y)));
      Eigen::Index best;
      tape.val(s.dist).col(0).maxCoeff(&best);
      correct += static_cast<std::size_t>(best) == y;
      ++total;
      h = s.hidden;
      prev = y;
    }
    return loss;
  }

  struct PairLoss {
    ad::Var loss;
    std::size_t correct = 0, total = 0;
  };

  /// Decoder NLL over both targets, plus the class head NLL when the
  /// condition is in use.
  PairLoss pair_loss(const TrainingPair& pr) {
    auto src = make_source(pr.input, m_.vocab);
    auto enc = encode(src.ids);
    auto c = condition(pr.condition);
    PairLoss out;
    auto l1 = sequence_loss(split(enc.summary, c, 1), enc, src, pr.target1, out.correct, out.total);
    auto l2 = sequence_loss(split(enc.summary, c, 2), enc, src, pr.target2, out.correct, out.total);
    out.loss = tape.add(l1, l2);
    if (m_.config.use_condition) {
      auto probs = tape.softmax(affine("W_c", "b_c", enc.summary));
      std::size_t k = pr.condition == QuestionClass::ComplexTypeI ? 1 : 0;
      out.loss = tape.sub(out.loss, tape.log_clamped(tape.at(probs, k)));
    }
    return out;
  }

private:
  const ModelState& m_;
  std::map<std::string, Mat>* grads_;
  std::mt19937_64* rng_;
  std::map<std::string, ad::Var> bound_;
};

// ---------------------------------------------------------------------------
// Tape-free entry points

inline Vec as_vec(const Mat& m) { return m.col(0); }

struct EncoderOutput {
  std::vector<Vec> states;
  Vec summary;
};

inline EncoderOutput encode(const ModelState& m, const std::vector<std::size_t>& ids) {
  Graph g(m);
  auto e = g.encode(ids);
  EncoderOutput out;
  for (auto s : e.states) out.states.push_back(as_vec(g.tape.val(s)));
  out.summary = as_vec(g.tape.val(e.summary));
  return out;
}

inline Vec condition_vector(QuestionClass cls) {
  Vec c = Vec::Zero(2);
  if (cls == QuestionClass::ComplexTypeI) c(1) = 1;
  else if (cls == QuestionClass::ComplexTypeII) c(0) = 1;
  else throw ConditionError("simple questions are not decomposed");
  return c;
}

inline std::pair<Vec, Vec> split(const ModelState& m, const Vec& h, const Vec& c) {
  if (static_cast<std::size_t>(h.size()) != m.config.hidden_dim) throw PreconditionError("h has the wrong dimension");
  Graph g(m);
  auto hv = g.tape.constant(h);
  auto cv = g.tape.constant(c);
  return {as_vec(g.tape.val(g.split(hv, cv, 1))), as_vec(g.tape.val(g.split(hv, cv, 2)))};
}

struct AttentionOutput {
  Vec weights, context, state;
};

inline AttentionOutput attend(const ModelState& m, const Vec& h_t, const std::vector<Vec>& states) {
  if (states.empty()) throw PreconditionError("no encoder states");
  Graph g(m);
  Graph::Encoded enc;
  for (const auto& s : states) enc.states.push_back(g.tape.constant(s));
  enc.matrix = g.tape.hcat(enc.states);
  auto a = g.attend(g.tape.constant(h_t), enc);
  return {as_vec(g.tape.val(a.weights)), as_vec(g.tape.val(a.context)), as_vec(g.tape.val(a.state))};
}

inline double copy_gate(const ModelState& m, const Vec& h_t, const Vec& ctx, const Vec& w_prev) {
  Graph g(m);
  return g.tape.scalar(g.copy_gate(g.tape.constant(h_t), g.tape.constant(ctx), g.tape.constant(w_prev)));
}

/// Word-level NLL: -sum log p(target). Distributions are columns of `dists`
/// (one per target position); probabilities are clamped at 1e-12.
inline double loss(const std::vector<Vec>& dists, const std::vector<std::size_t>& targets) {
  if (dists.size() != targets.size()) throw PreconditionError("one distribution per target token is required");
  double total = 0;
  for (std::size_t i = 0; i < dists.size(); ++i) {
    if (std::abs(dists[i].sum() - 1.0) > 1e-9) throw PreconditionError("distribution does not sum to 1");
    total -= std::log(std::max(dists[i](static_cast<long>(targets[i])), ad::Tape::kLogFloor));
  }
  return total;
}

struct DecodeOptions {
  std::optional<double> gate;               // force p_c
  std::optional<std::size_t> attend_to;     // force attention on one source position
  std::size_t max_steps = 0;                // max_len when zero
};

struct Decoded {
  std::vector<std::string> tokens;
  std::vector<Vec> distributions;
};

/// Greedy decode of one sub-question from split output `which` (1 or 2).
inline Decoded decode(const ModelState& m, const std::vector<std::string>& input, QuestionClass cls, int which,
                      const DecodeOptions& opt = {}) {
  Graph g(m);
  auto src = make_source(input, m.vocab);
  auto enc = g.encode(src.ids);
  auto h = g.split(enc.summary, g.condition(cls), which);
  std::size_t prev = Vocab::kSos;
  std::size_t steps = opt.max_steps ? opt.max_steps : m.config.max_len;
  Decoded out;
  for (std::size_t t = 0; t < steps; ++t) {
    auto s = g.step(prev, h, enc, src, {opt.gate, opt.attend_to});
    const Mat& d = g.tape.val(s.dist);
    out.distributions.push_back(d.col(0));
    Eigen::Index best;
    d.col(0).maxCoeff(&best);
    auto id = static_cast<std::size_t>(best);
    if (id == Vocab::kEos) break;
    out.tokens.push_back(id < m.config.vocab_size ? m.vocab.word(id) : src.oov[id - m.config.vocab_size]);
    h = s.hidden;
    prev = id;
  }
  return out;
}

inline std::pair<std::vector<std::string>, std::vector<std::string>> decode_pair(const ModelState& m,
                                                                                 const std::vector<std::string>& input,
                                                                                 QuestionClass cls) {
  return {decode(m, input, cls, 1).tokens, decode(m, input, cls, 2).tokens};
}

// ---------------------------------------------------------------------------
// Training

struct EpochLog {
  std::size_t epoch = 0;
  double loss = 0;
  double token_accuracy = 0;
  std::size_t clamped = 0;
};

struct TrainOptions {
  std::size_t epochs = 500;
  /// Stop early once teacher-forced token accuracy reaches this value
  /// (never when > 1).
  double stop_at_accuracy = 2.0;
};

struct TrainResult {
  ModelState state;
  std::vector<EpochLog> log;
};

inline std::string loss_csv(const std::vector<EpochLog>& log) {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,loss,token_accuracy\n";
  for (const auto& e : log) out << e.epoch << ',' << e.loss << ',' << e.token_accuracy << '\n';
  return out.str();
}

using Grads = std::map<std::string, Mat>;

inline Grads zero_grads(const ModelState& m) {
  Grads g;
  for (const auto& [k, v] : m.params) g[k] = Mat::Zero(v.rows(), v.cols());
  return g;
}

/// Loss and gradient summed over `pairs` (no dropout unless rng given).
inline double loss_and_grad(const ModelState& m, const std::vector<TrainingPair>& pairs, Grads& grads,
                            std::mt19937_64* rng = nullptr, std::size_t* correct = nullptr,
                            std::size_t* total = nullptr, std::size_t* clamped = nullptr) {
  double sum = 0;
  for (const auto& pr : pairs) {
    Graph g(m, &grads, rng);
    auto pl = g.pair_loss(pr);
    g.tape.backward(pl.loss);
    sum += g.tape.scalar(pl.loss);
    if (correct) *correct += pl.correct;
    if (total) *total += pl.total;
    if (clamped) *clamped += g.tape.clamps();
  }
  return sum;
}

inline double total_loss(const ModelState& m, const TrainingPair& pr) {
  Graph g(m);
  return g.tape.scalar(g.pair_loss(pr).loss);
}

/// Full-batch Adam over the mean pair loss with inverse-time step decay.
/// Deterministic given the seed.
inline TrainResult train(const std::vector<TrainingPair>& pairs, ModelConfig cfg, const TrainOptions& opt = {},
                         std::optional<Vocab> vocab = std::nullopt) {
  if (pairs.empty()) throw PreconditionError("no training pairs");
  Vocab v = vocab ? *vocab : build_vocab(pairs);
  if (cfg.vocab_size == 0) cfg.vocab_size = v.size();
  for (const auto& p : pairs) {
    if (p.input.size() > cfg.max_len || p.target1.size() > cfg.max_len || p.target2.size() > cfg.max_len)
      throw LengthError("training pair exceeds max_len");
    if (p.condition == QuestionClass::Simple) throw ConditionError("simple questions are not decomposed");
  }
  TrainResult r{init_state(cfg, std::move(v)), {}};
  auto& m = r.state;
  auto first = zero_grads(m), second = zero_grads(m);
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  const double b1 = 0.9, b2 = 0.999, adam_eps = 1e-8;
  double n = static_cast<double>(pairs.size());
  for (std::size_t epoch = 1; epoch <= opt.epochs; ++epoch) {
    auto grads = zero_grads(m);
    std::size_t correct = 0, total = 0, clamped = 0;
    double sum = loss_and_grad(m, pairs, grads, &rng, &correct, &total, &clamped);
    if (!std::isfinite(sum)) throw TrainError("loss diverged at epoch " + std::to_string(epoch));
    double lr = cfg.learning_rate / (1 + cfg.lr_decay * static_cast<double>(epoch));
    double lr_t = lr * std::sqrt(1 - std::pow(b2, epoch)) / (1 - std::pow(b1, epoch));
    for (auto& [k, w] : m.params) {
      Mat g = grads[k] / n;
      first[k] = b1 * first[k] + (1 - b1) * g;
      second[k] = b2 * second[k] + (1 - b2) * g.cwiseProduct(g);
      w.array() -= lr_t * first[k].array() / (second[k].array().sqrt() + adam_eps);
    }
    if (!m.finite()) throw TrainError("non-finite parameters at epoch " + std::to_string(epoch));
    double acc = total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
    r.log.push_back({epoch, sum / n, acc, clamped});
    if (acc >= opt.stop_at_accuracy) break;
  }
  return r;
}

/// Greedy-decoding token accuracy: position-wise matches against both
/// targets (plus the end token) over all target positions.
inline double token_accuracy(const ModelState& m, const std::vector<TrainingPair>& pairs) {
  std::size_t hit = 0, total = 0;
  for (const auto& p : pairs) {
    auto [a, b] = decode_pair(m, p.input, p.condition);
    for (const auto& [out, ref] : {std::pair{&a, &p.target1}, std::pair{&b, &p.target2}}) {
      for (std::size_t i = 0; i <= ref->size(); ++i) {
        ++total;
        if (i < ref->size()) hit += i < out->size() && (*out)[i] == (*ref)[i];
        else hit += out->size() == ref->size();
      }
    }
  }
  return total ? static_cast<double>(hit) / static_cast<double>(total) : 0.0;
}

// ---------------------------------------------------------------------------
// Gradient check

struct GradCheckReport {
  double max_relative_error = 0;
  std::map<std::string, double> per_group;
  /// ||a - n|| / max(||a||, ||n||) over the checked entries of each group.
  std::map<std::string, double> per_group_norm;
  std::size_t checked = 0;
};

/// Central finite differences against the tape gradient of total_loss.
/// Relative error is |a - n| / max(|a|, |n|, 1e-6). At most
/// `max_per_group` entries per group are checked (all when zero), picked
/// with a fixed seed. `groups` restricts the check when non-empty.
inline GradCheckReport grad_check(const ModelState& m0, const TrainingPair& pair, double eps,
                                  const std::vector<std::string>& groups = {}, std::size_t max_per_group = 0) {
  if (!(eps > 0) || !std::isfinite(eps)) throw PreconditionError("eps must be positive and finite");
  ModelState m = m0;
  m.config.dropout = 0;
  auto grads = zero_grads(m);
  loss_and_grad(m, {pair}, grads);
  GradCheckReport rep;
  std::mt19937_64 rng(7);
  for (auto& [name, w] : m.params) {
    if (!groups.empty() && std::find(groups.begin(), groups.end(), name) == groups.end()) continue;
    std::vector<long> idx(static_cast<std::size_t>(w.size()));
    for (long i = 0; i < w.size(); ++i) idx[static_cast<std::size_t>(i)] = i;
    if (max_per_group && idx.size() > max_per_group) {
      for (std::size_t i = 0; i < max_per_group; ++i) {
        auto j = i + static_cast<std::size_t>(rng() % (idx.size() - i));
        std::swap(idx[i], idx[j]);
      }
      idx.resize(max_per_group);
    }
    double worst = 0, diff2 = 0, a2 = 0, n2 = 0;
    for (long i : idx) {
      double keep = w.data()[i];
      w.data()[i] = keep + eps;
      double up = total_loss(m, pair);
      w.data()[i] = keep - eps;
      double down = total_loss(m, pair);
      w.data()[i] = keep;
      double numeric = (up - down) / (2 * eps);
      double analytic = grads[name].data()[i];
      double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
      worst = std::max(worst, std::abs(analytic - numeric) / denom);
      diff2 += (analytic - numeric) * (analytic - numeric);
      a2 += analytic * analytic;
      n2 += numeric * numeric;
      ++rep.checked;
    }
    rep.per_group[name] = worst;
    rep.per_group_norm[name] = std::sqrt(diff2) / std::max({std::sqrt(a2), std::sqrt(n2), 1e-12});
    rep.max_relative_error = std::max(rep.max_relative_error, worst);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Checkpoints

inline nlohmann::json to_json(const ModelState& m) {
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [k, w] : m.params) {
    std::vector<double> data(w.data(), w.data() + w.size());  // column-major
    params[k] = {{"rows", w.rows()}, {"cols", w.cols()}, {"data", data}};
  }
  return {{"version", kCheckpointVersion}, {"config", to_json(m.config)}, {"vocab", m.vocab.words()}, {"params", params}};
}

inline ModelState state_from_json(const nlohmann::json& j) {
  if (j.value("version", "") != kCheckpointVersion) throw SchemaError("unsupported checkpoint version");
  Vocab v;
  for (const auto& w : j.at("vocab")) v.add(w.get<std::string>());
  auto m = zero_state(config_from_json(j.at("config")), std::move(v));
  for (auto& [k, w] : m.params) {
    const auto& e = j.at("params").at(k);
    if (e.at("rows").get<long>() != w.rows() || e.at("cols").get<long>() != w.cols())
      throw SchemaError("checkpoint shape mismatch for " + k);
    auto data = e.at("data").get<std::vector<double>>();
    if (static_cast<long>(data.size()) != w.size()) throw SchemaError("checkpoint size mismatch for " + k);
    std::copy(data.begin(), data.end(), w.data());
  }
  return m;
}

// ---------------------------------------------------------------------------
// Toy corpus

namespace detail {

struct ToyTemplate {
  QuestionClass cls;
  std::string complex, sub1, sub2;
};

inline std::string fill(std::string s, const std::string& key, const std::string& value) {
  for (auto p = s.find(key); p != std::string::npos; p = s.find(key, p + value.size())) s.replace(p, key.size(), value);
  return s;
}

} // namespace detail

/// Schema of the toy table the toy corpus talks about.
inline std::vector<std::string> toy_schema_tokens() {
  return {"<N>", "price", "rating", "reviews", "<T>", "year", "<C>", "genre"};
}

inline std::vector<std::string> with_schema(const std::string& q, const std::vector<std::string>& schema) {
  auto t = text::tokenize(q);
  t.insert(t.end(), schema.begin(), schema.end());
  return t;
}

/// 32 complex questions with reference decompositions, sampled with `seed`
/// from a small template pool over the toy schema.
inline std::vector<TrainingPair> toy_corpus(std::uint64_t seed = 42, std::size_t n = 32) {
  const std::vector<std::string> ms = {"price", "rating", "reviews"};
  std::vector<detail::ToyTemplate> pool;
  using QC = QuestionClass;
  for (const auto& m : ms) {
    auto f = [&m](std::string s) {
      for (auto at = s.find("{m}"); at != std::string::npos; at = s.find("{m}")) s.replace(at, 3, m);
      return s;
    };
    pool.push_back({QC::ComplexTypeII, f("how is the {m}?"), f("which genre has the highest {m}?"), f("what is the trend of {m} over year?")});
    pool.push_back({QC::ComplexTypeII, f("what is the outlier of {m}?"), f("which year has anomaly {m}?"), f("which genre has anomaly {m}?")});
    pool.push_back({QC::ComplexTypeI, f("compare the {m} of fiction and poetry"),
                    f("in fiction, what is the trend of {m} over year?"), f("in poetry, what is the trend of {m} over year?")});
    pool.push_back({QC::ComplexTypeI, f("does any genre have high {m} and an increasing trend?"),
                    f("which genre has the highest {m}?"), f("what is the trend of {m} over year?")});
  }
  for (const auto& a : ms)
    for (const auto& b : ms) {
      if (a == b) continue;
      pool.push_back({QC::ComplexTypeI, "in the year with most " + a + ", what is the distribution of " + b + " over genre?",
                      "which year has the highest " + a + "?", "what is the overall distribution of " + b + " over genre?"});
      for (const char* r1 : {"highest", "lowest"})
        for (const char* r2 : {"highest", "lowest"})
          pool.push_back({QC::ComplexTypeI, std::string("which genre has the ") + r1 + " " + a + " and the " + r2 + " " + b + "?",
                          std::string("which genre has the ") + r1 + " " + a + "?",
                          std::string("which genre has the ") + r2 + " " + b + "?"});
    }
  pool.push_back({QC::ComplexTypeII, "which genre is an outlier?", "which genre has anomaly price?", "which genre has anomaly rating?"});

  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i + 1 < pool.size(); ++i) {
    auto j = i + static_cast<std::size_t>(rng() % (pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  if (n > pool.size()) throw PreconditionError("toy corpus has only " + std::to_string(pool.size()) + " templates");
  std::vector<TrainingPair> out;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& t = pool[i];
    out.push_back({with_schema(t.complex, toy_schema_tokens()), t.cls, text::tokenize(t.sub1), text::tokenize(t.sub2)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pipeline adapter

class NeuralDecomposer final : public Decomposer {
public:
  explicit NeuralDecomposer(ModelState m) : m_(std::move(m)) {}

  std::string name() const override { return "neural"; }

  SubQuestions split(const FormulatedQuestion& fq, QuestionClass cls, const DataTable&) const override {
    auto [a, b] = decode_pair(m_, fq.serialized_tokens(), cls);
    if (a.empty() || b.empty()) throw DecomposeError("neural decoder produced an empty sub-question");
    return {text::join(a, " ") + "?", text::join(b, " ") + "?"};
  }

  const ModelState& state() const { return m_; }

private:
  ModelState m_;
};

} // namespace tabqa::neural
