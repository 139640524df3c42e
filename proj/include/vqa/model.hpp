#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vqa/autodiff.hpp"
#include "vqa/dataset.hpp"
#include "vqa/features.hpp"
#include "vqa/rng.hpp"
#include "vqa/text.hpp"

namespace vqa {

struct ModelConfig {
  int embed_dim = 300;    // E: word embedding width
  int video_dim = 8192;   // D: appearance + motion width
  int hidden = 512;       // H: encoder output width; each stacked layer is H/2
  int attn_hidden = 256;  // h: attention hidden width
  int n_max = 40;         // frame cap (uniform temporal subsampling above it)
};

void validate_config(const ModelConfig& cfg);

// One LSTM layer with fused gate weights, gate order [input, forget, cell,
// output]. Hidden/cell state start at zero.
template <typename T>
struct LstmLayer {
  Matrix<T> w_x;  // in × 4*hid
  Matrix<T> w_h;  // hid × 4*hid
  Matrix<T> b;    // 1 × 4*hid
};

template <typename T>
struct ModelParams {
  LstmLayer<T> text1, text2;    // text encoder, stacked
  LstmLayer<T> video1, video2;  // video encoder, stacked
  Matrix<T> w_v, w_w, b_s, w_s;  // fusion: H×h, H×h, 1×h, h×1
  Matrix<T> w_a, b_a, w_d, b_d;  // decoder: H×H, 1×H, H×1, 1×1

  // Fixed-order named view over every tensor; init, Adam, checkpoints and
  // gradient checks all iterate through this.
  std::vector<std::pair<std::string, Matrix<T>*>> tensors() {
    return {{"text1.w_x", &text1.w_x},   {"text1.w_h", &text1.w_h}, {"text1.b", &text1.b},
            {"text2.w_x", &text2.w_x},   {"text2.w_h", &text2.w_h}, {"text2.b", &text2.b},
            {"video1.w_x", &video1.w_x}, {"video1.w_h", &video1.w_h}, {"video1.b", &video1.b},
            {"video2.w_x", &video2.w_x}, {"video2.w_h", &video2.w_h}, {"video2.b", &video2.b},
            {"w_v", &w_v}, {"w_w", &w_w}, {"b_s", &b_s}, {"w_s", &w_s},
            {"w_a", &w_a}, {"b_a", &b_a}, {"w_d", &w_d}, {"b_d", &b_d}};
  }
  std::vector<std::pair<std::string, const Matrix<T>*>> tensors() const {
    auto* self = const_cast<ModelParams*>(this);
    std::vector<std::pair<std::string, const Matrix<T>*>> out;
    for (auto& [name, m] : self->tensors()) out.emplace_back(name, m);
    return out;
  }

  template <typename U>
  ModelParams<U> cast() const {
    ModelParams<U> out;
    auto src = tensors();
    auto dst = out.tensors();
    for (size_t i = 0; i < src.size(); ++i) *dst[i].second = src[i].second->template cast<U>();
    return out;
  }
};

// Uniform init in [-k, k] with k = 1/sqrt(fan_in): the input width for weight
// matrices, and the owning linear's input width for biases. Draw order is the
// tensors() order, row-major, from a single seeded stream.
template <typename T>
ModelParams<T> init_params(const ModelConfig& cfg, uint64_t seed) {
  validate_config(cfg);
  const int hid = cfg.hidden / 2;
  ModelParams<T> p;
  auto lstm = [&](LstmLayer<T>& l, int in) {
    l.w_x = Matrix<T>(in, 4 * hid);
    l.w_h = Matrix<T>(hid, 4 * hid);
    l.b = Matrix<T>(1, 4 * hid);
  };
  lstm(p.text1, cfg.embed_dim);
  lstm(p.text2, hid);
  lstm(p.video1, cfg.video_dim);
  lstm(p.video2, hid);
  p.w_v = Matrix<T>(cfg.hidden, cfg.attn_hidden);
  p.w_w = Matrix<T>(cfg.hidden, cfg.attn_hidden);
  p.b_s = Matrix<T>(1, cfg.attn_hidden);
  p.w_s = Matrix<T>(cfg.attn_hidden, 1);
  p.w_a = Matrix<T>(cfg.hidden, cfg.hidden);
  p.b_a = Matrix<T>(1, cfg.hidden);
  p.w_d = Matrix<T>(cfg.hidden, 1);
  p.b_d = Matrix<T>(1, 1);

  std::map<std::string, int> fan_in = {
      {"text1.w_x", cfg.embed_dim}, {"text1.w_h", hid}, {"text1.b", hid},
      {"text2.w_x", hid},           {"text2.w_h", hid}, {"text2.b", hid},
      {"video1.w_x", cfg.video_dim}, {"video1.w_h", hid}, {"video1.b", hid},
      {"video2.w_x", hid},          {"video2.w_h", hid}, {"video2.b", hid},
      {"w_v", cfg.hidden}, {"w_w", cfg.hidden}, {"b_s", cfg.hidden},
      {"w_s", cfg.attn_hidden},
      {"w_a", cfg.hidden}, {"b_a", cfg.hidden}, {"w_d", cfg.hidden}, {"b_d", cfg.hidden}};
  Rng rng(seed);
  for (auto& [name, m] : p.tensors()) {
    const double k = 1.0 / std::sqrt(double(fan_in.at(name)));
    for (size_t i = 0; i < m->size(); ++i) m->data()[i] = T(rng.uniform(-k, k));
  }
  return p;
}

template <typename T>
struct LstmVars {
  typename Tape<T>::Var w_x, w_h, b;
};

template <typename T>
struct ParamVars {
  LstmVars<T> text1, text2, video1, video2;
  typename Tape<T>::Var w_v, w_w, b_s, w_s, w_a, b_a, w_d, b_d;
};

template <typename T>
struct LiftedParams {
  ParamVars<T> vars;
  // (tensor name, tape var), tensors() order; grads are read back through it.
  std::vector<std::pair<std::string, typename Tape<T>::Var>> by_name;
};

template <typename T>
LiftedParams<T> lift_params(Tape<T>& tape, const ModelParams<T>& p, bool needs_grad) {
  LiftedParams<T> out;
  auto src = p.tensors();
  std::vector<typename Tape<T>::Var> vars;
  vars.reserve(src.size());
  for (auto& [name, m] : src) {
    auto v = tape.leaf(*m, needs_grad);
    vars.push_back(v);
    out.by_name.emplace_back(name, v);
  }
  auto& pv = out.vars;
  pv.text1 = {vars[0], vars[1], vars[2]};
  pv.text2 = {vars[3], vars[4], vars[5]};
  pv.video1 = {vars[6], vars[7], vars[8]};
  pv.video2 = {vars[9], vars[10], vars[11]};
  pv.w_v = vars[12];
  pv.w_w = vars[13];
  pv.b_s = vars[14];
  pv.w_s = vars[15];
  pv.w_a = vars[16];
  pv.b_a = vars[17];
  pv.w_d = vars[18];
  pv.b_d = vars[19];
  return out;
}

// Runs one LSTM layer over 1×in row vars; returns the hidden state per step.
template <typename T>
std::vector<typename Tape<T>::Var> lstm_run(Tape<T>& t, const LstmVars<T>& lp,
                                            std::span<const typename Tape<T>::Var> inputs,
                                            int hid) {
  using Var = typename Tape<T>::Var;
  Var h = t.leaf(Matrix<T>::zeros(1, hid));
  Var c = t.leaf(Matrix<T>::zeros(1, hid));
  std::vector<Var> hs;
  hs.reserve(inputs.size());
  for (Var x : inputs) {
    Var z = t.add(t.add(t.matmul(x, lp.w_x), t.matmul(h, lp.w_h)), lp.b);
    Var gi = t.sigmoid(t.slice_cols(z, 0, hid));
    Var gf = t.sigmoid(t.slice_cols(z, hid, hid));
    Var gg = t.tanh(t.slice_cols(z, 2 * hid, hid));
    Var go = t.sigmoid(t.slice_cols(z, 3 * hid, hid));
    c = t.add(t.hadamard(gf, c), t.hadamard(gi, gg));
    h = t.hadamard(go, t.tanh(c));
    hs.push_back(h);
  }
  return hs;
}

template <typename T>
std::vector<typename Tape<T>::Var> rows_as_leaves(Tape<T>& t, const Matrix<T>& m) {
  std::vector<typename Tape<T>::Var> rows;
  rows.reserve(size_t(m.rows()));
  for (int i = 0; i < m.rows(); ++i) rows.push_back(t.leaf(m.row(i)));
  return rows;
}

// Two stacked layers over the L×E question-answer embedding; output is
// [last hidden of layer 1 ; last hidden of layer 2], a 1×H row.
template <typename T>
typename Tape<T>::Var text_encode_graph(Tape<T>& t, const ParamVars<T>& pv,
                                        const Matrix<T>& phi_w, const ModelConfig& cfg) {
  const int hid = cfg.hidden / 2;
  auto xs = rows_as_leaves(t, phi_w);
  auto h1 = lstm_run(t, pv.text1, std::span<const typename Tape<T>::Var>(xs), hid);
  auto h2 = lstm_run(t, pv.text2, std::span<const typename Tape<T>::Var>(h1), hid);
  return t.concat_cols(h1.back(), h2.back());
}

// Same structure over the N×D video features, keeping every step:
// row t = [hidden of layer 1 at t ; hidden of layer 2 at t], shape N×H.
template <typename T>
typename Tape<T>::Var video_encode_graph(Tape<T>& t, const ParamVars<T>& pv,
                                         const Matrix<T>& phi_am, const ModelConfig& cfg) {
  const int hid = cfg.hidden / 2;
  auto xs = rows_as_leaves(t, phi_am);
  auto h1 = lstm_run(t, pv.video1, std::span<const typename Tape<T>::Var>(xs), hid);
  auto h2 = lstm_run(t, pv.video2, std::span<const typename Tape<T>::Var>(h1), hid);
  std::vector<typename Tape<T>::Var> rows;
  rows.reserve(h1.size());
  for (size_t i = 0; i < h1.size(); ++i) rows.push_back(t.concat_cols(h1[i], h2[i]));
  return t.stack_rows(std::span<const typename Tape<T>::Var>(rows));
}

// Temporal attention: scores tanh(eps_v W_v + eps_w W_w + b_s) W_s with the
// 1×h text term broadcast over the N rows, softmax over frames, then the
// alpha-weighted row sum of eps_v. Returns (alpha N×1, omega_a 1×H).
template <typename T>
std::pair<typename Tape<T>::Var, typename Tape<T>::Var> attend_graph(Tape<T>& t,
                                                                     const ParamVars<T>& pv,
                                                                     typename Tape<T>::Var eps_v,
                                                                     typename Tape<T>::Var eps_w) {
  auto pre = t.add_rowvec(t.add_rowvec(t.matmul(eps_v, pv.w_v), t.matmul(eps_w, pv.w_w)), pv.b_s);
  auto omega_s = t.matmul(t.tanh(pre), pv.w_s);
  auto alpha = t.softmax_col(omega_s);
  auto omega_a = t.col_sum(t.mul_colvec(eps_v, alpha));
  return {alpha, omega_a};
}

// d_f = tanh(omega_a W_a + b_a); score = (d_f ∘ eps_w) W_d + b_d (1×1).
template <typename T>
typename Tape<T>::Var decode_graph(Tape<T>& t, const ParamVars<T>& pv,
                                   typename Tape<T>::Var omega_a, typename Tape<T>::Var eps_w) {
  auto d_f = t.tanh(t.add(t.matmul(omega_a, pv.w_a), pv.b_a));
  return t.add(t.matmul(t.hadamard(d_f, eps_w), pv.w_d), pv.b_d);
}

// Video is encoded once per row; text encoding, attention and decoding run
// once per candidate (alpha depends on the candidate through eps_w).
template <typename T>
std::array<typename Tape<T>::Var, 5> score_candidates_graph(Tape<T>& t, const ParamVars<T>& pv,
                                                            const DatasetRow& row,
                                                            const Matrix<T>& phi_am,
                                                            const EmbeddingTable& table,
                                                            const ModelConfig& cfg) {
  auto eps_v = video_encode_graph(t, pv, phi_am, cfg);
  const auto q_tokens = tokenize(row.question);
  std::array<typename Tape<T>::Var, 5> scores;
  for (int c = 0; c < 5; ++c) {
    const auto a_tokens = tokenize(row.candidates[size_t(c)]);
    auto seq = embed_qa<T>(q_tokens, a_tokens, table);
    auto eps_w = text_encode_graph(t, pv, seq.matrix, cfg);
    auto [alpha, omega_a] = attend_graph(t, pv, eps_v, eps_w);
    scores[size_t(c)] = decode_graph(t, pv, omega_a, eps_w);
  }
  return scores;
}

// ---- forward-only entry points ----

template <typename T>
Matrix<T> text_encode(const Matrix<T>& phi_w, const ModelParams<T>& p, const ModelConfig& cfg) {
  if (!phi_w.all_finite()) throw numeric_error("text_encode: non-finite input");
  if (phi_w.rows() < 1) throw numeric_error("text_encode: empty sequence");
  Tape<T> t;
  auto lifted = lift_params(t, p, false);
  return t.value(text_encode_graph(t, lifted.vars, phi_w, cfg));
}

template <typename T>
Matrix<T> video_encode(const Matrix<T>& phi_am, const ModelParams<T>& p, const ModelConfig& cfg) {
  if (!phi_am.all_finite()) throw numeric_error("video_encode: non-finite input");
  if (phi_am.rows() < 1) throw numeric_error("video_encode: empty sequence");
  Tape<T> t;
  auto lifted = lift_params(t, p, false);
  return t.value(video_encode_graph(t, lifted.vars, phi_am, cfg));
}

template <typename T>
std::pair<Matrix<T>, Matrix<T>> attend(const Matrix<T>& eps_v, const Matrix<T>& eps_w,
                                       const ModelParams<T>& p) {
  if (eps_v.rows() < 1) throw numeric_error("attend: no frames");
  Tape<T> t;
  auto lifted = lift_params(t, p, false);
  auto [alpha, omega_a] = attend_graph(t, lifted.vars, t.leaf(eps_v), t.leaf(eps_w));
  return {t.value(alpha), t.value(omega_a)};
}

template <typename T>
T decode(const Matrix<T>& omega_a, const Matrix<T>& eps_w, const ModelParams<T>& p) {
  if (!omega_a.all_finite() || !eps_w.all_finite())
    throw numeric_error("decode: non-finite input");
  Tape<T> t;
  auto lifted = lift_params(t, p, false);
  return t.value(decode_graph(t, lifted.vars, t.leaf(omega_a), t.leaf(eps_w)))(0, 0);
}

// Capped, concatenated video features ready for encoding.
template <typename T>
Matrix<T> video_input(const ClipFeatures& cf, const ModelConfig& cfg) {
  return concat_features(subsample_frames(cf, cfg.n_max)).template cast<T>();
}

template <typename T>
std::array<T, 5> score_candidates(const DatasetRow& row, const FeatureStore& store,
                                  const EmbeddingTable& table, const ModelParams<T>& params,
                                  const ModelConfig& cfg) {
  const ClipFeatures& cf = store.load(row.clip_id);
  Matrix<T> phi_am = video_input<T>(cf, cfg);
  Tape<T> t;
  auto lifted = lift_params(t, params, false);
  auto vars = score_candidates_graph(t, lifted.vars, row, phi_am, table, cfg);
  std::array<T, 5> out;
  for (int c = 0; c < 5; ++c) out[size_t(c)] = t.value(vars[size_t(c)])(0, 0);
  return out;
}

// Index of the maximum score; ties break toward the lowest index.
template <typename T>
int predict(const std::array<T, 5>& scores) {
  int best = 0;
  for (int c = 0; c < 5; ++c) {
    if (!std::isfinite(double(scores[size_t(c)])))
      throw numeric_error("predict: non-finite score");
    if (scores[size_t(c)] > scores[size_t(best)]) best = c;
  }
  return best;
}

}  // namespace vqa
