#ifndef CCT_MODEL_HPP
#define CCT_MODEL_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <type_traits>
#include <vector>

#include "cct/errors.hpp"
#include "cct/rng.hpp"
#include "cct/sampler.hpp"
#include "cct/vocab.hpp"

namespace cct {

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <class S>
using Row = Eigen::Matrix<S, 1, Eigen::Dynamic>;

// Encoder-decoder shape. Desk defaults keep gradient checks in seconds; the
// reference configuration (12 layers, 12 heads, d_model 768, d_ff 3072,
// vocab 32128) lands near 220M parameters.
struct ModelConfig {
  int num_layers = 2;
  int num_heads = 2;
  int d_model = 64;
  int d_ff = 256;
  int vocab_size = 0;
  int max_src_len = 256;
  int max_tgt_len = 64;
  double dropout_rate = 0.0;

  void validate() const {
    if (num_layers < 1 || num_heads < 1 || d_model < 1 || d_ff < 1) throw DataError("model: dimensions must be >= 1");
    if (d_model % num_heads != 0) throw DataError("model: d_model must be divisible by num_heads");
    if (vocab_size < kNumSpecialIds) throw DataError("model: vocab_size must cover the special tokens");
    if (max_src_len < 1 || max_tgt_len < 1) throw DataError("model: sequence limits must be >= 1");
  }
};

// Closed-form trainable parameter count for a configuration. The token
// embedding is shared by the encoder input, decoder input, and the output
// projection.
inline std::uint64_t param_count(const ModelConfig& cfg) {
  const std::uint64_t d = static_cast<std::uint64_t>(cfg.d_model);
  const std::uint64_t ff = static_cast<std::uint64_t>(cfg.d_ff);
  const std::uint64_t v = static_cast<std::uint64_t>(cfg.vocab_size);
  const std::uint64_t attn = 4 * d * d + 4 * d;
  const std::uint64_t ffn = 2 * d * ff + ff + d;
  const std::uint64_t ln = 2 * d;
  const std::uint64_t enc_layer = ln + attn + ln + ffn;
  const std::uint64_t dec_layer = ln + attn + ln + attn + ln + ffn;
  const std::uint64_t layers = static_cast<std::uint64_t>(cfg.num_layers);
  return v * d                     // shared embedding
         + layers * enc_layer + ln  // encoder stack + final norm
         + layers * dec_layer + ln  // decoder stack + final norm
         + d + 1;                   // classification head
}

template <class S>
struct AttentionParams {
  Mat<S> wq, wk, wv, wo;
  Row<S> bq, bk, bv, bo;
};

template <class S>
struct LayerNormParams {
  Row<S> gamma, beta;
};

template <class S>
struct FfnParams {
  Mat<S> w1, w2;
  Row<S> b1, b2;
};

template <class S>
struct EncoderLayerParams {
  LayerNormParams<S> ln1;
  AttentionParams<S> attn;
  LayerNormParams<S> ln2;
  FfnParams<S> ffn;
};

template <class S>
struct DecoderLayerParams {
  LayerNormParams<S> ln1;
  AttentionParams<S> self_attn;
  LayerNormParams<S> ln2;
  AttentionParams<S> cross_attn;
  LayerNormParams<S> ln3;
  FfnParams<S> ffn;
};

// All trainable tensors. Pre-norm residual blocks; the classification head
// reads the encoder output at position 0 ([CLS]).
template <class S>
struct ModelParams {
  ModelConfig config;
  Mat<S> embed;  // vocab x d_model, shared with the output projection
  std::vector<EncoderLayerParams<S>> enc;
  LayerNormParams<S> enc_final;
  std::vector<DecoderLayerParams<S>> dec;
  LayerNormParams<S> dec_final;
  Vec<S> cls_w;
  Row<S> cls_b;  // single coefficient

  template <class F>
  void for_each_tensor(F&& f) {
    f("embed", embed);
    for (std::size_t l = 0; l < enc.size(); ++l) {
      auto& e = enc[l];
      const std::string p = "enc" + std::to_string(l) + ".";
      f((p + "ln1.g").c_str(), e.ln1.gamma);
      f((p + "ln1.b").c_str(), e.ln1.beta);
      f((p + "wq").c_str(), e.attn.wq);
      f((p + "wk").c_str(), e.attn.wk);
      f((p + "wv").c_str(), e.attn.wv);
      f((p + "wo").c_str(), e.attn.wo);
      f((p + "bq").c_str(), e.attn.bq);
      f((p + "bk").c_str(), e.attn.bk);
      f((p + "bv").c_str(), e.attn.bv);
      f((p + "bo").c_str(), e.attn.bo);
      f((p + "ln2.g").c_str(), e.ln2.gamma);
      f((p + "ln2.b").c_str(), e.ln2.beta);
      f((p + "w1").c_str(), e.ffn.w1);
      f((p + "b1").c_str(), e.ffn.b1);
      f((p + "w2").c_str(), e.ffn.w2);
      f((p + "b2").c_str(), e.ffn.b2);
    }
    f("enc_final.g", enc_final.gamma);
    f("enc_final.b", enc_final.beta);
    for (std::size_t l = 0; l < dec.size(); ++l) {
      auto& d = dec[l];
      const std::string p = "dec" + std::to_string(l) + ".";
      f((p + "ln1.g").c_str(), d.ln1.gamma);
      f((p + "ln1.b").c_str(), d.ln1.beta);
      f((p + "self.wq").c_str(), d.self_attn.wq);
      f((p + "self.wk").c_str(), d.self_attn.wk);
      f((p + "self.wv").c_str(), d.self_attn.wv);
      f((p + "self.wo").c_str(), d.self_attn.wo);
      f((p + "self.bq").c_str(), d.self_attn.bq);
      f((p + "self.bk").c_str(), d.self_attn.bk);
      f((p + "self.bv").c_str(), d.self_attn.bv);
      f((p + "self.bo").c_str(), d.self_attn.bo);
      f((p + "ln2.g").c_str(), d.ln2.gamma);
      f((p + "ln2.b").c_str(), d.ln2.beta);
      f((p + "cross.wq").c_str(), d.cross_attn.wq);
      f((p + "cross.wk").c_str(), d.cross_attn.wk);
      f((p + "cross.wv").c_str(), d.cross_attn.wv);
      f((p + "cross.wo").c_str(), d.cross_attn.wo);
      f((p + "cross.bq").c_str(), d.cross_attn.bq);
      f((p + "cross.bk").c_str(), d.cross_attn.bk);
      f((p + "cross.bv").c_str(), d.cross_attn.bv);
      f((p + "cross.bo").c_str(), d.cross_attn.bo);
      f((p + "ln3.g").c_str(), d.ln3.gamma);
      f((p + "ln3.b").c_str(), d.ln3.beta);
      f((p + "w1").c_str(), d.ffn.w1);
      f((p + "b1").c_str(), d.ffn.b1);
      f((p + "w2").c_str(), d.ffn.w2);
      f((p + "b2").c_str(), d.ffn.b2);
    }
    f("dec_final.g", dec_final.gamma);
    f("dec_final.b", dec_final.beta);
    f("cls_w", cls_w);
    f("cls_b", cls_b);
  }

  template <class F>
  void for_each_tensor(F&& f) const {
    const_cast<ModelParams*>(this)->for_each_tensor([&](const char* name, auto& t) {
      f(name, static_cast<const std::remove_reference_t<decltype(t)>&>(t));
    });
  }

  std::uint64_t size() const {
    std::uint64_t n = 0;
    for_each_tensor([&](const char*, const auto& t) { n += static_cast<std::uint64_t>(t.size()); });
    return n;
  }

  ModelParams zeros_like() const {
    ModelParams z = *this;
    z.for_each_tensor([](const char*, auto& t) { t.setZero(); });
    return z;
  }

  void set_zero() {
    for_each_tensor([](const char*, auto& t) { t.setZero(); });
  }

  bool all_finite() const {
    bool ok = true;
    for_each_tensor([&](const char*, const auto& t) {
      if (!t.allFinite()) ok = false;
    });
    return ok;
  }

  // Flat coefficient access in for_each_tensor order (gradient checking).
  S get_flat(std::uint64_t index) const {
    S out{};
    std::uint64_t seen = 0;
    for_each_tensor([&](const char*, const auto& t) {
      const std::uint64_t sz = static_cast<std::uint64_t>(t.size());
      if (index >= seen && index < seen + sz) out = t.data()[index - seen];
      seen += sz;
    });
    return out;
  }
  void add_flat(std::uint64_t index, S delta) {
    std::uint64_t seen = 0;
    for_each_tensor([&](const char*, auto& t) {
      const std::uint64_t sz = static_cast<std::uint64_t>(t.size());
      if (index >= seen && index < seen + sz) t.data()[index - seen] += delta;
      seen += sz;
    });
  }
};

namespace detail {

template <class S>
void init_normal(Mat<S>& m, Rng& rng, double std_dev) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<S>(rng.normal() * std_dev);
}

template <class S>
void init_attention(AttentionParams<S>& a, int d, Rng& rng, double std_dev) {
  a.wq.resize(d, d);
  a.wk.resize(d, d);
  a.wv.resize(d, d);
  a.wo.resize(d, d);
  init_normal(a.wq, rng, std_dev);
  init_normal(a.wk, rng, std_dev);
  init_normal(a.wv, rng, std_dev);
  init_normal(a.wo, rng, std_dev);
  a.bq = Row<S>::Zero(d);
  a.bk = Row<S>::Zero(d);
  a.bv = Row<S>::Zero(d);
  a.bo = Row<S>::Zero(d);
}

template <class S>
void init_layernorm(LayerNormParams<S>& ln, int d) {
  ln.gamma = Row<S>::Ones(d);
  ln.beta = Row<S>::Zero(d);
}

template <class S>
void init_ffn(FfnParams<S>& f, int d, int ff, Rng& rng, double std_dev) {
  f.w1.resize(d, ff);
  f.w2.resize(ff, d);
  init_normal(f.w1, rng, std_dev);
  init_normal(f.w2, rng, std_dev);
  f.b1 = Row<S>::Zero(ff);
  f.b2 = Row<S>::Zero(d);
}

}  // namespace detail

template <class S>
ModelParams<S> init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  constexpr double kInitStd = 0.02;
  Rng rng(mix64(seed));
  ModelParams<S> p;
  p.config = cfg;
  p.embed.resize(cfg.vocab_size, cfg.d_model);
  detail::init_normal(p.embed, rng, kInitStd);
  p.enc.resize(static_cast<std::size_t>(cfg.num_layers));
  for (auto& e : p.enc) {
    detail::init_layernorm(e.ln1, cfg.d_model);
    detail::init_attention(e.attn, cfg.d_model, rng, kInitStd);
    detail::init_layernorm(e.ln2, cfg.d_model);
    detail::init_ffn(e.ffn, cfg.d_model, cfg.d_ff, rng, kInitStd);
  }
  detail::init_layernorm(p.enc_final, cfg.d_model);
  p.dec.resize(static_cast<std::size_t>(cfg.num_layers));
  for (auto& d : p.dec) {
    detail::init_layernorm(d.ln1, cfg.d_model);
    detail::init_attention(d.self_attn, cfg.d_model, rng, kInitStd);
    detail::init_layernorm(d.ln2, cfg.d_model);
    detail::init_attention(d.cross_attn, cfg.d_model, rng, kInitStd);
    detail::init_layernorm(d.ln3, cfg.d_model);
    detail::init_ffn(d.ffn, cfg.d_model, cfg.d_ff, rng, kInitStd);
  }
  detail::init_layernorm(p.dec_final, cfg.d_model);
  p.cls_w = Vec<S>::Zero(cfg.d_model);
  p.cls_b = Row<S>::Zero(1);
  return p;
}

namespace detail {

constexpr double kLnEps = 1e-5;
constexpr double kMaskValue = -1e30;

template <class S>
Mat<S> positional_encoding(int len, int d) {
  Mat<S> pe(len, d);
  for (int pos = 0; pos < len; ++pos) {
    for (int i = 0; i < d; i += 2) {
      const double angle = pos / std::pow(10000.0, static_cast<double>(i) / d);
      pe(pos, i) = static_cast<S>(std::sin(angle));
      if (i + 1 < d) pe(pos, i + 1) = static_cast<S>(std::cos(angle));
    }
  }
  return pe;
}

// Inverted dropout; active only when rate > 0 and an rng is supplied.
template <class S>
struct DropoutCtx {
  double rate = 0.0;
  Rng* rng = nullptr;
  bool active() const { return rate > 0.0 && rng != nullptr; }
};

template <class S>
struct LnCache {
  Mat<S> x_hat;
  Vec<S> inv_sigma;
};

template <class S>
Mat<S> layernorm_fwd(const LayerNormParams<S>& ln, const Mat<S>& x, LnCache<S>& cache) {
  const Vec<S> mu = x.rowwise().mean();
  Mat<S> xc = x;
  xc.colwise() -= mu;
  const Vec<S> var = xc.array().square().rowwise().mean().matrix();
  cache.inv_sigma = (var.array() + static_cast<S>(kLnEps)).rsqrt().matrix();
  cache.x_hat = (xc.array().colwise() * cache.inv_sigma.array()).matrix();
  Mat<S> y = (cache.x_hat.array().rowwise() * ln.gamma.array()).matrix();
  y.array().rowwise() += ln.beta.array();
  return y;
}

template <class S>
Mat<S> layernorm_bwd(const LayerNormParams<S>& ln, LayerNormParams<S>& grad, const LnCache<S>& cache,
                     const Mat<S>& dy) {
  grad.gamma.array() += (dy.array() * cache.x_hat.array()).colwise().sum();
  grad.beta.array() += dy.array().colwise().sum();
  const Mat<S> dxh = (dy.array().rowwise() * ln.gamma.array()).matrix();
  const Vec<S> m1 = dxh.rowwise().mean();
  const Vec<S> m2 = (dxh.array() * cache.x_hat.array()).rowwise().mean().matrix();
  Mat<S> t = dxh;
  t.colwise() -= m1;
  t.array() -= cache.x_hat.array().colwise() * m2.array();
  return (t.array().colwise() * cache.inv_sigma.array()).matrix();
}

template <class S>
struct AttnCache {
  Mat<S> q_in, kv_in;
  Mat<S> q, k, v;
  std::vector<Mat<S>> attn;  // per head, rows sum to 1
  Mat<S> ctx;
  Mat<S> drop_mask;  // empty when dropout inactive
};

template <class S>
void apply_dropout(Mat<S>& x, Mat<S>& mask, const DropoutCtx<S>& drop) {
  if (!drop.active()) return;
  const S keep = static_cast<S>(1.0 - drop.rate);
  mask.resize(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    mask.data()[i] = drop.rng->uniform01() < drop.rate ? S(0) : S(1) / keep;
  }
  x.array() *= mask.array();
}

template <class S>
Mat<S> attention_fwd(const AttentionParams<S>& p, int num_heads, const Mat<S>& q_in, const Mat<S>& kv_in,
                     bool causal, Eigen::Index key_valid, AttnCache<S>& cache, const DropoutCtx<S>& drop) {
  const Eigen::Index n = q_in.rows();
  const Eigen::Index m = kv_in.rows();
  const Eigen::Index d = q_in.cols();
  const Eigen::Index dh = d / num_heads;
  const S scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dh)));

  cache.q_in = q_in;
  cache.kv_in = kv_in;
  cache.q = (q_in * p.wq).rowwise() + p.bq;
  cache.k = (kv_in * p.wk).rowwise() + p.bk;
  cache.v = (kv_in * p.wv).rowwise() + p.bv;
  cache.attn.assign(static_cast<std::size_t>(num_heads), Mat<S>());
  cache.ctx.resize(n, d);

  for (int h = 0; h < num_heads; ++h) {
    const auto qh = cache.q.middleCols(h * dh, dh);
    const auto kh = cache.k.middleCols(h * dh, dh);
    const auto vh = cache.v.middleCols(h * dh, dh);
    Mat<S> scores = qh * kh.transpose() * scale;
    if (key_valid < m) {
      scores.rightCols(m - key_valid).setConstant(static_cast<S>(kMaskValue));
    }
    if (causal) {
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < m; ++j) scores(i, j) = static_cast<S>(kMaskValue);
      }
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      auto row = scores.row(i);
      const S mx = row.maxCoeff();
      row = (row.array() - mx).exp();
      row /= row.sum();
    }
    cache.attn[static_cast<std::size_t>(h)] = scores;
    cache.ctx.middleCols(h * dh, dh) = scores * vh;
  }
  Mat<S> out = (cache.ctx * p.wo).rowwise() + p.bo;
  apply_dropout(out, cache.drop_mask, drop);
  return out;
}

// Accumulates input gradients; for self-attention pass the same matrix as
// d_q_in and d_kv_in.
template <class S>
void attention_bwd(const AttentionParams<S>& p, AttentionParams<S>& grad, int num_heads, const AttnCache<S>& cache,
                   Mat<S> d_out, Mat<S>& d_q_in, Mat<S>& d_kv_in) {
  const Eigen::Index d = cache.q_in.cols();
  const Eigen::Index dh = d / num_heads;
  const S scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dh)));

  if (cache.drop_mask.size() > 0) d_out.array() *= cache.drop_mask.array();

  grad.wo += cache.ctx.transpose() * d_out;
  grad.bo += d_out.colwise().sum();
  const Mat<S> d_ctx = d_out * p.wo.transpose();

  Mat<S> dq(cache.q.rows(), d);
  Mat<S> dk(cache.k.rows(), d);
  Mat<S> dv(cache.v.rows(), d);
  for (int h = 0; h < num_heads; ++h) {
    const Mat<S>& a = cache.attn[static_cast<std::size_t>(h)];
    const auto vh = cache.v.middleCols(h * dh, dh);
    const auto qh = cache.q.middleCols(h * dh, dh);
    const auto kh = cache.k.middleCols(h * dh, dh);
    const auto d_ctx_h = d_ctx.middleCols(h * dh, dh);

    const Mat<S> da = d_ctx_h * vh.transpose();
    dv.middleCols(h * dh, dh) = a.transpose() * d_ctx_h;

    const Vec<S> row_dot = (a.array() * da.array()).rowwise().sum().matrix();
    Mat<S> ds = da;
    ds.colwise() -= row_dot;
    ds.array() *= a.array();

    dq.middleCols(h * dh, dh) = ds * kh * scale;
    dk.middleCols(h * dh, dh) = ds.transpose() * qh * scale;
  }

  grad.wq += cache.q_in.transpose() * dq;
  grad.bq += dq.colwise().sum();
  grad.wk += cache.kv_in.transpose() * dk;
  grad.bk += dk.colwise().sum();
  grad.wv += cache.kv_in.transpose() * dv;
  grad.bv += dv.colwise().sum();

  d_q_in += dq * p.wq.transpose();
  d_kv_in += dk * p.wk.transpose() + dv * p.wv.transpose();
}

template <class S>
struct FfnCache {
  Mat<S> x_in, pre_act;
  Mat<S> drop_mask;
};

template <class S>
Mat<S> ffn_fwd(const FfnParams<S>& p, const Mat<S>& x, FfnCache<S>& cache, const DropoutCtx<S>& drop) {
  cache.x_in = x;
  cache.pre_act = (x * p.w1).rowwise() + p.b1;
  const Mat<S> h = cache.pre_act.cwiseMax(S(0));
  Mat<S> out = (h * p.w2).rowwise() + p.b2;
  apply_dropout(out, cache.drop_mask, drop);
  return out;
}

template <class S>
Mat<S> ffn_bwd(const FfnParams<S>& p, FfnParams<S>& grad, const FfnCache<S>& cache, Mat<S> dy) {
  if (cache.drop_mask.size() > 0) dy.array() *= cache.drop_mask.array();
  const Mat<S> h = cache.pre_act.cwiseMax(S(0));
  grad.w2 += h.transpose() * dy;
  grad.b2 += dy.colwise().sum();
  Mat<S> dh = dy * p.w2.transpose();
  dh.array() *= (cache.pre_act.array() > S(0)).template cast<S>();
  grad.w1 += cache.x_in.transpose() * dh;
  grad.b1 += dh.colwise().sum();
  return dh * p.w1.transpose();
}

template <class S>
struct EncLayerCache {
  LnCache<S> ln1;
  AttnCache<S> attn;
  LnCache<S> ln2;
  FfnCache<S> ffn;
};

template <class S>
struct EncCache {
  std::vector<int> ids;  // possibly truncated
  Eigen::Index n_valid = 0;
  std::vector<EncLayerCache<S>> layers;
  LnCache<S> final_ln;
  Mat<S> hidden;  // final output
};

template <class S>
struct DecLayerCache {
  LnCache<S> ln1;
  AttnCache<S> self_attn;
  LnCache<S> ln2;
  AttnCache<S> cross_attn;
  LnCache<S> ln3;
  FfnCache<S> ffn;
};

template <class S>
struct DecCache {
  std::vector<int> ids;
  std::vector<DecLayerCache<S>> layers;
  LnCache<S> final_ln;
  Mat<S> hidden;
};

template <class S>
Eigen::Index trailing_pad(const std::vector<int>& ids) {
  Eigen::Index pads = 0;
  for (auto it = ids.rbegin(); it != ids.rend() && *it == kIdPad; ++it) ++pads;
  return pads;
}

template <class S>
Mat<S> embed_rows(const ModelParams<S>& p, const std::vector<int>& ids) {
  Mat<S> x(static_cast<Eigen::Index>(ids.size()), p.config.d_model);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= p.config.vocab_size) throw DataError("model: token id out of range");
    x.row(static_cast<Eigen::Index>(i)) = p.embed.row(ids[i]);
  }
  x += positional_encoding<S>(static_cast<int>(ids.size()), p.config.d_model);
  return x;
}

template <class S>
void encoder_fwd(const ModelParams<S>& p, const std::vector<int>& input_ids, EncCache<S>& cache,
                 const DropoutCtx<S>& drop) {
  cache.ids = input_ids;
  if (cache.ids.size() > static_cast<std::size_t>(p.config.max_src_len)) {
    cache.ids.resize(static_cast<std::size_t>(p.config.max_src_len));
  }
  if (cache.ids.empty()) throw DataError("model: empty encoder input");
  cache.n_valid = static_cast<Eigen::Index>(cache.ids.size()) - trailing_pad<S>(cache.ids);
  if (cache.n_valid == 0) throw DataError("model: encoder input is all padding");

  Mat<S> x = embed_rows(p, cache.ids);
  cache.layers.resize(p.enc.size());
  for (std::size_t l = 0; l < p.enc.size(); ++l) {
    const EncoderLayerParams<S>& lp = p.enc[l];
    EncLayerCache<S>& lc = cache.layers[l];
    const Mat<S> a_in = layernorm_fwd(lp.ln1, x, lc.ln1);
    x += attention_fwd(lp.attn, p.config.num_heads, a_in, a_in, /*causal=*/false, cache.n_valid, lc.attn, drop);
    const Mat<S> f_in = layernorm_fwd(lp.ln2, x, lc.ln2);
    x += ffn_fwd(lp.ffn, f_in, lc.ffn, drop);
  }
  cache.hidden = layernorm_fwd(p.enc_final, x, cache.final_ln);
}

// Returns the gradient w.r.t. the encoder's embedded input rows and
// accumulates parameter gradients.
template <class S>
void encoder_bwd(const ModelParams<S>& p, ModelParams<S>& grads, const EncCache<S>& cache, const Mat<S>& d_hidden) {
  Mat<S> d = layernorm_bwd(p.enc_final, grads.enc_final, cache.final_ln, d_hidden);
  for (std::size_t l = p.enc.size(); l-- > 0;) {
    const EncoderLayerParams<S>& lp = p.enc[l];
    const EncLayerCache<S>& lc = cache.layers[l];
    Mat<S> d_f_in = Mat<S>::Zero(d.rows(), d.cols());
    d_f_in += ffn_bwd(lp.ffn, grads.enc[l].ffn, lc.ffn, d);
    d += layernorm_bwd(lp.ln2, grads.enc[l].ln2, lc.ln2, d_f_in);
    Mat<S> d_a_in = Mat<S>::Zero(d.rows(), d.cols());
    attention_bwd(lp.attn, grads.enc[l].attn, p.config.num_heads, lc.attn, d, d_a_in, d_a_in);
    d += layernorm_bwd(lp.ln1, grads.enc[l].ln1, lc.ln1, d_a_in);
  }
  for (std::size_t i = 0; i < cache.ids.size(); ++i) {
    grads.embed.row(cache.ids[i]) += d.row(static_cast<Eigen::Index>(i));
  }
}

template <class S>
void decoder_fwd(const ModelParams<S>& p, const std::vector<int>& dec_input_ids, const Mat<S>& enc_hidden,
                 Eigen::Index enc_valid, DecCache<S>& cache, const DropoutCtx<S>& drop) {
  cache.ids = dec_input_ids;
  if (cache.ids.empty()) throw DataError("model: empty decoder input");
  Mat<S> x = embed_rows(p, cache.ids);
  cache.layers.resize(p.dec.size());
  const Eigen::Index n = x.rows();
  for (std::size_t l = 0; l < p.dec.size(); ++l) {
    const DecoderLayerParams<S>& lp = p.dec[l];
    DecLayerCache<S>& lc = cache.layers[l];
    const Mat<S> s_in = layernorm_fwd(lp.ln1, x, lc.ln1);
    x += attention_fwd(lp.self_attn, p.config.num_heads, s_in, s_in, /*causal=*/true, n, lc.self_attn, drop);
    const Mat<S> c_in = layernorm_fwd(lp.ln2, x, lc.ln2);
    x += attention_fwd(lp.cross_attn, p.config.num_heads, c_in, enc_hidden, /*causal=*/false, enc_valid,
                       lc.cross_attn, drop);
    const Mat<S> f_in = layernorm_fwd(lp.ln3, x, lc.ln3);
    x += ffn_fwd(lp.ffn, f_in, lc.ffn, drop);
  }
  cache.hidden = layernorm_fwd(p.dec_final, x, cache.final_ln);
}

// Backward through the decoder; accumulates the gradient w.r.t. the encoder
// hidden states into d_enc_hidden.
template <class S>
void decoder_bwd(const ModelParams<S>& p, ModelParams<S>& grads, const DecCache<S>& cache, const Mat<S>& d_hidden,
                 Mat<S>& d_enc_hidden) {
  Mat<S> d = layernorm_bwd(p.dec_final, grads.dec_final, cache.final_ln, d_hidden);
  for (std::size_t l = p.dec.size(); l-- > 0;) {
    const DecoderLayerParams<S>& lp = p.dec[l];
    const DecLayerCache<S>& lc = cache.layers[l];
    Mat<S> d_f_in = Mat<S>::Zero(d.rows(), d.cols());
    d_f_in += ffn_bwd(lp.ffn, grads.dec[l].ffn, lc.ffn, d);
    d += layernorm_bwd(lp.ln3, grads.dec[l].ln3, lc.ln3, d_f_in);

    Mat<S> d_c_in = Mat<S>::Zero(d.rows(), d.cols());
    attention_bwd(lp.cross_attn, grads.dec[l].cross_attn, p.config.num_heads, lc.cross_attn, d, d_c_in, d_enc_hidden);
    d += layernorm_bwd(lp.ln2, grads.dec[l].ln2, lc.ln2, d_c_in);

    Mat<S> d_s_in = Mat<S>::Zero(d.rows(), d.cols());
    attention_bwd(lp.self_attn, grads.dec[l].self_attn, p.config.num_heads, lc.self_attn, d, d_s_in, d_s_in);
    d += layernorm_bwd(lp.ln1, grads.dec[l].ln1, lc.ln1, d_s_in);
  }
  for (std::size_t i = 0; i < cache.ids.size(); ++i) {
    grads.embed.row(cache.ids[i]) += d.row(static_cast<Eigen::Index>(i));
  }
}

// Cross-entropy over the framed target, teacher-forced. Returns the loss sum
// and, when d_logits != nullptr, the gradient rows (softmax - onehot).
// Positions whose gold token is [PAD] are excluded.
template <class S>
double ce_loss(const Mat<S>& dec_hidden, const Mat<S>& embed, const std::vector<int>& framed_target,
               Mat<S>* d_logits) {
  const Eigen::Index n = dec_hidden.rows();
  double loss = 0.0;
  if (d_logits != nullptr) d_logits->setZero(n, embed.rows());
  for (Eigen::Index pos = 0; pos < n; ++pos) {
    const int gold = framed_target[static_cast<std::size_t>(pos) + 1];
    if (gold == kIdPad) continue;
    const Row<S> logits = dec_hidden.row(pos) * embed.transpose();
    // log-sum-exp in double for stable losses near zero
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < logits.size(); ++j) mx = std::max(mx, static_cast<double>(logits[j]));
    double sum = 0.0;
    for (Eigen::Index j = 0; j < logits.size(); ++j) sum += std::exp(static_cast<double>(logits[j]) - mx);
    const double lse = mx + std::log(sum);
    loss += lse - static_cast<double>(logits[gold]);
    if (d_logits != nullptr) {
      for (Eigen::Index j = 0; j < logits.size(); ++j) {
        (*d_logits)(pos, j) = static_cast<S>(std::exp(static_cast<double>(logits[j]) - lse));
      }
      (*d_logits)(pos, gold) -= S(1);
    }
  }
  return loss;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Public operations
// ---------------------------------------------------------------------------

template <class S>
struct EncodeResult {
  Mat<S> hidden;       // (len, d_model)
  Vec<S> cls_vector;   // hidden state at position 0
  Eigen::Index n_valid = 0;
};

// Over-length input is truncated to max_src_len. Trailing [PAD] ids are
// masked out of attention.
template <class S>
EncodeResult<S> encode(const ModelParams<S>& params, const std::vector<int>& input_ids) {
  detail::EncCache<S> cache;
  detail::DropoutCtx<S> no_drop;
  detail::encoder_fwd(params, input_ids, cache, no_drop);
  EncodeResult<S> r;
  r.hidden = std::move(cache.hidden);
  r.cls_vector = r.hidden.row(0).transpose();
  r.n_valid = cache.n_valid;
  return r;
}

// Teacher-forced negative log-likelihood summed over target positions.
// framed_target must be [BOS] ... [EOS] (length >= 2); [PAD] positions are
// excluded from the sum.
template <class S>
double seq2seq_loss(const ModelParams<S>& params, const std::vector<int>& input_ids,
                    const std::vector<int>& framed_target) {
  if (framed_target.size() < 2) throw DataError("model: framed target must hold at least [BOS] and [EOS]");
  detail::DropoutCtx<S> no_drop;
  detail::EncCache<S> enc_cache;
  detail::encoder_fwd(params, input_ids, enc_cache, no_drop);
  std::vector<int> dec_input(framed_target.begin(), framed_target.end() - 1);
  detail::DecCache<S> dec_cache;
  detail::decoder_fwd(params, dec_input, enc_cache.hidden, enc_cache.n_valid, dec_cache, no_drop);
  return detail::ce_loss<S>(dec_cache.hidden, params.embed, framed_target, nullptr);
}

// Same loss with gradient accumulation into `grads`.
template <class S>
double seq2seq_loss_and_grad(const ModelParams<S>& params, const std::vector<int>& input_ids,
                             const std::vector<int>& framed_target, ModelParams<S>& grads, Rng* dropout_rng = nullptr) {
  if (framed_target.size() < 2) throw DataError("model: framed target must hold at least [BOS] and [EOS]");
  detail::DropoutCtx<S> drop{params.config.dropout_rate, dropout_rng};
  detail::EncCache<S> enc_cache;
  detail::encoder_fwd(params, input_ids, enc_cache, drop);
  std::vector<int> dec_input(framed_target.begin(), framed_target.end() - 1);
  detail::DecCache<S> dec_cache;
  detail::decoder_fwd(params, dec_input, enc_cache.hidden, enc_cache.n_valid, dec_cache, drop);

  Mat<S> d_logits;
  const double loss = detail::ce_loss<S>(dec_cache.hidden, params.embed, framed_target, &d_logits);

  // logits = dec_hidden * embed^T  (tied output projection)
  const Mat<S> d_dec_hidden = d_logits * params.embed;
  grads.embed += d_logits.transpose() * dec_cache.hidden;

  Mat<S> d_enc_hidden = Mat<S>::Zero(enc_cache.hidden.rows(), enc_cache.hidden.cols());
  detail::decoder_bwd(params, grads, dec_cache, d_dec_hidden, d_enc_hidden);
  detail::encoder_bwd(params, grads, enc_cache, d_enc_hidden);
  return loss;
}

// One (input, framed target) pair tagged with its pre-training task.
struct TaskExample {
  PretrainTask task = PretrainTask::Mlm4cc;
  std::vector<int> input_ids;
  std::vector<int> framed_target;
};

// Unweighted sum of per-task losses; each task's loss is the sum over its
// examples.
template <class S>
double combined_pretrain_loss(const ModelParams<S>& params,
                              const std::map<PretrainTask, std::vector<TaskExample>>& batch_per_task) {
  bool any = false;
  double total = 0.0;
  for (const auto& [task, examples] : batch_per_task) {
    for (const TaskExample& ex : examples) {
      total += seq2seq_loss(params, ex.input_ids, ex.framed_target);
      any = true;
    }
  }
  if (!any) throw DataError("model: combined loss needs at least one task in the batch");
  return total;
}

template <class S>
double combined_pretrain_loss_and_grad(const ModelParams<S>& params,
                                       const std::map<PretrainTask, std::vector<TaskExample>>& batch_per_task,
                                       ModelParams<S>& grads, Rng* dropout_rng = nullptr) {
  bool any = false;
  double total = 0.0;
  for (const auto& [task, examples] : batch_per_task) {
    for (const TaskExample& ex : examples) {
      total += seq2seq_loss_and_grad(params, ex.input_ids, ex.framed_target, grads, dropout_rng);
      any = true;
    }
  }
  if (!any) throw DataError("model: combined loss needs at least one task in the batch");
  return total;
}

// Sigmoid probability from the linear head over the [CLS] vector.
template <class S>
double classify(const ModelParams<S>& params, const std::vector<int>& input_ids) {
  const EncodeResult<S> enc = encode(params, input_ids);
  const double z = static_cast<double>((params.cls_w.transpose() * enc.cls_vector)(0, 0)) +
                   static_cast<double>(params.cls_b(0, 0));
  return 1.0 / (1.0 + std::exp(-z));
}

// Binary cross-entropy on the classification head, gradients included.
template <class S>
double classify_loss_and_grad(const ModelParams<S>& params, const std::vector<int>& input_ids, bool label,
                              ModelParams<S>& grads) {
  detail::DropoutCtx<S> no_drop;
  detail::EncCache<S> cache;
  detail::encoder_fwd(params, input_ids, cache, no_drop);
  const Vec<S> cls = cache.hidden.row(0).transpose();
  const double z = static_cast<double>((params.cls_w.transpose() * cls)(0, 0)) + static_cast<double>(params.cls_b(0, 0));
  const double prob = 1.0 / (1.0 + std::exp(-z));
  const double y = label ? 1.0 : 0.0;
  const double eps = 1e-12;
  const double loss = -(y * std::log(prob + eps) + (1.0 - y) * std::log(1.0 - prob + eps));

  const S dz = static_cast<S>(prob - y);
  grads.cls_w += cls * dz;
  grads.cls_b(0, 0) += dz;
  Mat<S> d_hidden = Mat<S>::Zero(cache.hidden.rows(), cache.hidden.cols());
  d_hidden.row(0) = (params.cls_w * dz).transpose();
  detail::encoder_bwd(params, grads, cache, d_hidden);
  return loss;
}

// Greedy decoding from [BOS]; stops at [EOS] or max_tgt_len tokens. Ties
// break toward the lowest id; [PAD] is never emitted. The returned ids
// exclude [BOS]/[EOS].
template <class S>
std::vector<int> greedy_decode(const ModelParams<S>& params, const std::vector<int>& input_ids, int max_tgt_len) {
  detail::DropoutCtx<S> no_drop;
  detail::EncCache<S> enc_cache;
  detail::encoder_fwd(params, input_ids, enc_cache, no_drop);

  std::vector<int> dec_input{kIdBos};
  std::vector<int> out;
  for (int step = 0; step < max_tgt_len; ++step) {
    detail::DecCache<S> dec_cache;
    detail::decoder_fwd(params, dec_input, enc_cache.hidden, enc_cache.n_valid, dec_cache, no_drop);
    const Row<S> logits = dec_cache.hidden.row(dec_cache.hidden.rows() - 1) * params.embed.transpose();
    int best = -1;
    S best_v{};
    for (Eigen::Index j = 0; j < logits.size(); ++j) {
      if (static_cast<int>(j) == kIdPad) continue;
      if (best < 0 || logits[j] > best_v) {
        best = static_cast<int>(j);
        best_v = logits[j];
      }
    }
    if (best == kIdEos) break;
    out.push_back(best);
    dec_input.push_back(best);
  }
  return out;
}

// Central finite differences on a deterministic random subset (about 1%,
// at least 64 coefficients) of the parameters against the analytic gradient
// of the combined pre-training loss. Returns the max relative error.
template <class S>
double grad_check(ModelParams<S>& params, const std::map<PretrainTask, std::vector<TaskExample>>& batch, double epsilon,
                  std::uint64_t seed = 17) {
  static_assert(std::is_same_v<S, double>, "gradient checking requires the float64 model");
  ModelParams<S> grads = params.zeros_like();
  combined_pretrain_loss_and_grad(params, batch, grads);

  const std::uint64_t total = params.size();
  std::uint64_t subset = std::max<std::uint64_t>(64, total / 100);
  if (subset > total) subset = total;
  Rng rng(mix64(seed));
  std::vector<std::size_t> picks =
      rng.sample_without_replacement(static_cast<std::size_t>(total), static_cast<std::size_t>(subset));

  double max_rel = 0.0;
  for (std::size_t idx : picks) {
    const std::uint64_t i = static_cast<std::uint64_t>(idx);
    params.add_flat(i, static_cast<S>(epsilon));
    const double up = combined_pretrain_loss(params, batch);
    params.add_flat(i, static_cast<S>(-2.0 * epsilon));
    const double down = combined_pretrain_loss(params, batch);
    params.add_flat(i, static_cast<S>(epsilon));
    const double numeric = (up - down) / (2.0 * epsilon);
    const double analytic = static_cast<double>(grads.get_flat(i));
    const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-8});
    max_rel = std::max(max_rel, std::abs(numeric - analytic) / denom);
  }
  return max_rel;
}

// L2 norm over every gradient tensor.
template <class S>
double grad_norm(const ModelParams<S>& grads) {
  double sum = 0.0;
  grads.for_each_tensor([&](const char*, const auto& t) { sum += static_cast<double>(t.squaredNorm()); });
  return std::sqrt(sum);
}

}  // namespace cct

#endif  // CCT_MODEL_HPP
