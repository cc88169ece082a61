#include "vitts/denoiser.hpp"

#include <cmath>
#include <stdexcept>

namespace vitts {

using namespace ag;

void DenoiserConfig::validate() const {
  if (layers < 1 || hidden < 1 || heads < 1 || mlp_ratio < 1)
    throw std::invalid_argument("DenoiserConfig: nonpositive field");
  if (hidden % heads != 0)
    throw std::invalid_argument("DenoiserConfig: hidden not divisible by heads");
}

DenoiserConfig make_config(const std::string& name) {
  DenoiserConfig c;
  c.name = name;
  if (name == "S") {
    c.layers = 4;
    c.hidden = 256;
    c.heads = 8;
  } else if (name == "B") {
    c.layers = 5;
    c.hidden = 384;
    c.heads = 12;
  } else if (name == "L") {
    c.layers = 6;
    c.hidden = 512;
    c.heads = 16;
  } else if (name == "XL") {
    c.layers = 8;
    c.hidden = 768;
    c.heads = 16;
  } else {
    throw std::invalid_argument("make_config: unknown config '" + name + "'");
  }
  return c;
}

Tensor sinusoid_embedding(int t, int width) {
  if (t < 0) throw std::invalid_argument("sinusoid_embedding: t must be >= 0");
  Tensor e(1, width);
  const int half = width / 2;
  for (int i = 0; i < half; ++i) {
    const double freq = std::pow(10000.0, -double(i) / double(half));
    e(0, i) = std::sin(t * freq);
    e(0, half + i) = std::cos(t * freq);
  }
  return e;
}

Tensor frame_positions(int frames, int width) {
  Tensor p(frames, width);
  const int half = width / 2;
  for (int f = 0; f < frames; ++f)
    for (int i = 0; i < half; ++i) {
      const double freq = std::pow(10000.0, -double(i) / double(half));
      p(f, i) = std::sin(f * freq);
      p(f, half + i) = std::cos(f * freq);
    }
  return p;
}

Var MultiHeadSelfAttention::operator()(const Var& h) const {
  const int width = h->cols();
  const int dh = width / heads;
  Var q = wq(h), k = wk(h), v = wv(h);
  std::vector<Var> outs;
  outs.reserve(size_t(heads));
  for (int hd = 0; hd < heads; ++hd) {
    Var qh = slice_cols(q, hd * dh, dh);
    Var kh = slice_cols(k, hd * dh, dh);
    Var vh = slice_cols(v, hd * dh, dh);
    Var attn = softmax_rows(scale(matmul_nt(qh, kh), 1.0 / std::sqrt(double(dh))));
    outs.push_back(matmul(attn, vh));
  }
  return wo(concat_cols(outs));
}

Var adaln_modulate(const Var& h, const Var& shift, const Var& scale_v) {
  return add(mul(add_scalar(scale_v, 1.0), layer_norm(h)), shift);
}

Var AdaLnBlock::operator()(const Var& h, const Var& cvec) const {
  if (cvec->cols() != h->cols() || cvec->rows() != h->rows())
    throw std::invalid_argument("AdaLnBlock: condition shape " + cvec->val.shape_str() +
                                " does not match hidden " + h->val.shape_str());
  const int w = h->cols();
  Var m = mod(silu(cvec));
  Var shift1 = slice_cols(m, 0, w);
  Var scale1 = slice_cols(m, w, w);
  Var gate1 = slice_cols(m, 2 * w, w);
  Var shift2 = slice_cols(m, 3 * w, w);
  Var scale2 = slice_cols(m, 4 * w, w);
  Var gate2 = slice_cols(m, 5 * w, w);

  Var x = add(h, mul(gate1, attn(adaln_modulate(h, shift1, scale1))));
  Var y = mlp_out(gelu(mlp_in(adaln_modulate(x, shift2, scale2))));
  return add(x, mul(gate2, y));
}

Denoiser::Denoiser(const DenoiserConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  in_proj = nn::Linear(80, cfg_.hidden, rng);
  t_embed = StepEmbedding(cfg_.hidden, rng);
  null_cond = nn::make_param(Tensor::randn(1, cfg_.hidden, rng, 0.02));
  blocks.reserve(size_t(cfg_.layers));
  for (int i = 0; i < cfg_.layers; ++i) blocks.emplace_back(cfg_, rng);
  final_mod = nn::Linear(cfg_.hidden, 2 * cfg_.hidden, rng, /*zero_init=*/true);
  out_proj = nn::Linear(cfg_.hidden, 80, rng, /*zero_init=*/true);
}

Var Denoiser::condition_stream(int frames, int t, const Var* cond) const {
  Var te = t_embed(t);
  if (cond != nullptr) {
    if ((*cond)->cols() != cfg_.hidden)
      throw std::invalid_argument("Denoiser: condition width mismatch");
    if ((*cond)->rows() != frames)
      throw std::invalid_argument("Denoiser: condition frame count mismatch");
    return add_rowvec(*cond, te);
  }
  return add_rowvec(repeat_rows(null_cond, {frames}), te);
}

Var Denoiser::forward(const Var& x_t, int t, const Var* cond) const {
  if (x_t->cols() != 80) throw std::invalid_argument("Denoiser: expected 80 mel bins");
  const int frames = x_t->rows();
  Var cvec = condition_stream(frames, t, cond);
  Var h = add(in_proj(x_t), constant(frame_positions(frames, cfg_.hidden)));
  for (const auto& b : blocks) h = b(h, cvec);
  Var fm = final_mod(silu(cvec));
  Var shift = slice_cols(fm, 0, cfg_.hidden);
  Var scale_v = slice_cols(fm, cfg_.hidden, cfg_.hidden);
  return out_proj(adaln_modulate(h, shift, scale_v));
}

void Denoiser::collect(const std::string& prefix, nn::ParamList& out) const {
  in_proj.collect(prefix + ".in_proj", out);
  t_embed.collect(prefix + ".t_embed", out);
  out.add(prefix + ".null_cond", null_cond);
  for (size_t i = 0; i < blocks.size(); ++i)
    blocks[i].collect(prefix + ".blocks." + std::to_string(i), out);
  final_mod.collect(prefix + ".final_mod", out);
  out_proj.collect(prefix + ".out_proj", out);
}

}  // namespace vitts
