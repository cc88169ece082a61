#pragma once

#include <memory>
#include <string>
#include <vector>

#include "vitts/diffusion.hpp"
#include "vitts/nn.hpp"

namespace vitts {

struct DenoiserConfig {
  std::string name = "S";
  int layers = 4;
  int hidden = 256;
  int heads = 8;
  int mlp_ratio = 4;

  void validate() const;
};

// Named size sweep: S (4, 256, 8), B (5, 384, 12), L (6, 512, 16),
// XL (8, 768, 16). Throws on unknown names.
DenoiserConfig make_config(const std::string& name);

// Raw sinusoidal embedding of an integer step: sin in the first half of the
// channels, cos in the second.
Tensor sinusoid_embedding(int t, int width);

// Sinusoidal step encoding followed by a two-layer feed-forward map.
struct StepEmbedding {
  nn::Linear l1, l2;

  StepEmbedding() = default;
  StepEmbedding(int width, Rng& rng) : l1(width, width, rng), l2(width, width, rng) {}
  ag::Var operator()(int t) const {
    return l2(ag::silu(l1(ag::constant(sinusoid_embedding(t, l1.weight->cols())))));
  }
  void collect(const std::string& p, nn::ParamList& out) const {
    l1.collect(p + ".l1", out);
    l2.collect(p + ".l2", out);
  }
};

struct MultiHeadSelfAttention {
  int heads = 1;
  nn::Linear wq, wk, wv, wo;

  MultiHeadSelfAttention() = default;
  MultiHeadSelfAttention(int width, int heads_, Rng& rng)
      : heads(heads_), wq(width, width, rng), wk(width, width, rng),
        wv(width, width, rng), wo(width, width, rng) {}
  ag::Var operator()(const ag::Var& h) const;
  void collect(const std::string& p, nn::ParamList& out) const {
    wq.collect(p + ".wq", out);
    wk.collect(p + ".wk", out);
    wv.collect(p + ".wv", out);
    wo.collect(p + ".wo", out);
  }
};

// Transformer block with adaptive layer norm: shift/scale/gate triples for
// both sublayers are regressed per frame from the conditioning stream and
// zero-initialized, so the block starts as the identity.
struct AdaLnBlock {
  nn::Linear mod;  // width -> 6*width, zero-init
  MultiHeadSelfAttention attn;
  nn::Linear mlp_in, mlp_out;

  AdaLnBlock() = default;
  AdaLnBlock(const DenoiserConfig& cfg, Rng& rng)
      : mod(cfg.hidden, 6 * cfg.hidden, rng, /*zero_init=*/true),
        attn(cfg.hidden, cfg.heads, rng),
        mlp_in(cfg.hidden, cfg.mlp_ratio * cfg.hidden, rng),
        mlp_out(cfg.mlp_ratio * cfg.hidden, cfg.hidden, rng) {}

  // cvec: frames x width conditioning (step embedding + condition)
  ag::Var operator()(const ag::Var& h, const ag::Var& cvec) const;
  void collect(const std::string& p, nn::ParamList& out) const {
    mod.collect(p + ".mod", out);
    attn.collect(p + ".attn", out);
    mlp_in.collect(p + ".mlp_in", out);
    mlp_out.collect(p + ".mlp_out", out);
  }
};

// (1 + scale) * LayerNorm(x) + shift, all frame-wise.
ag::Var adaln_modulate(const ag::Var& h, const ag::Var& shift, const ag::Var& scale);

// The diffusion transformer: 80 -> width input projection, sinusoidal frame
// positions, `layers` adaLN blocks, modulated final norm, zero-initialized
// 80-channel output head. Output is exactly zero at initialization.
class Denoiser {
 public:
  Denoiser(const DenoiserConfig& cfg, Rng& rng);

  // cond: frames x hidden, or nullptr for unconditional mode (learned null
  // condition vector).
  ag::Var forward(const ag::Var& x_t, int t, const ag::Var* cond) const;

  // the conditioning stream handed to every block; exposed for the control
  // branch which taps block inputs
  ag::Var condition_stream(int frames, int t, const ag::Var* cond) const;

  const DenoiserConfig& config() const { return cfg_; }
  void collect(const std::string& prefix, nn::ParamList& out) const;

 private:
  DenoiserConfig cfg_;

 public:
  nn::Linear in_proj;
  StepEmbedding t_embed;
  ag::Var null_cond;
  std::vector<AdaLnBlock> blocks;
  nn::Linear final_mod;  // width -> 2*width, zero-init
  nn::Linear out_proj;   // zero-init
};

// Sinusoidal position rows for a frame count, at the given width.
Tensor frame_positions(int frames, int width);

}  // namespace vitts
