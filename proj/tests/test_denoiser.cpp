#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "gradcheck.hpp"
#include "vitts/denoiser.hpp"
#include "vitts/optimizer.hpp"

using namespace vitts;
using namespace vitts::ag;

TEST_CASE("named configs match the size sweep") {
  auto s = make_config("S");
  CHECK(s.layers == 4);
  CHECK(s.hidden == 256);
  CHECK(s.heads == 8);
  auto b = make_config("B");
  CHECK(b.layers == 5);
  CHECK(b.hidden == 384);
  CHECK(b.heads == 12);
  auto l = make_config("L");
  CHECK(l.layers == 6);
  CHECK(l.hidden == 512);
  CHECK(l.heads == 16);
  auto xl = make_config("XL");
  CHECK(xl.layers == 8);
  CHECK(xl.hidden == 768);
  CHECK(xl.heads == 16);
  CHECK_THROWS(make_config("M"));
  DenoiserConfig bad;
  bad.hidden = 250;
  bad.heads = 8;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("parameter counts increase strictly S < B < L < XL") {
  size_t prev = 0;
  for (const char* name : {"S", "B", "L", "XL"}) {
    Rng rng(1);
    Denoiser d(make_config(name), rng);
    nn::ParamList params;
    d.collect("denoiser", params);
    CHECK(params.total_elems() > prev);
    prev = params.total_elems();
  }
}

TEST_CASE("raw sinusoid at t=0: sin half zero, cos half one") {
  Tensor e = sinusoid_embedding(0, 256);
  CHECK(e.cols() == 256);
  for (int i = 0; i < 128; ++i) {
    CHECK(e(0, i) == 0.0);
    CHECK(e(0, 128 + i) == 1.0);
  }
}

TEST_CASE("step embeddings are distinct over t in [1, 100]") {
  Rng rng(3);
  StepEmbedding emb(256, rng);
  std::vector<Tensor> vals;
  for (int t = 1; t <= 100; ++t) vals.push_back(emb(t)->val);
  CHECK(vals[0].cols() == 256);
  double min_dist = 1e300;
  for (size_t i = 0; i < vals.size(); ++i)
    for (size_t j = i + 1; j < vals.size(); ++j) {
      double d = 0;
      for (int c = 0; c < 256; ++c)
        d += (vals[i](0, c) - vals[j](0, c)) * (vals[i](0, c) - vals[j](0, c));
      min_dist = std::min(min_dist, std::sqrt(d));
    }
  CHECK(min_dist > 0.0);
}

TEST_CASE("every named config is the identity at initialization") {
  for (const char* name : {"S", "B"}) {
    Rng rng(7);
    auto cfg = make_config(name);
    Denoiser d(cfg, rng);
    Rng data_rng(11);
    // block stack is the identity on the hidden stream
    Var h = constant(Tensor::randn(9, cfg.hidden, data_rng));
    Var cvec = d.condition_stream(9, 5, nullptr);
    Var out = h;
    for (const auto& blk : d.blocks) out = blk(out, cvec);
    double max_dev = 0.0;
    for (size_t i = 0; i < out->val.size(); ++i)
      max_dev = std::max(max_dev, std::fabs(out->val.at(i) - h->val.at(i)));
    CHECK(max_dev < 1e-6);

    // full model output is exactly zero
    Var x = constant(Tensor::randn(9, 80, data_rng));
    Var y = d.forward(x, 17, nullptr);
    for (size_t i = 0; i < y->val.size(); ++i) CHECK(y->val.at(i) == 0.0);
  }
}

TEST_CASE("forward shape contract and conditional input checks") {
  Rng rng(13);
  Denoiser d(make_config("S"), rng);
  Var x = constant(Tensor::randn(37, 80, rng));
  Var cond = constant(Tensor::randn(37, 256, rng));
  Var y = d.forward(x, 3, &cond);
  CHECK(y->rows() == 37);
  CHECK(y->cols() == 80);
  Var short_cond = constant(Tensor::randn(20, 256, rng));
  CHECK_THROWS(d.forward(x, 3, &short_cond));
  Var wrong_width = constant(Tensor::randn(37, 128, rng));
  CHECK_THROWS(d.forward(x, 3, &wrong_width));
}

TEST_CASE("zero condition stream: modulation is set by the regressor bias alone") {
  Rng rng(17);
  DenoiserConfig cfg = make_config("S");
  cfg.layers = 1;
  Denoiser d(cfg, rng);
  Var h = constant(Tensor::randn(5, cfg.hidden, rng));
  Var zero_cvec = constant(Tensor(5, cfg.hidden));

  Var out0 = d.blocks[0](h, zero_cvec);
  // identical zero input -> identical output
  Var out0b = d.blocks[0](h, constant(Tensor(5, cfg.hidden)));
  CHECK(out0->val.vec() == out0b->val.vec());

  // raising the gate bias changes the output even with zero condition
  for (int c = 2 * cfg.hidden; c < 3 * cfg.hidden; ++c)
    d.blocks[0].mod.bias->val(0, c) = 0.5;
  Var out1 = d.blocks[0](h, zero_cvec);
  CHECK(out1->val.vec() != out0->val.vec());
}

TEST_CASE("gradients flow after init: one step moves out_proj and gates") {
  Rng rng(19);
  DenoiserConfig cfg = make_config("S");
  cfg.layers = 2;
  Denoiser d(cfg, rng);
  nn::ParamList params;
  d.collect("denoiser", params);
  params.assign_slots();
  Adam opt(&params, {.lr = 1e-3, .warmup_steps = 0});

  auto sched = make_schedule(100, 1e-4, 0.06);
  Tensor x0 = Tensor::randn(12, 80, rng);
  Tensor noise = Tensor::randn(12, 80, rng);
  DenoiserFn fn = [&](const Var& x_t, int t, const Var* c) {
    return d.forward(x_t, t, c);
  };
  GradSink sink(params.vars.size());
  Var loss = training_step_loss(fn, x0, nullptr, 40, noise, sched);
  CHECK(loss->val.item() > 0.5);  // zero prediction against unit noise
  backward(loss, &sink);

  Tensor out_w_before = d.out_proj.weight->val;
  Tensor mod_w_before = d.blocks[0].mod.weight->val;
  opt.step(sink.slots);
  CHECK(d.out_proj.weight->val.vec() != out_w_before.vec());
  CHECK(d.blocks[0].mod.weight->val.vec() != mod_w_before.vec());

  // after the step, output depends on the condition
  Tensor cond_t = Tensor::randn(12, cfg.hidden, rng);
  Var cond = leaf(cond_t, true);
  Var y = d.forward(constant(q_sample(x0, 40, noise, sched).data), 40, &cond);
  backward(mean_all(mul(y, y)));
  double grad_norm = 0.0;
  for (size_t i = 0; i < cond->grad.size(); ++i)
    grad_norm += cond->grad.at(i) * cond->grad.at(i);
  CHECK(grad_norm > 0.0);
}

TEST_CASE("denoiser forward gradcheck against central differences") {
  Rng rng(23);
  DenoiserConfig cfg;
  cfg.name = "tiny";
  cfg.layers = 1;
  cfg.hidden = 16;
  cfg.heads = 2;
  cfg.mlp_ratio = 2;
  Denoiser d(cfg, rng);
  // nudge the zero-init tensors so the whole path carries gradient
  for (size_t i = 0; i < d.out_proj.weight->val.size(); ++i)
    d.out_proj.weight->val.at(i) = 0.01 * rng.gaussian();
  for (size_t i = 0; i < d.blocks[0].mod.weight->val.size(); ++i)
    d.blocks[0].mod.weight->val.at(i) = 0.01 * rng.gaussian();

  Tensor x = Tensor::randn(4, 80, rng);
  Tensor cond_t = Tensor::randn(4, cfg.hidden, rng);
  Var cond = leaf(cond_t, true);
  auto build = [&] {
    Var y = d.forward(constant(x), 7, &cond);
    return mean_all(mul(y, y));
  };
  CHECK(vitts::testing::gradcheck({cond, d.in_proj.weight, d.out_proj.weight,
                                   d.blocks[0].mod.weight, d.blocks[0].attn.wq.weight,
                                   d.blocks[0].mlp_in.weight, d.null_cond},
                                  build) <= 1.0);
}

TEST_CASE("overfitting one sample drives the training loss under 0.05") {
  Rng rng(29);
  Denoiser d(make_config("S"), rng);
  nn::ParamList params;
  d.collect("denoiser", params);
  params.assign_slots();
  Adam opt(&params, {.lr = 1e-3, .warmup_steps = 0});
  auto sched = make_schedule(100, 1e-4, 0.06);

  Rng data_rng(31);
  Tensor x0 = Tensor::randn(16, 80, data_rng);
  DenoiserFn fn = [&](const Var& x_t, int t, const Var* c) {
    return d.forward(x_t, t, c);
  };
  double loss_val = 1.0;
  for (int step = 0; step < 500; ++step) {
    Rng step_rng(derive_seed(1000, "overfit", uint64_t(step)));
    const int t = 1 + int(step_rng.uniform_int(100));
    Tensor noise = Tensor::randn(16, 80, step_rng);
    GradSink sink(params.vars.size());
    Var loss = training_step_loss(fn, x0, nullptr, t, noise, sched);
    backward(loss, &sink);
    opt.step(sink.slots);
    loss_val = loss->val.item();
  }
  // average the stochastic objective over fresh draws at the end
  double avg = 0.0;
  Rng eval_rng(37);
  for (int i = 0; i < 50; ++i) {
    const int t = 1 + int(eval_rng.uniform_int(100));
    Tensor noise = Tensor::randn(16, 80, eval_rng);
    avg += training_step_loss(fn, x0, nullptr, t, noise, sched)->val.item();
  }
  avg /= 50.0;
  CHECK(avg < 0.05);
}
