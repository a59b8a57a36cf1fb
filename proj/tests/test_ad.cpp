#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>

#include "ad/checkpoint.hpp"
#include "ad/module.hpp"
#include "ad/optim.hpp"
#include "ad/tape.hpp"
#include "fdcheck.hpp"

using namespace ad;

TEST_SUITE_BEGIN("ad");

TEST_CASE("matmul identity passes input through") {
  Tensor eye = Tensor::from({2, 2}, {1, 0, 0, 1});
  Tensor v = Tensor::from({2, 1}, {3, 4});
  Tensor out = matmul(nullptr, eye, v);
  CHECK(out.at({0, 0}) == 3.0);
  CHECK(out.at({1, 0}) == 4.0);
}

TEST_CASE("softplus(0) = ln 2") {
  Tensor out = softplus(nullptr, Tensor::scalar(0.0));
  CHECK(out.item() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("softmax of constant row is uniform") {
  Tensor out = softmax_lastdim(nullptr, Tensor::from({3}, {2, 2, 2}));
  for (int i = 0; i < 3; ++i) CHECK(out.data()[i] == doctest::Approx(1.0 / 3).epsilon(1e-12));
}

TEST_CASE("apply_primitive rejects unknown kind and bad shapes") {
  CHECK_THROWS_AS(apply_primitive(nullptr, "qr-decomposition", {Tensor::scalar(1)}),
                  UnknownKindError);
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({2, 3});
  CHECK_THROWS_WITH_AS(static_cast<void>(matmul(nullptr, a, b)),
                       doctest::Contains("matmul"), ShapeError);
  CHECK_THROWS_AS(static_cast<void>(add(nullptr, Tensor::zeros({2, 3}), Tensor::zeros({2, 2}))),
                  ShapeError);
}

TEST_CASE("broadcasting follows trailing-dimension rules") {
  Tensor a = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor row = Tensor::from({3}, {10, 20, 30});
  Tensor out = add(nullptr, a, row);
  CHECK(out.at({1, 2}) == 36);
  Tensor col = Tensor::from({2, 1}, {100, 200});
  out = add(nullptr, a, col);
  CHECK(out.at({0, 2}) == 103);
  CHECK(out.at({1, 0}) == 204);
  Tensor s = mul(nullptr, a, Tensor::scalar(2));
  CHECK(s.at({1, 1}) == 10);
}

TEST_CASE("backward of sum(w*w) is 2w") {
  Tape tape;
  Tensor w = tape.leaf(Tensor::from({1}, {3}));
  Tensor loss = reduce_sum(&tape, mul(&tape, w, w));
  auto grads = tape.backward(loss);
  CHECK(grads.at(w.node()).data()[0] == doctest::Approx(6.0).epsilon(1e-14));
}

TEST_CASE("backward of sum(A x) gives column sums of A, matching finite differences") {
  Rng rng(7);
  Tensor A = randn(rng, {3, 4});
  Tensor x0 = randn(rng, {4, 1});
  Tape tape;
  Tensor x = tape.leaf(x0);
  Tensor loss = reduce_sum(&tape, matmul(&tape, A, x));
  auto grads = tape.backward(loss);
  const Tensor& gx = grads.at(x.node());
  for (int64_t j = 0; j < 4; ++j) {
    double col = 0;
    for (int64_t i = 0; i < 3; ++i) col += A.at({i, j});
    CHECK(gx.data()[j] == doctest::Approx(col).epsilon(1e-12));
  }
  auto f = [&](const Tensor& xv) { return reduce_sum(nullptr, matmul(nullptr, A, xv)).item(); };
  auto fdg = fd::central_diff(f, x0);
  auto cmp = fd::compare(std::vector<double>(gx.data(), gx.data() + gx.size()), fdg);
  CHECK(cmp.ok());
}

TEST_CASE("leaf the loss does not depend on gets a zero gradient") {
  Tape tape;
  Tensor w = tape.leaf(Tensor::from({2}, {1, 2}));
  Tensor v = tape.leaf(Tensor::from({3}, {5, 5, 5}));
  Tensor loss = reduce_sum(&tape, mul(&tape, w, w));
  auto grads = tape.backward(loss);
  const Tensor& gv = grads.at(v.node());
  for (int i = 0; i < 3; ++i) CHECK(gv.data()[i] == 0.0);
}

TEST_CASE("backward rejects non-scalar loss and foreign tensors") {
  Tape tape;
  Tensor w = tape.leaf(Tensor::from({2}, {1, 2}));
  Tensor y = mul(&tape, w, w);
  CHECK_THROWS_AS(tape.backward(y), ShapeError);
  Tape other;
  Tensor z = other.leaf(Tensor::scalar(1.0));
  CHECK_THROWS_AS(tape.backward(z), ShapeError);
}

// Finite-difference sweep over every primitive kind (the gradient-suite core).
namespace {

fd::CheckResult check_op_gradient(const std::function<Tensor(Tape*, const Tensor&)>& op,
                                  const Tensor& x0) {
  Tape tape;
  Tensor x = tape.leaf(x0);
  // Fixed projection to a scalar so FD has a single output to probe.
  Tensor y = op(&tape, x);
  Rng prng(99);
  Tensor proj = randn(prng, y.shape());
  Tensor loss = reduce_sum(&tape, mul(&tape, y, proj));
  auto grads = tape.backward(loss);
  const Tensor& gx = grads.at(x.node());
  auto f = [&](const Tensor& xv) {
    Tensor yv = op(nullptr, xv);
    return reduce_sum(nullptr, mul(nullptr, yv, proj)).item();
  };
  auto fdg = fd::central_diff(f, x0);
  return fd::compare(std::vector<double>(gx.data(), gx.data() + gx.size()), fdg);
}

}  // namespace

TEST_CASE("gradient check: every unary primitive") {
  Rng rng(1234);
  Tensor x0 = rand_uniform(rng, {4, 6}, -1.0, 1.0);
  Tensor xpos = rand_uniform(rng, {4, 6}, 0.2, 1.5);

  CHECK(check_op_gradient([](Tape* t, const Tensor& x) { return ad::exp(t, x); }, x0).ok());
  CHECK(check_op_gradient([](Tape* t, const Tensor& x) { return ad::log(t, x); }, xpos).ok());
  CHECK(check_op_gradient([](Tape* t, const Tensor& x) { return ad::sqrt(t, x); }, xpos).ok());
  CHECK(check_op_gradient([](Tape* t, const Tensor& x) { return softplus(t, x); }, x0).ok());
  CHECK(check_op_gradient([](Tape* t, const Tensor& x) { return sigmoid(t, x); }, x0).ok());
  CHECK(check_op_gradient([](Tape* t, const Tensor& x) { return silu(t, x); }, x0).ok());
  CHECK(check_op_gradient([](Tape* t, const Tensor& x) { return softmax_lastdim(t, x); }, x0).ok());
  CHECK(check_op_gradient([](Tape* t, const Tensor& x) { return layernorm_lastdim(t, x); }, x0).ok());
  CHECK(check_op_gradient([](Tape* t, const Tensor& x) { return ad::slice(t, x, 1, 1, 5); }, x0).ok());
  CHECK(check_op_gradient([](Tape* t, const Tensor& x) { return transpose(t, x, {1, 0}); }, x0).ok());
  CHECK(check_op_gradient([](Tape* t, const Tensor& x) { return reshape(t, x, {2, 12}); }, x0).ok());
  CHECK(check_op_gradient([](Tape* t, const Tensor& x) { return gather_rows(t, x, {2, 0, 2, 3}); }, x0).ok());
  CHECK(check_op_gradient(
            [](Tape* t, const Tensor& x) {
              Tensor s = reduce_sum(t, x);
              return reshape(t, s, {1});
            },
            x0)
            .ok());
  CHECK(check_op_gradient(
            [](Tape* t, const Tensor& x) {
              Tensor s = reduce_mean(t, x);
              return reshape(t, s, {1});
            },
            x0)
            .ok());
}

TEST_CASE("gradient check: binary primitives incl. broadcasting") {
  Rng rng(77);
  Tensor a0 = rand_uniform(rng, {3, 4}, -1.0, 1.0);
  Tensor b0 = rand_uniform(rng, {4}, 0.3, 1.2);
  Tensor m0 = rand_uniform(rng, {4, 5}, -1.0, 1.0);

  auto both = [&](auto opfn, const Tensor& x0, const Tensor& y0) {
    // gradient w.r.t. first argument
    {
      Tape tape;
      Tensor x = tape.leaf(x0);
      Tensor y = opfn(&tape, x, tape.leaf(y0));
      Rng prng(5);
      Tensor proj = randn(prng, y.shape());
      Tensor loss = reduce_sum(&tape, mul(&tape, y, proj));
      auto grads = tape.backward(loss);
      const Tensor& gx = grads.at(x.node());
      auto f = [&](const Tensor& xv) {
        return reduce_sum(nullptr, mul(nullptr, opfn(nullptr, xv, y0), proj)).item();
      };
      auto cmp = fd::compare(std::vector<double>(gx.data(), gx.data() + gx.size()),
                             fd::central_diff(f, x0));
      CHECK(cmp.ok());
    }
    // gradient w.r.t. second argument
    {
      Tape tape;
      Tensor y = tape.leaf(y0);
      Tensor out = opfn(&tape, tape.leaf(x0), y);
      Rng prng(6);
      Tensor proj = randn(prng, out.shape());
      Tensor loss = reduce_sum(&tape, mul(&tape, out, proj));
      auto grads = tape.backward(loss);
      const Tensor& gy = grads.at(y.node());
      auto f = [&](const Tensor& yv) {
        return reduce_sum(nullptr, mul(nullptr, opfn(nullptr, x0, yv), proj)).item();
      };
      auto cmp = fd::compare(std::vector<double>(gy.data(), gy.data() + gy.size()),
                             fd::central_diff(f, y0));
      CHECK(cmp.ok());
    }
  };

  both([](Tape* t, const Tensor& a, const Tensor& b) { return add(t, a, b); }, a0, b0);
  both([](Tape* t, const Tensor& a, const Tensor& b) { return mul(t, a, b); }, a0, b0);
  both([](Tape* t, const Tensor& a, const Tensor& b) { return divide(t, a, b); }, a0, b0);
  both([](Tape* t, const Tensor& a, const Tensor& b) { return matmul(t, a, b); }, a0, m0);
  both([](Tape* t, const Tensor& a, const Tensor& b) { return concat(t, {a, b}, 0); }, a0,
       Tensor::from({1, 4}, {1, 2, 3, 4}));
}

TEST_CASE("gradient check: batched matmul") {
  Rng rng(31);
  Tensor a0 = rand_uniform(rng, {2, 3, 4}, -1, 1);
  Tensor b0 = rand_uniform(rng, {2, 4, 2}, -1, 1);
  Tensor w0 = rand_uniform(rng, {4, 5}, -1, 1);
  {
    Tape tape;
    Tensor a = tape.leaf(a0);
    Tensor y = matmul(&tape, a, tape.leaf(b0));
    Tensor loss = reduce_sum(&tape, mul(&tape, y, y));
    auto grads = tape.backward(loss);
    auto f = [&](const Tensor& av) {
      Tensor yv = matmul(nullptr, av, b0);
      return reduce_sum(nullptr, mul(nullptr, yv, yv)).item();
    };
    const Tensor& ga = grads.at(a.node());
    CHECK(fd::compare(std::vector<double>(ga.data(), ga.data() + ga.size()),
                      fd::central_diff(f, a0))
              .ok());
  }
  {
    Tape tape;
    Tensor w = tape.leaf(w0);
    Tensor y = matmul(&tape, tape.leaf(a0), w);
    Tensor loss = reduce_sum(&tape, mul(&tape, y, y));
    auto grads = tape.backward(loss);
    auto f = [&](const Tensor& wv) {
      Tensor yv = matmul(nullptr, a0, wv);
      return reduce_sum(nullptr, mul(nullptr, yv, yv)).item();
    };
    const Tensor& gw = grads.at(w.node());
    CHECK(fd::compare(std::vector<double>(gw.data(), gw.data() + gw.size()),
                      fd::central_diff(f, w0))
              .ok());
  }
}

TEST_CASE("linearity: backward of a*f(x) equals a*backward of f(x)") {
  Rng rng(40);
  Tensor x0 = randn(rng, {5});
  auto grad_of = [&](double a) {
    Tape tape;
    Tensor x = tape.leaf(x0);
    Tensor loss = scale(&tape, reduce_sum(&tape, silu(&tape, x)), a);
    auto grads = tape.backward(loss);
    const Tensor& g = grads.at(x.node());
    return std::vector<double>(g.data(), g.data() + g.size());
  };
  auto g1 = grad_of(1.0);
  auto g3 = grad_of(3.5);
  for (size_t i = 0; i < g1.size(); ++i)
    CHECK(g3[i] == doctest::Approx(3.5 * g1[i]).epsilon(1e-10));
}

TEST_CASE("determinism: same seed gives bit-identical forward and gradients") {
  auto run = [] {
    Rng rng(2024);
    Tensor x0 = randn(rng, {6, 6});
    Tensor w0 = randn(rng, {6, 6});
    Tape tape;
    Tensor x = tape.leaf(x0);
    Tensor w = tape.leaf(w0);
    Tensor y = silu(&tape, matmul(&tape, x, w));
    Tensor loss = reduce_mean(&tape, mul(&tape, y, y));
    auto grads = tape.backward(loss);
    const Tensor& g = grads.at(w.node());
    std::vector<double> out(g.data(), g.data() + g.size());
    out.push_back(loss.item());
    return out;
  };
  auto r1 = run();
  auto r2 = run();
  CHECK(std::memcmp(r1.data(), r2.data(), r1.size() * sizeof(double)) == 0);
}

TEST_CASE("record replay reproduces every output bit-identically") {
  Rng rng(3);
  Tape tape;
  Tensor x = tape.leaf(randn(rng, {4, 4}));
  Tensor y = softmax_lastdim(&tape, matmul(&tape, x, tape.leaf(randn(rng, {4, 4}))));
  Tensor z = layernorm_lastdim(&tape, add(&tape, y, x));
  static_cast<void>(reduce_sum(&tape, z));
  CHECK(tape.replay_matches());
}

TEST_CASE("adam: zero gradient is a fixed point from fresh state") {
  ParamStore ps;
  ps["w"] = Tensor::from({2}, {1.5, -2.0});
  Adam opt;
  std::map<std::string, Tensor> grads{{"w", Tensor::zeros({2})}};
  opt.step(ps, grads);
  CHECK(ps.at("w").data()[0] == 1.5);
  CHECK(ps.at("w").data()[1] == -2.0);
  CHECK(opt.steps() == 1);
}

TEST_CASE("adam: constant positive gradient drives a scalar param strictly down") {
  ParamStore ps;
  ps["w"] = Tensor::scalar(1.0);
  Adam opt;
  double prev = 1.0;
  for (int i = 0; i < 100; ++i) {
    opt.step(ps, {{"w", Tensor::scalar(0.5)}});
    double cur = ps.at("w").item();
    CHECK(cur < prev);
    prev = cur;
  }
}

TEST_CASE("adam: missing and non-finite gradients are rejected") {
  ParamStore ps;
  ps["w"] = Tensor::scalar(1.0);
  Adam opt;
  CHECK_THROWS_AS(opt.step(ps, {}), MissingGradientError);
  CHECK_THROWS_AS(opt.step(ps, {{"w", Tensor::scalar(std::nan(""))}}), DivergenceError);
}

TEST_CASE("checkpoint round trip preserves names, shapes, bits") {
  Rng rng(88);
  ParamStore ps;
  ps["gnn/layer0/w"] = randn(rng, {3, 5});
  ps["gnn/layer0/b"] = randn(rng, {5});
  ps["ssm/a_log"] = randn(rng, {4, 8});
  ps["jscd/embed"] = randn(rng, {11, 2});
  auto path = std::filesystem::temp_directory_path() / "ad_ckpt_test.bin";
  save_checkpoint(path.string(), ps);
  ParamStore loaded;
  load_checkpoint(path.string(), loaded);
  REQUIRE(loaded.size() == ps.size());
  for (const auto& [name, t] : ps.params) {
    REQUIRE(loaded.contains(name));
    const Tensor& u = loaded.at(name);
    REQUIRE(u.shape() == t.shape());
    CHECK(std::memcmp(u.data(), t.data(), sizeof(double) * t.size()) == 0);
  }
  // prefix filtering
  ParamStore only_ssm;
  load_checkpoint(path.string(), only_ssm, "ssm/");
  CHECK(only_ssm.size() == 1);
  CHECK(only_ssm.contains("ssm/a_log"));
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_checkpoint(path.string(), loaded), CheckpointError);
}

TEST_SUITE_END();
