#include <doctest.h>

#include <cmath>
#include <cstring>
#include <numbers>
#include <vector>

#include "monorl/nn/distributions.hpp"
#include "monorl/nn/init.hpp"
#include "monorl/nn/mlp.hpp"
#include "monorl/nn/optim.hpp"
#include "monorl/nn/rng.hpp"
#include "oracles.hpp"

using namespace monorl;

TEST_CASE("rng streams are reproducible and children are distinct") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.NextU64() == b.NextU64());
  Rng root(42);
  Rng env0 = root.Child("env", 0), env1 = root.Child("env", 1), init = root.Child("init", 0);
  CHECK(env0.seed() != env1.seed());
  CHECK(env0.seed() != init.seed());
  CHECK(Rng::DeriveSeed(42, "env", 0) == env0.seed());
  for (int i = 0; i < 1000; ++i) {
    const double u = a.Uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(a.Below(7) < 7);
  }
}

TEST_CASE("orthogonal init") {
  Rng rng(3);
  SUBCASE("1x1 is +-gain") {
    MatrixD m = OrthogonalInit(1, 1, 2.0, rng);
    CHECK(std::abs(std::abs(m(0, 0)) - 2.0) < 1e-12);
  }
  SUBCASE("square, seed 7") {
    Rng r7(7);
    MatrixD m = OrthogonalInit(4, 4, 1.0, r7);
    CHECK((m * m.transpose() - MatrixD::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-5);
  }
  SUBCASE("tall 64x4 with gain sqrt 2") {
    Rng r1(1);
    MatrixD m = OrthogonalInit(64, 4, std::sqrt(2.0), r1);
    CHECK((m.transpose() * m - 2.0 * MatrixD::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-4);
  }
  SUBCASE("every shape used by the training files") {
    const int shapes[][2] = {{64, 4},  {64, 64}, {2, 64},   {1, 64},  {64, 3},  {1, 3},
                             {64, 25}, {4, 64},  {120, 4},  {84, 120}, {2, 84}, {202, 84},
                             {256, 3}, {256, 256}, {1, 256}, {256, 4}, {2, 256}};
    for (const auto& s : shapes) {
      MatrixD m = OrthogonalInit(s[0], s[1], 1.5, rng);
      const double g2 = 2.25;
      if (s[0] <= s[1]) {
        CHECK((m * m.transpose() - g2 * MatrixD::Identity(s[0], s[0])).cwiseAbs().maxCoeff() <
              1e-5);
      } else {
        CHECK((m.transpose() * m - g2 * MatrixD::Identity(s[1], s[1])).cwiseAbs().maxCoeff() <
              1e-5);
      }
    }
  }
  SUBCASE("deterministic given seed") {
    Rng r1(11), r2(11);
    CHECK(OrthogonalInit(5, 9, 1.0, r1) == OrthogonalInit(5, 9, 1.0, r2));
  }
}

TEST_CASE("mlp forward") {
  SUBCASE("zero network gives zero output") {
    Mlp net(StackSpecs(3, {5}, 2, Activation::kTanh));
    Matrix x = Matrix::Random(4, 3);
    CHECK(net.Predict(x).cwiseAbs().maxCoeff() == 0.0f);
  }
  SUBCASE("identity layer passes input through") {
    MlpD net({{3, 3, Activation::kIdentity}});
    net.mutable_layers()[0].weight = MatrixD::Identity(3, 3);
    MatrixD x(2, 3);
    x << 1, -2, 3, 0.5, 0.25, -7;
    CHECK(net.Predict(x) == x);
  }
  SUBCASE("matches straight-line forward") {
    Rng rng(5);
    MlpD net(StackSpecs(3, {4}, 2, Activation::kTanh));
    InitFanInUniform(net, rng);
    std::vector<double> x = {0.3, -1.2, 0.7};
    MatrixD batch(1, 3);
    batch << x[0], x[1], x[2];
    auto out = net.Forward(batch).outputs;
    auto expected = oracle::ForwardOneRow(net, x);
    for (int j = 0; j < 2; ++j) CHECK(std::abs(out(0, j) - expected[j]) < 1e-12);
  }
  SUBCASE("dimension mismatch names expected and actual") {
    Mlp net(StackSpecs(3, {4}, 2, Activation::kTanh));
    try {
      net.Predict(Matrix::Zero(1, 5));
      FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
      CHECK(e.expected() == 3);
      CHECK(e.actual() == 5);
    }
  }
}

TEST_CASE("mlp backward") {
  SUBCASE("zero upstream gradient") {
    Rng rng(2);
    Mlp net(StackSpecs(3, {4}, 2, Activation::kTanh));
    InitOrthogonal(net, std::sqrt(2.0), 1.0, rng);
    auto fwd = net.Forward(Matrix::Random(5, 3));
    auto back = net.Backward(fwd.cache, Matrix::Zero(5, 2));
    for (auto block : back.grads.Blocks()) {
      for (float g : block) CHECK(g == 0.0f);
    }
  }
  SUBCASE("linear layer closed form") {
    MlpD net({{3, 2, Activation::kIdentity}});
    Rng rng(4);
    InitFanInUniform(net, rng);
    MatrixD x(1, 3);
    x << 1.0, 2.0, -1.0;
    MatrixD g(1, 2);
    g << 0.5, -3.0;
    auto fwd = net.Forward(x);
    auto back = net.Backward(fwd.cache, g);
    CHECK((back.grads.layers[0].weight - g.transpose() * x).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((back.grads.layers[0].bias - g.transpose()).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((back.grad_in - g * net.layers()[0].weight).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("finite differences on every network shape the algorithms use") {
    struct Shape {
      int in;
      std::vector<int> hidden;
      int out;
      Activation act;
    };
    const std::vector<Shape> shapes = {
        {4, {64, 64}, 2, Activation::kTanh},     // ppo actor
        {4, {64, 64}, 1, Activation::kTanh},     // ppo critic
        {25, {64, 64}, 4, Activation::kTanh},    // ppo_masked actor
        {3, {64, 64}, 1, Activation::kTanh},     // ppo_continuous actor
        {4, {120, 84}, 2, Activation::kRelu},    // dqn
        {4, {120, 84}, 202, Activation::kRelu},  // c51
        {3, {256, 256}, 1, Activation::kRelu},   // ddpg/td3 actor
        {4, {256, 256}, 1, Activation::kRelu},   // critics
        {3, {256, 256}, 2, Activation::kRelu},   // sac actor
    };
    Rng rng(17);
    for (const auto& s : shapes) {
      MlpD net(StackSpecs(s.in, s.hidden, s.out, s.act));
      InitFanInUniform(net, rng);
      MatrixD x(3, s.in);
      for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.Normal();
      MatrixD w(3, s.out);
      for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.Normal();
      const double err = oracle::MaxGradRelError(net, x, w, 1e-5, rng, 60);
      CHECK(err < 1e-4);
    }
  }
  SUBCASE("stale cache rejected") {
    Mlp net(StackSpecs(2, {3}, 1, Activation::kTanh));
    auto fwd = net.Forward(Matrix::Ones(1, 2));
    AdamState<float> adam;
    AdamStep(net, net.ZeroGrads(), adam);
    CHECK_THROWS_AS(net.Backward(fwd.cache, Matrix::Ones(1, 1)), std::invalid_argument);
    Mlp other(StackSpecs(2, {3}, 1, Activation::kTanh));
    auto fwd2 = other.Forward(Matrix::Ones(1, 2));
    CHECK_THROWS_AS(net.Backward(fwd2.cache, Matrix::Ones(1, 1)), std::invalid_argument);
  }
}

TEST_CASE("adam") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    Rng rng(1);
    Mlp net(StackSpecs(3, {4}, 2, Activation::kTanh));
    InitOrthogonal(net, 1.0, 1.0, rng);
    Mlp before = net;
    AdamState<float> state(AdamConfig{.lr = 1e-3});
    AdamStep(net, net.ZeroGrads(), state);
    CHECK(state.t == 1);
    for (size_t i = 0; i < net.layers().size(); ++i) {
      CHECK(net.layers()[i].weight == before.layers()[i].weight);
      CHECK(net.layers()[i].bias == before.layers()[i].bias);
    }
  }
  SUBCASE("first scalar step") {
    std::vector<double> theta = {0.0};
    std::vector<double> grad = {1.0};
    AdamState<double> state(AdamConfig{.lr = 1e-3, .eps = 1e-8});
    AdamStep<double>({std::span<double>(theta)}, {std::span<const double>(grad)}, state);
    CHECK(std::abs(theta[0] - (-1e-3 / (1.0 + 1e-8))) < 1e-15);
  }
  SUBCASE("ten steps on theta^2 match scalar oracle") {
    std::vector<double> theta = {1.0};
    AdamState<double> state(AdamConfig{.lr = 0.05});
    oracle::ScalarAdam ref{.lr = 0.05};
    double ref_theta = 1.0;
    double prev = std::abs(theta[0]);
    for (int i = 0; i < 10; ++i) {
      std::vector<double> grad = {2.0 * theta[0]};
      AdamStep<double>({std::span<double>(theta)}, {std::span<const double>(grad)}, state);
      ref_theta = ref.Step(ref_theta, 2.0 * ref_theta);
      CHECK(std::abs(theta[0] - ref_theta) < 1e-12);
      CHECK(std::abs(theta[0]) < prev);
      prev = std::abs(theta[0]);
    }
    CHECK(state.t == 10);
    for (double v : state.v[0]) CHECK(v >= 0.0);
  }
  SUBCASE("non-finite gradient fails without updating") {
    std::vector<double> theta = {1.0, 2.0};
    std::vector<double> grad = {0.1, std::nan("")};
    AdamState<double> state;
    CHECK_THROWS_AS(AdamStep<double>({std::span<double>(theta)}, {std::span<const double>(grad)},
                                     state),
                    std::domain_error);
    CHECK(theta[0] == 1.0);
    CHECK(state.t == 0);
  }
}

TEST_CASE("clip grad norm") {
  std::vector<float> g = {3.0f, 4.0f};
  SUBCASE("scales to max norm") {
    const double norm = ClipGradNorm<float>({std::span<float>(g)}, 1.0);
    CHECK(norm == doctest::Approx(5.0));
    CHECK(g[0] == doctest::Approx(0.6f));
    CHECK(g[1] == doctest::Approx(0.8f));
  }
  SUBCASE("identity below max norm") {
    ClipGradNorm<float>({std::span<float>(g)}, 10.0);
    CHECK(g[0] == 3.0f);
    CHECK(g[1] == 4.0f);
  }
  SUBCASE("joint clipping equals concatenated clipping") {
    std::vector<double> a = {1.0, -2.0, 0.5}, b = {4.0, 3.0};
    std::vector<double> cat = {1.0, -2.0, 0.5, 4.0, 3.0};
    const double n1 = ClipGradNorm<double>({std::span<double>(a), std::span<double>(b)}, 0.7);
    const double n2 = ClipGradNorm<double>({std::span<double>(cat)}, 0.7);
    CHECK(n1 == n2);
    for (int i = 0; i < 3; ++i) CHECK(a[i] == cat[i]);
    for (int i = 0; i < 2; ++i) CHECK(b[i] == cat[3 + i]);
  }
}

TEST_CASE("categorical") {
  SUBCASE("uniform logits") {
    std::vector<double> logits(5, 0.3);
    Categorical d(logits);
    CHECK(d.Entropy() == doctest::Approx(std::log(5.0)).epsilon(1e-14));
    for (double p : d.probs()) CHECK(p == doctest::Approx(0.2).epsilon(1e-14));
  }
  SUBCASE("extreme logits do not overflow") {
    std::vector<double> logits = {1000.0, 0.0};
    Categorical d(logits);
    CHECK(d.Prob(0) == doctest::Approx(1.0));
    CHECK(d.Prob(1) < 1e-300);
    CHECK(std::isfinite(d.Entropy()));
    CHECK(std::isfinite(d.LogProb(1)));
  }
  SUBCASE("empirical frequency within 3 sigma") {
    std::vector<double> logits = {0.0, std::log(3.0)};
    Categorical d(logits);
    Rng rng(123);
    const int n = 100000;
    int ones = 0;
    for (int i = 0; i < n; ++i) ones += d.Sample(rng);
    const double sigma = std::sqrt(0.75 * 0.25 / n);
    CHECK(std::abs(static_cast<double>(ones) / n - 0.75) < 3 * sigma);
  }
  SUBCASE("probabilities normalized and entropy bounded on random logits") {
    Rng rng(9);
    for (int trial = 0; trial < 200; ++trial) {
      const int a = 2 + static_cast<int>(rng.Below(8));
      std::vector<double> logits(a);
      for (double& l : logits) l = rng.Normal(0.0, 5.0);
      Categorical d(logits);
      double sum = 0.0;
      for (double p : d.probs()) sum += p;
      CHECK(std::abs(sum - 1.0) < 1e-12);
      CHECK(d.Entropy() >= 0.0);
      CHECK(d.Entropy() <= std::log(static_cast<double>(a)) + 1e-12);
    }
  }
  SUBCASE("analytic gradients match finite differences") {
    std::vector<double> logits = {0.2, -1.0, 0.7};
    Categorical d(logits);
    auto glp = d.LogProbGrad(2);
    auto gh = d.EntropyGrad();
    const double h = 1e-6;
    for (int k = 0; k < 3; ++k) {
      auto up = logits, dn = logits;
      up[k] += h;
      dn[k] -= h;
      const double fd_lp = (Categorical(up).LogProb(2) - Categorical(dn).LogProb(2)) / (2 * h);
      const double fd_h = (Categorical(up).Entropy() - Categorical(dn).Entropy()) / (2 * h);
      CHECK(glp[k] == doctest::Approx(fd_lp).epsilon(1e-6));
      CHECK(gh[k] == doctest::Approx(fd_h).epsilon(1e-6));
    }
  }
}

TEST_CASE("diagonal gaussian") {
  SUBCASE("log prob at the mean") {
    std::vector<double> mean = {0.5, -1.0, 2.0}, log_std = {0.0, 0.0, 0.0};
    DiagGaussian d(mean, log_std);
    CHECK(d.LogProb(mean) == doctest::Approx(-1.5 * std::log(2 * std::numbers::pi)));
  }
  SUBCASE("entropy closed form") {
    std::vector<double> mean = {0.0}, log_std = {0.0};
    CHECK(DiagGaussian(mean, log_std).Entropy() == doctest::Approx(1.41894).epsilon(1e-5));
  }
  SUBCASE("sample mean within 3 sigma / sqrt N") {
    std::vector<double> mean = {1.5}, log_std = {std::log(2.0)};
    DiagGaussian d(mean, log_std);
    Rng rng(77);
    const int n = 100000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += d.Sample(rng)[0];
    CHECK(std::abs(sum / n - 1.5) < 3.0 * 2.0 / std::sqrt(static_cast<double>(n)));
  }
  SUBCASE("gradients match finite differences") {
    std::vector<double> mean = {0.3}, log_std = {-0.4}, x = {1.1};
    std::vector<double> dm(1), dl(1);
    DiagGaussian(mean, log_std).LogProbGrad(x, dm, dl);
    const double h = 1e-6;
    auto lp = [&](double m, double l) {
      std::vector<double> mm = {m}, ll = {l};
      return DiagGaussian(mm, ll).LogProb(x);
    };
    CHECK(dm[0] == doctest::Approx((lp(0.3 + h, -0.4) - lp(0.3 - h, -0.4)) / (2 * h)));
    CHECK(dl[0] == doctest::Approx((lp(0.3, -0.4 + h) - lp(0.3, -0.4 - h)) / (2 * h)));
  }
}

TEST_CASE("tanh gaussian") {
  SUBCASE("deterministic mode is strictly inside the box") {
    std::vector<double> mean = {-30.0, 0.0, 30.0};
    for (double a : TanhGaussianMode(mean)) {
      CHECK(a > -1.0);
      CHECK(a < 1.0);
    }
  }
  SUBCASE("vanishing std limit") {
    std::vector<double> mean = {0.0, 0.0}, log_std = {-50.0, -50.0};
    Rng rng(1);
    auto s = TanhGaussianSampleLogProb(mean, log_std, rng);
    for (double a : s.action) CHECK(std::abs(a) < 0.05);
    // log_std clamps to -5; correction -ln(1 - a^2 + 1e-6) ~ 0.
    double expected = 0.0;
    for (int i = 0; i < 2; ++i) {
      expected += -0.5 * s.noise[i] * s.noise[i] + 5.0 - 0.5 * std::log(2 * std::numbers::pi);
      expected -= std::log(1.0 - s.action[i] * s.action[i] + 1e-6);
      CHECK(std::abs(std::log(1.0 - s.action[i] * s.action[i] + 1e-6)) < 3e-3);
    }
    CHECK(s.log_prob == doctest::Approx(expected).epsilon(1e-12));
  }
  SUBCASE("log prob matches change-of-variables oracle") {
    Rng rng(31);
    for (int trial = 0; trial < 50; ++trial) {
      const int d = 1 + static_cast<int>(rng.Below(3));
      std::vector<double> mean(d), log_std(d);
      for (int i = 0; i < d; ++i) {
        mean[i] = rng.Uniform(-1.0, 1.0);
        log_std[i] = rng.Uniform(-1.5, 0.3);
      }
      auto s = TanhGaussianSampleLogProb(mean, log_std, rng);
      bool near_edge = false;
      for (double a : s.action) near_edge |= std::abs(a) > 0.995;
      if (near_edge) continue;
      const double oracle_lp = oracle::SquashedLogDensityFd(mean, log_std, s.action, 1e-6);
      CHECK(std::abs(s.log_prob - oracle_lp) < 1e-3);
    }
  }
  SUBCASE("pathwise gradients match finite differences") {
    std::vector<double> mean = {0.2, -0.6}, log_std = {-0.3, 0.1}, noise = {0.7, -1.1};
    std::vector<double> w = {1.3, -0.4};
    const double c = 0.37;
    auto loss = [&](const std::vector<double>& m, const std::vector<double>& l) {
      auto s = TanhGaussianFromNoise(m, l, noise);
      return w[0] * s.action[0] + w[1] * s.action[1] + c * s.log_prob;
    };
    auto s = TanhGaussianFromNoise(mean, log_std, noise);
    std::vector<double> gm(2), gl(2);
    TanhGaussianBackward(s, log_std, w, c, gm, gl);
    const double h = 1e-6;
    for (int i = 0; i < 2; ++i) {
      auto mp = mean, mm = mean, lp = log_std, lm = log_std;
      mp[i] += h;
      mm[i] -= h;
      lp[i] += h;
      lm[i] -= h;
      CHECK(gm[i] == doctest::Approx((loss(mp, log_std) - loss(mm, log_std)) / (2 * h)));
      CHECK(gl[i] == doctest::Approx((loss(mean, lp) - loss(mean, lm)) / (2 * h)));
    }
  }
}

TEST_CASE("init + forward + backward + adam is bit-deterministic") {
  auto run = [] {
    Rng rng(2024);
    Rng init = rng.Child("init");
    Mlp net(StackSpecs(4, {64, 64}, 2, Activation::kTanh));
    InitOrthogonal(net, std::sqrt(2.0), 0.01, init);
    AdamState<float> adam(AdamConfig{.lr = 2.5e-4, .eps = 1e-5});
    Rng data = rng.Child("data");
    for (int step = 0; step < 5; ++step) {
      Matrix x(8, 4);
      for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = static_cast<float>(data.Normal());
      auto fwd = net.Forward(x);
      auto back = net.Backward(fwd.cache, fwd.outputs);
      AdamStep(net, back.grads, adam);
    }
    return net;
  };
  Mlp a = run(), b = run();
  for (size_t i = 0; i < a.layers().size(); ++i) {
    const auto& wa = a.layers()[i].weight;
    const auto& wb = b.layers()[i].weight;
    CHECK(std::memcmp(wa.data(), wb.data(), sizeof(float) * wa.size()) == 0);
    CHECK(std::memcmp(a.layers()[i].bias.data(), b.layers()[i].bias.data(),
                      sizeof(float) * a.layers()[i].bias.size()) == 0);
  }
}
