#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "monorl/algorithms/config.hpp"
#include "monorl/algorithms/losses.hpp"
#include "monorl/algorithms/train.hpp"
#include "monorl/envs/classic.hpp"
#include "monorl/nn/distributions.hpp"
#include "monorl/nn/init.hpp"
#include "monorl/nn/rng.hpp"
#include "monorl/tracking/checkpoint.hpp"
#include "monorl/tracking/run.hpp"
#include "temp_dir.hpp"

using namespace monorl;

namespace {

using Overrides = std::vector<std::pair<std::string, std::string>>;

std::string ErrorText(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

// ---- Straight-line oracles ----

struct PpoOracle {
  double total, policy, value, entropy, approx_kl, clip_fraction;
};

PpoOracle PpoLossOracle(const std::vector<double>& old_lp, const std::vector<double>& adv,
                        const std::vector<double>& ret, const std::vector<double>& old_v,
                        const std::vector<double>& new_lp, const std::vector<double>& ent,
                        const std::vector<double>& new_v, double eps, double ent_coef,
                        double vf_coef, bool clip_vloss) {
  const double n = static_cast<double>(old_lp.size());
  PpoOracle o{};
  for (size_t i = 0; i < old_lp.size(); ++i) {
    const double rho = std::exp(new_lp[i] - old_lp[i]);
    const double clipped = std::min(std::max(rho, 1.0 - eps), 1.0 + eps);
    o.policy += std::max(-rho * adv[i], -clipped * adv[i]) / n;
    const double unclipped_sq = (new_v[i] - ret[i]) * (new_v[i] - ret[i]);
    double v;
    if (clip_vloss) {
      const double vc = old_v[i] + std::min(std::max(new_v[i] - old_v[i], -eps), eps);
      v = 0.5 * std::max(unclipped_sq, (vc - ret[i]) * (vc - ret[i]));
    } else {
      v = 0.5 * unclipped_sq;
    }
    o.value += v / n;
    o.entropy += ent[i] / n;
    o.approx_kl += ((rho - 1.0) - std::log(rho)) / n;
    o.clip_fraction += (std::abs(rho - 1.0) > eps ? 1.0 : 0.0) / n;
  }
  o.total = o.policy - ent_coef * o.entropy + vf_coef * o.value;
  return o;
}

// Hat-function form of the categorical projection: atom i receives
// p_j * max(0, 1 - |Tz_j - z_i| / dz) from every source atom j.
std::vector<double> C51ScatterOracle(double v_min, double v_max, int n_atoms,
                                     const std::vector<double>& p, double r, double term,
                                     double gamma) {
  const double dz = (v_max - v_min) / (n_atoms - 1);
  std::vector<double> out(n_atoms, 0.0);
  for (int j = 0; j < n_atoms; ++j) {
    const double zj = v_min + j * dz;
    const double tz = std::min(std::max(r + gamma * (1.0 - term) * zj, v_min), v_max);
    std::vector<double> contribution(n_atoms, 0.0);
    for (int i = 0; i < n_atoms; ++i) {
      const double zi = v_min + i * dz;
      contribution[i] = p[j] * std::max(0.0, 1.0 - std::abs(tz - zi) / dz);
    }
    for (int i = 0; i < n_atoms; ++i) out[i] += contribution[i];
  }
  return out;
}

std::vector<double> RandomDist(int n, Rng& rng) {
  std::vector<double> p(n);
  double sum = 0.0;
  for (double& x : p) sum += (x = rng.Uniform() + 1e-3);
  for (double& x : p) x /= sum;
  return p;
}

// ---- Run helpers ----

TrainOutcome Train(const fs::path& root, const std::string& algo, const std::string& env,
                   uint64_t seed, int64_t steps, const Overrides& overrides = {},
                   const std::string& run_id = "") {
  TrainRequest request;
  request.config = MakeAlgoConfig(algo, env, seed, steps, overrides);
  request.runs_root = root;
  request.exp_name = "test";
  request.run_id = run_id;
  return RunTraining(request);
}

// metrics.jsonl with the wall-clock field dropped from every line.
std::vector<std::string> MetricsWithoutWallTime(const fs::path& run_dir) {
  std::ifstream in(run_dir / "metrics.jsonl");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    Json j = Json::parse(line);
    j.erase("wall_time_s");
    lines.push_back(j.dump());
  }
  return lines;
}

bool SameParameters(const Mlp& a, const Mlp& b) {
  if (a.num_layers() != b.num_layers()) return false;
  for (size_t k = 0; k < a.num_layers(); ++k) {
    if (a.layers()[k].weight != b.layers()[k].weight) return false;
    if (a.layers()[k].bias != b.layers()[k].bias) return false;
  }
  return true;
}

struct QuickCase {
  const char* algo;
  const char* env;
  int64_t steps;
  Overrides overrides;
};

// Small but complete configurations: every loop path (acting, updating,
// logging, target sync) runs at least once.
std::vector<QuickCase> QuickCases() {
  return {
      {"ppo", "cartpole-v1", 1024, {}},
      {"ppo_continuous", "pendulum-v1", 512,
       {{"num_steps", "256"}, {"num_minibatches", "4"}, {"update_epochs", "2"}}},
      {"ppo_masked", "maskedgrid-v0", 1024, {}},
      {"dqn", "cartpole-v1", 900,
       {{"learning_starts", "300"}, {"batch_size", "32"}, {"target_network_frequency", "100"}}},
      {"c51", "cartpole-v1", 900,
       {{"learning_starts", "300"}, {"batch_size", "32"}, {"target_network_frequency", "100"}}},
      {"ddpg", "pendulum-v1", 450, {{"learning_starts", "250"}, {"batch_size", "32"}}},
      {"td3", "pendulum-v1", 450, {{"learning_starts", "250"}, {"batch_size", "32"}}},
      {"sac", "pendulum-v1", 450, {{"learning_starts", "250"}, {"batch_size", "32"}}},
  };
}

}  // namespace

TEST_CASE("algorithm registry") {
  const auto& algos = ListAlgos();
  REQUIRE(algos.size() == 8);
  const char* ids[] = {"ppo", "ppo_continuous", "ppo_masked", "dqn", "c51", "ddpg", "td3", "sac"};
  for (const char* id : ids) {
    const AlgoInfo& info = FindAlgo(id);
    CHECK(info.id == id);
    CHECK(info.source_file == std::string(id) + ".cpp");
    REQUIRE(info.code_version.size() == 7 + 64);
    CHECK(info.code_version.rfind("sha256:", 0) == 0);
    CHECK(!info.schema().empty());
  }
  CHECK(FindAlgo("ppo").code_version != FindAlgo("dqn").code_version);
  const std::string err = ErrorText([] { FindAlgo("a2c"); });
  CHECK(err.find("unknown algorithm 'a2c'") != std::string::npos);
  CHECK(err.find("ppo_masked") != std::string::npos);
}

TEST_CASE("config construction and validation") {
  SUBCASE("defaults and manifest order") {
    const AlgoConfig c = MakeAlgoConfig("ppo", "cartpole-v1", 3, 1000);
    CHECK(c.Float("gamma") == 0.99);
    CHECK(c.Int("num_envs") == 4);
    CHECK(c.Bool("clip_vloss"));
    const Json j = c.ToJson();
    auto it = j.begin();
    CHECK(it.key() == "algo_id");
    CHECK((++it).key() == "env_id");
    CHECK((++it).key() == "seed");
    CHECK((++it).key() == "total_timesteps");
    CHECK(j.size() == 4 + FindAlgo("ppo").schema().size());
  }
  SUBCASE("overrides are typed") {
    const AlgoConfig c = MakeAlgoConfig("dqn", "cartpole-v1", 1, 10,
                                        {{"learning_starts", "5"}, {"gamma", "0.5"}});
    CHECK(c.Int("learning_starts") == 5);
    CHECK(c.Float("gamma") == 0.5);
  }
  SUBCASE("unknown key") {
    const std::string err =
        ErrorText([] { MakeAlgoConfig("ppo", "cartpole-v1", 1, 10, {{"gama", "0.9"}}); });
    CHECK(err.find("unknown config key 'gama'") != std::string::npos);
    CHECK(err.find("gamma") != std::string::npos);
  }
  SUBCASE("out of bounds names the field and the bound") {
    CHECK(ErrorText([] { MakeAlgoConfig("ppo", "cartpole-v1", 1, 10, {{"gamma", "1.5"}}); }) ==
          "config value gamma=1.5 is outside [0, 1]");
    const std::string lr =
        ErrorText([] { MakeAlgoConfig("sac", "pendulum-v1", 1, 10, {{"q_lr", "0"}}); });
    CHECK(lr.find("q_lr") != std::string::npos);
    CHECK(lr.find("(0,") != std::string::npos);
  }
  SUBCASE("unparseable values") {
    CHECK(ErrorText([] { MakeAlgoConfig("ppo", "cartpole-v1", 1, 10, {{"num_envs", "abc"}}); })
              .find("num_envs") != std::string::npos);
    CHECK(ErrorText([] { MakeAlgoConfig("ppo", "cartpole-v1", 1, 10, {{"norm_adv", "maybe"}}); })
              .find("not a boolean") != std::string::npos);
    CHECK_THROWS_AS(SplitAssignment("gamma"), ConfigError);
  }
  SUBCASE("negative step budget") {
    CHECK_THROWS_AS(MakeAlgoConfig("ppo", "cartpole-v1", 1, -1), ConfigError);
  }
  SUBCASE("validate rejects extra and missing fields") {
    AlgoConfig c = MakeAlgoConfig("ppo", "cartpole-v1", 1, 10);
    AlgoConfig extra = c;
    extra.params["bogus"] = 1;
    CHECK_THROWS_AS(ValidateConfig(FindAlgo("ppo").schema(), extra), ConfigError);
    AlgoConfig missing = c;
    missing.params.erase("gamma");
    CHECK_THROWS_AS(ValidateConfig(FindAlgo("ppo").schema(), missing), ConfigError);
  }
}

TEST_CASE("linear anneal") {
  CHECK(LinearAnneal(1.0, 0.05, 100, 0) == 1.0);
  CHECK(LinearAnneal(1.0, 0.05, 100, 100) == doctest::Approx(0.05).epsilon(1e-15));
  CHECK(LinearAnneal(1.0, 0.05, 100, 50) == doctest::Approx(0.525).epsilon(1e-15));
  CHECK(LinearAnneal(1.0, 0.05, 100, 1000) == doctest::Approx(0.05).epsilon(1e-15));
  CHECK(LinearAnneal(1.0, 0.05, 0, 0) == 0.05);
}

TEST_CASE("ppo loss") {
  SUBCASE("ratio one") {
    const std::vector<double> lp{-0.5, -1.0, -2.0}, adv{1.0, -2.0, 4.0}, ret{0, 0, 0}, v{0, 0, 0};
    const std::vector<double> ent{0.1, 0.2, 0.3};
    const auto r = PpoLoss({lp, adv, ret, v}, lp, ent, v, 0.2, 0.0, 0.5, true);
    CHECK(r.stats.policy_loss == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(r.stats.approx_kl == 0.0);
    CHECK(r.stats.clip_fraction == 0.0);
  }
  SUBCASE("clip binds for one sample") {
    const std::vector<double> old_lp{0.0}, new_lp{std::log(1.5)}, adv{1.0}, zero{0.0};
    const auto r = PpoLoss({old_lp, adv, zero, zero}, new_lp, zero, zero, 0.2, 0.0, 0.0, false);
    CHECK(r.stats.policy_loss == doctest::Approx(-1.2).epsilon(1e-12));
    CHECK(r.stats.clip_fraction == 1.0);
    // Clipped branch is flat in the ratio.
    CHECK(r.d_log_probs[0] == 0.0);
  }
  SUBCASE("random minibatches match the straight-line oracle") {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
      const int n = 1 + static_cast<int>(rng.Below(40));
      std::vector<double> old_lp(n), new_lp(n), adv(n), ret(n), old_v(n), new_v(n), ent(n);
      for (int i = 0; i < n; ++i) {
        old_lp[i] = rng.Uniform(-3, 0);
        new_lp[i] = old_lp[i] + rng.Normal(0, 0.3);
        adv[i] = rng.Normal(0, 1);
        ret[i] = rng.Normal(0, 5);
        old_v[i] = ret[i] + rng.Normal(0, 1);
        new_v[i] = old_v[i] + rng.Normal(0, 0.4);
        ent[i] = rng.Uniform(0, 1.4);
      }
      const bool clip_vloss = trial % 2 == 0;
      const double eps = rng.Uniform(0.05, 0.4);
      const auto r = PpoLoss({old_lp, adv, ret, old_v}, new_lp, ent, new_v, eps, 0.01, 0.5,
                             clip_vloss);
      const auto o = PpoLossOracle(old_lp, adv, ret, old_v, new_lp, ent, new_v, eps, 0.01, 0.5,
                                   clip_vloss);
      CHECK(std::abs(r.total - o.total) < 1e-6);
      CHECK(std::abs(r.stats.policy_loss - o.policy) < 1e-6);
      CHECK(std::abs(r.stats.value_loss - o.value) < 1e-6);
      CHECK(std::abs(r.stats.entropy - o.entropy) < 1e-6);
      CHECK(std::abs(r.stats.approx_kl - o.approx_kl) < 1e-6);
      CHECK(std::abs(r.stats.clip_fraction - o.clip_fraction) < 1e-6);
      CHECK(r.stats.clip_fraction >= 0.0);
      CHECK(r.stats.clip_fraction <= 1.0);

      // Per-sample derivatives against central differences of the oracle.
      const double h = 1e-6;
      for (int i = 0; i < n; ++i) {
        auto lp_up = new_lp, lp_dn = new_lp;
        lp_up[i] += h;
        lp_dn[i] -= h;
        const double fd_lp = (PpoLossOracle(old_lp, adv, ret, old_v, lp_up, ent, new_v, eps, 0.01,
                                            0.5, clip_vloss).total -
                              PpoLossOracle(old_lp, adv, ret, old_v, lp_dn, ent, new_v, eps, 0.01,
                                            0.5, clip_vloss).total) /
                             (2 * h);
        auto v_up = new_v, v_dn = new_v;
        v_up[i] += h;
        v_dn[i] -= h;
        const double fd_v = (PpoLossOracle(old_lp, adv, ret, old_v, new_lp, ent, v_up, eps, 0.01,
                                           0.5, clip_vloss).total -
                             PpoLossOracle(old_lp, adv, ret, old_v, new_lp, ent, v_dn, eps, 0.01,
                                           0.5, clip_vloss).total) /
                            (2 * h);
        CHECK(std::abs(r.d_log_probs[i] - fd_lp) < 1e-6);
        CHECK(std::abs(r.d_values[i] - fd_v) < 1e-6);
        CHECK(std::abs(r.d_entropy[i] + 0.01 / n) < 1e-15);
      }
    }
  }
  SUBCASE("unbounded clip reduces to the vanilla surrogate") {
    Rng rng(5);
    const int n = 64;
    std::vector<double> old_lp(n), new_lp(n), adv(n), zero(n, 0.0);
    double vanilla = 0.0;
    for (int i = 0; i < n; ++i) {
      old_lp[i] = rng.Uniform(-2, 0);
      new_lp[i] = old_lp[i] + rng.Normal(0, 0.5);
      adv[i] = rng.Normal(0, 1);
      vanilla -= std::exp(new_lp[i] - old_lp[i]) * adv[i] / n;
    }
    const auto r = PpoLoss({old_lp, adv, zero, zero}, new_lp, zero, zero, 1e30, 0.0, 0.0, false);
    CHECK(std::abs(r.stats.policy_loss - vanilla) < 1e-6);
  }
}

TEST_CASE("advantage normalization and explained variance") {
  std::vector<double> a{1.0, 2.0, 3.0, 4.0};
  NormalizeAdvantages(a);
  // mean 2.5, unbiased std sqrt(5/3)
  CHECK(a[0] == doctest::Approx(-1.5 / std::sqrt(5.0 / 3.0)).epsilon(1e-7));
  CHECK(a[3] == doctest::Approx(1.5 / std::sqrt(5.0 / 3.0)).epsilon(1e-7));
  const std::vector<double> ret{1, 2, 3}, perfect{1, 2, 3}, flat{2, 2, 2};
  CHECK(ExplainedVariance(perfect, ret) == doctest::Approx(1.0));
  CHECK(ExplainedVariance(flat, ret) == doctest::Approx(0.0));
  CHECK(std::isnan(ExplainedVariance(perfect, flat)));
}

TEST_CASE("action masking") {
  const std::vector<double> logits{0.3, -1.2, 2.0, 0.7};
  SUBCASE("all legal leaves logits unchanged") {
    const std::vector<uint8_t> mask{1, 1, 1, 1};
    CHECK(ApplyActionMask(logits, mask) == logits);
  }
  SUBCASE("single legal action") {
    const std::vector<uint8_t> mask{0, 0, 1, 0};
    const Categorical dist(ApplyActionMask(logits, mask));
    CHECK(std::abs(dist.Prob(2) - 1.0) < 1e-12);
    CHECK(std::abs(dist.Entropy()) < 1e-12);
  }
  SUBCASE("illegal actions get no probability and no gradient") {
    const std::vector<uint8_t> mask{1, 0, 1, 0};
    const Categorical dist(ApplyActionMask(logits, mask));
    CHECK(dist.Prob(1) < 1e-30);
    CHECK(dist.Prob(3) < 1e-30);
    const double p0 = std::exp(0.3) / (std::exp(0.3) + std::exp(2.0));
    CHECK(dist.Prob(0) == doctest::Approx(p0).epsilon(1e-12));
    for (int taken : {0, 2}) {
      const auto g_lp = dist.LogProbGrad(taken);
      const auto g_ent = dist.EntropyGrad();
      for (int a : {1, 3}) {
        // d(-A log p - c H) / d logit_a for arbitrary loss weights.
        const double g = -1.7 * g_lp[a] - 0.01 * g_ent[a];
        CHECK(std::abs(g) < 1e-20);
      }
    }
    Rng rng(2);
    for (int i = 0; i < 2000; ++i) {
      const int a = dist.Sample(rng);
      CHECK(mask[a] == 1);
    }
  }
  SUBCASE("no legal action") {
    const std::vector<uint8_t> mask{0, 0, 0, 0};
    CHECK_THROWS_AS(ApplyActionMask(logits, mask), std::invalid_argument);
  }
}

TEST_CASE("dqn target") {
  const std::vector<double> q{1.0, 3.0, -2.0};
  CHECK(DqnTarget(0.5, 1.0, 0.99, q) == 0.5);
  CHECK(DqnTarget(0.5, 0.0, 0.0, q) == 0.5);
  CHECK(DqnTarget(0.5, 0.0, 0.9, q) == doctest::Approx(0.5 + 0.9 * 3.0));
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> qn(1 + rng.Below(6));
    for (double& x : qn) x = rng.Normal(0, 10);
    const double r = rng.Normal(0, 1), gamma = rng.Uniform(), term = rng.Below(2);
    double best = -std::numeric_limits<double>::infinity();
    for (double x : qn) best = x > best ? x : best;
    CHECK(DqnTarget(r, term, gamma, qn) == doctest::Approx(r + gamma * (1 - term) * best));
  }
  const std::vector<double> tie{2.0, 5.0, 5.0, 1.0};
  CHECK(Argmax(tie) == 1);
  const std::vector<float> tie_f{5.0f, 5.0f};
  CHECK(Argmax(tie_f) == 0);
}

TEST_CASE("c51 projection") {
  SUBCASE("support") {
    const C51Support s(-10, 10, 5);
    CHECK(s.delta_z == 5.0);
    CHECK(s.atoms == std::vector<double>{-10, -5, 0, 5, 10});
    CHECK_THROWS(C51Support(0, 1, 1));
  }
  SUBCASE("all mass lands between the first two atoms") {
    const C51Support s(0, 2, 3);
    const std::vector<double> p{0.2, 0.3, 0.5};
    const auto out = C51Project(s, p, 0.5, 0.0, 0.0);
    CHECK(out[0] == doctest::Approx(0.5));
    CHECK(out[1] == doctest::Approx(0.5));
    CHECK(out[2] == doctest::Approx(0.0));
  }
  SUBCASE("terminal reward at v_max") {
    const C51Support s(-100, 100, 101);
    Rng rng(9);
    const auto out = C51Project(s, RandomDist(101, rng), 100.0, 1.0, 0.99);
    CHECK(out[100] == doctest::Approx(1.0));
    for (int i = 0; i < 100; ++i) CHECK(out[i] == 0.0);
  }
  SUBCASE("randomized cases match the scatter oracle") {
    Rng rng(21);
    for (int trial = 0; trial < 500; ++trial) {
      const int n = 2 + static_cast<int>(rng.Below(6));
      const double v_min = rng.Uniform(-10, 0);
      const double v_max = v_min + rng.Uniform(0.5, 20);
      const C51Support s(v_min, v_max, n);
      const auto p = RandomDist(n, rng);
      const double r = rng.Uniform(-15, 15);
      const double gamma = trial % 10 == 0 ? 1.0 : rng.Uniform();
      const double term = trial % 7 == 0 ? 1.0 : 0.0;
      const auto out = C51Project(s, p, r, term, gamma);
      const auto expected = C51ScatterOracle(v_min, v_max, n, p, r, term, gamma);
      double sum = 0.0;
      for (int i = 0; i < n; ++i) {
        CHECK(std::abs(out[i] - expected[i]) < 1e-6);
        CHECK(out[i] >= 0.0);
        sum += out[i];
      }
      CHECK(std::abs(sum - 1.0) < 1e-6);
      const double ev = C51Expectation(s, out);
      CHECK(ev >= v_min - 1e-9);
      CHECK(ev <= v_max + 1e-9);
    }
  }
  SUBCASE("input must be a distribution") {
    const C51Support s(0, 2, 3);
    const std::vector<double> bad{0.5, 0.5, 0.5}, negative{1.5, -0.5, 0.0};
    CHECK_THROWS(C51Project(s, bad, 0, 0, 0.9));
    CHECK_THROWS(C51Project(s, negative, 0, 0, 0.9));
  }
}

TEST_CASE("continuous control targets") {
  SUBCASE("ddpg") {
    CHECK(DdpgTarget(-1.0, 1.0, 0.99, 50.0) == -1.0);
    CHECK(DdpgTarget(-1.0, 0.0, 0.0, 50.0) == -1.0);
    Rng rng(8);
    for (int i = 0; i < 100; ++i) {
      const double r = rng.Normal(0, 1), q = rng.Normal(0, 10), g = rng.Uniform();
      const double t = rng.Below(2);
      CHECK(DdpgTarget(r, t, g, q) == doctest::Approx(r + g * (1 - t) * q));
    }
  }
  SUBCASE("td3 smoothing with recorded noise") {
    const std::vector<double> low{-2.0, -1.0}, high{2.0, 1.0};
    const std::vector<double> mu{1.9, -0.3}, zero{0.0, 0.0};
    CHECK(Td3SmoothedAction(mu, zero, 0.5, low, high) == mu);
    const std::vector<double> out_of_range{2.5, -1.5};
    CHECK(Td3SmoothedAction(out_of_range, zero, 0.5, low, high) == std::vector<double>{2.0, -1.0});
    Rng rng(13);
    for (int trial = 0; trial < 200; ++trial) {
      const double sigma = rng.Uniform(0, 1), c = rng.Uniform(0, 1);
      std::vector<double> m{rng.Uniform(-2, 2), rng.Uniform(-1, 1)}, noise(2), expected(2);
      for (int d = 0; d < 2; ++d) {
        noise[d] = rng.Normal() * sigma;
        const double clipped = std::min(std::max(noise[d], -c), c);
        expected[d] = std::min(std::max(m[d] + clipped, low[d]), high[d]);
      }
      CHECK(Td3SmoothedAction(m, noise, c, low, high) == expected);
    }
  }
  SUBCASE("td3 twin-min") {
    Rng rng(14);
    for (int i = 0; i < 100; ++i) {
      const double r = rng.Normal(0, 1), q1 = rng.Normal(0, 10), q2 = rng.Normal(0, 10);
      const double g = rng.Uniform(), t = rng.Below(2);
      CHECK(Td3Target(r, t, g, q1, q2) == Td3Target(r, t, g, q2, q1));
      CHECK(Td3Target(r, t, g, q1, q1) == DdpgTarget(r, t, g, q1));
      CHECK(Td3Target(r, t, g, q1, q2) == doctest::Approx(r + g * (1 - t) * std::min(q1, q2)));
    }
  }
  SUBCASE("sac target and temperature loss") {
    CHECK(SacTarget(1.0, 0.0, 0.9, 3.0, 5.0, 0.0, -7.0) == doctest::Approx(1.0 + 0.9 * 3.0));
    CHECK(SacTarget(1.0, 1.0, 0.9, 3.0, 5.0, 0.2, -7.0) == 1.0);
    Rng rng(15);
    for (int trial = 0; trial < 50; ++trial) {
      const int n = 1 + static_cast<int>(rng.Below(8));
      std::vector<double> lp(n);
      for (double& x : lp) x = rng.Normal(0, 2);
      const double log_alpha = rng.Normal(0, 1), h = -static_cast<double>(1 + rng.Below(3));
      double loss = 0.0, grad = 0.0;
      for (double x : lp) {
        loss += -log_alpha * (x + h) / n;
        grad += -(x + h) / n;
      }
      const AlphaLoss al = SacAlphaLoss(log_alpha, lp, h);
      CHECK(std::abs(al.loss - loss) < 1e-5);
      CHECK(std::abs(al.d_log_alpha - grad) < 1e-5);
      for (int k = 0; k < n; ++k) {
        const double r = rng.Normal(0, 1), q1 = rng.Normal(0, 10), q2 = rng.Normal(0, 10);
        const double alpha = std::exp(log_alpha), t = rng.Below(2);
        const double y = r + 0.99 * (1 - t) * (std::min(q1, q2) - alpha * lp[k]);
        CHECK(std::abs(SacTarget(r, t, 0.99, q1, q2, alpha, lp[k]) - y) < 1e-5);
      }
    }
    // Stationary when the mean log-prob equals -target_entropy.
    const std::vector<double> at_target{0.5, 1.5, 1.0};
    CHECK(std::abs(SacAlphaLoss(0.3, at_target, -1.0).d_log_alpha) < 1e-12);
    const std::vector<double> too_certain{3.0, 3.0};
    CHECK(SacAlphaLoss(0.0, too_certain, -1.0).d_log_alpha < 0.0);
  }
}

TEST_CASE("polyak update") {
  Rng rng(3);
  MlpD online(StackSpecs(3, {5}, 2, Activation::kRelu));
  MlpD target(StackSpecs(3, {5}, 2, Activation::kRelu));
  InitOrthogonal(online, 1.0, 1.0, rng);
  InitOrthogonal(target, 1.0, 1.0, rng);
  SUBCASE("tau 1 copies") {
    PolyakUpdate(target, online, 1.0);
    for (size_t k = 0; k < online.num_layers(); ++k) {
      CHECK(target.layers()[k].weight == online.layers()[k].weight);
      CHECK(target.layers()[k].bias == online.layers()[k].bias);
    }
  }
  SUBCASE("tau 0 leaves the target alone") {
    const MlpD before = target;
    PolyakUpdate(target, online, 0.0);
    CHECK(target.layers()[0].weight == before.layers()[0].weight);
  }
  SUBCASE("geometric convergence") {
    const double tau = 0.1;
    const double gap0 = (target.layers()[0].weight - online.layers()[0].weight).norm();
    for (int k = 1; k <= 20; ++k) {
      PolyakUpdate(target, online, tau);
      const double gap = (target.layers()[0].weight - online.layers()[0].weight).norm();
      CHECK(gap == doctest::Approx(gap0 * std::pow(1 - tau, k)).epsilon(1e-9));
    }
  }
  SUBCASE("shape mismatch") {
    MlpD other(StackSpecs(3, {4}, 2, Activation::kRelu));
    CHECK_THROWS_AS(PolyakUpdate(other, online, 0.5), DimensionError);
  }
}

TEST_CASE("zero-step runs") {
  TempDir tmp;
  for (const auto& c : QuickCases()) {
    CAPTURE(c.algo);
    const TrainOutcome a = Train(tmp.path, c.algo, c.env, 5, 0, c.overrides);
    const RunData run = ParseRun(a.run_dir);
    CHECK(run.events.empty());
    REQUIRE(run.status.has_value());
    CHECK(run.status->completed);
    CHECK(run.manifest.algo_id == c.algo);
    CHECK(a.report.env_steps == 0);
    CHECK(std::isnan(a.report.final_mean_return));
    const TrainOutcome b = Train(tmp.path, c.algo, c.env, 5, 0, c.overrides);
    const Checkpoint ca = LoadCheckpoint(a.report.checkpoint_dir);
    const Checkpoint cb = LoadCheckpoint(b.report.checkpoint_dir);
    REQUIRE(ca.networks.size() == cb.networks.size());
    for (size_t i = 0; i < ca.networks.size(); ++i) {
      CHECK(SameParameters(ca.networks[i].net, cb.networks[i].net));
    }
  }
}

TEST_CASE("a zero-step ppo checkpoint holds the initial parameters") {
  TempDir tmp;
  {
    const TrainOutcome out = Train(tmp.path, "ppo", "cartpole-v1", 9, 0);
    Rng init = Rng(9).Child("init");
    Mlp critic(StackSpecs(4, {64, 64}, 1, Activation::kTanh));
    Mlp actor(StackSpecs(4, {64, 64}, 2, Activation::kTanh));
    InitOrthogonal(critic, std::sqrt(2.0), 1.0, init);
    InitOrthogonal(actor, std::sqrt(2.0), 0.01, init);
    const Checkpoint ckpt = LoadCheckpoint(out.report.checkpoint_dir);
    REQUIRE(ckpt.networks.size() == 2);
    CHECK(ckpt.networks[0].name == "actor");
    CHECK(SameParameters(ckpt.networks[0].net, actor));
    CHECK(SameParameters(ckpt.networks[1].net, critic));
  }
}

TEST_CASE("training is deterministic and respects its step budget") {
  TempDir tmp;
  for (const auto& c : QuickCases()) {
    CAPTURE(c.algo);
    const TrainOutcome a = Train(tmp.path, c.algo, c.env, 2, c.steps, c.overrides);
    const TrainOutcome b = Train(tmp.path, c.algo, c.env, 2, c.steps, c.overrides);
    const auto ma = MetricsWithoutWallTime(a.run_dir);
    CHECK(!ma.empty());
    CHECK(ma == MetricsWithoutWallTime(b.run_dir));
    CHECK(a.report.episode_returns == b.report.episode_returns);

    const AlgoConfig config = MakeAlgoConfig(c.algo, c.env, 2, c.steps, c.overrides);
    int64_t granule = 1;
    if (config.params.contains("num_steps")) granule = config.Int("num_envs") * config.Int("num_steps");
    CHECK(a.report.env_steps <= c.steps);
    CHECK(c.steps - a.report.env_steps < granule);

    const RunData run = ParseRun(a.run_dir);
    double length_sum = 0.0;
    for (const auto& e : EventsForKey(run, kEpisodicLength)) length_sum += e.value;
    const int64_t envs = config.params.contains("num_envs") ? config.Int("num_envs") : 1;
    CHECK(length_sum <= static_cast<double>(a.report.env_steps));
    CHECK(length_sum > static_cast<double>(a.report.env_steps - envs * 500));
    CHECK(fs::exists(a.report.checkpoint_dir / "params.f32"));
  }
}

TEST_CASE("off-policy updates wait for learning_starts") {
  TempDir tmp;
  for (const auto& c : QuickCases()) {
    const AlgoConfig config = MakeAlgoConfig(c.algo, c.env, 1, c.steps, c.overrides);
    if (!config.params.contains("learning_starts")) continue;
    CAPTURE(c.algo);
    const int64_t learning_starts = config.Int("learning_starts");
    const TrainOutcome out = Train(tmp.path, c.algo, c.env, 1, c.steps, c.overrides);
    const RunData run = ParseRun(out.run_dir);
    int64_t first_loss = -1;
    for (const auto& e : run.events) {
      if (e.key.rfind("losses/", 0) == 0) {
        first_loss = e.step;
        break;
      }
    }
    REQUIRE(first_loss >= 0);
    CHECK(first_loss >= learning_starts);
  }
}

TEST_CASE("action-space mismatch fails before any run directory exists") {
  TempDir tmp;
  const std::pair<const char*, const char*> bad[] = {
      {"dqn", "pendulum-v1"},    {"sac", "cartpole-v1"},    {"ppo", "maskedgrid-v0"},
      {"ppo_masked", "cartpole-v1"}, {"ppo_continuous", "cartpole-v1"}, {"c51", "no-such-env"}};
  for (const auto& [algo, env] : bad) {
    CAPTURE(algo);
    CHECK_THROWS_AS(Train(tmp.path, algo, env, 1, 100), ConfigError);
  }
  const std::string err = ErrorText([&] { Train(tmp.path, "dqn", "pendulum-v1", 1, 100); });
  CHECK(err.find("dqn needs a discrete action space") != std::string::npos);
  CHECK(fs::is_empty(tmp.path));
}

TEST_CASE("masked ppo never takes an illegal action") {
  TempDir tmp;
  const TrainOutcome out = Train(tmp.path, "ppo_masked", "maskedgrid-v0", 4, 2048);
  std::ifstream in(out.run_dir / kTrajectoryLog);
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "step,env,cell,mask,action");
  int rows = 0;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string step, env, cell, mask, action;
    std::getline(ss, step, ',');
    std::getline(ss, env, ',');
    std::getline(ss, cell, ',');
    std::getline(ss, mask, ',');
    std::getline(ss, action, ',');
    const int c = std::stoi(cell), a = std::stoi(action);
    const auto legal = GridMask(c / kGridSize, c % kGridSize);
    std::string expected;
    for (uint8_t m : legal) expected += m ? '1' : '0';
    CHECK(mask == expected);
    CHECK(legal[a] == 1);
    ++rows;
  }
  CHECK(rows == 2048);
}
