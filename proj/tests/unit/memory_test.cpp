#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "monorl/memory/buffers.hpp"

using namespace monorl;

namespace {

struct GaeCase {
  int T, N;
  std::vector<double> rewards, values, terms, last_values, last_terms;
};

GaeCase RandomCase(Rng& rng, int T, int N) {
  GaeCase c{T, N, {}, {}, {}, {}, {}};
  for (int k = 0; k < T * N; ++k) {
    c.rewards.push_back(rng.Normal());
    c.values.push_back(rng.Normal());
    c.terms.push_back(rng.Uniform() < 0.3 ? 1.0 : 0.0);
  }
  for (int i = 0; i < N; ++i) {
    c.last_values.push_back(rng.Normal());
    c.last_terms.push_back(rng.Uniform() < 0.3 ? 1.0 : 0.0);
  }
  return c;
}

RolloutBuffer Fill(const GaeCase& c) {
  RolloutBuffer rb(c.T, c.N, 1, 1);
  for (int t = 0; t < c.T; ++t) {
    std::vector<double> r(c.rewards.begin() + t * c.N, c.rewards.begin() + (t + 1) * c.N);
    std::vector<double> v(c.values.begin() + t * c.N, c.values.begin() + (t + 1) * c.N);
    std::vector<double> d(c.terms.begin() + t * c.N, c.terms.begin() + (t + 1) * c.N);
    std::vector<double> lp(c.N, 0.0);
    rb.Add(Matrix::Zero(c.N, 1), Matrix::Zero(c.N, 1), lp, r, d, v);
  }
  return rb;
}

// A_t = sum_l (gamma lam)^l delta_{t+l}, stopping after the first
// transition whose successor is terminal.
std::vector<double> DirectSumAdvantages(const GaeCase& c, double gamma, double lam) {
  auto next_value = [&](int t, int i) {
    return t + 1 < c.T ? c.values[(t + 1) * c.N + i] : c.last_values[i];
  };
  auto next_term = [&](int t, int i) {
    return t + 1 < c.T ? c.terms[(t + 1) * c.N + i] : c.last_terms[i];
  };
  auto delta = [&](int t, int i) {
    return c.rewards[t * c.N + i] + gamma * next_value(t, i) * (1.0 - next_term(t, i)) -
           c.values[t * c.N + i];
  };
  std::vector<double> adv(c.T * c.N, 0.0);
  for (int i = 0; i < c.N; ++i) {
    for (int t = 0; t < c.T; ++t) {
      double sum = 0.0, weight = 1.0;
      for (int k = t; k < c.T; ++k) {
        sum += weight * delta(k, i);
        if (next_term(k, i) == 1.0) break;
        weight *= gamma * lam;
      }
      adv[t * c.N + i] = sum;
    }
  }
  return adv;
}

}  // namespace

TEST_CASE("gae") {
  Rng rng(100);
  SUBCASE("lambda zero collapses to one-step TD error") {
    auto c = RandomCase(rng, 6, 2);
    auto rb = Fill(c);
    auto gae = ComputeGae(rb, c.last_values, c.last_terms, 0.9, 0.0);
    for (int t = 0; t < 6; ++t) {
      for (int i = 0; i < 2; ++i) {
        const double nv = t + 1 < 6 ? c.values[(t + 1) * 2 + i] : c.last_values[i];
        const double nt = t + 1 < 6 ? c.terms[(t + 1) * 2 + i] : c.last_terms[i];
        const double delta = c.rewards[t * 2 + i] + 0.9 * nv * (1 - nt) - c.values[t * 2 + i];
        CHECK(gae.advantages[t * 2 + i] == delta);
      }
    }
  }
  SUBCASE("gamma zero gives reward minus value") {
    auto c = RandomCase(rng, 4, 3);
    auto gae = ComputeGae(Fill(c), c.last_values, c.last_terms, 0.0, 0.95);
    for (int k = 0; k < 12; ++k) CHECK(gae.advantages[k] == c.rewards[k] - c.values[k]);
  }
  SUBCASE("matches the direct-sum oracle on random instances") {
    for (int trial = 0; trial < 300; ++trial) {
      const int T = 1 + static_cast<int>(rng.Below(8));
      const int N = 1 + static_cast<int>(rng.Below(3));
      const double gamma = rng.Uniform(), lam = rng.Uniform();
      auto c = RandomCase(rng, T, N);
      auto gae = ComputeGae(Fill(c), c.last_values, c.last_terms, gamma, lam);
      auto oracle = DirectSumAdvantages(c, gamma, lam);
      for (int k = 0; k < T * N; ++k) {
        CHECK(std::abs(gae.advantages[k] - oracle[k]) < 1e-10);
        CHECK(std::abs(gae.returns[k] - (oracle[k] + c.values[k])) < 1e-10);
      }
    }
  }
  SUBCASE("truncated boundary bootstraps, terminated boundary does not") {
    // Two steps, one env. Step 0's successor is obs[1].
    GaeCase c{2, 1, {1.0, 1.0}, {0.5, 2.0}, {0.0, 0.0}, {3.0}, {0.0}};
    auto truncated = ComputeGae(Fill(c), c.last_values, c.last_terms, 0.9, 1.0);
    CHECK(truncated.advantages[1] == doctest::Approx(1.0 + 0.9 * 3.0 - 2.0));
    CHECK(truncated.advantages[0] ==
          doctest::Approx(1.0 + 0.9 * 2.0 - 0.5 + 0.9 * truncated.advantages[1]));
    c.terms[1] = 1.0;
    auto terminated = ComputeGae(Fill(c), c.last_values, c.last_terms, 0.9, 1.0);
    CHECK(terminated.advantages[0] == doctest::Approx(1.0 - 0.5));
  }
  SUBCASE("partial buffer is rejected") {
    RolloutBuffer rb(3, 1, 1, 1);
    std::vector<double> z = {0.0};
    rb.Add(Matrix::Zero(1, 1), Matrix::Zero(1, 1), z, z, z, z);
    CHECK_THROWS_AS(ComputeGae(rb, z, z, 0.99, 0.95), std::logic_error);
    CHECK_THROWS_AS(Minibatches(rb, 1, rng), std::logic_error);
  }
}

TEST_CASE("minibatches") {
  Rng rng(4);
  SUBCASE("single minibatch is a permutation") {
    auto mbs = Minibatches(16, 1, rng);
    REQUIRE(mbs.size() == 1);
    auto sorted = mbs[0];
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < 16; ++i) CHECK(sorted[i] == i);
  }
  SUBCASE("each epoch partitions the index set") {
    for (int epoch = 0; epoch < 10; ++epoch) {
      auto mbs = Minibatches(512, 4, rng);
      std::set<int> seen;
      for (const auto& mb : mbs) {
        CHECK(mb.size() == 128);
        for (int i : mb) CHECK(seen.insert(i).second);
      }
      CHECK(seen.size() == 512);
      CHECK(*seen.rbegin() == 511);
    }
  }
  SUBCASE("fixed seed reproduces the shuffle") {
    Rng a(55), b(55);
    for (int epoch = 0; epoch < 3; ++epoch) CHECK(Minibatches(64, 8, a) == Minibatches(64, 8, b));
  }
  SUBCASE("uneven split rejected") { CHECK_THROWS_AS(Minibatches(10, 3, rng), std::invalid_argument); }
}

TEST_CASE("replay buffer") {
  auto add = [](ReplayBuffer& buf, float tag) {
    std::vector<float> obs = {tag, -tag}, act = {tag}, next = {tag + 0.5f, 0.0f};
    buf.Add(obs, act, tag, next, false);
  };
  SUBCASE("fifo overwrite") {
    ReplayBuffer buf(5, 2, 1);
    for (int i = 0; i < 6; ++i) add(buf, static_cast<float>(i));
    CHECK(buf.size() == 5);
    std::set<float> tags;
    for (int k = 0; k < buf.size(); ++k) tags.insert(buf.reward_at(buf.SlotOfOldest(k)));
    CHECK(tags.count(0.0f) == 0);
    CHECK(tags.count(5.0f) == 1);
    CHECK(buf.reward_at(buf.SlotOfOldest(0)) == 1.0f);
    CHECK(buf.reward_at(buf.SlotOfOldest(4)) == 5.0f);
  }
  SUBCASE("size-one buffer always returns its item") {
    ReplayBuffer buf(8, 2, 1);
    add(buf, 3.0f);
    Rng rng(1);
    auto batch = buf.Sample(32, rng);
    for (int k = 0; k < 32; ++k) {
      CHECK(batch.rewards[k] == 3.0f);
      CHECK(batch.next_obs(k, 0) == 3.5f);
    }
  }
  SUBCASE("chi-squared uniformity over ten items") {
    ReplayBuffer buf(10, 2, 1);
    for (int i = 0; i < 25; ++i) add(buf, static_cast<float>(i));
    Rng rng(2024);
    std::vector<int> counts(10, 0);
    const int draws = 100000;
    for (int k = 0; k < draws / 100; ++k) {
      for (int idx : buf.Sample(100, rng).indices) counts[idx]++;
    }
    double chi2 = 0.0;
    const double expected = draws / 10.0;
    for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
    // Upper 0.001 quantile of chi-squared with 9 degrees of freedom.
    CHECK(chi2 < 27.877);
  }
  SUBCASE("sampling an empty buffer is an error") {
    ReplayBuffer buf(4, 2, 1);
    Rng rng(0);
    CHECK_THROWS_AS(buf.Sample(1, rng), std::logic_error);
  }
}
