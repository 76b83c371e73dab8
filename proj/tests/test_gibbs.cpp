#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "nvae/gibbs.hpp"
#include "nvae/synth.hpp"

using namespace nvae;

namespace {

Corpus tiny_corpus(const std::vector<std::vector<std::string>>& docs) {
  return build_corpus(docs);
}

}  // namespace

TEST_CASE("gibbs_init builds consistent count tables") {
  auto corpus = tiny_corpus({{"a", "b", "a"}, {"c", "b"}});
  GibbsState state = gibbs_init(corpus, 3, 0.1, 0.01, 42);
  CHECK(state.counts_consistent());
  CHECK(state.z.size() == 5);

  SECTION("single topic sends every token to topic 0") {
    GibbsState one = gibbs_init(corpus, 1, 0.1, 0.01, 7);
    for (auto z : one.z) CHECK(z == 0);
    CHECK(one.n_k[0] == 5);
  }
  SECTION("identical seeds give identical states") {
    GibbsState a = gibbs_init(corpus, 3, 0.1, 0.01, 99);
    GibbsState b = gibbs_init(corpus, 3, 0.1, 0.01, 99);
    CHECK(a.z == b.z);
  }
  SECTION("invalid arguments rejected") {
    CHECK_THROWS_AS(gibbs_init(corpus, 0, 0.1, 0.01, 1), std::invalid_argument);
    CHECK_THROWS_AS(gibbs_init(corpus, 2, 0.0, 0.01, 1), std::invalid_argument);
    CHECK_THROWS_AS(gibbs_init(corpus, 2, 0.1, -1.0, 1), std::invalid_argument);
  }
}

TEST_CASE("conditional is uniform for fully symmetric counts") {
  auto corpus = tiny_corpus({{"a", "b"}, {"a", "b"}});
  GibbsState state = gibbs_init(corpus, 2, 0.5, 0.5, 3);
  // force a symmetric table by hand: every (doc, topic) and (topic, word)
  // cell equal
  state.z = {0, 1, 0, 1};
  state.n_dk = {1, 1, 1, 1};
  state.n_kw = {1, 1, 1, 1};
  state.n_k = {2, 2};
  const double w0 = gibbs_conditional(state, 0, 0, 0);
  const double w1 = gibbs_conditional(state, 0, 0, 1);
  CHECK(w0 == Catch::Approx(w1).epsilon(1e-15));
}

TEST_CASE("conditional matches the hand-computed formula") {
  auto corpus = tiny_corpus({{"a", "b"}});
  GibbsState state = gibbs_init(corpus, 2, 1.0, 1.0, 5);
  // after removing token 0 (word a): token 1 (word b) sits on topic 1
  state.z = {0, 1};  // the removed token's entry is irrelevant
  state.n_dk = {0, 1};
  state.n_kw = {0, 0, 0, 1};  // k=1 holds word b
  state.n_k = {0, 1};
  // p(k=0) ~ (0+1)(0+1)/(0+2) = 0.5 ; p(k=1) ~ (1+1)(0+1)/(1+2) = 2/3
  CHECK(gibbs_conditional(state, 0, 0, 0) == Catch::Approx(0.5).margin(1e-12));
  CHECK(gibbs_conditional(state, 0, 0, 1) ==
        Catch::Approx(2.0 / 3.0).margin(1e-12));
}

TEST_CASE("sweeps preserve count consistency") {
  auto corpus = tiny_corpus({{"a", "b", "a", "c"},
                             {"c", "b"},
                             {"d", "d", "a"},
                             {"e", "b", "c", "d", "e"}});
  GibbsState state = gibbs_init(corpus, 3, 0.1, 0.01, 11);
  BaseNoise noise(11, 1);
  for (int sweep = 0; sweep < 20; ++sweep) {
    gibbs_sweep(state, noise);
    REQUIRE(state.counts_consistent());
  }
}

TEST_CASE("disjoint documents separate into different topics") {
  std::vector<std::string> d1, d2;
  for (int i = 0; i < 20; ++i) {
    d1.push_back("x" + std::to_string(i % 5));
    d2.push_back("y" + std::to_string(i % 5));
  }
  auto corpus = tiny_corpus({d1, d2});
  int separated = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    GibbsState state = gibbs_init(corpus, 2, 0.1, 0.01, seed);
    BaseNoise noise(seed, 2);
    for (int sweep = 0; sweep < 200; ++sweep) gibbs_sweep(state, noise);
    const bool doc0_topic0 = state.dk(0, 0) > state.dk(0, 1);
    const bool doc1_topic0 = state.dk(1, 0) > state.dk(1, 1);
    if (doc0_topic0 != doc1_topic0) ++separated;
  }
  CHECK(separated >= 95);
}

TEST_CASE("estimates are proper distributions") {
  auto corpus = tiny_corpus({{"a", "b", "a"}, {"c", "b"}, {"a", "c", "c"}});
  GibbsState state = gibbs_init(corpus, 4, 0.3, 0.05, 17);
  BaseNoise noise(17, 3);
  for (int sweep = 0; sweep < 10; ++sweep) gibbs_sweep(state, noise);
  GibbsEstimate est = gibbs_estimate(state);
  for (std::size_t d = 0; d < est.theta_hat.rows; ++d) {
    double sum = 0.0;
    for (std::size_t k = 0; k < est.theta_hat.cols; ++k) {
      CHECK(est.theta_hat(d, k) >= 0.0);
      sum += est.theta_hat(d, k);
    }
    CHECK(std::fabs(sum - 1.0) < 1e-12);
  }
  for (std::size_t k = 0; k < est.phi_hat.rows; ++k) {
    double sum = 0.0;
    for (std::size_t w = 0; w < est.phi_hat.cols; ++w) {
      CHECK(est.phi_hat(k, w) >= 0.0);
      sum += est.phi_hat(k, w);
    }
    CHECK(std::fabs(sum - 1.0) < 1e-12);
  }

  SECTION("single topic estimates are all ones") {
    GibbsState one = gibbs_init(corpus, 1, 0.1, 0.01, 23);
    GibbsEstimate e1 = gibbs_estimate(one);
    for (std::size_t d = 0; d < e1.theta_hat.rows; ++d)
      CHECK(e1.theta_hat(d, 0) == Catch::Approx(1.0).margin(1e-15));
  }
}

TEST_CASE("estimate matches hand-normalized values on a fixed table") {
  auto corpus = tiny_corpus({{"a", "b"}});
  GibbsState state = gibbs_init(corpus, 2, 0.5, 0.25, 29);
  state.z = {0, 1};
  state.n_dk = {1, 1};
  state.n_kw = {1, 0, 0, 1};
  state.n_k = {1, 1};
  GibbsEstimate est = gibbs_estimate(state);
  // theta: (1 + 0.5) / (2 + 2*0.5) = 0.5 either way
  CHECK(est.theta_hat(0, 0) == Catch::Approx(0.5).margin(1e-12));
  // phi[0,a] = (1 + 0.25) / (1 + 2*0.25) = 1.25/1.5
  CHECK(est.phi_hat(0, 0) == Catch::Approx(1.25 / 1.5).margin(1e-12));
  CHECK(est.phi_hat(0, 1) == Catch::Approx(0.25 / 1.5).margin(1e-12));
}

TEST_CASE("gibbs runs are reproducible") {
  SynthConfig cfg;
  cfg.topics = 2;
  cfg.docs_per_topic = 10;
  cfg.doc_length = 6;
  cfg.vocab_per_topic = 8;
  cfg.seed = 31;
  SynthData data = synth_corpus(cfg);
  auto corpus = build_corpus(data.docs);
  GibbsState s1 = gibbs_init(corpus, 3, 0.1, 0.01, 77);
  GibbsState s2 = gibbs_init(corpus, 3, 0.1, 0.01, 77);
  BaseNoise n1(77, 9), n2(77, 9);
  for (int sweep = 0; sweep < 25; ++sweep) {
    gibbs_sweep(s1, n1);
    gibbs_sweep(s2, n2);
  }
  CHECK(s1.z == s2.z);
}
