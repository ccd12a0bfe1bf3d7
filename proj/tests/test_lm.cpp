#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include <doctest.h>

#include "ctckd/errors.hpp"
#include "ctckd/lm.hpp"
#include "ctckd/logmath.hpp"
#include "ctckd/rng.hpp"

using namespace ctckd;

namespace {

std::vector<LabelSequence> corpus_of(
    const std::vector<std::vector<int>>& utts) {
  std::vector<LabelSequence> out;
  for (size_t i = 0; i < utts.size(); ++i) {
    out.push_back(LabelSequence{"u" + std::to_string(i), utts[i]});
  }
  return out;
}

// Corpus visiting every ordered pair over V once: all tables uniform.
std::vector<LabelSequence> uniform_pair_corpus(int vocab_size) {
  std::vector<std::vector<int>> utts;
  for (int u = 0; u < vocab_size; ++u) {
    for (int v = 0; v < vocab_size; ++v) utts.push_back({u, v});
  }
  return corpus_of(utts);
}

void check_normalized(std::span<const double> log_probs) {
  double sum = 0.0;
  for (double lp : log_probs) sum += std::exp(lp);
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  double kl = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) kl += p[i] * (std::log(p[i]) - q[i]);
  }
  return kl;
}

}  // namespace

TEST_SUITE_BEGIN("lm");

TEST_CASE("bigram closed forms on tiny corpora") {
  const auto lm1 = train_ngram(corpus_of({{0, 1}, {0, 1}}), 2, 0.0);
  CHECK(lm1.conditional_logprob(1, 0) == doctest::Approx(0.0).epsilon(1e-12));

  const auto lm2 = train_ngram(corpus_of({{0, 1}, {0, 2}}), 3, 0.0);
  CHECK(std::exp(lm2.conditional_logprob(1, 0)) ==
        doctest::Approx(0.5).epsilon(1e-12));
  CHECK(std::exp(lm2.conditional_logprob(2, 0)) ==
        doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("tables match an independent recount") {
  Rng rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    const int V = rng.uniform_int(2, 6);
    const double k = trial % 2 == 0 ? 0.0 : 0.1 * (trial + 1);
    std::vector<std::vector<int>> utts(rng.uniform_int(1, 8));
    for (auto& utt : utts) {
      utt.resize(rng.uniform_int(1, 10));
      for (int& token : utt) token = rng.uniform_int(0, V - 1);
    }
    const auto corpus = corpus_of(utts);
    const auto lm = train_ngram(corpus, V, k);

    // recount directly
    std::vector<int64_t> uni(V, 0);
    std::map<std::pair<int, int>, int64_t> bi;
    int64_t total = 0;
    for (const auto& utt : utts) {
      for (size_t i = 0; i < utt.size(); ++i) {
        ++uni[utt[i]];
        ++total;
        if (i > 0) ++bi[{utt[i - 1], utt[i]}];
      }
    }
    int64_t context_total;
    for (int u = 0; u < V; ++u) {
      context_total = 0;
      for (int v = 0; v < V; ++v) {
        auto it = bi.find({u, v});
        context_total += it == bi.end() ? 0 : it->second;
      }
      for (int v = 0; v < V; ++v) {
        auto it = bi.find({u, v});
        const int64_t count = it == bi.end() ? 0 : it->second;
        const double den = static_cast<double>(context_total) + k * V;
        if (den == 0.0) continue;
        const double num = static_cast<double>(count) + k;
        const double expected = num > 0.0 ? std::log(num / den) : kLogZero;
        CHECK(lm.conditional_logprob(v, u) ==
              doctest::Approx(expected).epsilon(1e-12));
      }
    }
    for (int v = 0; v < V; ++v) {
      const double expected =
          std::log((static_cast<double>(uni[v]) + k) /
                   (static_cast<double>(total) + k * V));
      if (uni[v] + k > 0.0) {
        CHECK(lm.unigram_logprob(v) ==
              doctest::Approx(expected).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("train_ngram rejects empty corpora") {
  CHECK_THROWS_AS(train_ngram({}, 3, 0.1), EmptyCorpusError);
  const auto empty_utts = corpus_of({{}});
  CHECK_THROWS_AS(train_ngram(empty_utts, 3, 0.1), EmptyCorpusError);
}

TEST_CASE("masked prediction recovers the deterministic middle token") {
  // b always follows a and precedes c.
  std::vector<std::vector<int>> utts(5, std::vector<int>{0, 1, 2});
  const BigramMaskedLM masked(train_ngram(corpus_of(utts), 3, 0.0));
  const std::vector<int> y{0, 1, 2};
  const auto scores = masked.score_masked(y, 1, {}, {});
  check_normalized(scores);
  CHECK(std::exp(scores[1]) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("masked prediction is uniform on a uniform corpus") {
  const BigramMaskedLM masked(train_ngram(uniform_pair_corpus(4), 4, 0.0));
  const std::vector<int> y{2, 0, 3};
  for (int position = 0; position < 3; ++position) {
    const auto scores = masked.score_masked(y, position, {}, {});
    check_normalized(scores);
    for (double lp : scores) {
      CHECK(lp == doctest::Approx(std::log(0.25)).epsilon(1e-12));
    }
  }
}

TEST_CASE("preceding context matches in-sequence scoring") {
  Rng rng(99);
  const int V = 5;
  std::vector<std::vector<int>> utts(20);
  for (auto& utt : utts) {
    utt.resize(rng.uniform_int(2, 8));
    for (int& token : utt) token = rng.uniform_int(0, V - 1);
  }
  const BigramMaskedLM masked(train_ngram(corpus_of(utts), V, 0.1));

  const std::vector<int> pre{1, 3};
  const std::vector<int> y{0, 2, 4};
  std::vector<int> concatenated = pre;
  concatenated.insert(concatenated.end(), y.begin(), y.end());

  const auto direct = masked.score_masked(y, 0, pre, {});
  const auto absolute =
      masked.score_masked(concatenated, static_cast<int>(pre.size()), {}, {});
  for (int v = 0; v < V; ++v) {
    CHECK(direct[v] == doctest::Approx(absolute[v]).epsilon(1e-12));
  }

  // Trailing context symmetrically.
  const std::vector<int> suc{4, 1};
  std::vector<int> with_suc = y;
  with_suc.insert(with_suc.end(), suc.begin(), suc.end());
  const auto direct_suc = masked.score_masked(y, 2, {}, suc);
  const auto absolute_suc = masked.score_masked(with_suc, 2, {}, {});
  for (int v = 0; v < V; ++v) {
    CHECK(direct_suc[v] == doctest::Approx(absolute_suc[v]).epsilon(1e-12));
  }
}

TEST_CASE("sequence_logprob identities") {
  // Single-symbol chain: every factor is probability 1.
  const auto chain = train_ngram(corpus_of({{0, 0, 0, 0}}), 1, 0.0);
  CHECK(sequence_logprob(chain, std::vector<int>{0, 0, 0}) ==
        doctest::Approx(0.0).epsilon(1e-12));

  const auto uniform = train_ngram(uniform_pair_corpus(4), 4, 0.0);
  CHECK(sequence_logprob(uniform, std::vector<int>{1, 2, 3}) ==
        doctest::Approx(3.0 * std::log(0.25)).epsilon(1e-12));

  CHECK(sequence_logprob(uniform, std::vector<int>{}) == 0.0);
}

TEST_CASE("sequence_logprob matches term-by-term summation") {
  Rng rng(202);
  const int V = 4;
  std::vector<std::vector<int>> utts(15);
  for (auto& utt : utts) {
    utt.resize(rng.uniform_int(1, 9));
    for (int& token : utt) token = rng.uniform_int(0, V - 1);
  }
  const auto lm = train_ngram(corpus_of(utts), V, 0.25);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<int> y(rng.uniform_int(1, 6));
    for (int& token : y) token = rng.uniform_int(0, V - 1);
    double expected = lm.unigram_logprob(y[0]);
    for (size_t i = 1; i < y.size(); ++i) {
      expected += lm.conditional_logprob(y[i], y[i - 1]);
    }
    CHECK(sequence_logprob(lm, y) ==
          doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("scorers always return normalized distributions") {
  Rng rng(303);
  const int V = 6;
  std::vector<std::vector<int>> utts(10);
  for (auto& utt : utts) {
    utt.resize(rng.uniform_int(1, 12));
    for (int& token : utt) token = rng.uniform_int(0, V - 1);
  }
  const auto lm = train_ngram(corpus_of(utts), V, 0.05);
  const BigramMaskedLM masked(lm);

  check_normalized(lm.score_next({}));
  for (int u = 0; u < V; ++u) {
    check_normalized(lm.score_next(std::vector<int>{u}));
  }
  const std::vector<int> y{0, 3, 5, 1};
  for (int position = 0; position < 4; ++position) {
    check_normalized(masked.score_masked(y, position, {}, {}));
  }
}

TEST_CASE("masked predictions converge to the true bigram conditional") {
  // Chain with all transition entries >= 0.1.
  const int V = 4;
  Matrix transitions(V, V);
  const double rows[4][4] = {{0.55, 0.15, 0.15, 0.15},
                             {0.10, 0.20, 0.30, 0.40},
                             {0.25, 0.25, 0.25, 0.25},
                             {0.40, 0.30, 0.20, 0.10}};
  for (int u = 0; u < V; ++u) {
    for (int v = 0; v < V; ++v) transitions.at(u, v) = rows[u][v];
  }

  Rng rng(12345);
  std::vector<int> chain(100000);
  chain[0] = 0;
  for (size_t i = 1; i < chain.size(); ++i) {
    chain[i] = rng.categorical(transitions.row(chain[i - 1]));
  }
  const std::vector<LabelSequence> corpus{LabelSequence{"chain", chain}};
  const BigramMaskedLM masked(train_ngram(corpus, V, 0.01));

  for (int left = 0; left < V; ++left) {
    for (int right = 0; right < V; ++right) {
      std::vector<double> truth(V);
      double norm = 0.0;
      for (int v = 0; v < V; ++v) {
        truth[v] = transitions.at(left, v) * transitions.at(v, right);
        norm += truth[v];
      }
      for (double& p : truth) p /= norm;
      const std::vector<int> y{left, 0, right};
      const auto predicted = masked.score_masked(y, 1, {}, {});
      CHECK(kl_divergence(truth, predicted) < 0.01);
    }
  }
}

TEST_CASE("training is deterministic") {
  Rng rng(404);
  std::vector<std::vector<int>> utts(12);
  for (auto& utt : utts) {
    utt.resize(rng.uniform_int(1, 10));
    for (int& token : utt) token = rng.uniform_int(0, 4);
  }
  const auto corpus = corpus_of(utts);
  const auto a = train_ngram(corpus, 5, 0.1);
  const auto b = train_ngram(corpus, 5, 0.1);
  CHECK(a.bigram_counts() == b.bigram_counts());
  for (int v = 0; v < 5; ++v) CHECK(a.unigram_count(v) == b.unigram_count(v));
}

TEST_CASE("LM table file round-trips") {
  const Vocabulary vocab({"a", "b", "c"});
  const auto lm = train_ngram(corpus_of({{0, 1, 2}, {2, 1, 0}}), 3, 0.1);
  const auto path = std::filesystem::temp_directory_path() / "ctckd_lm.json";
  write_lm(path.string(), lm, vocab);
  const auto loaded = read_lm(path.string());
  CHECK(loaded.vocab.tokens() == vocab.tokens());
  CHECK(loaded.lm.smoothing_k() == lm.smoothing_k());
  CHECK(loaded.lm.bigram_counts() == lm.bigram_counts());
  for (int u = 0; u < 3; ++u) {
    const auto before = lm.score_next(std::vector<int>{u});
    const auto after = loaded.lm.score_next(std::vector<int>{u});
    CHECK(before == after);  // bit-identical
  }
  std::filesystem::remove(path);

  const auto bad = std::filesystem::temp_directory_path() / "ctckd_lm_bad.json";
  std::ofstream(bad.string()) << "{\"format\": 2}\n";
  CHECK_THROWS_AS(read_lm(bad.string()), ParseError);
  std::filesystem::remove(bad);
}

TEST_SUITE_END();
