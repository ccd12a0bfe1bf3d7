#include <cmath>
#include <sstream>

#include <doctest.h>

#include "ctckd/errors.hpp"
#include "ctckd/lattice_io.hpp"
#include "ctckd/logmath.hpp"
#include "ctckd/types.hpp"
#include "oracles.hpp"

using namespace ctckd;

namespace {

PosteriorLattice uniform_lattice(const std::string& id, int frames,
                                 int vocab_size) {
  Matrix rows(frames, vocab_size + 1,
              -std::log(static_cast<double>(vocab_size + 1)));
  return PosteriorLattice(id, std::move(rows));
}

}  // namespace

TEST_SUITE_BEGIN("lattice");

TEST_CASE("collapse merges repeats then removes blanks") {
  const int blank = 2;  // tokens a=0, b=1
  CHECK(collapse(std::vector<int>{0, 0, blank, 1}, blank) ==
        std::vector<int>{0, 1});
  CHECK(collapse(std::vector<int>{blank, blank, blank}, blank) ==
        std::vector<int>{});
  CHECK(collapse(std::vector<int>{0, blank, 0}, blank) ==
        std::vector<int>{0, 0});
  CHECK(collapse(std::vector<int>{}, blank) == std::vector<int>{});
}

TEST_CASE("extend_with_blanks interleaves blanks") {
  const int blank = 9;
  CHECK(extend_with_blanks(std::vector<int>{0}, blank) ==
        std::vector<int>{blank, 0, blank});
  CHECK(extend_with_blanks(std::vector<int>{0, 1}, blank) ==
        std::vector<int>{blank, 0, blank, 1, blank});
  CHECK(extend_with_blanks(std::vector<int>{0, 0}, blank) ==
        std::vector<int>{blank, 0, blank, 0, blank});
}

TEST_CASE("extend_with_blanks length and odd positions") {
  Rng rng(42);
  for (int trial = 0; trial < 50; ++trial) {
    const int V = rng.uniform_int(1, 5);
    const auto tokens = oracles::random_tokens(rng, rng.uniform_int(1, 7), V);
    const auto extended = extend_with_blanks(tokens, V);
    REQUIRE(extended.size() == 2 * tokens.size() + 1);
    for (size_t s = 0; s < extended.size(); ++s) {
      if (s % 2 == 0) {
        CHECK(extended[s] == V);
      } else {
        CHECK(extended[s] == tokens[s / 2]);
      }
    }
  }
}

TEST_CASE("log_add identities") {
  CHECK(log_add(std::log(0.25), std::log(0.25)) ==
        doctest::Approx(std::log(0.5)).epsilon(1e-12));
  const double x = -1.234567;
  CHECK(log_add(x, kLogZero) == x);  // exact additive identity
  CHECK(log_add(kLogZero, x) == x);
  CHECK(std::abs(log_add(std::log(0.9), std::log(0.1))) < 1e-12);
  CHECK(log_add(kLogZero, kLogZero) == kLogZero);
}

TEST_CASE("log_add commutative and associative") {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const double a = -10.0 * rng.uniform();
    const double b = -10.0 * rng.uniform();
    const double c = -10.0 * rng.uniform();
    CHECK(log_add(a, b) == doctest::Approx(log_add(b, a)).epsilon(1e-12));
    CHECK(log_add(log_add(a, b), c) ==
          doctest::Approx(log_add(a, log_add(b, c))).epsilon(1e-12));
  }
}

TEST_CASE("collapse is idempotent through random expansions") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int V = rng.uniform_int(1, 4);
    const auto tokens = oracles::random_tokens(rng, rng.uniform_int(0, 5), V);
    const int min_len = [&] {
      int repeats = 0;
      for (size_t i = 1; i < tokens.size(); ++i) {
        repeats += tokens[i] == tokens[i - 1];
      }
      return static_cast<int>(tokens.size()) + repeats;
    }();
    const int target = min_len + rng.uniform_int(0, 6);
    const auto path = oracles::random_expansion(rng, tokens, V, target);
    CHECK(collapse(path, V) == tokens);
    // determinism
    CHECK(collapse(path, V) == collapse(path, V));
    for (int symbol : collapse(path, V)) CHECK(symbol != V);
  }
}

TEST_CASE("lattice validates on construction") {
  CHECK_NOTHROW(uniform_lattice("ok", 3, 2));

  Matrix bad_sum(1, 3, std::log(0.5));  // sums to 1.5
  CHECK_THROWS_AS(PosteriorLattice("bad", std::move(bad_sum)),
                  InvalidInputError);

  Matrix positive(1, 3, 0.0);
  positive.at(0, 0) = 0.5;  // not a log-probability
  CHECK_THROWS_AS(PosteriorLattice("bad", std::move(positive)),
                  InvalidInputError);

  Matrix empty(0, 3);
  CHECK_THROWS_AS(PosteriorLattice("bad", std::move(empty)),
                  InvalidInputError);
}

TEST_CASE("from_logits normalizes rows") {
  Rng rng(3);
  const auto lattice = oracles::random_lattice(rng, "u", 4, 3);
  for (int t = 0; t < lattice.frames(); ++t) {
    double sum = 0.0;
    for (int v = 0; v < lattice.num_classes(); ++v) {
      sum += std::exp(lattice.log_prob(t, v));
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("lattice stream round-trips bit-exactly") {
  Rng rng(19);
  std::vector<PosteriorLattice> lattices;
  lattices.push_back(oracles::random_lattice(rng, "utt-a", 3, 2));
  lattices.push_back(oracles::random_lattice(rng, "utt-b", 5, 4));

  std::ostringstream first;
  write_lattices(first, lattices);
  std::istringstream reread(first.str());
  const auto parsed = read_lattices(reread, "round-trip");
  REQUIRE(parsed.size() == lattices.size());
  for (size_t i = 0; i < parsed.size(); ++i) {
    CHECK(parsed[i].utt_id() == lattices[i].utt_id());
    REQUIRE(parsed[i].frames() == lattices[i].frames());
    REQUIRE(parsed[i].num_classes() == lattices[i].num_classes());
    CHECK(parsed[i].log_probs().data == lattices[i].log_probs().data);
  }
  std::ostringstream second;
  write_lattices(second, parsed);
  CHECK(first.str() == second.str());
}

TEST_CASE("lattice reader reports the offending line") {
  std::istringstream bad("utt 2 2\n-0.1 -0.2 -0.3\nnot numbers here\n");
  try {
    read_lattices(bad, "bad-input");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line == 3);
  }

  std::istringstream bad_header("utt two 2\n");
  CHECK_THROWS_AS(read_lattices(bad_header, "bad-header"), ParseError);
}

TEST_CASE("vocabulary rejects duplicates and empties") {
  CHECK_THROWS_AS(Vocabulary({"a", "a"}), InvalidInputError);
  CHECK_THROWS_AS(Vocabulary({"a", ""}), InvalidInputError);
  CHECK_THROWS_AS(Vocabulary({}), InvalidInputError);

  const Vocabulary vocab({"a", "b", "c"});
  CHECK(vocab.size() == 3);
  CHECK(vocab.blank_id() == 3);
  CHECK(vocab.find("b") == 1);
  CHECK(!vocab.find("z").has_value());
}

TEST_CASE("transcripts round-trip and reject unknown tokens") {
  const Vocabulary vocab({"a", "b"});
  std::istringstream in("utt1 a b a\nutt2 b\n");
  const auto utts = read_transcripts(in, vocab, "in");
  REQUIRE(utts.size() == 2);
  CHECK(utts[0].tokens == std::vector<int>{0, 1, 0});
  CHECK(utts[1].tokens == std::vector<int>{1});

  std::ostringstream out;
  write_transcripts(out, utts, vocab);
  CHECK(out.str() == "utt1 a b a\nutt2 b\n");

  std::istringstream bad("utt1 a\nutt2 q\n");
  try {
    read_transcripts(bad, vocab, "bad");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line == 2);
  }
}

TEST_SUITE_END();
