#include <doctest.h>

#include <array>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include "relquant/generators.hpp"
#include "relquant/rank_oracle.hpp"
#include "relquant/relative_sketch.hpp"

using relquant::gen_uniform;
using relquant::rank_oracle;
using relquant::rational;
using relquant::sketch_event_kind;
using relquant::sketch_options;
using relquant::sketch_params;
using sketch = relquant::relative_sketch<rational>;

namespace {

void write_key(std::ostream& os, const rational& r) {
  os << r.num << ' ' << r.den;
}
rational read_key(std::istream& is) {
  long long n, d;
  is >> n >> d;
  return rational(n, d);
}

}  // namespace

TEST_CASE("first key routes to scale zero and stays staged") {
  sketch sk(4, 1);
  sk.insert(rational(7));
  CHECK(sk.scale_count() == 1);
  CHECK(sk.staged(0).size() == 1);
  CHECK(sk.query(rational(8)) == 1.0);
  CHECK(sk.query(rational(7)) == 0.0);
}

TEST_CASE("a key below everything stored routes to scale zero") {
  sketch sk(3, 5);
  for (long long i = 0; i < 4000; ++i) sk.insert(rational(1000 + i));
  REQUIRE(sk.scale_count() > 1);
  size_t staged0 = sk.staged(0).size();
  sk.insert(rational(1));
  CHECK(sk.staged(0).size() == staged0 + 1);
  CHECK(sk.staged(0).back() == rational(1));
}

TEST_CASE("memory snapshot holds the inserted keys") {
  sketch sk(4, 2);
  CHECK(sk.memory_snapshot().empty());
  sk.insert(rational(5));
  auto mem = sk.memory_snapshot();
  REQUIRE(mem.size() == 1);
  CHECK(mem[0] == rational(5));
  CHECK(sk.stored_count() == 1);
}

TEST_CASE("queries with true rank at most 1/eps are exact") {
  for (uint32_t m : {4u, 5u}) {
    auto stream = gen_uniform(10000, 77 + m);
    rank_oracle<rational> oracle(stream);
    sketch sk(m, 1234);
    for (const auto& x : stream) sk.insert(x);
    uint64_t head = uint64_t{1} << m;
    for (uint64_t r = 1; r <= head; ++r) {
      rational key = oracle.key_at_rank(r);
      CHECK(sk.query(key) == static_cast<double>(oracle.exact_rank(key)));
      rational probe = midpoint(key, rational(key.num + 1, key.den));
      CHECK(sk.query(probe) == static_cast<double>(oracle.exact_rank(probe)));
    }
  }
}

TEST_CASE("identical configuration and seed give identical runs") {
  auto stream = gen_uniform(30000, 5);
  sketch_options opt;
  opt.trace = true;
  sketch a(5, 42, opt), b(5, 42, opt);
  for (const auto& x : stream) {
    a.insert(x);
    b.insert(x);
  }
  rank_oracle<rational> oracle(stream);
  for (uint64_t r = 1; r < 30000; r *= 3)
    CHECK(a.query(oracle.key_at_rank(r)) == b.query(oracle.key_at_rank(r)));
  REQUIRE(a.trace().size() == b.trace().size());
  for (size_t i = 0; i < a.trace().size(); ++i) {
    CHECK(a.trace()[i].step == b.trace()[i].step);
    CHECK(a.trace()[i].level == b.trace()[i].level);
    CHECK(a.trace()[i].s_hat == b.trace()[i].s_hat);
    CHECK(a.trace()[i].phi_level == b.trace()[i].phi_level);
    CHECK(a.trace()[i].accumulator == b.trace()[i].accumulator);
  }
  CHECK(a.trace().size() == a.allocator().steps());
}

TEST_CASE("instrumented invariants hold along a mixed stream") {
  auto stream = relquant::gen_tree_instance(20000, 3);
  sketch_options opt;
  opt.instrument = true;
  sketch sk(4, 9, opt);
  for (const auto& x : stream) sk.insert(x);  // checks fire on every insert
  CHECK(sk.conservation_gap() == 0);

  // every delivery into a scale follows that scale's reset
  std::vector<int> last_kind(sk.scale_count() + 2, -1);
  for (const auto& ev : sk.events()) {
    if (ev.kind == sketch_event_kind::deliver) {
      REQUIRE(ev.scale < last_kind.size());
      bool ok = last_kind[ev.scale] == int(sketch_event_kind::reset) ||
                last_kind[ev.scale] == int(sketch_event_kind::deliver);
      CHECK(ok);
    }
    if (ev.scale < last_kind.size()) last_kind[ev.scale] = int(ev.kind);
  }
}

TEST_CASE("feasibility holds across generators") {
  for (const char* kind : {"uniform", "sorted", "reverse", "tree_instance"}) {
    auto stream = relquant::gen_stream(kind, 20000, 11);
    sketch sk(4, 13);
    for (const auto& x : stream) sk.insert(x);
    for (size_t lvl = 0; lvl < sk.allocator().level_count(); ++lvl)
      CHECK(sk.allocator().max_accumulator(lvl) <= 0.25);
  }
}

TEST_CASE("potentials stay under the generalized-length bound") {
  auto stream = gen_uniform(50000, 21);
  sketch sk(4, 23);
  for (const auto& x : stream) sk.insert(x);
  const auto& alloc = sk.allocator();
  long double cap = std::pow(4.0L, static_cast<long double>(alloc.level_count() + 1)) *
                    static_cast<long double>(alloc.steps());
  CHECK(static_cast<long double>(alloc.phi_open(0)) <= cap);
}

TEST_CASE("important resets are bounded by twice the input rank over R") {
  auto stream = gen_uniform(30000, 31);
  sketch_options opt;
  opt.instrument = true;
  sketch sk(4, 33, opt);
  for (const auto& x : stream) sk.insert(x);
  rank_oracle<rational> oracle(stream);
  for (uint64_t r = 1; r < 30000; r *= 2) {
    rational x = oracle.key_at_rank(r);
    for (size_t i = 0; i < sk.scale_count(); ++i) {
      const auto& sc = sk.scale(i);
      double bound = 2.0 * sc.input_rank(x) /
                     std::ldexp(1.0, int(i + sk.params().eps_exp));
      CHECK(static_cast<double>(sc.important_resets(x)) <= bound + 1e-9);
    }
  }
}

TEST_CASE("steps per child interval stay bounded") {
  auto stream = relquant::gen_tree_instance(50000, 41);
  sketch sk(4, 43);
  for (const auto& x : stream) sk.insert(x);
  double eps = 1.0 / 16;
  double eps_n = eps * 50000;
  // 3/eps^2 + 2 + measured-constant * log^2(eps n)
  double bound = 3.0 / (eps * eps) + 2 +
                 8.0 * std::log2(eps_n) * std::log2(eps_n);
  for (size_t lvl = 0; lvl < sk.allocator().level_count(); ++lvl)
    CHECK(static_cast<double>(sk.allocator().max_steps_per_child(lvl)) <=
          bound);
}

TEST_CASE("snapshots resume deterministically") {
  auto stream = gen_uniform(20000, 51);
  sketch full(4, 55);
  sketch half(4, 55);
  for (size_t i = 0; i < stream.size(); ++i) {
    full.insert(stream[i]);
    if (i < stream.size() / 2) half.insert(stream[i]);
  }
  std::stringstream snap;
  half.save_snapshot(snap, write_key);
  std::string bytes = snap.str();
  // identical state serializes identically
  std::stringstream snap2;
  half.save_snapshot(snap2, write_key);
  CHECK(bytes == snap2.str());

  std::istringstream in(bytes);
  sketch resumed = sketch::load_snapshot<rational (*)(std::istream&)>(
      in, read_key);
  for (size_t i = stream.size() / 2; i < stream.size(); ++i)
    resumed.insert(stream[i]);
  rank_oracle<rational> oracle(stream);
  for (uint64_t r = 1; r < 20000; r *= 2) {
    rational key = oracle.key_at_rank(r);
    CHECK(resumed.query(key) == full.query(key));
  }
  CHECK(resumed.n_seen() == full.n_seen());
}

TEST_CASE("tracing off means stats are unavailable") {
  sketch sk(4, 1);
  CHECK_THROWS_AS(sk.trace(), std::logic_error);
  CHECK_THROWS_AS(sk.events(), std::logic_error);
}

TEST_CASE("statistical relative error on a small uniform stream") {
  const uint32_t m = 4;  // eps = 1/16
  const int n = 20000;
  auto stream = gen_uniform(n, 61);
  rank_oracle<rational> oracle(stream);
  std::vector<uint64_t> ranks{16, 256, 4096, 19999};
  const int seeds = 10;
  for (uint64_t r : ranks) {
    rational key = oracle.key_at_rank(r);
    double truth = static_cast<double>(oracle.exact_rank(key));
    double sq = 0.0;
    for (int s = 1; s <= seeds; ++s) {
      sketch sk(m, 100 + s);
      for (const auto& x : stream) sk.insert(x);
      double err = (sk.query(key) - truth) / std::max(1.0, truth);
      sq += err * err;
    }
    CHECK(std::sqrt(sq / seeds) <= 2.0 / 16);
  }
}

TEST_CASE("per-scale error tracks the reset-aware budget") {
  // Delta_i(x) = rank_estimate_i(x) + outflow_rank_i(x) - input_rank_i(x);
  // rms over seeds should stay within 2*eps*sqrt(R_i*rank + t_i*R_i^2)
  const uint32_t m = 3;  // eps = 1/8
  const int n = 4000;
  auto stream = gen_uniform(n, 71);
  rank_oracle<rational> oracle(stream);
  std::vector<rational> queries{oracle.key_at_rank(40),
                                oracle.key_at_rank(400),
                                oracle.key_at_rank(3200)};
  const int seeds = 150;
  sketch_options opt;
  opt.instrument = true;
  // accumulate per (scale, query): sum of delta^2, input rank, resets
  std::map<std::pair<size_t, size_t>, std::array<double, 3>> acc;
  for (int s = 1; s <= seeds; ++s) {
    sketch sk(m, 7000 + s, opt);
    for (const auto& x : stream) sk.insert(x);
    for (size_t i = 0; i < sk.scale_count(); ++i) {
      for (size_t q = 0; q < queries.size(); ++q) {
        const auto& sc = sk.scale(i);
        double delta = sc.rank_estimate(queries[q]) +
                       sc.outflow_rank(queries[q]) -
                       sc.input_rank(queries[q]);
        auto& slot = acc[{i, q}];
        slot[0] += delta * delta;
        slot[1] += sc.input_rank(queries[q]);
        slot[2] += static_cast<double>(sc.important_resets(queries[q]));
      }
    }
  }
  double eps = 1.0 / 8;
  for (const auto& [key, slot] : acc) {
    double r_i = std::ldexp(1.0, int(key.first + m));
    double rms = std::sqrt(slot[0] / seeds);
    double mean_rank = slot[1] / seeds;
    double mean_resets = slot[2] / seeds;
    double budget =
        2.0 * eps * std::sqrt(r_i * mean_rank + mean_resets * r_i * r_i) +
        1e-9;
    CHECK(rms <= budget);
  }
}

TEST_CASE("query_grid matches repeated point queries") {
  auto stream = gen_uniform(5000, 81);
  sketch sk(4, 83);
  for (const auto& x : stream) sk.insert(x);
  rank_oracle<rational> oracle(stream);
  std::vector<rational> grid;
  for (uint64_t r = 1; r < 5000; r *= 4) grid.push_back(oracle.key_at_rank(r));
  auto got = sk.query_grid(grid);
  REQUIRE(got.size() == grid.size());
  for (size_t i = 0; i < grid.size(); ++i) CHECK(got[i] == sk.query(grid[i]));
  sketch tiny(4, 85);
  tiny.insert(rational(3));
  tiny.insert(rational(9));
  CHECK(tiny.query_grid({rational(3), rational(9), rational(10)}) ==
        std::vector<double>{0.0, 1.0, 2.0});
}

TEST_CASE("high-probability mode derives its constants and runs") {
  auto sp = sketch_params::make(2, true, 4);  // eps=1/4, delta=1/16
  CHECK(sp.k == 2048);                        // 128*(loglog)^2/eps
  CHECK(sp.space_multiplier == 8);            // (loglog)^3
  CHECK(sp.ebuf_shift - sp.e0_shift == 2);    // nominal level count
  CHECK_THROWS_AS(sketch_params::make(2, true, 0), std::invalid_argument);

  auto stream = gen_uniform(5000, 91);
  sketch a(sp, 93), b(sp, 93);
  for (const auto& x : stream) {
    a.insert(x);
    b.insert(x);
  }
  rank_oracle<rational> oracle(stream);
  for (uint64_t r : {uint64_t{1}, uint64_t{100}, uint64_t{4000}}) {
    rational key = oracle.key_at_rank(r);
    CHECK(a.query(key) == b.query(key));
  }
  for (size_t lvl = 0; lvl < a.allocator().level_count(); ++lvl)
    CHECK(a.allocator().max_accumulator(lvl) <= 0.25);
}

TEST_CASE("closed intervals touch at most four intervals one level up") {
  for (const char* kind : {"uniform", "tree_instance", "sorted"}) {
    auto stream = relquant::gen_stream(kind, 60000, 17);
    sketch sk(4, 19);
    for (const auto& x : stream) sk.insert(x);
    for (size_t lvl = 1; lvl < sk.allocator().level_count(); ++lvl)
      CHECK(sk.allocator().max_parents(lvl) <= 4);
  }
}

TEST_CASE("the memory snapshot agrees with the space accounting") {
  auto stream = gen_uniform(5000, 23);
  sketch sk(4, 29);
  for (size_t i = 0; i < stream.size(); ++i) {
    sk.insert(stream[i]);
    if (i % 977 == 0)
      CHECK(sk.memory_snapshot().size() == sk.stored_count());
  }
  CHECK(sk.memory_snapshot().size() == sk.stored_count());
}

TEST_CASE("the coarsest accuracy setting still runs end to end") {
  // eps = 1: single-key staging, weight caps of a few units, half-weight
  // migration coins between every adjacent scale
  sketch sk(0, 3);
  for (long long i = 100; i > 0; --i) sk.insert(rational(i));
  CHECK(sk.n_seen() == 100);
  CHECK(sk.query(rational(1)) == 0.0);
  double est = sk.query(rational(101));
  CHECK(est > 0.0);
  CHECK(est <= 200.0);  // eps = 1 tolerates a factor-two answer
  for (size_t lvl = 0; lvl < sk.allocator().level_count(); ++lvl)
    CHECK(sk.allocator().max_accumulator(lvl) <= 0.25);
}

TEST_CASE("duplicate-heavy streams keep every invariant") {
  std::mt19937_64 rng(5);
  std::vector<rational> stream;
  for (int i = 0; i < 40000; ++i) {
    if (i % 1000 < 300)
      stream.emplace_back(42);  // hot key
    else
      stream.emplace_back(static_cast<long long>(rng() % 50));
  }
  sketch_options opt;
  opt.instrument = true;
  sketch sk(4, 5, opt);
  for (const auto& x : stream) sk.insert(x);  // per-insert checks
  CHECK(sk.conservation_gap() == 0);
  rank_oracle<rational> o(stream);
  CHECK(sk.query(rational(0)) == 0.0);
  double est = sk.query(rational(100));
  CHECK(est == doctest::Approx(40000).epsilon(0.1));
  (void)o;
}
