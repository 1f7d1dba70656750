#include <doctest.h>

#include <cmath>
#include <sstream>

#include "relquant/space_allocator.hpp"

using relquant::space_allocator;

TEST_CASE("open potentials ground out at one per step") {
  space_allocator a(2, 4, 1);
  a.note_step(0, 16);
  CHECK(a.phi_open(0) >= 1);
  for (int i = 0; i < 9; ++i) a.note_step(0, 16);
  CHECK(a.phi_open(0) == 10);  // no resets: the span is the step count
}

TEST_CASE("a reset folds exactly the closed potential into the parent") {
  space_allocator a(2, 4, 1);
  for (int i = 0; i < 12; ++i) a.note_step(0, 16);
  a.on_reset(1);  // materializes level 1
  for (int i = 0; i < 6; ++i) a.note_step(1, 16);
  uint64_t p1 = a.phi_open(1);
  CHECK(p1 == 6);
  uint64_t parent_before = a.phi_open(0);
  a.on_reset(1);
  // the parent's committed share grew by p1; its open child is now fresh
  CHECK(a.phi_open(0) == parent_before);
  CHECK(a.phi_open(1) == 0);  // no steps yet in the fresh interval
  a.note_step(1, 16);
  CHECK(a.phi_open(1) == 1);
}

TEST_CASE("back-to-back resets still close intervals of potential one") {
  space_allocator a(2, 4, 1);
  for (int i = 0; i < 5; ++i) a.note_step(0, 16);
  a.on_reset(1);
  a.note_step(1, 16);
  uint64_t before = a.phi_open(0);
  a.on_reset(1);
  a.on_reset(1);  // zero steps in between: still counts as at least 1
  CHECK(a.phi_open(0) >= before + 1);
}

TEST_CASE("nested interval traces reproduce plain lengths") {
  space_allocator a(2, 4, 1);
  // level-1 children of lengths 5 and 5 inside a level-0 run of 10 steps
  a.on_reset(1);
  for (int i = 0; i < 5; ++i) a.note_step(1, 16);
  CHECK(a.phi_open(1) == 5);
  a.on_reset(1);
  for (int i = 0; i < 5; ++i) a.note_step(1, 16);
  CHECK(a.phi_open(1) == 5);
  a.on_reset(1);
  CHECK(a.phi_open(0) == 10);
}

TEST_CASE("space target formula") {
  // walk a trace to ceil2(phi_1) = 8, ceil2(phi_2) = 2, loglog term 3
  space_allocator a(2 /*eps=1/4*/, 4, 1);
  for (int i = 0; i < 12; ++i) a.note_step(0, 16);
  a.on_reset(1);
  for (int i = 0; i < 6; ++i) a.note_step(1, 16);
  a.on_reset(2);
  for (int i = 0; i < 2; ++i) a.note_step(2, 16);
  CHECK(a.steps() == 20);
  CHECK(a.loglog_term() == 3);
  CHECK(a.phi_open(1) == 8);
  CHECK(a.phi_open(2) == 2);
  CHECK(a.space_target(1) == 4 * (2 + 5 * 2 + 5 * 3));  // 108
}

TEST_CASE("equal potentials still give positive space") {
  space_allocator a(3, 8, 1);
  CHECK(a.space_target(0) > 0);
  a.note_step(0, 64);
  a.on_reset(1);
  a.note_step(1, 64);
  CHECK(a.phi_open(0) >= a.phi_open(1));
  CHECK(a.space_target(0) >= a.space_target(1));
  CHECK(a.space_target(1) > 0);
}

TEST_CASE("feasibility accumulator") {
  space_allocator a(2, 4, 1);
  CHECK(a.feasibility_accumulator(0) == 0.0);
  a.note_step(0, 20);
  CHECK(a.feasibility_accumulator(0) == doctest::Approx(std::exp2(-5.0)));
  a.on_reset(0);
  CHECK(a.feasibility_accumulator(0) == 0.0);
  CHECK(a.max_accumulator(0) == doctest::Approx(std::exp2(-5.0)));
}

TEST_CASE("loglog term grows with the step count") {
  space_allocator a(2, 4, 1);
  CHECK(a.loglog_term() == 1);  // floor of 4 on the step count
  for (int i = 0; i < 5; ++i) a.note_step(0, 16);
  CHECK(a.loglog_term() == 2);  // ceil(lg 5) = 3, ceil(lg 3) = 2
  for (int i = 0; i < 15; ++i) a.note_step(0, 16);
  CHECK(a.loglog_term() == 3);  // T = 20
}

TEST_CASE("high-probability multiplier scales the target") {
  space_allocator a(2, 4, 1);
  space_allocator b(2, 4, 8);
  a.note_step(0, 16);
  b.note_step(0, 16);
  CHECK(b.space_target(0) == 8 * a.space_target(0));
}

TEST_CASE("state round-trips through text") {
  space_allocator a(2, 4, 1);
  for (int i = 0; i < 9; ++i) a.note_step(0, 16);
  a.on_reset(1);
  a.note_step(1, 12);
  std::stringstream ss;
  a.save_state(ss);
  space_allocator b(0, 1, 1);
  b.load_state(ss);
  CHECK(b.steps() == a.steps());
  CHECK(b.phi_open(0) == a.phi_open(0));
  CHECK(b.phi_open(1) == a.phi_open(1));
  CHECK(b.space_target(0) == a.space_target(0));
  CHECK(b.feasibility_accumulator(1) == a.feasibility_accumulator(1));
}
