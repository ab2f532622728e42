#include <doctest.h>

#include <stdexcept>

#include "cxrkit/train/scheduler.hpp"

using cxrkit::train::PlateauScheduler;

TEST_CASE("two stagnant epochs trigger exactly one reduction") {
    PlateauScheduler sched({0.5, 2, 1e-7});
    CHECK_FALSE(sched.observe(0.5));  // first metric establishes the best
    CHECK_FALSE(sched.observe(0.4));
    CHECK(sched.observe(0.3));
    // The counter reset with the reduction, so the next stagnant epoch does
    // not immediately fire again.
    CHECK_FALSE(sched.observe(0.2));
    CHECK(sched.observe(0.1));
}

TEST_CASE("improvement resets the stagnation counter") {
    PlateauScheduler sched({0.5, 2, 1e-7});
    CHECK_FALSE(sched.observe(0.5));
    CHECK_FALSE(sched.observe(0.4));
    CHECK_FALSE(sched.observe(0.6));  // new best
    CHECK(sched.stagnant_epochs() == 0);
    CHECK_FALSE(sched.observe(0.5));
    CHECK(sched.observe(0.4));
}

TEST_CASE("matching the best exactly counts as stagnation") {
    PlateauScheduler sched({0.5, 1, 0.0});
    CHECK_FALSE(sched.observe(0.5));
    CHECK(sched.observe(0.5));
}

TEST_CASE("the first observation never reduces") {
    PlateauScheduler sched({0.5, 1, 0.0});
    CHECK_FALSE(sched.observe(-1e300));
    CHECK(sched.best() == -1e300);
}

TEST_CASE("reduction halves exactly and floors at min_lr") {
    PlateauScheduler sched({0.5, 2, 1e-7});
    CHECK(sched.reduced(1e-4) == 5e-5);
    CHECK(sched.reduced(1e-5) == 5e-6);
    CHECK(sched.reduced(1.5e-7) == 1e-7);
    CHECK(sched.reduced(1e-7) == 1e-7);
    CHECK(sched.reduced(2e-8) == 1e-7);
}

TEST_CASE("invalid configs are rejected") {
    CHECK_THROWS_AS(PlateauScheduler({0.0, 2, 1e-7}), std::invalid_argument);
    CHECK_THROWS_AS(PlateauScheduler({1.0, 2, 1e-7}), std::invalid_argument);
    CHECK_THROWS_AS(PlateauScheduler({0.5, 0, 1e-7}), std::invalid_argument);
    CHECK_THROWS_AS(PlateauScheduler({0.5, 2, -1.0}), std::invalid_argument);
}
