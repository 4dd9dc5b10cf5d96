// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pmchar/topology.hpp"

using namespace pmchar;

TEST_CASE("synthetic reference layout has the expected shape") {
  Topology t = Topology::synthetic(2, 4, 2, 4, 2);
  CHECK(t.n_packages() == 2);
  CHECK(t.n_ccx() == 16);
  CHECK(t.n_cores() == 64);
  CHECK(t.n_cpus() == 128);
  CHECK(t.cores_per_ccx() == 4);
  CHECK(t.threads_per_core() == 2);
}

TEST_CASE("thread k of core c is cpu k*n_cores + c") {
  Topology t = Topology::synthetic(2, 4, 2, 4, 2);
  for (int core = 0; core < t.n_cores(); core++) {
    auto cpus = t.core_cpus(core);
    REQUIRE(cpus.size() == 2);
    CHECK(cpus[0] == core);
    CHECK(cpus[1] == 64 + core);
    CHECK(t.core_of(cpus[0]) == core);
    CHECK(t.core_of(cpus[1]) == core);
  }
  // second thread of core 0 shares everything with cpu 0
  CHECK(t.ccx_of(0) == t.ccx_of(64));
  CHECK(t.package_of(0) == t.package_of(64));
}

TEST_CASE("ccx membership and cross-ccx neighbours") {
  Topology t = Topology::synthetic(2, 4, 2, 4, 2);
  // cores 0..3 form ccx 0; cpu 2's ccx peers exclude core 2 itself
  auto others = t.other_ccx_cores(2);
  REQUIRE(others.size() == 3);
  CHECK(others == std::vector<int>{0, 1, 3});
  // sibling threads exclude the cpu itself
  CHECK(t.siblings(5) == std::vector<int>{69});
  CHECK(t.siblings(69) == std::vector<int>{5});
  // package split: cores 0..31 in package 0, 32..63 in package 1
  CHECK(t.package_of(31) == 0);
  CHECK(t.package_of(32) == 1);
  CHECK(t.package_of(64 + 31) == 0);
  CHECK(t.package_of(64 + 32) == 1);
}

TEST_CASE("package cpu lists cover both threads") {
  Topology t = Topology::synthetic(2, 4, 2, 4, 2);
  auto p0 = t.package_cpus(0);
  REQUIRE(p0.size() == 64);
  for (int cpu : p0) CHECK(t.package_of(cpu) == 0);
  auto all = t.all_cpus();
  CHECK(all.size() == 128);
  CHECK(all.front() == 0);
  CHECK(all.back() == 127);
}

TEST_CASE("single-core single-thread degenerate layouts index correctly") {
  Topology t = Topology::synthetic(1, 1, 1, 1, 2);
  CHECK(t.n_cores() == 1);
  CHECK(t.n_cpus() == 2);
  CHECK(t.other_ccx_cores(0).empty());
  CHECK(t.siblings(0) == std::vector<int>{1});

  Topology u = Topology::synthetic(1, 1, 2, 2, 1);
  CHECK(u.n_cpus() == 4);
  CHECK(u.siblings(3).empty());
  CHECK(u.other_ccx_cores(0) == std::vector<int>{1});
  CHECK(u.other_ccx_cores(2) == std::vector<int>{3});
}

TEST_CASE("cpu id validation throws with the offending id") {
  Topology t = Topology::synthetic(1, 1, 1, 2, 2);
  CHECK(t.has_cpu(3));
  CHECK(!t.has_cpu(4));
  CHECK(!t.has_cpu(-1));
  CHECK_THROWS_WITH_AS(t.require_cpu(4), doctest::Contains("4"), std::runtime_error);
}

TEST_CASE("layout hash separates shapes and is stable across copies") {
  Topology a = Topology::synthetic(2, 4, 2, 4, 2);
  Topology b = Topology::synthetic(2, 4, 2, 4, 2);
  Topology c = Topology::synthetic(1, 4, 2, 4, 2);
  CHECK(a.layout_hash() == b.layout_hash());
  CHECK(a.layout_hash() != c.layout_hash());
  CHECK(!a.describe().empty());
}
