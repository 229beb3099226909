#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "svpc/json_io.hpp"
#include "svpc/lattice.hpp"

using namespace svpc;

TEST(Lattice, UniformExample) {
  const auto lat = build_lattice(LatticeSpec::uniform(2, -1, 1, 5));
  EXPECT_EQ(lat.size(), 25u);
  EXPECT_EQ(lat.knots(0), (std::vector<double>{-1, -0.5, 0, 0.5, 1}));
  EXPECT_EQ(lat[0], (SsvVector{-1, -1}));
  EXPECT_EQ(lat[1], (SsvVector{-1, -0.5}));
  EXPECT_EQ(lat[24], (SsvVector{1, 1}));
}

TEST(Lattice, QuadraticExample) {
  const auto k = axis_knots({Segment{-1, 1, 5, Spacing::quadratic, 0.0}});
  EXPECT_EQ(k, (std::vector<double>{-1, -0.25, 0, 0.25, 1}));
}

TEST(Lattice, ThreeDimensionalCount) {
  EXPECT_EQ(build_lattice(LatticeSpec::uniform(3, -1, 1, 3)).size(), 27u);
}

TEST(Lattice, KnotsAreSortedAndMirrorSymmetric) {
  for (std::size_t n : {2u, 5u, 17u, 33u, 65u, 101u}) {
    for (auto spacing : {Spacing::uniform, Spacing::quadratic}) {
      const auto k = axis_knots({Segment{-1.05, 1.05, n, spacing, 0.0}});
      ASSERT_EQ(k.size(), n);
      EXPECT_TRUE(std::is_sorted(k.begin(), k.end()));
      for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(k[i], -k[n - 1 - i]);
    }
  }
}

TEST(Lattice, NestedUniformLatticesShareKnots) {
  const auto k17 = axis_knots({Segment{-1.05, 1.05, 17}});
  const auto k33 = axis_knots({Segment{-1.05, 1.05, 33}});
  const auto k65 = axis_knots({Segment{-1.05, 1.05, 65}});
  for (std::size_t i = 0; i < 17; ++i) EXPECT_NEAR(k17[i], k33[2 * i], 1e-15);
  for (std::size_t i = 0; i < 33; ++i) EXPECT_NEAR(k33[i], k65[2 * i], 1e-15);
}

TEST(Lattice, SegmentsAreMerged) {
  const auto k = axis_knots({Segment{-1, 0, 3}, Segment{0, 2, 3}});
  EXPECT_EQ(k, (std::vector<double>{-1, -0.5, 0, 1, 2}));
}

TEST(Lattice, PerAxisSpecs) {
  LatticeSpec spec{2, {{Segment{-1, 1, 3}}, {Segment{0, 1, 2}}}};
  const auto lat = build_lattice(spec);
  EXPECT_EQ(lat.shape(), (std::vector<std::size_t>{3, 2}));
}

TEST(Lattice, InvalidSpecs) {
  EXPECT_THROW(build_lattice(LatticeSpec::uniform(2, 1, -1, 5)), SpecError);
  EXPECT_THROW(build_lattice(LatticeSpec::uniform(2, -1, 1, 1)), SpecError);
  EXPECT_THROW(build_lattice(LatticeSpec::quadratic(2, -1, 1, 5, 2.0)), SpecError);
  EXPECT_THROW(build_lattice(LatticeSpec::uniform(4, -1, 1, 5)), DimensionError);
  LatticeSpec three{2, {{Segment{}}, {Segment{}}, {Segment{}}}};
  EXPECT_THROW(build_lattice(three), SpecError);
}

TEST(Lattice, NearestIndex) {
  const auto lat = build_lattice(LatticeSpec::uniform(2, -1, 1, 5));
  EXPECT_EQ(lat[lat.nearest_index({0.3, -0.9})], (SsvVector{0.5, -1}));
  EXPECT_EQ(lat[lat.nearest_index({5, -5})], (SsvVector{1, -1}));
  for (std::size_t i = 0; i < lat.size(); ++i) EXPECT_EQ(lat.nearest_index(lat[i]), i);
  EXPECT_TRUE(lat.contains({0.99, -1}));
  EXPECT_FALSE(lat.contains({1.01, 0}));
}

TEST(Lattice, JsonRoundTrip) {
  const LatticeSpec spec{2, {{Segment{-1, 0, 3}, Segment{0, 2, 9, Spacing::quadratic, 0.5}}}};
  EXPECT_EQ(lattice_spec_from_json(to_json(spec)), spec);
  const auto j = json::parse(R"({"d":2,"axis":[{"lo":-1,"hi":1,"count":5}]})");
  EXPECT_EQ(lattice_spec_from_json(j), LatticeSpec::uniform(2, -1, 1, 5));
  EXPECT_THROW(lattice_spec_from_json(json::parse(R"({"d":2,"axis":[],"oops":1})")), SpecError);
  EXPECT_THROW(lattice_spec_from_json(json::parse(R"({"d":2})")), SpecError);
}
