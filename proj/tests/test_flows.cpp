#include <cmath>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "oracles.hpp"
#include "percs/flows.hpp"

using namespace percs;

namespace {

LogitMap logits_for(const LabelMask& m, double v = 10.0) {
  LogitMap l(m.height(), m.width(), -v);
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      if (m(y, x)) l(y, x) = v;
    }
  }
  return l;
}

}  // namespace

TEST_SUITE("flows") {
  TEST_CASE("instance_center of a single pixel and a bar") {
    BinaryMask one(6, 10, 0);
    one(3, 7) = 1;
    CHECK(instance_center(one) == Pixel{3, 7});
    CHECK(instance_center(testing::rect(5, 5, 2, 0, 1, 5)) == Pixel{2, 2});
    CHECK_THROWS_AS(instance_center(BinaryMask(3, 3, 0)), EmptyInstanceError);
  }

  TEST_CASE("instance_center of a C shape lands on the nearest in-mask pixel") {
    // Opening on the right: the coordinate median sits in the hole.
    BinaryMask c(9, 9, 0);
    for (int y = 1; y <= 7; ++y) c(y, 1) = c(y, 2) = 1;
    for (int x = 1; x <= 7; ++x) c(1, x) = c(2, x) = c(6, x) = c(7, x) = 1;
    const Pixel p = instance_center(c);
    CHECK(c(p.y, p.x) == 1);
    CHECK(p == oracle::diffuse(c).center);
  }

  TEST_CASE("diffusion_iterations follows the bounding box") {
    CHECK(diffusion_iterations(3, 7) == 24);
    CHECK(diffusion_iterations(1, 1) == 12);
  }

  TEST_CASE("single-pixel instance has zero flow; background is zero") {
    LabelMask m(3, 3, {0, 0, 0, 0, 1, 0, 0, 0, 0});
    const GtFlows g = compute_gt_flows(m);
    for (double v : g.flow.dy.values()) CHECK(v == 0.0);
    for (double v : g.flow.dx.values()) CHECK(v == 0.0);
    const GtFlows empty = compute_gt_flows(LabelMask::background(4, 4));
    for (double v : empty.flow.dx.values()) CHECK(v == 0.0);
  }

  TEST_CASE("three-pixel line points inward") {
    const LabelMask m(1, 5, {0, 1, 1, 1, 0});
    const GtFlows g = compute_gt_flows(m);
    CHECK(g.flow.dx(0, 1) == doctest::Approx(1.0));
    CHECK(g.flow.dy(0, 1) == doctest::Approx(0.0));
    CHECK(g.flow.dx(0, 3) == doctest::Approx(-1.0));
    CHECK(g.flow.dx(0, 2) == 0.0);
    CHECK(g.flow.dy(0, 2) == 0.0);
  }

  TEST_CASE("gt flows match the diffusion oracle") {
    const LabelMask m = testing::paint({testing::disk(30, 40, 10, 10, 6), testing::rect(30, 40, 15, 22, 9, 14),
                                        testing::disk(30, 40, 24, 6, 3.5)});
    const GtFlows g = compute_gt_flows(m);
    for (int l = 1; l <= m.count(); ++l) {
      const BinaryMask inst = m.instance(l);
      const oracle::Diffusion d = oracle::diffuse(inst);
      for (int y = 0; y < m.height(); ++y) {
        for (int x = 0; x < m.width(); ++x) {
          if (!inst(y, x)) continue;
          CHECK(g.heat(y, x) == doctest::Approx(d.heat(y, x)).epsilon(1e-12));
          CHECK(g.flow.dy(y, x) == doctest::Approx(d.dy(y, x)).epsilon(1e-9));
          CHECK(g.flow.dx(y, x) == doctest::Approx(d.dx(y, x)).epsilon(1e-9));
        }
      }
    }
  }

  TEST_CASE("flow magnitudes are zero or unit") {
    const percs::Sample s = testing::scene(3, 96, 96, 4, 14, 8);
    const GtFlows g = compute_gt_flows(s.mask);
    check_flow_field(g.flow, s.mask);
    for (std::size_t i = 0; i < g.flow.dy.size(); ++i) {
      const double n = std::hypot(g.flow.dy.values()[i], g.flow.dx.values()[i]);
      CHECK((n == 0.0 || std::abs(n - 1.0) <= 1e-6));
    }
  }

  TEST_CASE("follow_flows recovers a disk") {
    const LabelMask m = testing::paint({testing::disk(32, 32, 15, 16, 5)});
    const LabelMask out = follow_flows(compute_gt_flows(m).flow, logits_for(m));
    REQUIRE(out.count() == 1);
    CHECK(iou(out.instance(1), m.instance(1)) >= 0.9);
  }

  TEST_CASE("follow_flows separates two disks") {
    const LabelMask m = testing::paint({testing::disk(40, 60, 18, 15, 7), testing::disk(40, 60, 20, 42, 9)});
    const LabelMask out = follow_flows(compute_gt_flows(m).flow, logits_for(m));
    REQUIRE(out.count() == 2);
    CHECK(testing::mean_matched_iou(out, m) >= 0.9);
  }

  TEST_CASE("follow_flows with nothing above threshold is empty") {
    const LabelMask m = testing::paint({testing::disk(20, 20, 10, 10, 5)});
    CHECK(follow_flows(compute_gt_flows(m).flow, LogitMap(20, 20, -10.0)).count() == 0);
  }

  TEST_CASE("follow_flows is deterministic and valid on random scenes") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const percs::Sample s = testing::scene(seed, 128, 128, 4, 16, 10);
      const FlowField f = compute_gt_flows(s.mask).flow;
      const LabelMask a = follow_flows(f, logits_for(s.mask));
      const LabelMask b = follow_flows(f, logits_for(s.mask));
      CHECK(a == b);
      CHECK(a.count() == s.mask.count());
      CHECK(testing::mean_matched_iou(a, s.mask) >= 0.9);
    }
  }

  TEST_CASE("follow_flows rejects mismatched canvases and bad params") {
    CHECK_THROWS_AS(follow_flows(FlowField(3, 3), LogitMap(3, 4, 0.0)), DimensionError);
    ReconstructionParams p;
    p.merge_radius = 0;
    CHECK_THROWS_AS(check_params(p), ConfigError);
    p = {};
    p.prob_threshold = 1.0;
    CHECK_THROWS_AS(check_params(p), ConfigError);
  }

  TEST_CASE("remove_small_instances") {
    const LabelMask m = testing::paint({testing::rect(10, 10, 0, 0, 1, 3), testing::rect(10, 10, 3, 0, 5, 8)});
    CHECK(remove_small_instances(m, 0) == m);
    const LabelMask kept = remove_small_instances(m, 15);
    CHECK(kept.count() == 1);
    CHECK(kept.areas()[1] == 40);
    CHECK(remove_small_instances(m, 100).count() == 0);
  }

  TEST_CASE("relabel_sequential orders by first appearance") {
    const LabelMask m = relabel_sequential(Grid<std::int32_t>(1, 4, std::vector<std::int32_t>{0, 7, 2, 7}));
    CHECK(m.grid().values()[1] == 1);
    CHECK(m.grid().values()[2] == 2);
  }

  TEST_CASE("flow file round trip and malformed input") {
    FlowField f(2, 3);
    f.dy(0, 1) = 0.5;
    f.dx(1, 2) = -0.25;
    const auto bytes = encode_flow_file(f);
    CHECK(bytes.size() == 12 + 2 * 3 * 8);
    CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "PCSF");
    CHECK(decode_flow_file(bytes) == f);
    auto bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS(decode_flow_file(bad));
    bad = bytes;
    bad.pop_back();
    CHECK_THROWS(decode_flow_file(bad));
  }
}
