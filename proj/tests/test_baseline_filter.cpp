#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "oracles.hpp"
#include "percs/baseline_filter.hpp"
#include "percs/model_head.hpp"

using namespace percs;

namespace {

InstanceSet interval_set(const std::vector<std::pair<int, int>>& spans, const std::vector<double>& scores) {
  InstanceSet s{1, 20, {}, scores};
  for (auto [a, b] : spans) s.masks.push_back(testing::rect(1, 20, 0, a, 1, b - a));
  return s;
}

}  // namespace

TEST_SUITE("candidate points") {
  TEST_CASE("single maximum comes first") {
    RealGrid g(5, 5, 0.0);
    g(3, 1) = 2.0;
    const CandidateSet c = select_candidate_points(g, 3, 1.0);
    CHECK(c.points[0] == CandidatePoint{3, 1, 2.0});
  }

  TEST_CASE("constant grid without spacing follows row-major order") {
    const CandidateSet c = select_candidate_points(RealGrid(3, 4, 1.0), 5, 0.0);
    REQUIRE(c.points.size() == 5);
    for (int i = 0; i < 5; ++i) {
      CHECK(c.points[i].row == i / 4);
      CHECK(c.points[i].col == i % 4);
    }
  }

  TEST_CASE("two nearby peaks with a large spacing") {
    RealGrid g(20, 20, 0.0);
    for (int y = 0; y < 20; ++y) {
      for (int x = 0; x < 20; ++x) g(y, x) = 0.01 * ((y * 7 + x * 3) % 11);
    }
    g(8, 8) = 1.0;
    g(8, 13) = 0.9;
    const CandidateSet c = select_candidate_points(g, 2, 8.0);
    REQUIRE(c.points.size() == 2);
    CHECK(c.points[0] == CandidatePoint{8, 8, 1.0});
    CHECK(c.points != std::vector<CandidatePoint>{{8, 8, 1.0}, {8, 13, 0.9}});
    CHECK(c.points == oracle::greedy_points(g, 2, 8.0));
  }

  TEST_CASE("matches the rescanning oracle and keeps its invariant") {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0, 1);
    for (int t = 0; t < 30; ++t) {
      RealGrid g(12, 15, 0.0);
      for (double& v : g.values()) v = std::round(u(rng) * 20) / 20;  // many ties
      const int k = 1 + static_cast<int>(rng() % 12);
      const double d = u(rng) * 6;
      const CandidateSet c = select_candidate_points(g, k, d);
      CHECK(c.points == oracle::greedy_points(g, k, d));
      CHECK_NOTHROW(check_candidate_set(c));
    }
  }

  TEST_CASE("exhaustion returns fewer points") {
    CHECK(select_candidate_points(RealGrid(3, 3, 0.0), 10, 5.0).points.size() == 1);
  }

  TEST_CASE("invalid arguments") {
    CHECK_THROWS_AS(select_candidate_points(RealGrid(2, 2, 0.0), 0, 1.0), ConfigError);
    CHECK_THROWS_AS(select_candidate_points(RealGrid(2, 2, 0.0), 1, -1.0), ConfigError);
    RealGrid bad(2, 2, 0.0);
    bad(0, 0) = std::nan("");
    CHECK_THROWS_AS(select_candidate_points(bad, 1, 1.0), MalformedInputError);
  }
}

TEST_SUITE("nms") {
  TEST_CASE("duplicates collapse to the higher score") {
    const InstanceSet s = interval_set({{0, 5}, {0, 5}}, {0.2, 0.9});
    const InstanceSet out = nms_masks(s, 0.5);
    REQUIRE(out.size() == 1);
    CHECK(out.scores[0] == 0.9);
  }

  TEST_CASE("disjoint masks all survive") {
    CHECK(nms_masks(interval_set({{0, 3}, {5, 8}, {10, 12}}, {0.1, 0.5, 0.3}), 0.0).size() == 3);
  }

  TEST_CASE("suppression is greedy, not transitive") {
    // A~B and B~C overlap 2/3; A and C overlap 3/7 <= 0.5.
    const InstanceSet s = interval_set({{0, 10}, {2, 12}, {4, 14}}, {0.9, 0.8, 0.7});
    CHECK(iou(s.masks[0], s.masks[1]) > 0.5);
    CHECK(iou(s.masks[1], s.masks[2]) > 0.5);
    CHECK(iou(s.masks[0], s.masks[2]) <= 0.5);
    const InstanceSet out = nms_masks(s, 0.5);
    REQUIRE(out.size() == 2);
    CHECK(out.scores == std::vector<double>{0.9, 0.7});
  }

  TEST_CASE("ties keep input order") {
    const InstanceSet out = nms_masks(interval_set({{0, 5}, {0, 5}}, {0.5, 0.5}), 0.3);
    REQUIRE(out.size() == 1);
    CHECK(out.masks[0] == testing::rect(1, 20, 0, 0, 1, 5));
  }

  TEST_CASE("random sets: oracle agreement, pairwise bound and idempotence") {
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> u(0, 1);
    for (int t = 0; t < 30; ++t) {
      InstanceSet s{24, 24, {}, {}};
      const int n = 2 + static_cast<int>(rng() % 8);
      for (int i = 0; i < n; ++i) {
        const int y = static_cast<int>(rng() % 14), x = static_cast<int>(rng() % 14);
        s.masks.push_back(testing::rect(24, 24, y, x, 4 + static_cast<int>(rng() % 6), 4 + static_cast<int>(rng() % 6)));
        s.scores.push_back(std::round(u(rng) * 4) / 4);
      }
      const double thr = u(rng) * 0.9;
      const InstanceSet out = nms_masks(s, thr);
      const auto kept = oracle::nms_indices(s, thr);
      REQUIRE(out.size() == kept.size());
      for (std::size_t i = 0; i < kept.size(); ++i) CHECK(out.masks[i] == s.masks[kept[i]]);
      for (std::size_t i = 0; i < out.size(); ++i) {
        for (std::size_t j = i + 1; j < out.size(); ++j) CHECK(iou(out.masks[i], out.masks[j]) <= thr);
      }
      CHECK(nms_masks(out, thr).size() == out.size());
    }
  }

  TEST_CASE("threshold and score validation") {
    const InstanceSet s = interval_set({{0, 3}}, {1.0});
    CHECK_THROWS_AS(nms_masks(s, 1.0), ConfigError);
    CHECK_THROWS_AS(nms_masks(s, -0.1), ConfigError);
    CHECK_THROWS_AS(nms_masks(interval_set({{0, 3}}, {}), 0.5), MalformedInputError);
  }
}

TEST_SUITE("similarity filter") {
  // Two 4x4-patch cell types with orthogonal features on a 2x2 patch grid.
  const PatchFeatureMap kFeatures(2, 2, 2, {1, 0, 0, 1, 0, 1, 1, 0});
  InstanceSet cells() {
    InstanceSet s{8, 8, {}, {}};
    for (int gy = 0; gy < 2; ++gy) {
      for (int gx = 0; gx < 2; ++gx) s.masks.push_back(testing::rect(8, 8, gy * 4 + 1, gx * 4 + 1, 2, 2));
    }
    return s;
  }

  TEST_CASE("self reference keeps its instance") {
    const InstanceSet s = cells();
    const ReferenceEmbedding ref = masked_mean_embedding(kFeatures, s.masks[1]);
    for (double t : {0.0, 0.5, 1.0 - 1e-12}) {
      const InstanceSet out = similarity_filter(s, kFeatures, ref, t);
      CHECK(std::find(out.masks.begin(), out.masks.end(), s.masks[1]) != out.masks.end());
    }
  }

  TEST_CASE("threshold -1 keeps everything") {
    CHECK(similarity_filter(cells(), kFeatures, ReferenceEmbedding({1, 0}), -1.0).size() == 4);
  }

  TEST_CASE("orthogonal types separate at 0.5 and filtering is idempotent") {
    const InstanceSet out = similarity_filter(cells(), kFeatures, ReferenceEmbedding({1, 0}), 0.5);
    REQUIRE(out.size() == 2);
    CHECK(out.masks[0] == cells().masks[0]);
    CHECK(out.masks[1] == cells().masks[3]);
    CHECK(similarity_filter(out, kFeatures, ReferenceEmbedding({1, 0}), 0.5).size() == 2);
  }

  TEST_CASE("errors propagate") {
    CHECK_THROWS_AS(similarity_filter(cells(), kFeatures, ReferenceEmbedding({1, 0, 0}), 0.5), DimensionError);
    CHECK_THROWS_AS(similarity_filter(cells(), kFeatures, ReferenceEmbedding({0, 0}), 0.5), EmptyReferenceError);
    InstanceSet odd{9, 9, {testing::rect(9, 9, 0, 0, 2, 2)}, {}};
    CHECK_THROWS_AS(similarity_filter(odd, kFeatures, ReferenceEmbedding({1, 0}), 0.5), DimensionError);
  }
}
