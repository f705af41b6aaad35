#include <fstream>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "percs/dataset.hpp"
#include "percs/file_util.hpp"
#include "percs/png_io.hpp"

using namespace percs;

namespace {

Image flat(int h, int w, float v) { return Image(h, w, 1, std::vector<float>(static_cast<std::size_t>(h) * w, v)); }

std::string entry_json(const std::string& extra) {
  return R"({"entries":[{"id":"a","image":"i.png","mask":"m.png","cell_type":3,"split":"test")" + extra + "}]}";
}

}  // namespace

TEST_SUITE("manifest") {
  TEST_CASE("empty entry list is valid") { CHECK(parse_manifest(R"({"entries":[]})").entries.empty()); }

  TEST_CASE("test entry without fixed_reference names the entry") {
    try {
      parse_manifest(R"({"entries":[{"id":"ok","image":"i","mask":"m","cell_type":1,"split":"train"},)"
                     R"({"id":"b","image":"i","mask":"m","cell_type":1,"split":"test"}]})");
      FAIL("expected a schema error");
    } catch (const SchemaError& e) {
      CHECK(std::string(e.what()).find("entry 1") != std::string::npos);
    }
  }

  TEST_CASE("schema violations") {
    CHECK_THROWS_AS(parse_manifest("not json"), SchemaError);
    CHECK_THROWS_AS(parse_manifest(R"({"items":[]})"), SchemaError);
    CHECK_THROWS_AS(parse_manifest(R"({"entries":[{"id":"a","image":"i","mask":"m","cell_type":1,"split":"val"}]})"),
                    SchemaError);
    CHECK_THROWS_AS(parse_manifest(entry_json(R"(,"fixed_reference":0)")), SchemaError);
    CHECK_THROWS_AS(parse_manifest(entry_json(R"(,"fixed_reference":1,"instance_types":{"x":1})")), SchemaError);
    CHECK_THROWS_AS(parse_manifest(entry_json(R"(,"fixed_reference":1,"instance_types":{"1":0})")), SchemaError);
    CHECK_THROWS_AS(parse_manifest(R"({"entries":[{"id":"a","image":"i","mask":"m","cell_type":"x","split":"train"}]})"),
                    SchemaError);
  }

  TEST_CASE("duplicate ids are rejected") {
    CHECK_THROWS_AS(parse_manifest(R"({"entries":[{"id":"a","image":"i","mask":"m","cell_type":1,"split":"train"},)"
                                   R"({"id":"a","image":"i","mask":"m","cell_type":1,"split":"train"}]})"),
                    SchemaError);
  }

  TEST_CASE("save then load reproduces the manifest") {
    testing::TempDir dir("manifest");
    write_atomic(dir / "i.png", std::string("x"));
    write_atomic(dir / "m.png", std::string("x"));
    DatasetManifest m;
    m.entries.push_back({"a", "i.png", "m.png", 4, Split::novel, 2, {{1, 4}, {2, 5}}});
    m.entries.push_back({"b", "i.png", "m.png", 1, Split::train, std::nullopt, {}});
    save_manifest(dir / "manifest.json", m);
    CHECK(load_manifest(dir / "manifest.json") == m);
    m.entries[1].mask = "missing.png";
    save_manifest(dir / "manifest.json", m);
    CHECK_THROWS_AS(load_manifest(dir / "manifest.json"), SchemaError);
  }

  TEST_CASE("type tables") {
    const LabelMask mask = testing::labels(1, 3, {1, 2, 0});
    ManifestEntry e{"a", "", "", 6, Split::train, std::nullopt, {}};
    CHECK(type_table_for(e, mask) == TypeTable{{1, 6}, {2, 6}});
    e.instance_types = {{1, 2}};
    CHECK_THROWS_AS(type_table_for(e, mask), DataError);
  }
}

TEST_SUITE("mixing") {
  TEST_CASE("no donors leaves the target unchanged") {
    const Sample target{flat(10, 10, 0.2f), testing::paint({testing::rect(10, 10, 1, 1, 3, 3)}), {{1, 1}}};
    std::mt19937_64 rng(1);
    const MixResult r = mix_paste(target, {}, {}, rng);
    CHECK(r.sample.image == target.image);
    CHECK(r.sample.mask == target.mask);
    CHECK(r.sample.types == target.types);
  }

  TEST_CASE("one donor into free space appends a label with its type") {
    const Sample target{flat(20, 20, 0.1f), testing::paint({testing::rect(20, 20, 0, 0, 4, 4)}), {{1, 1}}};
    const std::vector<Donor> donors{{flat(20, 20, 0.9f), testing::rect(20, 20, 5, 5, 3, 2), 7}};
    std::mt19937_64 rng(3);
    const MixResult r = mix_paste(target, donors, {}, rng);
    CHECK(r.pasted == 1);
    CHECK(r.skipped == 0);
    CHECK(r.sample.mask.count() == 2);
    CHECK(r.sample.mask.areas()[2] == 6);
    CHECK(r.sample.types.at(2) == 7);
    CHECK(r.sample.mask.instance(1) == target.mask.instance(1));
    for (int y = 0; y < 20; ++y) {
      for (int x = 0; x < 20; ++x) {
        if (r.sample.mask(y, x) == 2) CHECK(r.sample.image.at(y, x) == 0.9f);
      }
    }
  }

  TEST_CASE("a donor that cannot fit is skipped") {
    const Sample target{flat(6, 6, 0.1f), testing::paint({testing::rect(6, 6, 0, 0, 6, 6)}), {{1, 1}}};
    const std::vector<Donor> donors{{flat(6, 6, 0.9f), testing::rect(6, 6, 0, 0, 2, 2), 2}};
    std::mt19937_64 rng(3);
    const MixResult r = mix_paste(target, donors, {1, 5, 5, false, 0}, rng);
    CHECK(r.pasted == 0);
    CHECK(r.skipped == 1);
    CHECK(r.sample.mask == target.mask);
  }

  TEST_CASE("existing instances never shrink without overlap") {
    std::mt19937_64 rng(9);
    for (int t = 0; t < 10; ++t) {
      const Sample target = testing::scene(t, 64, 64, 3, 8, 6);
      const Sample donor_src = testing::scene(t + 50, 64, 64, 3, 8, 6);
      std::vector<Donor> donors;
      for (int l = 1; l <= donor_src.mask.count(); ++l) donors.push_back({donor_src.image, donor_src.mask.instance(l), 3});
      const MixResult r = mix_paste(target, donors, {}, rng);
      const auto before = target.mask.areas();
      const auto after = r.sample.mask.areas();
      for (int l = 1; l <= target.mask.count(); ++l) CHECK(after[l] == before[l]);
      CHECK(r.sample.mask.count() == target.mask.count() + r.pasted);
      CHECK(r.pasted + r.skipped == static_cast<int>(donors.size()));
      for (int l = 1; l <= r.sample.mask.count(); ++l) CHECK(r.sample.types.contains(l));
    }
  }

  TEST_CASE("seeded mixing is reproducible") {
    const Sample target = testing::scene(1, 48, 48, 3, 6, 4);
    const Sample src = testing::scene(2, 48, 48, 3, 6, 4);
    const std::vector<Donor> donors{{src.image, src.mask.instance(1), 2}};
    std::mt19937_64 a(5), b(5);
    const MixResult ra = mix_paste(target, donors, {0, 1, 20, true, 0}, a);
    const MixResult rb = mix_paste(target, donors, {0, 1, 20, true, 0}, b);
    CHECK(ra.sample.image == rb.sample.image);
    CHECK(ra.sample.mask == rb.sample.mask);
  }

  TEST_CASE("invalid params") {
    CHECK_THROWS_AS(check_mix_params({-1, 2, 5, false, 0}), ConfigError);
    CHECK_THROWS_AS(check_mix_params({1, 2, 0, false, 0}), ConfigError);
  }
}

TEST_SUITE("reference protocol") {
  const LabelMask kMask = testing::labels(1, 5, {1, 2, 3, 4, 0});
  const TypeTable kTypes{{1, 1}, {2, 2}, {3, 2}, {4, 3}};

  TEST_CASE("eval mode returns the fixed reference without an rng") {
    const ManifestEntry e{"a", "", "", 2, Split::test, 3, {}};
    const ReferenceChoice c = select_reference(e, kMask, kTypes, ReferenceMode::eval);
    CHECK(c.label == 3);
    CHECK(c.type_id == 2);
    std::mt19937_64 rng(1), untouched(1);
    select_reference(e, kMask, kTypes, ReferenceMode::eval, &rng);
    CHECK(rng() == untouched());
  }

  TEST_CASE("protocol errors") {
    const ManifestEntry no_ref{"a", "", "", 2, Split::train, std::nullopt, {}};
    CHECK_THROWS_AS(select_reference(no_ref, kMask, kTypes, ReferenceMode::eval), ProtocolError);
    CHECK_THROWS_AS(select_reference(no_ref, LabelMask::background(2, 2), {}, ReferenceMode::train), ProtocolError);
    CHECK_THROWS_AS(select_reference(no_ref, kMask, kTypes, ReferenceMode::train, nullptr), ProtocolError);
    const ManifestEntry bad_ref{"a", "", "", 2, Split::test, 9, {}};
    CHECK_THROWS_AS(select_reference(bad_ref, kMask, kTypes, ReferenceMode::eval), ProtocolError);
  }

  TEST_CASE("train mode with one instance always picks it") {
    const ManifestEntry e{"a", "", "", 2, Split::train, std::nullopt, {}};
    std::mt19937_64 rng(4);
    for (int i = 0; i < 20; ++i) {
      CHECK(select_reference(e, testing::labels(1, 2, {0, 1}), {{1, 5}}, ReferenceMode::train, &rng).label == 1);
    }
  }

  TEST_CASE("train mode is uniform over four labels") {
    const ManifestEntry e{"a", "", "", 2, Split::train, std::nullopt, {}};
    std::mt19937_64 rng(77);
    std::array<int, 5> counts{};
    const int n = 10000;
    for (int i = 0; i < n; ++i) ++counts[select_reference(e, kMask, kTypes, ReferenceMode::train, &rng).label];
    const double sigma = std::sqrt(n * 0.25 * 0.75);
    for (int l = 1; l <= 4; ++l) CHECK(std::abs(counts[l] - n * 0.25) <= 4 * sigma);
  }

  TEST_CASE("target mask is the union of same-type instances") {
    const BinaryMask t = target_mask_for_reference(kMask, kTypes, 2);
    CHECK(t == BinaryMask(1, 5, std::vector<std::uint8_t>{0, 1, 1, 0, 0}));
    CHECK(target_mask_for_reference(kMask, kTypes, 9) == BinaryMask(1, 5, 0));
    CHECK(target_mask_for_reference(kMask, {{1, 1}, {2, 1}, {3, 1}, {4, 1}}, 1) == kMask.foreground());
    CHECK_THROWS_AS(target_mask_for_reference(kMask, {{1, 1}}, 1), DataError);
    const LabelMask r = reference_instances(kMask, kTypes, 2);
    CHECK(r.count() == 2);
    CHECK(r(0, 1) == 1);
    CHECK(r(0, 2) == 2);
  }

  TEST_CASE("target mask on a random three-type mask matches a per-instance filter") {
    const Sample s = testing::scene(12, 64, 64, 3, 8, 10, 3);
    for (int type = 1; type <= 3; ++type) {
      BinaryMask expected(64, 64, 0);
      for (int l = 1; l <= s.mask.count(); ++l) {
        if (s.types.at(l) != type) continue;
        const BinaryMask inst = s.mask.instance(l);
        for (std::size_t i = 0; i < inst.size(); ++i) expected.values()[i] |= inst.values()[i];
      }
      CHECK(target_mask_for_reference(s.mask, s.types, type) == expected);
    }
  }
}

TEST_SUITE("fixtures") {
  TEST_CASE("one image with one blob") {
    testing::TempDir dir("fx1");
    SynthSpec spec;
    spec.max_blobs = 1;
    spec.seed = 3;
    const FixtureSet set = synth_fixtures(spec, dir.path());
    REQUIRE(set.manifest.entries.size() == 1);
    CHECK(read_label_mask(dir / "masks/img0000.png").count() == 1);
    CHECK(load_manifest(dir / "manifest.json") == set.manifest);
  }

  TEST_CASE("same seed gives identical files") {
    testing::TempDir a("fxa"), b("fxb");
    SynthSpec spec;
    spec.n_images = 2;
    spec.seed = 42;
    synth_fixtures(spec, a.path());
    synth_fixtures(spec, b.path());
    for (const char* f : {"manifest.json", "images/img0000.png", "images/img0001.png", "masks/img0001.png"}) {
      CHECK(read_bytes(a / f) == read_bytes(b / f));
    }
  }

  TEST_CASE("instances do not touch and lie inside the canvas") {
    std::mt19937_64 rng(8);
    SynthSpec spec;
    spec.height = spec.width = 96;
    spec.max_blobs = 10;
    for (int t = 0; t < 10; ++t) {
      const SynthScene s = synth_scene(spec, rng);
      const LabelMask& m = s.sample.mask;
      for (int y = 0; y < 96; ++y) {
        for (int x = 0; x < 96; ++x) {
          if (m(y, x) == 0) continue;
          for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
              const int ny = y + dy, nx = x + dx;
              if (ny >= 0 && ny < 96 && nx >= 0 && nx < 96 && m(ny, nx) != 0) CHECK(m(ny, nx) == m(y, x));
            }
          }
        }
      }
    }
  }

  TEST_CASE("mean intensity recovers the type table") {
    std::mt19937_64 rng(31);
    SynthSpec spec;
    spec.height = spec.width = 128;
    spec.n_types = 3;
    int agree = 0, total = 0;
    for (int t = 0; t < 10; ++t) {
      const Sample s = synth_scene(spec, rng).sample;
      const auto areas = s.mask.areas();
      std::vector<double> sums(areas.size(), 0.0);
      for (int y = 0; y < 128; ++y) {
        for (int x = 0; x < 128; ++x) sums[s.mask(y, x)] += s.image.at(y, x);
      }
      for (int l = 1; l <= s.mask.count(); ++l) {
        const double mean = sums[l] / static_cast<double>(areas[l]);
        int best = 1;
        for (int type = 2; type <= 3; ++type) {
          if (std::abs(mean - type_intensity(type, 3)) < std::abs(mean - type_intensity(best, 3))) best = type;
        }
        agree += best == s.types.at(l);
        ++total;
      }
    }
    CHECK(static_cast<double>(agree) / total >= 0.95);
  }

  TEST_CASE("infeasible packing reduces the blob count with a warning") {
    testing::TempDir dir("fxw");
    SynthSpec spec;
    spec.height = spec.width = 40;
    spec.min_blobs = spec.max_blobs = 30;
    spec.min_radius = 6;
    spec.max_radius = 8;
    spec.seed = 1;
    const FixtureSet set = synth_fixtures(spec, dir.path());
    CHECK_FALSE(set.warnings.empty());
  }

  TEST_CASE("invalid specs") {
    SynthSpec spec;
    spec.min_blobs = 3;
    spec.max_blobs = 2;
    CHECK_THROWS_AS(check_synth_spec(spec), ConfigError);
    spec = {};
    spec.max_radius = 400;
    CHECK_THROWS_AS(check_synth_spec(spec), ConfigError);
  }
}
