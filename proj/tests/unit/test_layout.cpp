#include <doctest.h>

#include "helpers.hpp"
#include "mslab/errors.hpp"
#include "mslab/layout.hpp"
#include "mslab/presets.hpp"

using namespace mslab;

TEST_CASE("interleaved placement is j, j+K, j+2K, ...") {
  const SlabLayout l = SlabLayout::interleaved(23, 1.2);
  CHECK(l.final_slices() == 46);
  for (int j = 0; j < 2; ++j) {
    REQUIRE(l.placement(j).size() == 23);
    for (int s = 0; s < 23; ++s) CHECK(l.placement(j)[s] == j + 2 * s);
  }
  CHECK(l.has_interleaving());
  for (int c : l.coverage()) CHECK(c == 1);
  CHECK(l.sole_owner(7) == 1);

  const SlabLayout three = SlabLayout::interleaved(15, 1.2, 3);
  CHECK(three.final_slices() == 45);
  CHECK(three.placement(2)[4] == 2 + 3 * 4);
}

TEST_CASE("contiguous placement is j(N-o) + s with shared overlap slices") {
  const SlabLayout l = SlabLayout::contiguous(2, 23, 1, 1.2);
  CHECK(l.final_slices() == 45);
  CHECK(l.placement(1).front() == 22);
  CHECK(l.placement(1).back() == 44);
  CHECK_FALSE(l.has_interleaving());
  const auto cov = l.coverage();
  for (int i = 0; i < 45; ++i) CHECK(cov[i] == (i == 22 ? 2 : 1));
  CHECK_FALSE(l.sole_owner(22).has_value());
  CHECK(l.sole_owner(30) == 1);
}

TEST_CASE("joined interleaved pairs share one slice") {
  const SlabLayout l = SlabLayout::joined({SlabLayout::interleaved(16, 1.2), SlabLayout::interleaved(16, 1.2)}, 1);
  CHECK(l.slab_count() == 4);
  CHECK(l.final_slices() == 63);
  CHECK(l.placement(2).front() == 31);
  CHECK(l.placement(3).front() == 32);
  CHECK(l.coverage()[31] == 2);
  CHECK(l.has_interleaving());
}

TEST_CASE("slice counts of the acquisition presets") {
  CHECK(find_preset("ns_7t_32ch_t2w_interleaved").layout.final_slices() == 46);
  CHECK(find_preset("ns_7t_32ch_t2w_contiguous").layout.final_slices() == 45);
  CHECK(find_preset("cmrr_7t_32ch_t2w_interleaved4").layout.final_slices() == 63);
  CHECK(find_preset("ns_7t_32ch_t2star_gre3").layout.final_slices() == 45);
  CHECK(find_preset("cmrr_7t_16ch_t2w_interleaved").layout.final_slices() == 60);
  CHECK_FALSE(is_preset("nope"));
  CHECK_THROWS_AS(find_preset("nope"), InvalidInput);
}

TEST_CASE("layout JSON round-trips and rejects inconsistencies") {
  for (const auto& p : acquisition_presets()) {
    const SlabLayout back = SlabLayout::from_json(p.layout.to_json());
    CHECK(back.final_slices() == p.layout.final_slices());
    for (int j = 0; j < p.layout.slab_count(); ++j) CHECK(back.placement(j) == p.layout.placement(j));
  }
  auto j = SlabLayout::interleaved(23, 1.2).to_json();
  j["final_slices"] = 45;
  CHECK_THROWS_AS(SlabLayout::from_json(j), LayoutMismatch);
  CHECK_THROWS_AS(SlabLayout::from_json(nlohmann::json{{"kind", "spiral"}}), InvalidInput);
  CHECK_THROWS_AS(SlabLayout::interleaved(23, 1.2).placement(2), LayoutMismatch);
  CHECK_THROWS_AS(SlabLayout::contiguous(2, 5, 5, 1.0), InvalidInput);
}

TEST_CASE("slab grid sits on its final slices") {
  const SlabLayout l = SlabLayout::interleaved(5, 1.2);
  const AffineGeometry fin = test::grid(4, 10, 4, {0.3, 1.2, 0.3}, {1, 2, 3});
  const AffineGeometry s = l.slab_geometry(fin, 1);
  CHECK(s.dims[1] == 5);
  CHECK(s.spacing[1] == doctest::Approx(2.4));
  for (int k = 0; k < 5; ++k)
    CHECK((s.to_world(Vec3(0, k, 0)) - fin.to_world(Vec3(0, l.placement(1)[k], 0))).norm() < 1e-12);
  CHECK(l.final_geometry(s, 1).approx_equal(fin));
}
