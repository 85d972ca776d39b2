#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "chromseg/datagen.hpp"
#include "chromseg/geometry.hpp"
#include "chromseg/netpbm.hpp"
#include "fixtures.hpp"

using namespace chromseg;
using namespace chromseg::datagen;

namespace {

// Z-shaped 3x3 mask with centroid exactly at (1, 1).
ChromoImage z_shape() {
  ChromoImage z{GrayImage(3, 3), Mask(3, 3), 0};
  const int cells[5][2] = {{0, 0}, {0, 1}, {1, 1}, {2, 1}, {2, 2}};
  float v = 0.1f;
  for (auto [r, c] : cells) {
    z.mask(r, c) = 1;
    z.gray(r, c) = v;
    v += 0.2f;
  }
  return z;
}

ChromoImage bar(int h, int w, int r0, int r1, int c0, int c1, float value, int id = 0) {
  ChromoImage b{GrayImage(h, w), Mask(h, w), id};
  for (int r = r0; r <= r1; ++r)
    for (int c = c0; c <= c1; ++c) {
      b.mask(r, c) = 1;
      b.gray(r, c) = value;
    }
  return b;
}

std::size_t count_ones(const Mask& m) { return static_cast<std::size_t>(std::count(m.data.begin(), m.data.end(), 1)); }

GenConfig small_config(std::uint64_t seed) {
  GenConfig cfg;
  cfg.n_samples = 40;
  cfg.seed = seed;
  cfg.library_size = 5;
  return cfg;
}

}  // namespace

TEST_CASE("channel merge takes the brighter of the two") {
  GrayImage a(1, 3), b(1, 3);
  a.data = {0.1f, 0.8f, 0.0f};
  b.data = {0.5f, 0.2f, 0.0f};
  CHECK(combine_channels(a, b).data == std::vector<float>{0.5f, 0.8f, 0.0f});
  CHECK(combine_channels(a, GrayImage(1, 3, 0.0f)) == a);
  CHECK(combine_channels(b, b) == b);
  CHECK_THROWS_AS(combine_channels(a, GrayImage(2, 3)), StructuralError);
}

TEST_CASE("2x downscale averages blocks and drops an odd edge") {
  GrayImage g(3, 5);
  for (int i = 0; i < 15; ++i) g.data[static_cast<std::size_t>(i)] = static_cast<float>(i);
  const auto d = downscale2x(g);
  CHECK(d.height == 1);
  CHECK(d.width == 2);
  CHECK(d(0, 0) == doctest::Approx((0 + 1 + 5 + 6) / 4.0));
  CHECK(d(0, 1) == doctest::Approx((2 + 3 + 7 + 8) / 4.0));

  Rng rng(8);
  GrayImage r(4, 4);
  for (auto& v : r.data) v = static_cast<float>(rng.uniform());
  const auto rd = downscale2x(r);
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 2; ++x) {
      double sum = 0;
      for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx) sum += r(2 * y + dy, 2 * x + dx);
      CHECK(rd(y, x) == doctest::Approx(sum / 4));
    }

  Mask m(2, 6, 0);
  m(0, 0) = 1;                 // 1 of 4 -> 0
  m(0, 2) = m(1, 3) = 1;       // 2 of 4 -> 1
  m(0, 4) = m(0, 5) = m(1, 4) = 1;
  CHECK(downscale_mask2x(m).data == std::vector<std::uint8_t>{0, 1, 1});
}

TEST_CASE("centroid of a mask") {
  const auto z = z_shape();
  const Point c = mask_centroid(z.mask);
  CHECK(c.x == doctest::Approx(1.0));
  CHECK(c.y == doctest::Approx(1.0));
  CHECK_THROWS_AS(mask_centroid(Mask(2, 2)), StructuralError);
}

TEST_CASE("angle 0 with no offset is the identity") {
  const auto z = z_shape();
  const auto p = place(z, 0, {0, 0}, 3, 3);
  REQUIRE(p);
  CHECK(p->mask == z.mask);
  for (std::size_t i = 0; i < 9; ++i) CHECK(p->gray.data[i] == doctest::Approx(z.gray.data[i]));
}

TEST_CASE("90 degrees rotates counterclockwise on screen about the centroid") {
  const auto z = z_shape();
  const auto p = place(z, 90, {0, 0}, 3, 3);
  REQUIRE(p);
  // Screen-CCW quarter turn about (1,1): source (r, c) lands on (1 - (c - 1), 1 + (r - 1)).
  Mask want(3, 3);
  GrayImage want_gray(3, 3);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      if (z.mask(r, c)) {
        want(1 - (c - 1), 1 + (r - 1)) = 1;
        want_gray(1 - (c - 1), 1 + (r - 1)) = z.gray(r, c);
      }
  CHECK(p->mask == want);
  for (std::size_t i = 0; i < 9; ++i) CHECK(p->gray.data[i] == doctest::Approx(want_gray.data[i]).epsilon(1e-6));
}

TEST_CASE("a full turn equals no turn") {
  Rng rng(3);
  const auto ph = generate_phantom(rng, PhantomParams{});
  const auto a = place(ph.chromo, 0, {2, -3}, 94, 93);
  const auto b = place(ph.chromo, 360, {2, -3}, 94, 93);
  const auto c = place(ph.chromo, -720, {2, -3}, 94, 93);
  REQUIRE(a);
  CHECK(a->mask == b->mask);
  CHECK(a->mask == c->mask);
  for (std::size_t i = 0; i < a->gray.size(); ++i) CHECK(std::abs(a->gray.data[i] - b->gray.data[i]) <= 1e-6);
}

TEST_CASE("placement shifts by the offset and zeroes gray off the mask") {
  const auto b = bar(20, 20, 8, 10, 4, 14, 0.7f);
  const auto p = place(b, 0, {3, -2}, 20, 20);
  REQUIRE(p);
  CHECK(p->mask(6, 7) == 1);
  CHECK(p->mask(8, 17) == 1);
  CHECK(p->mask(9, 7) == 0);
  CHECK(count_ones(p->mask) == count_ones(b.mask));
  for (std::size_t i = 0; i < p->gray.size(); ++i)
    if (!p->mask.data[i]) CHECK(p->gray.data[i] == 0.0f);
  CHECK_FALSE(place(b, 0, {100, 0}, 20, 20));
}

TEST_CASE("fits_on_canvas agrees with the placed footprint") {
  const auto b = bar(20, 20, 8, 10, 2, 16, 0.7f);
  CHECK(fits_on_canvas(b, 0, {0, 0}, 20, 20));
  CHECK(fits_on_canvas(b, 90, {0, 0}, 20, 20));
  CHECK_FALSE(fits_on_canvas(b, 0, {4, 0}, 20, 20));
  CHECK_FALSE(fits_on_canvas(b, 90, {0, 0}, 16, 20));
}

TEST_CASE("composition averages intensities and sums masks") {
  const auto a = bar(10, 10, 4, 5, 1, 8, 0.4f, 0);
  const auto b = bar(10, 10, 1, 8, 4, 5, 0.8f, 1);
  const auto s = compose_pair(a, b, 1);
  REQUIRE(s);
  CHECK(s->label(4, 1) == 1);
  CHECK(s->label(1, 4) == 2);
  CHECK(s->label(4, 4) == 3);
  CHECK(s->label(0, 0) == 0);
  CHECK(s->image(4, 4) == doctest::Approx(0.6));
  CHECK(s->image(4, 1) == doctest::Approx(0.2));
  CHECK(s->image(1, 4) == doctest::Approx(0.4));
  CHECK(s->meta.pair_ids == std::array<int, 2>{0, 1});
  CHECK(compose_pair(a, b, 4));
  CHECK_FALSE(compose_pair(a, b, 5));
  const auto far = bar(10, 10, 0, 0, 0, 9, 0.8f, 2);
  CHECK_FALSE(compose_pair(a, far, 1));
}

TEST_CASE("phantoms are single connected chromosomes with bright tips") {
  Rng rng(21);
  for (int i = 0; i < 10; ++i) {
    const auto ph = generate_phantom(rng, PhantomParams{});
    const auto& ch = ph.chromo;
    CHECK(label_components(ch.mask).count() == 1);
    for (std::size_t k = 0; k < ch.gray.size(); ++k) {
      CHECK(ch.gray.data[k] >= 0.0f);
      CHECK(ch.gray.data[k] <= 1.0f);
      if (!ch.mask.data[k]) CHECK(ch.gray.data[k] == 0.0f);
    }
    // Telomere spots outshine the body: mean over a small disc at each end
    // against the mean of the rest of the chromosome.
    double tip_sum = 0, body_sum = 0;
    int tip_n = 0, body_n = 0;
    for (int r = 0; r < ch.mask.height; ++r)
      for (int c = 0; c < ch.mask.width; ++c) {
        if (!ch.mask(r, c)) continue;
        auto d2 = [&](Point p) { return (c - p.x) * (c - p.x) + (r - p.y) * (r - p.y); };
        if (std::min(d2(ph.tip_a), d2(ph.tip_b)) <= 2.0) {
          tip_sum += ch.gray(r, c);
          ++tip_n;
        } else {
          body_sum += ch.gray(r, c);
          ++body_n;
        }
      }
    REQUIRE(tip_n > 0);
    CHECK(tip_sum / tip_n > body_sum / body_n);
  }
}

TEST_CASE("phantom library is sorted by area and reproducible") {
  const auto lib = phantom_library(8, 5, PhantomParams{});
  REQUIRE(lib.size() == 8);
  for (int j = 0; j < 8; ++j) CHECK(lib[static_cast<std::size_t>(j)].id == j);
  for (std::size_t j = 1; j < lib.size(); ++j) CHECK(count_ones(lib[j - 1].mask) >= count_ones(lib[j].mask));
  const auto again = phantom_library(8, 5, PhantomParams{});
  for (std::size_t j = 0; j < lib.size(); ++j) CHECK(again[j].gray == lib[j].gray);
  CHECK_THROWS_AS(phantom_library(1, 5, PhantomParams{}), ConfigError);
}

TEST_CASE("larger library chromosomes are brighter") {
  const auto lib = phantom_library(12, 9, PhantomParams{});
  auto mean_body = [](const ChromoImage& c) {
    double sum = 0;
    int n = 0;
    for (std::size_t i = 0; i < c.mask.size(); ++i)
      if (c.mask.data[i]) {
        sum += c.gray.data[i];
        ++n;
      }
    return sum / n;
  };
  int concordant = 0, pairs = 0;
  for (std::size_t a = 0; a < lib.size(); ++a)
    for (std::size_t b = a + 1; b < lib.size(); ++b) {
      ++pairs;
      concordant += mean_body(lib[a]) > mean_body(lib[b]);
    }
  CHECK(concordant >= pairs * 9 / 10);
  CHECK(mean_body(lib.front()) > mean_body(lib.back()) + 0.05);
}

TEST_CASE("pair census") {
  CHECK(pair_census(0) == 0);
  CHECK(pair_census(1) == 0);
  CHECK(pair_census(2) == 1);
  CHECK(pair_census(12) == 66);
  CHECK(pair_census(46) == 1035);
}

TEST_CASE("generated samples obey the label algebra") {
  const auto cfg = small_config(3);
  const auto sources = load_sources(cfg);
  const auto ds = generate_dataset(cfg, sources);
  REQUIRE(ds.size() == 40);
  const std::size_t pairs = pair_census(sources.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& s = ds[i];
    CHECK(s.image.height == cfg.canvas_h);
    CHECK(s.image.width == cfg.canvas_w);
    // Rebuild both chromosomes from the recorded transform and compare.
    const auto& m = s.meta;
    const auto pa = place(sources[static_cast<std::size_t>(m.pair_ids[0])], m.angles_deg[0],
                          {m.offsets[0][0], m.offsets[0][1]}, cfg.canvas_h, cfg.canvas_w);
    const auto pb = place(sources[static_cast<std::size_t>(m.pair_ids[1])], m.angles_deg[1],
                          {m.offsets[1][0], m.offsets[1][1]}, cfg.canvas_h, cfg.canvas_w);
    REQUIRE(pa);
    REQUIRE(pb);
    std::size_t overlap = 0;
    for (std::size_t p = 0; p < s.label.size(); ++p) {
      const int want = pa->mask.data[p] + 2 * pb->mask.data[p];
      CHECK(s.label.data[p] == want);
      overlap += want == 3;
      CHECK(std::abs(s.image.data[p] * 255.0f - std::round(s.image.data[p] * 255.0f)) < 1e-3f);
    }
    CHECK(overlap >= static_cast<std::size_t>(cfg.min_overlap));
    // Pairs cycle in lexicographic order; the lower id is chromosome 1.
    CHECK(m.pair_ids[0] < m.pair_ids[1]);
    if (i >= pairs) CHECK(ds[i - pairs].meta.pair_ids == m.pair_ids);
    CHECK(m.angles_deg[0] % 15 == 0);
    CHECK(m.seed == mix_seed(cfg.seed, i));
  }
}

TEST_CASE("zero samples is an empty dataset") {
  auto cfg = small_config(1);
  cfg.n_samples = 0;
  CHECK(generate_dataset(cfg, load_sources(cfg)).empty());
}

TEST_CASE("generation is reproducible and independent of thread count") {
  const auto cfg = small_config(11);
  const auto sources = load_sources(cfg);
  const auto a = encode_dataset(generate_dataset(cfg, sources, 1));
  const auto b = encode_dataset(generate_dataset(cfg, sources, 3));
  CHECK(a == b);
  auto other = cfg;
  other.seed = 12;
  CHECK(encode_dataset(generate_dataset(other, load_sources(other))) != a);
}

TEST_CASE("impossible overlap requirements are a configuration error") {
  GenConfig cfg = small_config(1);
  cfg.n_samples = 2;
  cfg.min_overlap = 100000;
  CHECK_THROWS_AS(generate_dataset(cfg, load_sources(cfg)), ConfigError);
  cfg.min_overlap = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("source chromosomes can be imported from PGM pairs") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "chromseg_import";
  fs::remove_all(dir);
  fs::create_directories(dir);
  for (const std::string stem : {"b", "a"}) {
    Raster<std::uint8_t> g(8, 8, 0), m(8, 8, 0);
    for (int r = 2; r < 6; ++r)
      for (int c = 0; c < 8; ++c) {
        m(r, c) = 255;
        g(r, c) = stem == "a" ? 100 : 200;
      }
    g(0, 0) = 50;  // outside the mask: zeroed on import
    m(7, 7) = 255; // stray pixel: dropped as a minor component
    netpbm::write_pgm(dir / (stem + "_gray.pgm"), g);
    netpbm::write_pgm(dir / (stem + "_mask.pgm"), m);
  }
  const auto full = import_pgm_pairs(dir, false);
  REQUIRE(full.size() == 2);
  CHECK(full[0].id == 0);
  CHECK(full[0].gray(3, 3) == doctest::Approx(100 / 255.0));
  CHECK(full[1].gray(3, 3) == doctest::Approx(200 / 255.0));
  CHECK(full[0].gray(0, 0) == 0.0f);
  CHECK(full[0].mask(7, 7) == 0);
  const auto half = import_pgm_pairs(dir, true);
  CHECK(half[0].mask.height == 4);
  CHECK(count_ones(half[0].mask) == 8);
  fs::remove(dir / "a_mask.pgm");
  CHECK_THROWS_AS(import_pgm_pairs(dir, false), FormatError);
  fs::remove_all(dir);
}
