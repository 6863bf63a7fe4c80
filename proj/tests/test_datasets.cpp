#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "doctest.h"
#include "radial/datasets.hpp"
#include "radial/idx.hpp"
#include "radial/stats.hpp"

using namespace radial;

TEST_CASE("IDX header: magic numbers and big-endian dims") {
  const std::string bytes{"\x00\x00\x08\x03\x00\x00\x00\x02\x00\x00\x00\x01\x00\x00\x00\x03"
                          "\x01\x02\x03\x04\x05\x06",
                          22};
  const IdxArray a = parse_idx(bytes, kIdxImageMagic);
  CHECK(a.dims == std::vector<std::uint32_t>{2, 1, 3});
  CHECK(a.data.size() == 6);
  CHECK(a.data[5] == 6);
  CHECK(kIdxImageMagic == 0x00000803);
  CHECK(kIdxLabelMagic == 0x00000801);

  const IdxArray labels{{3}, {7, 0, 9}};
  const std::string enc = encode_idx(labels, kIdxLabelMagic);
  CHECK(enc.size() == 4 + 4 + 3);
  CHECK(static_cast<unsigned char>(enc[3]) == 0x01);
  const IdxArray back = parse_idx(enc, kIdxLabelMagic);
  CHECK(back.dims == labels.dims);
  CHECK(back.data == labels.data);
}

TEST_CASE("malformed IDX reports the byte offset") {
  const IdxArray labels{{4}, {1, 2, 3, 4}};
  const std::string enc = encode_idx(labels, kIdxLabelMagic);
  try {
    (void)parse_idx(enc, kIdxImageMagic);
    FAIL("expected IdxError");
  } catch (const IdxError& e) {
    CHECK(e.offset() == 0);
  }
  try {
    (void)parse_idx(enc.substr(0, 6), kIdxLabelMagic);
    FAIL("expected IdxError");
  } catch (const IdxError& e) {
    CHECK(e.offset() == 6);
    CHECK(std::string(e.what()).find("offset 6") != std::string::npos);
  }
  CHECK_THROWS_AS((void)parse_idx(enc.substr(0, enc.size() - 1), kIdxLabelMagic), IdxError);
}

TEST_CASE("IDX dataset loader scales pixels") {
  const auto dir = std::filesystem::temp_directory_path();
  const auto img = dir / "radial_test_images.idx", lab = dir / "radial_test_labels.idx";
  write_idx(img, IdxArray{{2, 1, 2}, {0, 255, 51, 102}}, kIdxImageMagic);
  write_idx(lab, IdxArray{{2}, {3, 1}}, kIdxLabelMagic);
  const Dataset d = load_idx_dataset(img, lab, 4);
  std::filesystem::remove(img);
  std::filesystem::remove(lab);
  CHECK(d.dim == 2);
  CHECK(d.size() == 2);
  const double expected[] = {0.0, 1.0, 0.2, 0.4};
  for (std::size_t i = 0; i < 4; ++i) CHECK(d.features[i] == doctest::Approx(expected[i]).epsilon(1e-15));
  CHECK(d.labels == std::vector<std::size_t>{3, 1});
}

TEST_CASE("generators are deterministic under a fixed seed") {
  Rng a(5), b(5), c(6);
  const Dataset x = make_blobs(100, 3, 2, 0.5, 3.0, a);
  const Dataset y = make_blobs(100, 3, 2, 0.5, 3.0, b);
  const Dataset z = make_blobs(100, 3, 2, 0.5, 3.0, c);
  CHECK(x.features == y.features);
  CHECK(x.labels == y.labels);
  CHECK(x.features != z.features);
  x.validate();

  Rng m1(7), m2(7);
  CHECK(make_moons(50, 0.1, 0.0, m1).features == make_moons(50, 0.1, 0.0, m2).features);
}

TEST_CASE("moons label noise flips about the requested fraction") {
  Rng clean(8), noisy(8);
  const Dataset a = make_moons(4000, 0.1, 0.0, clean);
  const Dataset b = make_moons(4000, 0.1, 0.2, noisy);
  REQUIRE(a.features == b.features);
  std::size_t flipped = 0;
  for (std::size_t i = 0; i < a.size(); ++i) flipped += a.labels[i] != b.labels[i];
  CHECK(std::abs(static_cast<double>(flipped) / 4000 - 0.2) < 0.03);
}

TEST_CASE("ambiguous band marks coin-flip points") {
  Rng rng(9);
  const AmbiguousBand band = make_ambiguous_band(1000, 0.3, rng);
  for (std::size_t i = 0; i < band.data.size(); ++i) {
    const double x0 = band.data.features[i * band.data.dim];
    CHECK(band.ambiguous[i] == (std::abs(x0) < 0.3));
    if (!band.ambiguous[i]) CHECK(band.data.labels[i] == (x0 > 0 ? 1u : 0u));
  }
}

TEST_CASE("split tasks gives disjoint consecutive pairs") {
  Rng rng(10);
  const Dataset train = make_clusters(30, 10, 5, 0.5, rng);
  const Dataset test = make_clusters(10, 10, 5, 0.5, rng);
  const TaskSequence local = split_tasks(train, test, 2, true);
  REQUIRE(local.tasks.size() == 5);
  std::set<std::size_t> seen;
  for (std::size_t t = 0; t < 5; ++t) {
    const Task& task = local.tasks[t];
    CHECK(task.classes == std::vector<std::size_t>{2 * t, 2 * t + 1});
    for (std::size_t c : task.classes) CHECK(seen.insert(c).second);
    CHECK(task.train.size() == 60);
    CHECK(task.test.size() == 20);
    CHECK(*std::max_element(task.train.labels.begin(), task.train.labels.end()) == 1);
    // standardized by the task's own training statistics
    for (std::size_t j = 0; j < task.train.dim; ++j) {
      std::vector<double> col;
      for (std::size_t i = 0; i < task.train.size(); ++i) col.push_back(task.train.features[i * task.train.dim + j]);
      CHECK(std::abs(stats::mean(col)) < 1e-12);
    }
  }
  const TaskSequence global = split_tasks(train, test, 2, false);
  CHECK(*std::min_element(global.tasks[3].train.labels.begin(), global.tasks[3].train.labels.end()) == 6);
  CHECK_THROWS_AS((void)split_tasks(train, test, 3, true), std::invalid_argument);
}

TEST_CASE("standardizer fits on one set and applies to another") {
  Dataset a{2, 2, {1, 10, 3, 30}, {0, 1}};
  Dataset b{2, 2, {2, 20}, {0}};
  const Standardizer s = Standardizer::fit(a);
  s.apply(a);
  s.apply(b);
  CHECK(a.features[0] == doctest::Approx(-a.features[2]));
  CHECK(b.features[0] == doctest::Approx(0.0));
  CHECK(b.features[1] == doctest::Approx(0.0));
}

TEST_CASE("validation split and dataset guards") {
  Rng rng(11);
  const Dataset d = make_blobs(100, 2, 2, 0.5, 3.0, rng);
  const TrainVal tv = split_validation(d, 0.1, rng);
  CHECK(tv.val.size() == 10);
  CHECK(tv.train.size() == 90);
  CHECK_THROWS_AS((void)split_validation(d, 0.0, rng), std::invalid_argument);
  Dataset bad{2, 2, {1, 2, 3}, {0, 1}};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  Dataset label{2, 2, {1, 2}, {2}};
  CHECK_THROWS_AS(label.validate(), std::invalid_argument);
  const auto perm = permutation(20, rng);
  std::set<std::size_t> all(perm.begin(), perm.end());
  CHECK(all.size() == 20);
}
