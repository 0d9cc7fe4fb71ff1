#include "doctest.h"

#include <cmath>

#include "peadv/corpus.hpp"
#include "peadv/features.hpp"
#include "peadv/manipulation.hpp"
#include "peadv/rng.hpp"

using namespace peadv;

TEST_CASE("histogram basics") {
  SUBCASE("degenerate byte file puts all mass in one slot") {
    // Not a PE: exercises the histogram-only fallback.
    const pe::Bytes b(1024, 0x41);
    const feat::FeatureVector fv = feat::extract(b);
    CHECK(!fv.structured);
    CHECK(fv.values[feat::kHistogramOffset + 0x41] == doctest::Approx(1.0));
    for (std::size_t i = 0; i < 256; ++i) {
      if (i != 0x41) CHECK(fv.values[feat::kHistogramOffset + i] == 0.0);
    }
    for (std::size_t i = 256; i < feat::kFeatureDim; ++i) CHECK(fv.values[i] == 0.0);
  }

  SUBCASE("histogram sums to one on parsed files too") {
    const pe::Bytes b = corpus::synthesize_pe(corpus::default_benign_profile(), 1);
    const feat::FeatureVector fv = feat::extract(b);
    CHECK(fv.structured);
    double sum = 0;
    for (std::size_t i = 0; i < 256; ++i) sum += fv.values[i];
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }

  SUBCASE("extraction is deterministic") {
    const pe::Bytes b = corpus::synthesize_pe(corpus::default_malware_profile(), 2);
    const feat::FeatureVector a = feat::extract(b);
    const feat::FeatureVector c = feat::extract(b);
    CHECK(a.values == c.values);
  }
}

TEST_CASE("overlay append moves overlay slots, not section aggregates") {
  const pe::Bytes b = corpus::synthesize_pe(corpus::default_benign_profile(), 3);
  const pe::PEFile f = pe::parse(b);
  manip::Action a;
  a.kind = manip::ActionKind::append_overlay;
  a.payload = manip::AppendOverlayPayload{pe::Bytes(2048, 0x88)};
  const pe::Bytes after = pe::serialize(manip::apply(a, f));

  const feat::FeatureVector before_fv = feat::extract(b);
  const feat::FeatureVector after_fv = feat::extract(after);
  CHECK(after_fv.values[feat::kOverlayOffset] > before_fv.values[feat::kOverlayOffset]);
  for (std::size_t i = feat::kSectionAggOffset; i < feat::kSectionAggOffset + 5; ++i)
    CHECK(after_fv.values[i] == doctest::Approx(before_fv.values[i]).epsilon(1e-12));
  // name-hash buckets and counts identical
  for (std::size_t i = feat::kSectionAggOffset + 5; i < feat::kHeaderOffset; ++i)
    CHECK(after_fv.values[i] == before_fv.values[i]);
}

TEST_CASE("locality: DOS perturbation touches only histogram slots") {
  const pe::Bytes b = corpus::synthesize_pe(corpus::default_malware_profile(), 4);
  const pe::PEFile f = pe::parse(b);
  manip::Action a;
  a.kind = manip::ActionKind::perturb_dos;
  manip::PerturbDosPayload p;
  p.ranges = pe::dos_region(f, pe::DosVariant::full);
  std::uint64_t total = 0;
  for (const auto& r : p.ranges) total += r.length();
  Rng rng(5);
  for (std::uint64_t i = 0; i < total; ++i) p.replacement.push_back(rng.next_byte());
  a.payload = std::move(p);
  const pe::Bytes after = pe::serialize(manip::apply(a, f));

  const feat::FeatureVector x = feat::extract(b);
  const feat::FeatureVector y = feat::extract(after);
  for (std::size_t i = 256; i < feat::kFeatureDim; ++i)
    CHECK(y.values[i] == doctest::Approx(x.values[i]).epsilon(1e-12));
}

TEST_CASE("histogram L1 shift is bounded by 2k/n") {
  Rng rng(77);
  const pe::Bytes b = corpus::synthesize_pe(corpus::default_benign_profile(), 6);
  for (int trial = 0; trial < 20; ++trial) {
    pe::Bytes edited = b;
    const std::size_t k = 1 + rng.index(200);
    for (std::size_t i = 0; i < k; ++i) edited[rng.index(edited.size())] = rng.next_byte();
    const feat::FeatureVector x = feat::extract(b);
    const feat::FeatureVector y = feat::extract(edited);
    double l1 = 0;
    for (std::size_t i = 0; i < 256; ++i) l1 += std::abs(x.values[i] - y.values[i]);
    CHECK(l1 <= 2.0 * static_cast<double>(k) / static_cast<double>(b.size()) + 1e-12);
  }
}

TEST_CASE("csv row has the full width") {
  const feat::FeatureVector fv = feat::extract(corpus::synthesize_pe(corpus::default_benign_profile(), 8));
  const std::string row = feat::to_csv_row(fv);
  std::size_t commas = 0;
  for (char c : row) commas += c == ',';
  CHECK(commas == feat::kFeatureDim - 1);
}

TEST_CASE("matrix container roundtrip") {
  std::vector<feat::FeatureVector> rows;
  for (std::uint64_t i = 0; i < 5; ++i)
    rows.push_back(feat::extract(corpus::synthesize_pe(corpus::default_malware_profile(), 40 + i)));
  const auto path = std::filesystem::temp_directory_path() / "peadv_test_matrix.bin";
  feat::save_matrix(rows, path);
  const auto loaded = feat::load_matrix(path);
  REQUIRE(loaded.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) CHECK(loaded[i].values == rows[i].values);
  std::filesystem::remove(path);
}
