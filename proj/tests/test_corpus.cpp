#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "peadv/classifiers.hpp"
#include "peadv/corpus.hpp"
#include "peadv/features.hpp"
#include "peadv/metrics.hpp"
#include "peadv/sha256.hpp"

using namespace peadv;

TEST_CASE("synthesize_pe") {
  SUBCASE("deterministic for (profile, seed)") {
    const auto p = corpus::default_benign_profile();
    CHECK(corpus::synthesize_pe(p, 5) == corpus::synthesize_pe(p, 5));
    CHECK(corpus::synthesize_pe(p, 5) != corpus::synthesize_pe(p, 6));
  }

  SUBCASE("section count range (1,1) gives exactly one section") {
    auto p = corpus::default_malware_profile();
    p.section_count_range = {1, 1};
    const pe::PEFile f = pe::parse(corpus::synthesize_pe(p, 9));
    CHECK(f.sections.size() == 1);
  }

  SUBCASE("every synthesized file parses and validates") {
    const auto b = corpus::default_benign_profile();
    const auto m = corpus::default_malware_profile();
    for (std::uint64_t i = 0; i < 30; ++i) {
      const pe::PEFile f = pe::parse(corpus::synthesize_pe(i % 2 ? b : m, 500 + i));
      CHECK(pe::validate(f).empty());
    }
  }
}

TEST_CASE("disjoint-support profiles separate under a histogram logistic model") {
  const auto bp = corpus::pure_benign_profile();
  const auto mp = corpus::pure_malware_profile();
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  std::vector<double> holdout_scores;
  std::vector<int> holdout_labels;

  auto hist = [](const pe::Bytes& bytes) {
    const feat::FeatureVector fv = feat::extract(bytes);
    return std::vector<double>(fv.values.begin(), fv.values.begin() + 256);
  };

  for (std::uint64_t i = 0; i < 150; ++i) {
    x.push_back(hist(corpus::synthesize_pe(bp, i)));
    y.push_back(0);
    x.push_back(hist(corpus::synthesize_pe(mp, 10000 + i)));
    y.push_back(1);
  }
  const model::LogisticModel m = model::train_logistic(x, y, {150, 20.0, 0});
  for (std::uint64_t i = 0; i < 150; ++i) {
    const auto vb = hist(corpus::synthesize_pe(bp, 20000 + i));
    holdout_scores.push_back(m.score_values(std::span<const double>(vb.data(), vb.size())));
    holdout_labels.push_back(0);
    const auto vm = hist(corpus::synthesize_pe(mp, 30000 + i));
    holdout_scores.push_back(m.score_values(std::span<const double>(vm.data(), vm.size())));
    holdout_labels.push_back(1);
  }
  CHECK(metrics::auc(metrics::roc(holdout_scores, holdout_labels)) >= 0.99);
}

TEST_CASE("ingest") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "peadv_test_ingest";
  fs::remove_all(dir);
  fs::create_directories(dir);

  auto write_file = [&](const std::string& name, const pe::Bytes& bytes) {
    std::ofstream out(dir / name, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  };

  const auto profile = corpus::default_benign_profile();
  for (std::uint64_t i = 0; i < 10; ++i)
    write_file("f" + std::to_string(i) + ".exe", corpus::synthesize_pe(profile, 600 + i));

  SUBCASE("corrupt files are skipped with a report") {
    write_file("corrupt.exe", pe::Bytes(128, 0x00));
    corpus::LabeledCorpus c;
    const auto report = corpus::ingest(c, dir, Label::benign);
    CHECK(report.added == 10);
    CHECK(report.skipped.size() == 1);
    CHECK(c.entries.size() == 10);
  }

  SUBCASE("duplicates collapse to one entry") {
    write_file("dup.exe", corpus::synthesize_pe(profile, 600));  // same bytes as f0
    corpus::LabeledCorpus c;
    const auto report = corpus::ingest(c, dir, Label::benign);
    CHECK(report.added == 10);
    CHECK(report.duplicates == 1);
  }

  SUBCASE("empty directory adds nothing") {
    const fs::path empty = dir / "empty";
    fs::create_directories(empty);
    corpus::LabeledCorpus c;
    const auto report = corpus::ingest(c, empty, Label::malware);
    CHECK(report.added == 0);
  }

  SUBCASE("label store round trip") {
    corpus::LabeledCorpus c;
    corpus::ingest(c, dir, Label::benign);
    const fs::path store = dir / "labels.tsv";
    corpus::save_label_store(c, store);
    const corpus::LabeledCorpus loaded = corpus::load_label_store(store);
    REQUIRE(loaded.entries.size() == c.entries.size());
    for (std::size_t i = 0; i < c.entries.size(); ++i) {
      CHECK(loaded.entries[i].digest == c.entries[i].digest);
      CHECK(loaded.entries[i].label == c.entries[i].label);
    }
  }

  fs::remove_all(dir);
}

TEST_CASE("sha256 known vectors") {
  CHECK(sha256_hex(pe::Bytes{}) == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  const std::string abc = "abc";
  CHECK(sha256_hex(pe::ByteView(reinterpret_cast<const std::uint8_t*>(abc.data()), abc.size())) ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
