#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "peadv/label.hpp"
#include "peadv/pe_format.hpp"

namespace peadv::corpus {

// Recipe for one class of synthetic executables. Classes become
// feature-separable through byte-distribution support; cross_mix_range
// blends in opposite-class bytes per file so the class boundary has the
// overlap that makes evasion and poisoning dynamics observable.
struct CorpusProfile {
  Label cls = Label::benign;
  std::array<double, 256> byte_weights{};
  std::array<double, 256> mix_weights{};  // opposite-class distribution
  std::pair<double, double> cross_mix_range{0.0, 0.0};
  std::pair<int, int> section_count_range{2, 5};
  std::pair<std::size_t, std::size_t> section_size_range{1024, 8192};
  double overlay_probability = 0.3;
  std::uint64_t seed = 0;
};

CorpusProfile default_benign_profile();
CorpusProfile default_malware_profile();

// Pure profiles with disjoint byte support and no cross-class mixing.
CorpusProfile pure_benign_profile();
CorpusProfile pure_malware_profile();

pe::Bytes synthesize_pe(const CorpusProfile& profile, std::uint64_t seed);

struct CorpusEntry {
  std::string digest;
  std::filesystem::path path;
  Label label = Label::benign;
  enum class Origin { synthetic, ingested } origin = Origin::synthetic;
};

struct LabeledCorpus {
  std::vector<CorpusEntry> entries;
  std::unordered_set<std::string> digests;

  bool add(CorpusEntry entry);  // false when the digest is already present
};

struct IngestReport {
  std::size_t added = 0;
  std::size_t duplicates = 0;
  std::vector<std::pair<std::filesystem::path, std::string>> skipped;
};

// Registers every parseable file in the directory (sorted path order).
// Duplicated digests and unparseable files are reported, never fatal.
IngestReport ingest(LabeledCorpus& corpus, const std::filesystem::path& dir, Label label);

void save_label_store(const LabeledCorpus& corpus, const std::filesystem::path& path);
LabeledCorpus load_label_store(const std::filesystem::path& path);

}  // namespace peadv::corpus
