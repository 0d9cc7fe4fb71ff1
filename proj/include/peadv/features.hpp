#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "peadv/pe_format.hpp"

namespace peadv::feat {

inline constexpr std::size_t kFeatureDim = 320;

// Slot layout:
//   [0, 256)    normalized byte-unigram histogram of the whole file
//   [256, 288)  section aggregates: count, mean/max entropy, mean/max raw
//               size ratio, 8 name-hash buckets, executable count, zeros
//   [288, 316)  header: scaled entry RVA, section count, log2 file
//               alignment, 16 characteristic bits, PE32+ flag, 4 timestamp
//               buckets, 4 size ratios
//   [316, 320)  overlay ratio, overlay entropy, slack ratio, DOS-zone ratio
inline constexpr std::size_t kHistogramOffset = 0;
inline constexpr std::size_t kSectionAggOffset = 256;
inline constexpr std::size_t kHeaderOffset = 288;
inline constexpr std::size_t kOverlayOffset = 316;

struct FeatureVector {
  std::array<double, kFeatureDim> values{};
  bool structured = false;  // false when the input did not parse as PE
};

// Pure function of the bytes. Unparseable inputs fall back to the histogram
// slots with every structural slot zeroed and `structured == false`.
FeatureVector extract(pe::ByteView bytes);

// Shannon entropy (base 2) averaged over consecutive 256-byte windows.
double windowed_entropy(pe::ByteView bytes);

std::string to_csv_row(const FeatureVector& fv);

// Binary matrix container: row count header, fixed column count, row-major.
void save_matrix(const std::vector<FeatureVector>& rows, const std::filesystem::path& path);
std::vector<FeatureVector> load_matrix(const std::filesystem::path& path);

}  // namespace peadv::feat
