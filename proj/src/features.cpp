#include "peadv/features.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "peadv/binio.hpp"
#include "peadv/errors.hpp"

namespace peadv::feat {

namespace {

double shannon(const std::uint32_t counts[256], std::size_t total) {
  if (total == 0) return 0.0;
  double h = 0.0;
  for (int i = 0; i < 256; ++i) {
    if (counts[i] == 0) continue;
    const double p = static_cast<double>(counts[i]) / static_cast<double>(total);
    h -= p * std::log2(p);
  }
  return h;
}

std::uint32_t fnv1a32(const std::string& s) {
  std::uint32_t h = 2166136261u;
  for (char c : s) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 16777619u;
  }
  return h;
}

}  // namespace

double windowed_entropy(pe::ByteView bytes) {
  if (bytes.empty()) return 0.0;
  double sum = 0.0;
  std::size_t windows = 0;
  for (std::size_t off = 0; off < bytes.size(); off += 256) {
    const std::size_t len = std::min<std::size_t>(256, bytes.size() - off);
    std::uint32_t counts[256] = {0};
    for (std::size_t i = 0; i < len; ++i) ++counts[bytes[off + i]];
    sum += shannon(counts, len);
    ++windows;
  }
  return sum / static_cast<double>(windows);
}

FeatureVector extract(pe::ByteView bytes) {
  FeatureVector fv;
  if (bytes.empty()) return fv;

  // Whole-file byte histogram, normalized.
  {
    std::uint64_t counts[256] = {0};
    for (std::uint8_t b : bytes) ++counts[b];
    const double n = static_cast<double>(bytes.size());
    for (int i = 0; i < 256; ++i) fv.values[kHistogramOffset + static_cast<std::size_t>(i)] = static_cast<double>(counts[i]) / n;
  }

  pe::PEFile parsed;
  try {
    parsed = pe::parse(bytes);
  } catch (const Error&) {
    return fv;  // histogram-only fallback
  }
  fv.structured = true;
  const double file_size = static_cast<double>(bytes.size());

  // Section aggregates. Size ratios are relative to the section-raw total so
  // overlay growth cannot disturb them.
  {
    double* agg = fv.values.data() + kSectionAggOffset;
    const std::size_t n = parsed.sections.size();
    agg[0] = static_cast<double>(n);
    double raw_total = 0;
    for (const pe::Section& s : parsed.sections) raw_total += static_cast<double>(s.raw.size());
    double ent_sum = 0, ent_max = 0, ratio_sum = 0, ratio_max = 0;
    std::size_t exec = 0;
    for (const pe::Section& s : parsed.sections) {
      const std::size_t content = s.content_size();
      const double ent = windowed_entropy(pe::ByteView(s.raw.data(), content));
      ent_sum += ent;
      ent_max = std::max(ent_max, ent);
      const double ratio = raw_total > 0 ? static_cast<double>(s.raw.size()) / raw_total : 0.0;
      ratio_sum += ratio;
      ratio_max = std::max(ratio_max, ratio);
      agg[5 + (fnv1a32(s.header.name()) % 8)] += 1.0;
      if (s.header.executable()) ++exec;
    }
    if (n > 0) {
      agg[1] = ent_sum / static_cast<double>(n);
      agg[2] = ent_max;
      agg[3] = ratio_sum / static_cast<double>(n);
      agg[4] = ratio_max;
    }
    agg[13] = static_cast<double>(exec);
    // agg[14..31] reserved, zero
  }

  // Header features
  {
    double* hdr = fv.values.data() + kHeaderOffset;
    const auto& opt = parsed.optional;
    hdr[0] = static_cast<double>(opt.entry_point_rva()) /
             std::max<double>(static_cast<double>(opt.size_of_image()), 1.0);
    hdr[0] = std::min(hdr[0], 4.0);
    hdr[1] = static_cast<double>(parsed.sections.size());
    hdr[2] = opt.file_alignment() > 0 ? std::log2(static_cast<double>(opt.file_alignment())) : 0.0;
    const std::uint16_t chars = parsed.coff.characteristics();
    for (int b = 0; b < 16; ++b) hdr[3 + b] = (chars >> b) & 1;
    hdr[19] = opt.is_pe32_plus() ? 1.0 : 0.0;
    hdr[20 + ((parsed.coff.timestamp() >> 30) & 3)] = 1.0;
    hdr[24] = std::min(static_cast<double>(opt.size_of_headers()) / file_size, 4.0);
    hdr[25] = std::min(file_size / std::max<double>(static_cast<double>(opt.size_of_image()), 1.0), 4.0);
    std::uint64_t raw_total = 0;
    for (const pe::Section& s : parsed.sections) raw_total += s.raw.size();
    hdr[26] = static_cast<double>(raw_total) / file_size;
    hdr[27] = static_cast<double>(opt.raw.size()) / 1024.0;
  }

  // Overlay / slack / DOS zone
  {
    double* ov = fv.values.data() + kOverlayOffset;
    ov[0] = static_cast<double>(parsed.overlay.size()) / file_size;
    ov[1] = windowed_entropy(pe::ByteView(parsed.overlay.data(), parsed.overlay.size()));
    std::uint64_t slack_total = 0;
    for (const pe::SlackRegion& r : pe::slack_regions(parsed)) slack_total += r.length;
    ov[2] = static_cast<double>(slack_total) / file_size;
    ov[3] = static_cast<double>(parsed.pe_offset() - pe::kDosHeaderSize) / file_size;
  }
  return fv;
}

std::string to_csv_row(const FeatureVector& fv) {
  std::string row;
  row.reserve(kFeatureDim * 12);
  char buf[40];
  for (std::size_t i = 0; i < kFeatureDim; ++i) {
    std::snprintf(buf, sizeof(buf), "%.9g", fv.values[i]);
    if (i) row.push_back(',');
    row += buf;
  }
  return row;
}

void save_matrix(const std::vector<FeatureVector>& rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(Errc::io_error, "cannot write matrix " + path.string());
  Bytes header;
  header.push_back('A');
  header.push_back('D');
  header.push_back('F');
  header.push_back('M');
  append_u32le(header, 1);
  append_u64le(header, rows.size());
  append_u32le(header, kFeatureDim);
  out.write(reinterpret_cast<const char*>(header.data()), static_cast<std::streamsize>(header.size()));
  for (const FeatureVector& fv : rows) {
    out.write(reinterpret_cast<const char*>(fv.values.data()),
              static_cast<std::streamsize>(sizeof(double) * kFeatureDim));
  }
}

std::vector<FeatureVector> load_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::io_error, "cannot read matrix " + path.string());
  std::uint8_t header[20];
  in.read(reinterpret_cast<char*>(header), sizeof(header));
  if (in.gcount() != sizeof(header) || std::memcmp(header, "ADFM", 4) != 0)
    raise(Errc::io_error, "unrecognized matrix container " + path.string());
  const std::uint64_t rows = read_u64le(ByteView(header, sizeof(header)), 8);
  const std::uint32_t cols = read_u32le(ByteView(header, sizeof(header)), 16);
  if (cols != kFeatureDim) raise(Errc::io_error, "matrix column count mismatch");
  std::vector<FeatureVector> out(rows);
  for (std::uint64_t i = 0; i < rows; ++i) {
    in.read(reinterpret_cast<char*>(out[i].values.data()),
            static_cast<std::streamsize>(sizeof(double) * kFeatureDim));
    if (in.gcount() != static_cast<std::streamsize>(sizeof(double) * kFeatureDim))
      raise(Errc::io_error, "truncated matrix container");
    out[i].structured = true;
  }
  return out;
}

}  // namespace peadv::feat
