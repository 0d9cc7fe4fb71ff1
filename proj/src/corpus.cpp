#include "peadv/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "peadv/rng.hpp"
#include "peadv/sha256.hpp"

namespace peadv::corpus {

namespace {

constexpr std::uint32_t kFileAlignment = 0x200;
constexpr std::uint32_t kSectionAlignment = 0x1000;

// Canonical MZ header body (reserved region values of a typical linker).
constexpr std::uint8_t kDosReserved[58] = {
    0x90, 0x00, 0x03, 0x00, 0x00, 0x00, 0x04, 0x00, 0x00, 0x00, 0xFF, 0xFF, 0x00, 0x00, 0xB8,
    0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x40, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00,
    0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00,
    0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00};

const char kStubText[] = "This program cannot be run in DOS mode.\r\r\n$";

const char* kSectionNames[] = {".text", ".rdata", ".data", ".rsrc", ".pdata", ".reloc", ".idata", ".bss"};

std::array<double, 256> band_weights(int lo, int hi) {
  std::array<double, 256> w{};
  for (int b = lo; b <= hi; ++b) w[static_cast<std::size_t>(b)] = 1.0;
  return w;
}

struct ByteSampler {
  std::array<double, 256> cumulative{};

  explicit ByteSampler(const std::array<double, 256>& weights) {
    double total = 0;
    for (double w : weights) {
      if (w < 0) throw std::invalid_argument("byte weights must be non-negative");
      total += w;
    }
    if (total <= 0) throw std::invalid_argument("byte weights must not be all zero");
    double acc = 0;
    for (std::size_t i = 0; i < 256; ++i) {
      acc += weights[i] / total;
      cumulative[i] = acc;
    }
    cumulative[255] = 1.0;
  }

  std::uint8_t sample(Rng& rng) const {
    const double u = rng.next_double();
    const auto it = std::lower_bound(cumulative.begin(), cumulative.end(), u);
    return static_cast<std::uint8_t>(it - cumulative.begin());
  }
};

void fill_sampled(pe::Bytes& out, std::size_t count, const ByteSampler& sampler, Rng& rng) {
  out.reserve(out.size() + count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(sampler.sample(rng));
}

}  // namespace

CorpusProfile pure_benign_profile() {
  CorpusProfile p;
  p.cls = Label::benign;
  p.byte_weights = band_weights(0x00, 0x7F);
  p.mix_weights = band_weights(0x80, 0xFF);
  p.cross_mix_range = {0.0, 0.0};
  return p;
}

CorpusProfile pure_malware_profile() {
  CorpusProfile p;
  p.cls = Label::malware;
  p.byte_weights = band_weights(0x80, 0xFF);
  p.mix_weights = band_weights(0x00, 0x7F);
  p.cross_mix_range = {0.0, 0.0};
  return p;
}

CorpusProfile default_benign_profile() {
  CorpusProfile p = pure_benign_profile();
  p.cross_mix_range = {0.0, 0.35};
  return p;
}

CorpusProfile default_malware_profile() {
  CorpusProfile p = pure_malware_profile();
  p.cross_mix_range = {0.0, 0.70};
  return p;
}

pe::Bytes synthesize_pe(const CorpusProfile& profile, std::uint64_t seed) {
  Rng rng = Rng::from_key(profile.seed * 0x9E3779B97F4A7C15ull + seed, "synthesize_pe");

  const double mix = rng.uniform(profile.cross_mix_range.first, profile.cross_mix_range.second);
  std::array<double, 256> blended{};
  {
    double own_total = 0, mix_total = 0;
    for (double w : profile.byte_weights) own_total += w;
    for (double w : profile.mix_weights) mix_total += w;
    if (own_total <= 0) throw std::invalid_argument("profile byte_weights must not be all zero");
    for (std::size_t i = 0; i < 256; ++i) {
      blended[i] = (1.0 - mix) * profile.byte_weights[i] / own_total;
      if (mix_total > 0) blended[i] += mix * profile.mix_weights[i] / mix_total;
    }
  }
  const ByteSampler sampler(blended);

  const bool pe32plus = rng.below(2) == 0;
  const std::size_t stub_len = 64 + 16 * static_cast<std::size_t>(rng.below(8));
  const std::uint32_t pe_off = static_cast<std::uint32_t>(pe::kDosHeaderSize + stub_len);

  const int sec_lo = profile.section_count_range.first;
  const int sec_hi = std::max(profile.section_count_range.second, sec_lo);
  const std::size_t nsec = static_cast<std::size_t>(sec_lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(sec_hi - sec_lo + 1))));
  if (nsec == 0) throw std::invalid_argument("section count must be >= 1");

  const std::size_t soh = pe32plus ? 240 : 224;
  const std::uint64_t table_off = static_cast<std::uint64_t>(pe_off) + 4 + pe::kCoffSize + soh;
  const std::uint64_t header_zone_end = table_off + pe::kSectionHeaderSize * nsec;
  const std::uint32_t size_of_headers = static_cast<std::uint32_t>(align_up(header_zone_end, kFileAlignment));

  // Section plan: sizes drawn first so the layout is known before emission.
  struct Plan {
    std::string name;
    std::size_t content_len;
    std::uint32_t raw_size;
    std::uint32_t raw_offset;
    std::uint32_t va;
    std::uint32_t characteristics;
  };
  std::vector<Plan> plan(nsec);
  std::uint32_t raw_cursor = size_of_headers;
  std::uint32_t va_cursor = kSectionAlignment;
  const std::size_t size_lo = std::max<std::size_t>(profile.section_size_range.first, 1);
  const std::size_t size_hi = std::max(profile.section_size_range.second, size_lo);
  for (std::size_t i = 0; i < nsec; ++i) {
    Plan& p = plan[i];
    p.name = kSectionNames[i % (sizeof(kSectionNames) / sizeof(kSectionNames[0]))];
    p.content_len = size_lo + static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(size_hi - size_lo + 1)));
    p.raw_size = static_cast<std::uint32_t>(align_up(p.content_len, kFileAlignment));
    p.raw_offset = raw_cursor;
    p.va = va_cursor;
    p.characteristics = i == 0 ? (0x00000020 | pe::kScnMemExecute | pe::kScnMemRead)
                               : (pe::kScnCntInitializedData | pe::kScnMemRead |
                                  (rng.below(2) ? 0x80000000u : 0u));
    raw_cursor += p.raw_size;
    va_cursor = static_cast<std::uint32_t>(align_up(va_cursor + std::max<std::size_t>(p.content_len, 1), kSectionAlignment));
  }
  const std::uint32_t size_of_image = va_cursor;
  const std::uint32_t entry = plan[0].va + static_cast<std::uint32_t>(std::min<std::size_t>(0x20, plan[0].content_len ? plan[0].content_len - 1 : 0));

  pe::Bytes out;
  out.reserve(raw_cursor + 4096);
  // MS-DOS header
  out.push_back('M');
  out.push_back('Z');
  out.insert(out.end(), kDosReserved, kDosReserved + 58);
  append_u32le(out, pe_off);
  // Stub: jump-free filler plus the customary banner text, zero padded.
  {
    pe::Bytes stub;
    stub.push_back(0x0E);
    stub.push_back(0x1F);
    stub.push_back(0xBA);
    stub.push_back(0x0E);
    stub.push_back(0x00);
    stub.push_back(0xB4);
    stub.push_back(0x09);
    stub.push_back(0xCD);
    stub.push_back(0x21);
    stub.push_back(0xB8);
    stub.push_back(0x01);
    stub.push_back(0x4C);
    stub.push_back(0xCD);
    stub.push_back(0x21);
    for (const char* c = kStubText; *c; ++c) stub.push_back(static_cast<std::uint8_t>(*c));
    stub.resize(stub_len, 0);
    out.insert(out.end(), stub.begin(), stub.end());
  }
  // Signature + COFF
  out.push_back('P');
  out.push_back('E');
  out.push_back(0);
  out.push_back(0);
  append_u16le(out, pe32plus ? 0x8664 : 0x014C);
  append_u16le(out, static_cast<std::uint16_t>(nsec));
  append_u32le(out, 0x5F000000u + static_cast<std::uint32_t>(rng.below(1u << 24)));
  append_u32le(out, 0);  // symbol table
  append_u32le(out, 0);  // symbol count
  append_u16le(out, static_cast<std::uint16_t>(soh));
  append_u16le(out, pe32plus ? 0x0022 : 0x0102);

  // Optional header
  const std::size_t opt_begin = out.size();
  append_u16le(out, pe32plus ? pe::kOptionalMagicPe32Plus : pe::kOptionalMagicPe32);
  out.push_back(14);  // linker major
  out.push_back(0);   // linker minor
  append_u32le(out, plan[0].raw_size);  // size of code
  append_u32le(out, 0);                 // size of initialized data
  append_u32le(out, 0);                 // size of uninitialized data
  append_u32le(out, entry);
  append_u32le(out, plan[0].va);  // base of code
  if (pe32plus) {
    append_u64le(out, 0x140000000ull);
  } else {
    append_u32le(out, plan.size() > 1 ? plan[1].va : plan[0].va);  // base of data
    append_u32le(out, 0x00400000u);
  }
  append_u32le(out, kSectionAlignment);
  append_u32le(out, kFileAlignment);
  append_u16le(out, 6);   // OS major
  append_u16le(out, 0);   // OS minor
  append_u16le(out, 0);   // image version
  append_u16le(out, 0);
  append_u16le(out, 6);   // subsystem major
  append_u16le(out, 0);
  append_u32le(out, 0);   // win32 version
  append_u32le(out, size_of_image);
  append_u32le(out, size_of_headers);
  append_u32le(out, 0);   // checksum (left stale on edits)
  append_u16le(out, 3);   // console subsystem
  append_u16le(out, pe32plus ? 0x8160 : 0x8140);
  if (pe32plus) {
    append_u64le(out, 0x100000);  // stack reserve
    append_u64le(out, 0x1000);
    append_u64le(out, 0x100000);  // heap reserve
    append_u64le(out, 0x1000);
  } else {
    append_u32le(out, 0x100000);
    append_u32le(out, 0x1000);
    append_u32le(out, 0x100000);
    append_u32le(out, 0x1000);
  }
  append_u32le(out, 0);   // loader flags
  append_u32le(out, 16);  // rva+size count
  for (int i = 0; i < 16; ++i) append_u64le(out, 0);  // data directories
  if (out.size() - opt_begin != soh) throw std::logic_error("optional header layout mismatch");

  // Section table
  for (const Plan& p : plan) {
    std::uint8_t name[8] = {0};
    std::memcpy(name, p.name.data(), std::min<std::size_t>(p.name.size(), 8));
    out.insert(out.end(), name, name + 8);
    append_u32le(out, static_cast<std::uint32_t>(p.content_len));  // virtual size
    append_u32le(out, p.va);
    append_u32le(out, p.raw_size);
    append_u32le(out, p.raw_offset);
    append_u32le(out, 0);  // relocations
    append_u32le(out, 0);  // line numbers
    append_u16le(out, 0);
    append_u16le(out, 0);
    append_u32le(out, p.characteristics);
  }
  out.resize(size_of_headers, 0);  // header gap padding

  for (const Plan& p : plan) {
    fill_sampled(out, p.content_len, sampler, rng);
    out.resize(p.raw_offset + p.raw_size, 0);  // slack padding
  }

  if (rng.next_double() < profile.overlay_probability) {
    const std::size_t overlay_len = 256 + static_cast<std::size_t>(rng.below(1793));
    fill_sampled(out, overlay_len, sampler, rng);
  }
  return out;
}

bool LabeledCorpus::add(CorpusEntry entry) {
  if (digests.count(entry.digest)) return false;
  digests.insert(entry.digest);
  entries.push_back(std::move(entry));
  return true;
}

IngestReport ingest(LabeledCorpus& corpus, const std::filesystem::path& dir, Label label) {
  IngestReport report;
  std::vector<std::filesystem::path> paths;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file()) paths.push_back(e.path());
  }
  std::sort(paths.begin(), paths.end());

  for (const auto& p : paths) {
    pe::Bytes bytes;
    {
      std::ifstream in(p, std::ios::binary);
      if (!in) {
        report.skipped.emplace_back(p, "unreadable");
        continue;
      }
      bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }
    try {
      pe::parse(bytes);
    } catch (const Error& e) {
      report.skipped.emplace_back(p, e.what());
      continue;
    }
    CorpusEntry entry;
    entry.digest = sha256_hex(bytes);
    entry.path = p;
    entry.label = label;
    entry.origin = CorpusEntry::Origin::ingested;
    if (corpus.add(std::move(entry)))
      ++report.added;
    else
      ++report.duplicates;
  }
  return report;
}

void save_label_store(const LabeledCorpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(Errc::io_error, "cannot write label store " + path.string());
  out << "peadv-labels\t1\tsha256\n";
  for (const CorpusEntry& e : corpus.entries) {
    out << e.digest << '\t' << label_name(e.label) << '\t'
        << (e.origin == CorpusEntry::Origin::synthetic ? "synthetic" : "ingested") << '\t'
        << e.path.generic_string() << '\n';
  }
}

LabeledCorpus load_label_store(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::io_error, "cannot read label store " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("peadv-labels\t1\t", 0) != 0)
    raise(Errc::io_error, "unrecognized label store header in " + path.string());
  LabeledCorpus corpus;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::size_t start = 0;
    while (cols.size() < 3) {
      const std::size_t tab = line.find('\t', start);
      if (tab == std::string::npos) break;
      cols.push_back(line.substr(start, tab - start));
      start = tab + 1;
    }
    if (cols.size() != 3) raise(Errc::io_error, "malformed label store line: " + line);
    CorpusEntry e;
    e.digest = cols[0];
    e.label = label_from_string(cols[1]);
    e.origin = cols[2] == "synthetic" ? CorpusEntry::Origin::synthetic : CorpusEntry::Origin::ingested;
    e.path = line.substr(start);
    corpus.add(std::move(e));
  }
  return corpus;
}

}  // namespace peadv::corpus
