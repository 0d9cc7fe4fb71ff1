#include "peadv/pe_format.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <limits>

namespace peadv::pe {

namespace {

constexpr std::uint8_t kSignature[4] = {'P', 'E', 0, 0};
constexpr std::uint64_t kMaxOffset = std::numeric_limits<std::uint32_t>::max();

std::string at_offset(std::uint64_t off) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), " (offset %llu)", static_cast<unsigned long long>(off));
  return buf;
}

}  // namespace

std::string SectionHeader::name() const {
  std::string n;
  for (std::size_t i = 0; i < 8 && raw[i] != 0; ++i) n.push_back(static_cast<char>(raw[i]));
  return n;
}

void SectionHeader::set_name(std::string_view n) {
  for (std::size_t i = 0; i < 8; ++i) raw[i] = i < n.size() ? static_cast<std::uint8_t>(n[i]) : 0;
}

Layout layout_of(const PEFile& pe) {
  Layout l;
  l.signature_offset = kDosHeaderSize + pe.dos_stub.size() + pe.dos_gap.size();
  l.coff_offset = l.signature_offset + 4;
  l.optional_offset = l.coff_offset + kCoffSize;
  l.table_offset = l.optional_offset + pe.optional.raw.size();
  l.header_zone_end = l.table_offset + kSectionHeaderSize * pe.sections.size();
  l.header_gap_offset = l.header_zone_end;
  std::uint64_t cursor = l.header_zone_end + pe.header_gap.size();
  l.section_raw_offsets.reserve(pe.sections.size());
  for (const Section& s : pe.sections) {
    l.section_raw_offsets.push_back(cursor);
    cursor += s.raw.size() + s.trailing.size();
  }
  l.overlay_offset = cursor;
  l.total_size = cursor + pe.overlay.size();
  return l;
}

PEFile parse(ByteView bytes, const ParseOptions& opts) {
  if (bytes.size() > opts.max_file_size)
    raise(Errc::file_too_large, "input exceeds configured cap of " + std::to_string(opts.max_file_size) + " bytes");
  if (bytes.size() < kDosHeaderSize) raise(Errc::truncated_file, "shorter than the 64-byte MS-DOS header");
  if (bytes[0] != 'M' || bytes[1] != 'Z') raise(Errc::malformed_magic, "missing MZ magic");

  PEFile pe;
  std::memcpy(pe.dos.raw.data(), bytes.data(), kDosHeaderSize);

  const std::uint64_t pe_off = pe.dos.pe_offset();
  if (pe_off + 4 > bytes.size()) raise(Errc::truncated_file, "pe_offset outside file" + at_offset(pe_off));
  if (pe_off < kDosHeaderSize || std::memcmp(bytes.data() + pe_off, kSignature, 4) != 0)
    raise(Errc::bad_signature, "no PE\\0\\0 signature at pe_offset" + at_offset(pe_off));

  pe.dos_stub.assign(bytes.begin() + kDosHeaderSize, bytes.begin() + static_cast<std::ptrdiff_t>(pe_off));

  const std::uint64_t coff_off = pe_off + 4;
  if (coff_off + kCoffSize > bytes.size()) raise(Errc::truncated_file, "COFF header past end of file" + at_offset(coff_off));
  std::memcpy(pe.coff.raw.data(), bytes.data() + coff_off, kCoffSize);

  const std::uint64_t opt_off = coff_off + kCoffSize;
  const std::size_t soh = pe.coff.size_of_optional_header();
  if (soh < kMinOptionalHeaderSize)
    raise(Errc::truncated_file, "optional header of " + std::to_string(soh) + " bytes cannot hold required fields");
  if (opt_off + soh > bytes.size()) raise(Errc::truncated_file, "optional header past end of file" + at_offset(opt_off));
  pe.optional.raw.assign(bytes.begin() + static_cast<std::ptrdiff_t>(opt_off),
                         bytes.begin() + static_cast<std::ptrdiff_t>(opt_off + soh));
  const std::uint16_t magic = pe.optional.format_magic();
  if (magic != kOptionalMagicPe32 && magic != kOptionalMagicPe32Plus)
    raise(Errc::bad_signature, "unknown optional header magic " + std::to_string(magic));

  const std::size_t n = pe.coff.num_sections();
  const std::uint64_t table_off = opt_off + soh;
  const std::uint64_t table_end = table_off + kSectionHeaderSize * static_cast<std::uint64_t>(n);
  if (table_end > bytes.size())
    raise(Errc::section_overflow, std::to_string(n) + " section headers extend past end of file");

  pe.sections.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    std::memcpy(pe.sections[i].header.raw.data(), bytes.data() + table_off + kSectionHeaderSize * i, kSectionHeaderSize);

  // Raw regions must be in file order, non-overlapping and clear of the
  // headers; anything else is rejected rather than repaired.
  std::uint64_t prev_end = table_end;
  std::size_t prev_idx = n;  // last section with raw data
  for (std::size_t i = 0; i < n; ++i) {
    const SectionHeader& h = pe.sections[i].header;
    if (h.raw_size() == 0) continue;
    const std::uint64_t off = h.raw_offset();
    const std::uint64_t end = off + h.raw_size();
    if (end > bytes.size())
      raise(Errc::section_overflow, "section " + std::to_string(i) + " raw data past end of file" + at_offset(off));
    if (off < table_end)
      raise(Errc::section_overflow, "section " + std::to_string(i) + " raw data overlaps headers" + at_offset(off));
    if (off < prev_end)
      raise(Errc::section_overflow, "section " + std::to_string(i) + " overlaps or precedes the previous raw region");
    if (prev_idx != n) {
      Section& prev = pe.sections[prev_idx];
      prev.trailing.assign(bytes.begin() + static_cast<std::ptrdiff_t>(prev_end), bytes.begin() + static_cast<std::ptrdiff_t>(off));
    } else {
      pe.header_gap.assign(bytes.begin() + static_cast<std::ptrdiff_t>(table_end), bytes.begin() + static_cast<std::ptrdiff_t>(off));
    }
    pe.sections[i].raw.assign(bytes.begin() + static_cast<std::ptrdiff_t>(off), bytes.begin() + static_cast<std::ptrdiff_t>(end));
    prev_end = end;
    prev_idx = i;
  }
  pe.overlay.assign(bytes.begin() + static_cast<std::ptrdiff_t>(prev_end), bytes.end());
  return pe;
}

Bytes serialize(const PEFile& pe) {
  for (std::size_t i = 0; i < pe.sections.size(); ++i) {
    if (pe.sections[i].header.raw_size() != pe.sections[i].raw.size())
      raise(Errc::layout_conflict,
            "section " + std::to_string(i) + " raw_size field disagrees with stored content");
  }
  if (pe.sections.size() > 0xFFFF) raise(Errc::layout_conflict, "more than 65535 sections");

  const Layout l = layout_of(pe);
  if (l.signature_offset > kMaxOffset || l.overlay_offset > kMaxOffset)
    raise(Errc::layout_conflict, "layout exceeds 32-bit file offsets");

  DosHeader dos = pe.dos;
  dos.set_pe_offset(static_cast<std::uint32_t>(l.signature_offset));

  CoffHeader coff = pe.coff;
  coff.set_num_sections(static_cast<std::uint16_t>(pe.sections.size()));

  OptionalHeader opt = pe.optional;
  if (pe.layout_dirty) {
    const std::uint64_t fa = std::max<std::uint64_t>(opt.file_alignment(), 1);
    const std::uint64_t sa = std::max<std::uint64_t>(opt.section_alignment(), 1);
    opt.set_size_of_headers(static_cast<std::uint32_t>(std::min(align_up(l.header_zone_end, fa), kMaxOffset)));
    std::uint64_t image_end = 0;
    for (const Section& s : pe.sections) {
      const std::uint64_t span = std::max<std::uint64_t>(s.header.virtual_size(), s.raw.size());
      image_end = std::max(image_end, s.header.virtual_address() + span);
    }
    if (image_end > 0) opt.set_size_of_image(static_cast<std::uint32_t>(std::min(align_up(image_end, sa), kMaxOffset)));
  }

  Bytes out;
  out.reserve(l.total_size);
  out.insert(out.end(), dos.raw.begin(), dos.raw.end());
  out.insert(out.end(), pe.dos_stub.begin(), pe.dos_stub.end());
  out.insert(out.end(), pe.dos_gap.begin(), pe.dos_gap.end());
  out.insert(out.end(), kSignature, kSignature + 4);
  out.insert(out.end(), coff.raw.begin(), coff.raw.end());
  out.insert(out.end(), opt.raw.begin(), opt.raw.end());
  for (std::size_t i = 0; i < pe.sections.size(); ++i) {
    SectionHeader h = pe.sections[i].header;
    if (pe.layout_dirty && !pe.sections[i].raw.empty())
      h.set_raw_offset(static_cast<std::uint32_t>(l.section_raw_offsets[i]));
    out.insert(out.end(), h.raw.begin(), h.raw.end());
  }
  out.insert(out.end(), pe.header_gap.begin(), pe.header_gap.end());
  for (const Section& s : pe.sections) {
    out.insert(out.end(), s.raw.begin(), s.raw.end());
    out.insert(out.end(), s.trailing.begin(), s.trailing.end());
  }
  out.insert(out.end(), pe.overlay.begin(), pe.overlay.end());
  return out;
}

std::vector<SlackRegion> slack_regions(const PEFile& pe) {
  std::vector<SlackRegion> out;
  const Layout l = layout_of(pe);
  if (!pe.header_gap.empty())
    out.push_back({l.header_gap_offset, pe.header_gap.size(), SlackOrigin::header_gap});
  for (std::size_t i = 0; i < pe.sections.size(); ++i) {
    const Section& s = pe.sections[i];
    const std::size_t content = s.content_size();
    if (s.raw.size() > content)
      out.push_back({l.section_raw_offsets[i] + content, s.raw.size() - content, SlackOrigin::inter_section});
  }
  return out;
}

std::vector<ByteRange> dos_region(const PEFile& pe, DosVariant variant) {
  std::vector<ByteRange> out;
  out.push_back({kDosReservedBegin, kDosReservedEnd});
  std::uint64_t editable_end = kDosHeaderSize;
  switch (variant) {
    case DosVariant::partial: break;
    case DosVariant::full: editable_end += pe.dos_stub.size(); break;
    case DosVariant::extend: editable_end += pe.dos_stub.size() + pe.dos_gap.size(); break;
  }
  if (editable_end > kDosHeaderSize) out.push_back({kDosHeaderSize, editable_end});
  return out;
}

PEFile grow_dos_gap(const PEFile& pe, std::uint64_t k) {
  if (k == 0) throw std::invalid_argument("grow_dos_gap: k must be > 0");

  const Layout old = layout_of(pe);
  PEFile out = pe;
  out.dos_gap.insert(out.dos_gap.end(), k, 0);

  // Pad the header gap so the first raw region lands back on file alignment;
  // all sections then shift by the same aligned delta.
  std::size_t first_raw = out.sections.size();
  for (std::size_t i = 0; i < out.sections.size(); ++i) {
    if (!out.sections[i].raw.empty()) {
      first_raw = i;
      break;
    }
  }
  if (first_raw != out.sections.size()) {
    const std::uint64_t fa = std::max<std::uint64_t>(pe.optional.file_alignment(), 1);
    const std::uint64_t old_first = old.section_raw_offsets[first_raw];
    const std::uint64_t pad = align_up(old_first + k, fa) - (old_first + k);
    out.header_gap.insert(out.header_gap.end(), pad, 0);
    const std::uint64_t delta = k + pad;
    if (old.overlay_offset + delta > kMaxOffset)
      raise(Errc::layout_conflict, "shifted raw offsets exceed 32-bit file offsets");
  }
  out.layout_dirty = true;
  return out;
}

std::vector<Finding> validate(const PEFile& pe) {
  using Sev = Finding::Severity;
  std::vector<Finding> out;
  const Layout l = layout_of(pe);
  const std::uint32_t fa = pe.optional.file_alignment();

  if (fa < 512 || (fa & (fa - 1)) != 0)
    out.push_back({Sev::warn, l.optional_offset + 36,
                   "file_alignment " + std::to_string(fa) + " is not a power of two >= 512"});
  if (pe.optional.section_alignment() < fa)
    out.push_back({Sev::warn, l.optional_offset + 32, "section_alignment below file_alignment"});
  if (pe.sections.empty()) out.push_back({Sev::warn, l.coff_offset + 2, "no sections"});
  if (pe.coff.timestamp() == 0) out.push_back({Sev::info, l.coff_offset + 4, "zero timestamp"});

  const std::uint32_t entry = pe.optional.entry_point_rva();
  if (entry == 0) {
    out.push_back({Sev::warn, l.optional_offset + 16, "entry point RVA is zero"});
  } else {
    bool covered = false;
    for (const Section& s : pe.sections) {
      const std::uint64_t va = s.header.virtual_address();
      const std::uint64_t span = std::max<std::uint64_t>(s.header.virtual_size(), s.raw.size());
      if (entry >= va && entry < va + span) covered = true;
    }
    if (!covered) out.push_back({Sev::warn, l.optional_offset + 16, "entry point RVA outside all sections"});
  }
  if (fa > 1) {
    for (std::size_t i = 0; i < pe.sections.size(); ++i) {
      if (!pe.sections[i].raw.empty() && l.section_raw_offsets[i] % fa != 0)
        out.push_back({Sev::warn, l.table_offset + kSectionHeaderSize * i + 20,
                       "section " + std::to_string(i) + " raw offset not file-aligned"});
    }
  }
  // Checksum is carried verbatim; edits leave it stale on purpose.
  if (pe.optional.raw.size() >= 68 && read_u32le(pe.optional.view(), 64) != 0)
    out.push_back({Sev::info, l.optional_offset + 64, "checksum present; not recomputed after edits"});
  return out;
}

std::string format_findings(const std::vector<Finding>& findings) {
  std::string out;
  for (const Finding& f : findings) {
    const char* sev = f.severity == Finding::Severity::info    ? "info"
                      : f.severity == Finding::Severity::warn ? "warn"
                                                              : "error";
    out += sev;
    out += '\t';
    out += std::to_string(f.offset);
    out += '\t';
    out += f.message;
    out += '\n';
  }
  return out;
}

}  // namespace peadv::pe
