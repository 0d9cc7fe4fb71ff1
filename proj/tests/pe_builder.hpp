#pragma once

// Test-only PE image builder. Assembles bytes with hand-coded offsets,
// independent of the library's serializer, so parser tests check against a
// second implementation of the format rather than a round trip.

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

namespace testpe {

using Bytes = std::vector<std::uint8_t>;

inline void put16(Bytes& b, std::size_t off, std::uint16_t v) {
  b[off] = static_cast<std::uint8_t>(v & 0xFF);
  b[off + 1] = static_cast<std::uint8_t>(v >> 8);
}

inline void put32(Bytes& b, std::size_t off, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b[off + static_cast<std::size_t>(i)] = static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF);
}

struct SectionSpec {
  std::string name = ".text";
  std::uint32_t virtual_size = 0;
  std::uint32_t raw_size = 0;
  std::uint32_t virtual_address = 0;
  std::uint32_t characteristics = 0x60000020;
  std::uint8_t fill = 0xCC;  // raw content byte
};

struct BuildSpec {
  std::uint32_t stub_len = 64;
  std::uint32_t file_alignment = 512;
  std::uint32_t section_alignment = 0x1000;
  std::uint32_t entry_rva = 0x1010;
  std::vector<SectionSpec> sections;
  std::uint32_t overlay_len = 0;
  std::uint8_t overlay_fill = 0xEE;
};

// PE32 image with a 224-byte optional header. Raw offsets are packed
// sequentially from the aligned header end.
inline Bytes build(const BuildSpec& spec) {
  const std::uint32_t pe_off = 64 + spec.stub_len;
  const std::size_t soh = 224;
  const std::size_t table_off = pe_off + 4 + 20;
  const std::size_t table_end = table_off + soh + 40 * spec.sections.size();
  std::uint32_t first_raw = static_cast<std::uint32_t>(
      (table_end + spec.file_alignment - 1) / spec.file_alignment * spec.file_alignment);

  std::vector<std::uint32_t> raw_offsets;
  std::uint32_t cursor = first_raw;
  for (const SectionSpec& s : spec.sections) {
    raw_offsets.push_back(s.raw_size ? cursor : 0);
    cursor += s.raw_size;
  }
  const std::size_t total = cursor + spec.overlay_len;

  Bytes b(total, 0);
  b[0] = 'M';
  b[1] = 'Z';
  put32(b, 60, pe_off);
  // stub filler
  for (std::uint32_t i = 0; i < spec.stub_len; ++i) b[64 + i] = static_cast<std::uint8_t>(0x90);
  b[pe_off] = 'P';
  b[pe_off + 1] = 'E';
  // COFF
  const std::size_t coff = pe_off + 4;
  put16(b, coff + 0, 0x014C);
  put16(b, coff + 2, static_cast<std::uint16_t>(spec.sections.size()));
  put32(b, coff + 4, 0x5EADBEEF);
  put16(b, coff + 16, static_cast<std::uint16_t>(soh));
  put16(b, coff + 18, 0x0102);
  // Optional header (PE32)
  const std::size_t opt = coff + 20;
  put16(b, opt + 0, 0x10B);
  put32(b, opt + 16, spec.entry_rva);
  put32(b, opt + 20, spec.sections.empty() ? 0 : spec.sections[0].virtual_address);
  put32(b, opt + 28, 0x00400000);
  put32(b, opt + 32, spec.section_alignment);
  put32(b, opt + 36, spec.file_alignment);
  std::uint32_t image_end = spec.section_alignment;
  for (const SectionSpec& s : spec.sections) {
    const std::uint32_t span = s.virtual_size ? s.virtual_size : s.raw_size;
    if (s.virtual_address + span > image_end) image_end = s.virtual_address + span;
  }
  image_end = (image_end + spec.section_alignment - 1) / spec.section_alignment * spec.section_alignment;
  put32(b, opt + 56, image_end);
  put32(b, opt + 60, first_raw);
  put16(b, opt + 68, 3);
  put32(b, opt + 92, 16);
  // Section table
  for (std::size_t i = 0; i < spec.sections.size(); ++i) {
    const SectionSpec& s = spec.sections[i];
    const std::size_t h = table_off + soh + 40 * i;
    std::memcpy(b.data() + h, s.name.data(), std::min<std::size_t>(s.name.size(), 8));
    put32(b, h + 8, s.virtual_size);
    put32(b, h + 12, s.virtual_address);
    put32(b, h + 16, s.raw_size);
    put32(b, h + 20, raw_offsets[i]);
    put32(b, h + 36, s.characteristics);
    for (std::uint32_t j = 0; j < s.raw_size; ++j) b[raw_offsets[i] + j] = s.fill;
  }
  for (std::uint32_t j = 0; j < spec.overlay_len; ++j) b[cursor + j] = spec.overlay_fill;
  return b;
}

inline BuildSpec two_section_spec() {
  BuildSpec spec;
  SectionSpec text;
  text.name = ".text";
  text.virtual_size = 700;
  text.raw_size = 1024;
  text.virtual_address = 0x1000;
  text.fill = 0x41;
  SectionSpec data;
  data.name = ".data";
  data.virtual_size = 512;
  data.raw_size = 512;
  data.virtual_address = 0x2000;
  data.characteristics = 0xC0000040;
  data.fill = 0x42;
  spec.sections = {text, data};
  spec.overlay_len = 100;
  return spec;
}

}  // namespace testpe
