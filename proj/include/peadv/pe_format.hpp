#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "peadv/binio.hpp"
#include "peadv/errors.hpp"

namespace peadv::pe {

using peadv::Bytes;
using peadv::ByteView;

inline constexpr std::size_t kDosHeaderSize = 64;
inline constexpr std::size_t kDosReservedBegin = 2;   // after the MZ magic
inline constexpr std::size_t kDosReservedEnd = 60;    // e_lfanew sits at [60, 64)
inline constexpr std::size_t kCoffSize = 20;
inline constexpr std::size_t kSectionHeaderSize = 40;
inline constexpr std::size_t kMinOptionalHeaderSize = 64;  // fields through size_of_headers
inline constexpr std::size_t kDefaultMaxFileSize = 64ull << 20;

inline constexpr std::uint16_t kOptionalMagicPe32 = 0x10B;
inline constexpr std::uint16_t kOptionalMagicPe32Plus = 0x20B;

inline constexpr std::uint32_t kScnMemExecute = 0x20000000;
inline constexpr std::uint32_t kScnMemRead = 0x40000000;
inline constexpr std::uint32_t kScnCntInitializedData = 0x00000040;

// 64-byte MS-DOS header. The 58 reserved bytes between the magic and
// e_lfanew are opaque and freely editable by the DOS attacks.
struct DosHeader {
  std::array<std::uint8_t, kDosHeaderSize> raw{};

  std::uint32_t pe_offset() const { return read_u32le(ByteView(raw.data(), raw.size()), 60); }
  void set_pe_offset(std::uint32_t v) { write_u32le(std::span<std::uint8_t>(raw.data(), raw.size()), 60, v); }
};

struct CoffHeader {
  std::array<std::uint8_t, kCoffSize> raw{};

  std::uint16_t machine() const { return read_u16le(view(), 0); }
  std::uint16_t num_sections() const { return read_u16le(view(), 2); }
  std::uint32_t timestamp() const { return read_u32le(view(), 4); }
  std::uint16_t size_of_optional_header() const { return read_u16le(view(), 16); }
  std::uint16_t characteristics() const { return read_u16le(view(), 18); }

  void set_num_sections(std::uint16_t n) { write_u16le(span(), 2, n); }

  ByteView view() const { return ByteView(raw.data(), raw.size()); }
  std::span<std::uint8_t> span() { return std::span<std::uint8_t>(raw.data(), raw.size()); }
};

// Named fields decoded at fixed offsets; everything else (data directories,
// version stamps, checksum) rides along verbatim in `raw`.
struct OptionalHeader {
  Bytes raw;

  std::uint16_t format_magic() const { return read_u16le(view(), 0); }
  bool is_pe32_plus() const { return format_magic() == kOptionalMagicPe32Plus; }
  std::uint32_t entry_point_rva() const { return read_u32le(view(), 16); }
  std::uint64_t image_base() const {
    return is_pe32_plus() ? read_u64le(view(), 24) : static_cast<std::uint64_t>(read_u32le(view(), 28));
  }
  std::uint32_t section_alignment() const { return read_u32le(view(), 32); }
  std::uint32_t file_alignment() const { return read_u32le(view(), 36); }
  std::uint32_t size_of_image() const { return read_u32le(view(), 56); }
  std::uint32_t size_of_headers() const { return read_u32le(view(), 60); }

  void set_size_of_image(std::uint32_t v) { write_u32le(span(), 56, v); }
  void set_size_of_headers(std::uint32_t v) { write_u32le(span(), 60, v); }

  ByteView view() const { return ByteView(raw.data(), raw.size()); }
  std::span<std::uint8_t> span() { return std::span<std::uint8_t>(raw.data(), raw.size()); }
};

struct SectionHeader {
  std::array<std::uint8_t, kSectionHeaderSize> raw{};

  std::string name() const;
  void set_name(std::string_view n);

  std::uint32_t virtual_size() const { return read_u32le(view(), 8); }
  std::uint32_t virtual_address() const { return read_u32le(view(), 12); }
  std::uint32_t raw_size() const { return read_u32le(view(), 16); }
  std::uint32_t raw_offset() const { return read_u32le(view(), 20); }
  std::uint32_t characteristics() const { return read_u32le(view(), 36); }
  bool executable() const { return (characteristics() & kScnMemExecute) != 0; }

  void set_virtual_size(std::uint32_t v) { write_u32le(span(), 8, v); }
  void set_virtual_address(std::uint32_t v) { write_u32le(span(), 12, v); }
  void set_raw_size(std::uint32_t v) { write_u32le(span(), 16, v); }
  void set_raw_offset(std::uint32_t v) { write_u32le(span(), 20, v); }
  void set_characteristics(std::uint32_t v) { write_u32le(span(), 36, v); }

  ByteView view() const { return ByteView(raw.data(), raw.size()); }
  std::span<std::uint8_t> span() { return std::span<std::uint8_t>(raw.data(), raw.size()); }
};

struct Section {
  SectionHeader header;
  Bytes raw;       // exactly header.raw_size() bytes of file content
  Bytes trailing;  // unowned gap up to the next raw region (normally empty)

  // Loader-meaningful content length; bytes past this are slack.
  std::size_t content_size() const {
    return std::min<std::size_t>(header.virtual_size(), raw.size());
  }
};

enum class SlackOrigin { inter_section, header_gap };

struct SlackRegion {
  std::uint64_t file_offset = 0;
  std::uint64_t length = 0;
  SlackOrigin origin = SlackOrigin::inter_section;
};

// Half-open file-offset range [begin, end).
struct ByteRange {
  std::uint64_t begin = 0;
  std::uint64_t end = 0;
  std::uint64_t length() const { return end - begin; }
};

enum class DosVariant { partial, full, extend };

// Losslessly re-serializable model of a PE image. Blocks are stored in file
// order; offsets are derived from block sizes, never stored twice.
struct PEFile {
  DosHeader dos;
  Bytes dos_stub;  // [64, parsed e_lfanew)
  Bytes dos_gap;   // inserted by grow_dos_gap, sits between stub and signature
  CoffHeader coff;
  OptionalHeader optional;
  std::vector<Section> sections;
  Bytes header_gap;  // between section table end and the first raw region
  Bytes overlay;
  // Set by structural edits; serialize() then recomputes raw offsets,
  // size_of_image and size_of_headers instead of preserving parsed values.
  bool layout_dirty = false;

  std::uint32_t pe_offset() const {
    return static_cast<std::uint32_t>(kDosHeaderSize + dos_stub.size() + dos_gap.size());
  }
};

// File offsets of every block in the serialized image.
struct Layout {
  std::uint64_t signature_offset = 0;
  std::uint64_t coff_offset = 0;
  std::uint64_t optional_offset = 0;
  std::uint64_t table_offset = 0;
  std::uint64_t header_zone_end = 0;  // end of section table
  std::uint64_t header_gap_offset = 0;
  std::vector<std::uint64_t> section_raw_offsets;
  std::uint64_t overlay_offset = 0;
  std::uint64_t total_size = 0;
};

struct ParseOptions {
  std::size_t max_file_size = kDefaultMaxFileSize;
};

PEFile parse(ByteView bytes, const ParseOptions& opts = {});
Bytes serialize(const PEFile& pe);
Layout layout_of(const PEFile& pe);

// Loader-ignored regions that can be overwritten with arbitrary bytes
// without disturbing section content; sorted by offset, non-overlapping.
std::vector<SlackRegion> slack_regions(const PEFile& pe);

// Editable DOS-zone byte ranges. The MZ magic and the e_lfanew field are
// never included. partial ⊆ full ⊆ extend.
std::vector<ByteRange> dos_region(const PEFile& pe, DosVariant variant);

// Inserts k bytes between the DOS stub and the PE signature, shifting raw
// data up with file-alignment preserved. Virtual layout is untouched.
PEFile grow_dos_gap(const PEFile& pe, std::uint64_t k);

struct Finding {
  enum class Severity { info, warn, error };
  Severity severity = Severity::info;
  std::uint64_t offset = 0;
  std::string message;
};

std::vector<Finding> validate(const PEFile& pe);
std::string format_findings(const std::vector<Finding>& findings);

}  // namespace peadv::pe
