#include "peadv/manipulation.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include "peadv/sha256.hpp"

namespace peadv::manip {

namespace {

const char* kCommonNames[] = {".text", ".rdata", ".data", ".reloc", ".rsrc", ".idata", ".pdata", ".tls"};

std::string pick_name(Rng& rng) {
  if (rng.next_double() < 0.75) {
    return kCommonNames[rng.index(sizeof(kCommonNames) / sizeof(kCommonNames[0]))];
  }
  std::string n = ".";
  for (int i = 0; i < 7; ++i) n.push_back(static_cast<char>('a' + rng.below(26)));
  return n;
}

pe::Bytes pool_slice(const DonorPool& pool, Rng& rng, std::size_t cap) {
  const DonorBlock& b = pool.blocks[rng.index(pool.blocks.size())];
  const std::size_t len = std::min(b.content.size(), cap);
  return pe::Bytes(b.content.begin(), b.content.begin() + static_cast<std::ptrdiff_t>(len));
}

// Writes `content` cyclically across the given ranges of the DOS zone.
pe::Bytes cycle_fill(const pe::Bytes& content, std::uint64_t total) {
  pe::Bytes out;
  out.reserve(total);
  for (std::uint64_t i = 0; i < total; ++i) out.push_back(content[i % content.size()]);
  return out;
}

bool range_covered(const pe::ByteRange& r, const std::vector<pe::ByteRange>& allowed) {
  for (const pe::ByteRange& a : allowed) {
    if (r.begin >= a.begin && r.end <= a.end) return true;
  }
  return false;
}

pe::PEFile apply_add_section(const AddSectionPayload& p, const pe::PEFile& pe) {
  if (p.content.empty()) throw std::invalid_argument("AddSection: empty content");
  if (pe.sections.size() >= 0xFFFF) raise(Errc::inapplicable_action, "section table full");

  pe::PEFile out = pe;
  const std::uint64_t fa = std::max<std::uint64_t>(out.optional.file_alignment(), 1);
  const std::uint64_t sa = std::max<std::uint64_t>(out.optional.section_alignment(), 1);

  // Make room for the new header: eat the front of the header gap when it is
  // wide enough, otherwise re-pad the gap to the next alignment boundary.
  if (out.header_gap.size() >= pe::kSectionHeaderSize) {
    out.header_gap.erase(out.header_gap.begin(),
                         out.header_gap.begin() + static_cast<std::ptrdiff_t>(pe::kSectionHeaderSize));
  } else {
    const pe::Layout l = pe::layout_of(out);
    const std::uint64_t new_zone_end = l.header_zone_end + pe::kSectionHeaderSize;
    out.header_gap.assign(static_cast<std::size_t>(align_up(new_zone_end, fa) - new_zone_end), 0);
  }

  // Raw data goes after the last raw region, aligned; the pad lives in the
  // preceding block so offsets stay derivable from block sizes.
  const pe::Layout l2 = pe::layout_of(out);
  const std::uint64_t pad = align_up(l2.overlay_offset, fa) - l2.overlay_offset;
  if (pad > 0) {
    bool padded = false;
    for (auto it = out.sections.rbegin(); it != out.sections.rend(); ++it) {
      if (!it->raw.empty()) {
        it->trailing.insert(it->trailing.end(), static_cast<std::size_t>(pad), 0);
        padded = true;
        break;
      }
    }
    if (!padded) out.header_gap.insert(out.header_gap.end(), static_cast<std::size_t>(pad), 0);
  }
  const std::uint64_t raw_offset = l2.overlay_offset + pad;
  const std::uint64_t raw_size = align_up(p.content.size(), fa);
  if (raw_offset + raw_size > std::numeric_limits<std::uint32_t>::max())
    raise(Errc::layout_conflict, "new section exceeds 32-bit file offsets");

  std::uint64_t va_end = 0;
  for (const pe::Section& s : out.sections) {
    const std::uint64_t span = std::max<std::uint64_t>(s.header.virtual_size(), s.raw.size());
    va_end = std::max(va_end, s.header.virtual_address() + std::max<std::uint64_t>(span, 1));
  }
  if (va_end == 0) va_end = std::max<std::uint64_t>(out.optional.size_of_headers(), sa);
  const std::uint64_t va = align_up(va_end, sa);
  if (va + raw_size > std::numeric_limits<std::uint32_t>::max())
    raise(Errc::layout_conflict, "new section exceeds 32-bit virtual addresses");

  pe::Section sec;
  sec.header.set_name(p.name);
  sec.header.set_virtual_size(static_cast<std::uint32_t>(p.content.size()));
  sec.header.set_virtual_address(static_cast<std::uint32_t>(va));
  sec.header.set_raw_size(static_cast<std::uint32_t>(raw_size));
  sec.header.set_raw_offset(static_cast<std::uint32_t>(raw_offset));
  sec.header.set_characteristics(p.characteristics);
  sec.raw = p.content;
  sec.raw.resize(static_cast<std::size_t>(raw_size), 0);
  out.sections.push_back(std::move(sec));
  out.layout_dirty = true;
  return out;
}

pe::PEFile apply_fill_slack(const FillSlackPayload& p, const pe::PEFile& pe) {
  if (p.content.empty()) throw std::invalid_argument("FillSlack: empty content");
  const std::uint64_t begin = p.offset;
  const std::uint64_t end = begin + p.content.size();

  const pe::Layout l = pe::layout_of(pe);
  pe::PEFile out = pe;
  // Header gap target
  const std::uint64_t gap_begin = l.header_gap_offset;
  if (begin >= gap_begin && end <= gap_begin + pe.header_gap.size()) {
    std::copy(p.content.begin(), p.content.end(),
              out.header_gap.begin() + static_cast<std::ptrdiff_t>(begin - gap_begin));
    return out;
  }
  // Section slack target
  for (std::size_t i = 0; i < pe.sections.size(); ++i) {
    const pe::Section& s = pe.sections[i];
    const std::uint64_t slack_begin = l.section_raw_offsets[i] + s.content_size();
    const std::uint64_t slack_end = l.section_raw_offsets[i] + s.raw.size();
    if (begin >= slack_begin && end <= slack_end) {
      std::copy(p.content.begin(), p.content.end(),
                out.sections[i].raw.begin() + static_cast<std::ptrdiff_t>(begin - l.section_raw_offsets[i]));
      return out;
    }
  }
  raise(Errc::inapplicable_action, "FillSlack target is not inside a slack region");
}

pe::PEFile apply_perturb_dos(const PerturbDosPayload& p, const pe::PEFile& pe) {
  const auto allowed = pe::dos_region(pe, pe::DosVariant::extend);
  std::uint64_t total = 0;
  for (const pe::ByteRange& r : p.ranges) {
    if (r.end <= r.begin || !range_covered(r, allowed))
      raise(Errc::inapplicable_action, "PerturbDos range outside the editable DOS zone");
    total += r.length();
  }
  if (total != p.replacement.size())
    throw std::invalid_argument("PerturbDos: replacement length does not match ranges");

  pe::PEFile out = pe;
  std::size_t src = 0;
  const std::uint64_t stub_end = pe::kDosHeaderSize + out.dos_stub.size();
  for (const pe::ByteRange& r : p.ranges) {
    for (std::uint64_t off = r.begin; off < r.end; ++off, ++src) {
      const std::uint8_t v = p.replacement[src];
      if (off < pe::kDosReservedEnd) {
        out.dos.raw[static_cast<std::size_t>(off)] = v;
      } else if (off >= pe::kDosHeaderSize && off < stub_end) {
        out.dos_stub[static_cast<std::size_t>(off - pe::kDosHeaderSize)] = v;
      } else {
        out.dos_gap[static_cast<std::size_t>(off - stub_end)] = v;
      }
    }
  }
  return out;
}

}  // namespace

const char* action_kind_name(ActionKind k) {
  switch (k) {
    case ActionKind::append_overlay: return "append_overlay";
    case ActionKind::add_section: return "add_section";
    case ActionKind::rename_section: return "rename_section";
    case ActionKind::fill_slack: return "fill_slack";
    case ActionKind::perturb_dos: return "perturb_dos";
  }
  return "unknown";
}

std::uint64_t Action::payload_bytes() const {
  switch (kind) {
    case ActionKind::append_overlay: return std::get<AppendOverlayPayload>(payload).content.size();
    case ActionKind::add_section: return std::get<AddSectionPayload>(payload).content.size();
    case ActionKind::rename_section: return 0;
    case ActionKind::fill_slack: return std::get<FillSlackPayload>(payload).content.size();
    case ActionKind::perturb_dos: return std::get<PerturbDosPayload>(payload).replacement.size();
  }
  return 0;
}

std::string Action::describe() const {
  std::string d = action_kind_name(kind);
  switch (kind) {
    case ActionKind::append_overlay:
      d += " bytes=" + std::to_string(payload_bytes());
      break;
    case ActionKind::add_section:
      d += " name=" + std::get<AddSectionPayload>(payload).name + " bytes=" + std::to_string(payload_bytes());
      break;
    case ActionKind::rename_section: {
      const auto& p = std::get<RenameSectionPayload>(payload);
      d += " index=" + std::to_string(p.index) + " name=" + p.name;
      break;
    }
    case ActionKind::fill_slack: {
      const auto& p = std::get<FillSlackPayload>(payload);
      d += " offset=" + std::to_string(p.offset) + " bytes=" + std::to_string(p.content.size());
      break;
    }
    case ActionKind::perturb_dos:
      d += " bytes=" + std::to_string(payload_bytes());
      break;
  }
  return d;
}

DonorPool harvest_sections(const std::vector<pe::PEFile>& corpus, Label source_class) {
  DonorPool pool;
  pool.source_class = source_class;
  for (const pe::PEFile& f : corpus) {
    for (const pe::Section& s : f.sections) {
      const std::size_t content = s.content_size();
      if (content == 0) continue;
      DonorBlock b;
      b.content.assign(s.raw.begin(), s.raw.begin() + static_cast<std::ptrdiff_t>(content));
      b.source_class = source_class;
      b.section_name = s.header.name();
      pool.blocks.push_back(std::move(b));
    }
  }
  if (pool.blocks.empty()) raise(Errc::empty_pool, "no non-empty sections in donor corpus");
  return pool;
}

pe::PEFile apply(const Action& action, const pe::PEFile& pe) {
  switch (action.kind) {
    case ActionKind::append_overlay: {
      const auto& p = std::get<AppendOverlayPayload>(action.payload);
      if (p.content.empty()) throw std::invalid_argument("AppendOverlay: empty content");
      if (p.content.size() > kMaxOverlayBlock)
        raise(Errc::inapplicable_action, "AppendOverlay content exceeds per-action cap");
      pe::PEFile out = pe;
      out.overlay.insert(out.overlay.end(), p.content.begin(), p.content.end());
      return out;
    }
    case ActionKind::add_section:
      return apply_add_section(std::get<AddSectionPayload>(action.payload), pe);
    case ActionKind::rename_section: {
      const auto& p = std::get<RenameSectionPayload>(action.payload);
      if (p.index >= pe.sections.size()) raise(Errc::inapplicable_action, "RenameSection index out of range");
      pe::PEFile out = pe;
      out.sections[p.index].header.set_name(p.name);
      return out;
    }
    case ActionKind::fill_slack:
      return apply_fill_slack(std::get<FillSlackPayload>(action.payload), pe);
    case ActionKind::perturb_dos:
      return apply_perturb_dos(std::get<PerturbDosPayload>(action.payload), pe);
  }
  throw std::logic_error("unhandled action kind");
}

std::vector<ActionKind> applicable_kinds(const pe::PEFile& pe) {
  std::vector<ActionKind> kinds;
  kinds.push_back(ActionKind::append_overlay);
  if (pe.sections.size() < 0xFFFF) kinds.push_back(ActionKind::add_section);
  if (!pe.sections.empty()) kinds.push_back(ActionKind::rename_section);
  if (!pe::slack_regions(pe).empty()) kinds.push_back(ActionKind::fill_slack);
  kinds.push_back(ActionKind::perturb_dos);
  return kinds;
}

Action sample_action_of_kind(ActionKind kind, const DonorPool& pool, const pe::PEFile& pe, Rng& rng) {
  if (pool.blocks.empty()) raise(Errc::empty_pool, "cannot sample actions from an empty pool");
  Action a;
  a.kind = kind;
  switch (kind) {
    case ActionKind::append_overlay:
      a.payload = AppendOverlayPayload{pool_slice(pool, rng, kMaxOverlayBlock)};
      break;
    case ActionKind::add_section: {
      AddSectionPayload p;
      p.name = pick_name(rng);
      p.content = pool_slice(pool, rng, kMaxOverlayBlock);
      a.payload = std::move(p);
      break;
    }
    case ActionKind::rename_section: {
      if (pe.sections.empty()) raise(Errc::inapplicable_action, "no sections to rename");
      RenameSectionPayload p;
      p.index = rng.index(pe.sections.size());
      p.name = pick_name(rng);
      a.payload = std::move(p);
      break;
    }
    case ActionKind::fill_slack: {
      const auto regions = pe::slack_regions(pe);
      if (regions.empty()) raise(Errc::inapplicable_action, "file has no slack");
      const pe::SlackRegion& r = regions[rng.index(regions.size())];
      FillSlackPayload p;
      p.offset = r.file_offset;
      p.content = pool_slice(pool, rng, static_cast<std::size_t>(r.length));
      a.payload = std::move(p);
      break;
    }
    case ActionKind::perturb_dos: {
      PerturbDosPayload p;
      p.ranges = pe::dos_region(pe, pe::DosVariant::full);
      std::uint64_t total = 0;
      for (const pe::ByteRange& r : p.ranges) total += r.length();
      p.replacement = cycle_fill(pool.blocks[rng.index(pool.blocks.size())].content, total);
      a.payload = std::move(p);
      break;
    }
  }
  return a;
}

Action sample_action(const DonorPool& pool, const pe::PEFile& pe, Rng& rng) {
  const auto kinds = applicable_kinds(pe);
  if (kinds.empty()) raise(Errc::inapplicable_action, "no applicable action kinds");
  return sample_action_of_kind(kinds[rng.index(kinds.size())], pool, pe, rng);
}

PerturbationSummary diff_bytes(pe::ByteView a, pe::ByteView b) {
  PerturbationSummary s;
  const std::size_t common = std::min(a.size(), b.size());
  bool in_run = false;
  for (std::size_t i = 0; i < common; ++i) {
    if (a[i] != b[i]) {
      ++s.bytes_changed;
      if (!in_run) {
        ++s.changed_regions;
        in_run = true;
      }
    } else {
      in_run = false;
    }
  }
  if (b.size() > a.size()) {
    s.bytes_added = b.size() - a.size();
    ++s.changed_regions;
  } else if (a.size() > b.size()) {
    s.bytes_removed = a.size() - b.size();
    ++s.changed_regions;
  }
  s.zero_perturbation = s.total() == 0;
  if (s.zero_perturbation) s.changed_regions = 0;
  return s;
}

PerturbationSummary diff(const pe::PEFile& original, const pe::PEFile& modified) {
  const pe::Bytes a = pe::serialize(original);
  const pe::Bytes b = pe::serialize(modified);
  return diff_bytes(a, b);
}

void save_pool(const DonorPool& pool, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(Errc::io_error, "cannot write pool " + path.string());
  pe::Bytes buf;
  buf.push_back('A');
  buf.push_back('D');
  buf.push_back('P');
  buf.push_back('1');
  buf.push_back(pool.source_class == Label::benign ? 0 : 1);
  append_u64le(buf, pool.rng_seed);
  append_u32le(buf, static_cast<std::uint32_t>(pool.blocks.size()));
  for (const DonorBlock& b : pool.blocks) {
    append_u32le(buf, static_cast<std::uint32_t>(b.content.size()));
    buf.insert(buf.end(), b.content.begin(), b.content.end());
    buf.push_back(static_cast<std::uint8_t>(std::min<std::size_t>(b.section_name.size(), 255)));
    for (std::size_t i = 0; i < b.section_name.size() && i < 255; ++i)
      buf.push_back(static_cast<std::uint8_t>(b.section_name[i]));
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));

  std::ofstream idx(path.string() + ".idx", std::ios::trunc);
  idx << "block\tclass\tsection\tbytes\n";
  for (std::size_t i = 0; i < pool.blocks.size(); ++i) {
    idx << i << '\t' << label_name(pool.blocks[i].source_class) << '\t' << pool.blocks[i].section_name
        << '\t' << pool.blocks[i].content.size() << '\n';
  }
}

DonorPool load_pool(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::io_error, "cannot read pool " + path.string());
  pe::Bytes buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < 17 || std::memcmp(buf.data(), "ADP1", 4) != 0)
    raise(Errc::io_error, "unrecognized pool container " + path.string());
  DonorPool pool;
  pool.source_class = buf[4] == 0 ? Label::benign : Label::malware;
  pool.rng_seed = read_u64le(buf, 5);
  const std::uint32_t count = read_u32le(buf, 13);
  std::size_t off = 17;
  for (std::uint32_t i = 0; i < count; ++i) {
    if (off + 4 > buf.size()) raise(Errc::io_error, "truncated pool container");
    const std::uint32_t len = read_u32le(buf, off);
    off += 4;
    if (off + len + 1 > buf.size()) raise(Errc::io_error, "truncated pool container");
    DonorBlock b;
    b.source_class = pool.source_class;
    b.content.assign(buf.begin() + static_cast<std::ptrdiff_t>(off),
                     buf.begin() + static_cast<std::ptrdiff_t>(off + len));
    off += len;
    const std::uint8_t name_len = buf[off++];
    if (off + name_len > buf.size()) raise(Errc::io_error, "truncated pool container");
    b.section_name.assign(buf.begin() + static_cast<std::ptrdiff_t>(off),
                          buf.begin() + static_cast<std::ptrdiff_t>(off + name_len));
    off += name_len;
    pool.blocks.push_back(std::move(b));
  }
  return pool;
}

}  // namespace peadv::manip
