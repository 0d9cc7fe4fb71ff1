#include "doctest.h"

#include <algorithm>

#include "peadv/corpus.hpp"
#include "peadv/pe_format.hpp"
#include "peadv/rng.hpp"
#include "pe_builder.hpp"

using namespace peadv;

namespace {

pe::Bytes to_bytes(const testpe::Bytes& b) { return pe::Bytes(b.begin(), b.end()); }

}  // namespace

TEST_CASE("parse rejects malformed inputs with the right error codes") {
  SUBCASE("too short") {
    pe::Bytes b(32, 0);
    CHECK_THROWS_AS(pe::parse(b), Error);
  }
  SUBCASE("missing MZ") {
    pe::Bytes b(128, 0);
    try {
      pe::parse(b);
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::malformed_magic);
    }
  }
  SUBCASE("MZ with pe_offset pointing back into the header") {
    // 64 zero bytes with only the magic set; e_lfanew == 0 is readable but
    // cannot hold a signature that precedes the header.
    pe::Bytes b(64, 0);
    b[0] = 'M';
    b[1] = 'Z';
    try {
      pe::parse(b);
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::bad_signature);
    }
  }
  SUBCASE("pe_offset beyond end of file") {
    pe::Bytes b(64, 0);
    b[0] = 'M';
    b[1] = 'Z';
    b[60] = 0xF0;
    b[61] = 0xFF;
    try {
      pe::parse(b);
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::truncated_file);
    }
  }
  SUBCASE("section table larger than the file") {
    auto spec = testpe::two_section_spec();
    testpe::Bytes raw = testpe::build(spec);
    testpe::put16(raw, 64 + spec.stub_len + 4 + 2, 2000);  // absurd count
    try {
      pe::parse(to_bytes(raw));
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::section_overflow);
    }
  }
  SUBCASE("overlapping raw regions") {
    auto spec = testpe::two_section_spec();
    testpe::Bytes raw = testpe::build(spec);
    // Point section 1's raw data inside section 0's.
    const std::size_t table = 64 + spec.stub_len + 4 + 20 + 224;
    const std::uint32_t sec0_off = raw[table + 20] | raw[table + 21] << 8 | raw[table + 22] << 16 |
                                   static_cast<std::uint32_t>(raw[table + 23]) << 24;
    testpe::put32(raw, table + 40 + 20, sec0_off + 16);
    try {
      pe::parse(to_bytes(raw));
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::section_overflow);
    }
  }
  SUBCASE("file over the configured cap") {
    pe::ParseOptions opts;
    opts.max_file_size = 128;
    pe::Bytes b(256, 0);
    b[0] = 'M';
    b[1] = 'Z';
    try {
      pe::parse(b, opts);
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::file_too_large);
    }
  }
}

TEST_CASE("parse decodes the hand-built image") {
  const auto spec = testpe::two_section_spec();
  const pe::Bytes raw = to_bytes(testpe::build(spec));
  const pe::PEFile f = pe::parse(raw);

  CHECK(f.sections.size() == 2);
  CHECK(f.coff.num_sections() == 2);
  CHECK(f.sections[0].header.name() == ".text");
  CHECK(f.sections[1].header.name() == ".data");
  CHECK(f.optional.entry_point_rva() == spec.entry_rva);
  CHECK(f.optional.file_alignment() == 512);
  CHECK(f.sections[0].raw.size() == 1024);
  CHECK(f.sections[0].content_size() == 700);
  CHECK(f.overlay.size() == 100);
  CHECK(f.pe_offset() == 64 + spec.stub_len);
  CHECK(f.dos_stub.size() == spec.stub_len);

  SUBCASE("roundtrip is byte-exact") { CHECK(pe::serialize(f) == raw); }

  SUBCASE("section content matches the builder slices") {
    CHECK(std::all_of(f.sections[0].raw.begin(), f.sections[0].raw.end(),
                      [](std::uint8_t b) { return b == 0x41; }));
    CHECK(std::all_of(f.overlay.begin(), f.overlay.end(), [](std::uint8_t b) { return b == 0xEE; }));
  }
}

TEST_CASE("roundtrip holds over synthesized corpora") {
  auto benign = corpus::default_benign_profile();
  auto malware = corpus::default_malware_profile();
  for (std::uint64_t i = 0; i < 50; ++i) {
    const pe::Bytes b = corpus::synthesize_pe(i % 2 ? benign : malware, i);
    const pe::PEFile f = pe::parse(b);
    CHECK(pe::serialize(f) == b);
  }
}

TEST_CASE("slack regions") {
  SUBCASE("single section virtual 10 raw 512 exposes 502 slack bytes") {
    testpe::BuildSpec spec;
    testpe::SectionSpec s;
    s.virtual_size = 10;
    s.raw_size = 512;
    s.virtual_address = 0x1000;
    spec.sections = {s};
    spec.entry_rva = 0x1000;
    const pe::PEFile f = pe::parse(to_bytes(testpe::build(spec)));
    const auto regions = pe::slack_regions(f);
    std::uint64_t inter = 0;
    for (const auto& r : regions)
      if (r.origin == pe::SlackOrigin::inter_section) inter += r.length;
    CHECK(inter == 502);  // 512 - 10 by construction
  }
  SUBCASE("virtual_size == raw_size sections yield no inter-section slack") {
    testpe::BuildSpec spec;
    testpe::SectionSpec s;
    s.virtual_size = 512;
    s.raw_size = 512;
    s.virtual_address = 0x1000;
    spec.sections = {s};
    spec.entry_rva = 0x1000;
    const pe::PEFile f = pe::parse(to_bytes(testpe::build(spec)));
    for (const auto& r : pe::slack_regions(f)) CHECK(r.origin == pe::SlackOrigin::header_gap);
  }
  SUBCASE("regions are ordered and disjoint") {
    const pe::Bytes b = corpus::synthesize_pe(corpus::default_benign_profile(), 7);
    const pe::PEFile f = pe::parse(b);
    const auto regions = pe::slack_regions(f);
    for (std::size_t i = 1; i < regions.size(); ++i) {
      CHECK(regions[i - 1].file_offset + regions[i - 1].length <= regions[i].file_offset);
    }
  }
  SUBCASE("overwriting slack keeps the roundtrip and the section content") {
    const pe::Bytes b = corpus::synthesize_pe(corpus::default_malware_profile(), 11);
    const pe::PEFile f = pe::parse(b);
    pe::Bytes edited = b;
    Rng rng(99);
    for (const auto& r : pe::slack_regions(f)) {
      for (std::uint64_t i = 0; i < r.length; ++i)
        edited[static_cast<std::size_t>(r.file_offset + i)] = rng.next_byte();
    }
    const pe::PEFile g = pe::parse(edited);
    CHECK(pe::serialize(g) == edited);
    REQUIRE(g.sections.size() == f.sections.size());
    for (std::size_t i = 0; i < f.sections.size(); ++i) {
      const std::size_t n = f.sections[i].content_size();
      CHECK(pe::Bytes(f.sections[i].raw.begin(), f.sections[i].raw.begin() + static_cast<std::ptrdiff_t>(n)) ==
            pe::Bytes(g.sections[i].raw.begin(), g.sections[i].raw.begin() + static_cast<std::ptrdiff_t>(n)));
    }
  }
}

TEST_CASE("dos_region variants") {
  const pe::Bytes b = corpus::synthesize_pe(corpus::default_benign_profile(), 3);
  const pe::PEFile f = pe::parse(b);

  const auto partial = pe::dos_region(f, pe::DosVariant::partial);
  REQUIRE(partial.size() == 1);
  CHECK(partial[0].begin == 2);
  CHECK(partial[0].end == 60);  // e_lfanew sits at offset 60

  const auto full = pe::dos_region(f, pe::DosVariant::full);
  REQUIRE(full.size() == 2);
  CHECK(full[1].begin == 64);
  CHECK(full[1].end == 64 + f.dos_stub.size());

  SUBCASE("zero-length stub collapses the stub range") {
    testpe::BuildSpec spec;
    spec.stub_len = 0;
    testpe::SectionSpec s;
    s.virtual_size = 512;
    s.raw_size = 512;
    s.virtual_address = 0x1000;
    spec.sections = {s};
    spec.entry_rva = 0x1000;
    const pe::PEFile g = pe::parse(to_bytes(testpe::build(spec)));
    CHECK(pe::dos_region(g, pe::DosVariant::full).size() == 1);
  }

  SUBCASE("partial subset of full subset of extend") {
    const pe::PEFile g = pe::grow_dos_gap(f, 256);
    const auto pr = pe::dos_region(g, pe::DosVariant::partial);
    const auto fr = pe::dos_region(g, pe::DosVariant::full);
    const auto er = pe::dos_region(g, pe::DosVariant::extend);
    auto total = [](const std::vector<pe::ByteRange>& v) {
      std::uint64_t t = 0;
      for (const auto& r : v) t += r.length();
      return t;
    };
    CHECK(total(pr) <= total(fr));
    CHECK(total(fr) <= total(er));
    CHECK(total(er) == total(fr) + 256);  // grown capacity is exactly k
  }
}

TEST_CASE("grow_dos_gap") {
  const pe::Bytes b = corpus::synthesize_pe(corpus::default_benign_profile(), 21);
  const pe::PEFile f = pe::parse(b);

  SUBCASE("k = 0 is a precondition violation") {
    CHECK_THROWS_AS(pe::grow_dos_gap(f, 0), std::invalid_argument);
  }

  SUBCASE("k = 512 shifts the signature and reparses") {
    const pe::PEFile g = pe::grow_dos_gap(f, 512);
    CHECK(g.pe_offset() == f.pe_offset() + 512);
    const pe::Bytes gb = pe::serialize(g);
    const pe::PEFile h = pe::parse(gb);
    CHECK(h.pe_offset() == f.pe_offset() + 512);
    CHECK(h.optional.entry_point_rva() == f.optional.entry_point_rva());
    REQUIRE(h.sections.size() == f.sections.size());
    for (std::size_t i = 0; i < f.sections.size(); ++i) {
      CHECK(h.sections[i].header.virtual_address() == f.sections[i].header.virtual_address());
      CHECK(h.sections[i].header.name() == f.sections[i].header.name());
      CHECK(h.sections[i].raw == f.sections[i].raw);
    }
  }

  SUBCASE("unaligned k keeps raw offsets file-aligned") {
    const pe::PEFile g = pe::grow_dos_gap(f, 100);
    const pe::PEFile h = pe::parse(pe::serialize(g));
    const std::uint32_t fa = h.optional.file_alignment();
    for (const pe::Section& s : h.sections) {
      if (!s.raw.empty()) CHECK(s.header.raw_offset() % fa == 0);
    }
  }
}

TEST_CASE("validate flags odd alignment") {
  const pe::Bytes b = corpus::synthesize_pe(corpus::default_benign_profile(), 5);
  pe::PEFile f = pe::parse(b);
  CHECK(pe::validate(f).empty());

  write_u32le(f.optional.span(), 36, 100);  // not a power of two
  const auto findings = pe::validate(f);
  CHECK(!findings.empty());
  const std::string text = pe::format_findings(findings);
  CHECK(text.find("file_alignment") != std::string::npos);
  CHECK(text.find('\t') != std::string::npos);
}
