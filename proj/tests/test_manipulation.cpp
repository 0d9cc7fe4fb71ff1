#include "doctest.h"

#include <filesystem>
#include <set>

#include "peadv/corpus.hpp"
#include "peadv/manipulation.hpp"
#include "peadv/sha256.hpp"
#include "pe_builder.hpp"

using namespace peadv;

namespace {

std::vector<pe::PEFile> synth_corpus(const corpus::CorpusProfile& profile, std::size_t n,
                                     std::uint64_t seed0) {
  std::vector<pe::PEFile> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(pe::parse(corpus::synthesize_pe(profile, seed0 + i)));
  return out;
}

// Structural preservation checks shared by several tests.
void check_preserved(const pe::PEFile& before, const pe::PEFile& after) {
  const pe::Bytes after_bytes = pe::serialize(after);
  const pe::PEFile reparsed = pe::parse(after_bytes);
  CHECK(reparsed.optional.entry_point_rva() == before.optional.entry_point_rva());
  REQUIRE(reparsed.sections.size() >= before.sections.size());
  for (std::size_t i = 0; i < before.sections.size(); ++i) {
    CHECK(reparsed.sections[i].header.virtual_address() == before.sections[i].header.virtual_address());
    const std::size_t n = before.sections[i].content_size();
    const pe::Bytes a(before.sections[i].raw.begin(), before.sections[i].raw.begin() + static_cast<std::ptrdiff_t>(n));
    const pe::Bytes b(reparsed.sections[i].raw.begin(), reparsed.sections[i].raw.begin() + static_cast<std::ptrdiff_t>(n));
    CHECK(sha256_hex(a) == sha256_hex(b));
  }
}

}  // namespace

TEST_CASE("harvest_sections") {
  SUBCASE("block count matches non-empty sections") {
    testpe::BuildSpec spec3;
    spec3.sections = {{".a", 100, 512, 0x1000, 0x60000020, 0x41},
                      {".b", 100, 512, 0x2000, 0xC0000040, 0x42},
                      {".c", 100, 512, 0x3000, 0xC0000040, 0x43}};
    spec3.entry_rva = 0x1000;
    testpe::BuildSpec spec2;
    spec2.sections = {{".d", 100, 512, 0x1000, 0x60000020, 0x44},
                      {".e", 100, 512, 0x2000, 0xC0000040, 0x45}};
    spec2.entry_rva = 0x1000;
    const std::vector<pe::PEFile> corpus = {pe::parse(testpe::build(spec3)), pe::parse(testpe::build(spec2))};
    const manip::DonorPool pool = manip::harvest_sections(corpus, Label::malware);
    CHECK(pool.blocks.size() == 5);
    CHECK(pool.source_class == Label::malware);

    // Content equals the donor's virtual_size-truncated section bytes.
    CHECK(pool.blocks[0].content == pe::Bytes(100, 0x41));
    CHECK(pool.blocks[4].content == pe::Bytes(100, 0x45));
    CHECK(pool.blocks[0].section_name == ".a");
  }

  SUBCASE("all-empty sections give EmptyPool") {
    testpe::BuildSpec spec;
    spec.sections = {{".z", 0, 0, 0x1000, 0x60000020, 0}};
    spec.entry_rva = 0x1000;
    const std::vector<pe::PEFile> corpus = {pe::parse(testpe::build(spec))};
    try {
      manip::harvest_sections(corpus, Label::benign);
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::empty_pool);
    }
  }
}

TEST_CASE("apply") {
  const pe::PEFile f = pe::parse(corpus::synthesize_pe(corpus::default_malware_profile(), 42));

  SUBCASE("AppendOverlay grows the file by exactly the payload") {
    manip::Action a;
    a.kind = manip::ActionKind::append_overlay;
    a.payload = manip::AppendOverlayPayload{pe::Bytes(1024, 0x7A)};
    const pe::PEFile g = manip::apply(a, f);
    const pe::Bytes before = pe::serialize(f);
    const pe::Bytes after = pe::serialize(g);
    CHECK(after.size() == before.size() + 1024);
    CHECK(pe::Bytes(after.begin(), after.begin() + static_cast<std::ptrdiff_t>(before.size())) == before);
    check_preserved(f, g);
  }

  SUBCASE("RenameSection keeps content, changes name") {
    manip::Action a;
    a.kind = manip::ActionKind::rename_section;
    a.payload = manip::RenameSectionPayload{0, ".data"};
    const pe::PEFile g = manip::apply(a, f);
    const pe::PEFile re = pe::parse(pe::serialize(g));
    CHECK(re.sections[0].header.name() == ".data");
    CHECK(sha256_hex(re.sections[0].raw) == sha256_hex(f.sections[0].raw));
    check_preserved(f, g);
  }

  SUBCASE("AddSection appends a parseable section") {
    manip::Action a;
    a.kind = manip::ActionKind::add_section;
    a.payload = manip::AddSectionPayload{".new", pe::Bytes(777, 0x5C), manip::kDefaultSectionCharacteristics};
    const pe::PEFile g = manip::apply(a, f);
    const pe::PEFile re = pe::parse(pe::serialize(g));
    CHECK(re.sections.size() == f.sections.size() + 1);
    CHECK(re.sections.back().header.name() == ".new");
    CHECK(re.sections.back().content_size() == 777);
    check_preserved(f, g);
  }

  SUBCASE("PerturbDos keeps the magic and pe_offset intact") {
    manip::Action a;
    a.kind = manip::ActionKind::perturb_dos;
    manip::PerturbDosPayload p;
    p.ranges = pe::dos_region(f, pe::DosVariant::partial);
    p.replacement = pe::Bytes(58, 0xAB);
    a.payload = std::move(p);
    const pe::PEFile g = manip::apply(a, f);
    const pe::Bytes gb = pe::serialize(g);
    CHECK(gb[0] == 'M');
    CHECK(gb[1] == 'Z');
    const pe::PEFile re = pe::parse(gb);
    CHECK(re.pe_offset() == f.pe_offset());
    check_preserved(f, g);
  }

  SUBCASE("FillSlack writes only into slack") {
    const auto regions = pe::slack_regions(f);
    REQUIRE(!regions.empty());
    manip::Action a;
    a.kind = manip::ActionKind::fill_slack;
    a.payload = manip::FillSlackPayload{regions[0].file_offset,
                                        pe::Bytes(static_cast<std::size_t>(regions[0].length), 0x11)};
    const pe::PEFile g = manip::apply(a, f);
    check_preserved(f, g);
  }

  SUBCASE("FillSlack outside slack is inapplicable") {
    manip::Action a;
    a.kind = manip::ActionKind::fill_slack;
    a.payload = manip::FillSlackPayload{0, pe::Bytes(4, 0)};
    try {
      manip::apply(a, f);
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::inapplicable_action);
    }
  }

  SUBCASE("RenameSection with a bad index is inapplicable") {
    manip::Action a;
    a.kind = manip::ActionKind::rename_section;
    a.payload = manip::RenameSectionPayload{99, ".x"};
    CHECK_THROWS_AS(manip::apply(a, f), Error);
  }
}

TEST_CASE("sample_action") {
  const auto donors = synth_corpus(corpus::default_benign_profile(), 4, 100);
  const manip::DonorPool pool = manip::harvest_sections(donors, Label::benign);
  const pe::PEFile f = pe::parse(corpus::synthesize_pe(corpus::default_malware_profile(), 7));

  SUBCASE("deterministic sequences for a fixed seed") {
    Rng r1(5), r2(5);
    for (int i = 0; i < 20; ++i) {
      const manip::Action a = manip::sample_action(pool, f, r1);
      const manip::Action b = manip::sample_action(pool, f, r2);
      CHECK(a.describe() == b.describe());
    }
  }

  SUBCASE("no slack means no fill_slack") {
    testpe::BuildSpec spec;
    spec.stub_len = 128;  // header zone ends exactly on alignment: gap empty
    testpe::SectionSpec s;
    s.virtual_size = 512;
    s.raw_size = 512;
    s.virtual_address = 0x1000;
    spec.sections = {s};
    spec.entry_rva = 0x1000;
    const pe::PEFile g = pe::parse(testpe::build(spec));
    if (pe::slack_regions(g).empty()) {
      Rng rng(1);
      for (int i = 0; i < 200; ++i)
        CHECK(manip::sample_action(pool, g, rng).kind != manip::ActionKind::fill_slack);
    }
  }

  SUBCASE("every applicable kind appears over many draws") {
    Rng rng(17);
    std::set<manip::ActionKind> seen;
    for (int i = 0; i < 10000; ++i) seen.insert(manip::sample_action(pool, f, rng).kind);
    CHECK(seen.size() == manip::applicable_kinds(f).size());
  }
}

TEST_CASE("composition of random action sequences preserves structure") {
  const auto donors = synth_corpus(corpus::default_benign_profile(), 3, 300);
  const manip::DonorPool pool = manip::harvest_sections(donors, Label::benign);
  Rng rng(2024);
  for (int trial = 0; trial < 6; ++trial) {
    const pe::PEFile original = pe::parse(corpus::synthesize_pe(corpus::default_malware_profile(), 900 + trial));
    pe::PEFile cur = original;
    const int steps = 1 + static_cast<int>(rng.below(50));
    for (int i = 0; i < steps; ++i) {
      const manip::Action a = manip::sample_action(pool, cur, rng);
      cur = manip::apply(a, cur);
    }
    check_preserved(original, cur);
    // determinism of apply: replay produces identical bytes
    const pe::Bytes once = pe::serialize(cur);
    CHECK(once == pe::serialize(cur));
  }
}

TEST_CASE("diff") {
  const pe::PEFile f = pe::parse(corpus::synthesize_pe(corpus::default_benign_profile(), 55));

  SUBCASE("identity is zero perturbation") {
    const auto d = manip::diff(f, f);
    CHECK(d.zero_perturbation);
    CHECK(d.total() == 0);
  }
  SUBCASE("overlay append counts added bytes") {
    manip::Action a;
    a.kind = manip::ActionKind::append_overlay;
    a.payload = manip::AppendOverlayPayload{pe::Bytes(100, 0x9D)};
    const auto d = manip::diff(f, manip::apply(a, f));
    CHECK(d.bytes_added == 100);
    CHECK(d.bytes_changed == 0);
    CHECK(!d.zero_perturbation);
  }
}

TEST_CASE("donor pool container roundtrip") {
  const auto donors = synth_corpus(corpus::default_malware_profile(), 3, 700);
  manip::DonorPool pool = manip::harvest_sections(donors, Label::malware);
  pool.rng_seed = 99;
  const auto path = std::filesystem::temp_directory_path() / "peadv_test_pool.bin";
  manip::save_pool(pool, path);
  const manip::DonorPool loaded = manip::load_pool(path);
  CHECK(loaded.source_class == pool.source_class);
  CHECK(loaded.rng_seed == pool.rng_seed);
  REQUIRE(loaded.blocks.size() == pool.blocks.size());
  for (std::size_t i = 0; i < pool.blocks.size(); ++i) {
    CHECK(loaded.blocks[i].content == pool.blocks[i].content);
    CHECK(loaded.blocks[i].section_name == pool.blocks[i].section_name);
  }
  std::filesystem::remove(path);
  std::filesystem::remove(path.string() + ".idx");
}
