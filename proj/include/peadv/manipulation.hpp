#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "peadv/label.hpp"
#include "peadv/pe_format.hpp"
#include "peadv/rng.hpp"

namespace peadv::manip {

// Content harvested from opposite-class binaries, injected by the attacks.
struct DonorBlock {
  pe::Bytes content;
  Label source_class = Label::benign;
  std::string section_name;
};

struct DonorPool {
  std::vector<DonorBlock> blocks;
  Label source_class = Label::benign;
  std::uint64_t rng_seed = 0;
};

enum class ActionKind { append_overlay, add_section, rename_section, fill_slack, perturb_dos };

inline constexpr std::size_t kActionKindCount = 5;
const char* action_kind_name(ActionKind k);

inline constexpr std::size_t kMaxOverlayBlock = 64 * 1024;  // per-action append cap
inline constexpr std::uint32_t kDefaultSectionCharacteristics =
    pe::kScnCntInitializedData | pe::kScnMemRead;

struct AppendOverlayPayload {
  pe::Bytes content;
};

struct AddSectionPayload {
  std::string name;
  pe::Bytes content;
  std::uint32_t characteristics = kDefaultSectionCharacteristics;
};

struct RenameSectionPayload {
  std::size_t index = 0;
  std::string name;
};

struct FillSlackPayload {
  std::uint64_t offset = 0;  // file offset inside a slack region
  pe::Bytes content;
};

struct PerturbDosPayload {
  std::vector<pe::ByteRange> ranges;  // must lie inside dos_region(extend)
  pe::Bytes replacement;              // ranges filled consecutively
};

struct Action {
  ActionKind kind = ActionKind::append_overlay;
  std::variant<AppendOverlayPayload, AddSectionPayload, RenameSectionPayload, FillSlackPayload,
               PerturbDosPayload>
      payload;

  // Total content bytes this action carries.
  std::uint64_t payload_bytes() const;
  std::string describe() const;
};

// Every non-empty section's content (virtual_size-truncated), file order.
DonorPool harvest_sections(const std::vector<pe::PEFile>& corpus, Label source_class);

// Applies one functionality-preserving action; returns a new file. Existing
// section virtual addresses, entry point and content below virtual_size are
// never modified.
pe::PEFile apply(const Action& action, const pe::PEFile& pe);

// Uniform over the action kinds applicable to this file; content-bearing
// kinds draw from the pool.
Action sample_action(const DonorPool& pool, const pe::PEFile& pe, Rng& rng);
Action sample_action_of_kind(ActionKind kind, const DonorPool& pool, const pe::PEFile& pe, Rng& rng);
std::vector<ActionKind> applicable_kinds(const pe::PEFile& pe);

struct PerturbationSummary {
  std::uint64_t bytes_changed = 0;  // differing bytes over the common prefix
  std::uint64_t bytes_added = 0;
  std::uint64_t bytes_removed = 0;
  std::uint64_t changed_regions = 0;  // contiguous differing runs
  bool zero_perturbation = false;

  std::uint64_t total() const { return bytes_changed + bytes_added + bytes_removed; }
};

PerturbationSummary diff(const pe::PEFile& original, const pe::PEFile& modified);
PerturbationSummary diff_bytes(pe::ByteView original, pe::ByteView modified);

// Length-prefixed binary container with a sidecar text index.
void save_pool(const DonorPool& pool, const std::filesystem::path& path);
DonorPool load_pool(const std::filesystem::path& path);

}  // namespace peadv::manip
