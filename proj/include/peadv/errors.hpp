#pragma once

#include <stdexcept>
#include <string>

namespace peadv {

// Error codes shared across modules. Parse-side codes describe malformed
// input; the rest are domain-level failures surfaced to callers.
enum class Errc {
  malformed_magic,
  truncated_file,
  bad_signature,
  section_overflow,
  layout_conflict,
  file_too_large,
  empty_pool,
  inapplicable_action,
  degenerate_dataset,
  non_finite_loss,
  no_payload_space,
  no_editable_bytes,
  insufficient_aes,
  empty_results,
  no_positives,
  no_negatives,
  single_class,
  config_error,
  io_error,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::malformed_magic: return "MalformedMagic";
    case Errc::truncated_file: return "TruncatedFile";
    case Errc::bad_signature: return "BadSignature";
    case Errc::section_overflow: return "SectionOverflow";
    case Errc::layout_conflict: return "LayoutConflict";
    case Errc::file_too_large: return "FileTooLarge";
    case Errc::empty_pool: return "EmptyPool";
    case Errc::inapplicable_action: return "InapplicableAction";
    case Errc::degenerate_dataset: return "DegenerateDataset";
    case Errc::non_finite_loss: return "NonFiniteLoss";
    case Errc::no_payload_space: return "NoPayloadSpace";
    case Errc::no_editable_bytes: return "NoEditableBytes";
    case Errc::insufficient_aes: return "InsufficientAEs";
    case Errc::empty_results: return "EmptyResults";
    case Errc::no_positives: return "NoPositives";
    case Errc::no_negatives: return "NoNegatives";
    case Errc::single_class: return "SingleClass";
    case Errc::config_error: return "ConfigError";
    case Errc::io_error: return "IoError";
  }
  return "UnknownError";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace peadv
