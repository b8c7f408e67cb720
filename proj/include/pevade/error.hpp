#pragma once

#include <stdexcept>
#include <string>

namespace pevade {

enum class Errc {
  // pe-core
  bad_dos_magic,
  truncated_file,
  bad_header_offset,
  bad_alignment,
  zero_alignment,
  inconsistent_spec,
  // manipulations
  invalid_input,
  misaligned_amount,
  header_budget_exceeded,
  no_header_room,
  overlap,
  length_mismatch,
  // classifiers
  position_out_of_range,
  degenerate_dataset,
  // attacks
  dimension_mismatch,
  not_differentiable,
  no_editable_bytes,
  budget_too_small,
  no_payloads_found,
  // harness
  io_error,
  config_error,
};

const char* errc_name(Errc c);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message),
        code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace pevade
