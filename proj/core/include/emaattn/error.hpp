#pragma once

#include <stdexcept>
#include <string>

namespace emaattn {

enum class Errc {
  // ingestion / dataset
  malformed_row,
  inconsistent_feature_count,
  empty_dataset,
  cap_too_small,
  degenerate_split,
  unknown_cluster,
  duplicate_id,
  invalid_k,
  empty_cluster,
  missing_id,
  unknown_id,
  alignment_error,
  io_error,
  // generator
  spec_cluster_mismatch,
  k_too_large,
  // numeric kernel / model
  all_masked_row,
  shape_mismatch,
  length_mismatch,
  non_finite_loss,
  mask_too_sparse,
  single_class_input,
  tiny_cluster,
  // explanation
  too_few_points,
  no_valid_rows,
  bad_feature_index,
  empty_artifact,
  // configuration
  invalid_argument,
  config_error,
  checkpoint_error,
};

// Coarse grouping used for CLI exit codes.
enum class ErrorCategory { config, data, numeric };

const char* to_string(Errc code) noexcept;
ErrorCategory category_of(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what);

  Errc code() const noexcept { return code_; }
  // The text given at construction, without the code prefix that what() adds.
  const std::string& message() const noexcept { return message_; }
  ErrorCategory category() const noexcept { return category_of(code_); }

 private:
  Errc code_;
  std::string message_;
};

}  // namespace emaattn
