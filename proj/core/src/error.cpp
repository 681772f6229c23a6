#include "emaattn/error.hpp"

namespace emaattn {

const char* to_string(Errc code) noexcept {
  switch (code) {
    case Errc::malformed_row: return "MalformedRow";
    case Errc::inconsistent_feature_count: return "InconsistentFeatureCount";
    case Errc::empty_dataset: return "EmptyDataset";
    case Errc::cap_too_small: return "CapTooSmall";
    case Errc::degenerate_split: return "DegenerateSplit";
    case Errc::unknown_cluster: return "UnknownCluster";
    case Errc::duplicate_id: return "DuplicateId";
    case Errc::invalid_k: return "InvalidK";
    case Errc::empty_cluster: return "EmptyCluster";
    case Errc::missing_id: return "MissingId";
    case Errc::unknown_id: return "UnknownId";
    case Errc::alignment_error: return "AlignmentError";
    case Errc::io_error: return "IoError";
    case Errc::spec_cluster_mismatch: return "SpecClusterMismatch";
    case Errc::k_too_large: return "KTooLarge";
    case Errc::all_masked_row: return "AllMaskedRow";
    case Errc::shape_mismatch: return "ShapeMismatch";
    case Errc::length_mismatch: return "LengthMismatch";
    case Errc::non_finite_loss: return "NonFiniteLoss";
    case Errc::mask_too_sparse: return "MaskTooSparse";
    case Errc::single_class_input: return "SingleClassInput";
    case Errc::tiny_cluster: return "TinyCluster";
    case Errc::too_few_points: return "TooFewPoints";
    case Errc::no_valid_rows: return "NoValidRows";
    case Errc::bad_feature_index: return "BadFeatureIndex";
    case Errc::empty_artifact: return "EmptyArtifact";
    case Errc::invalid_argument: return "InvalidArgument";
    case Errc::config_error: return "ConfigError";
    case Errc::checkpoint_error: return "CheckpointError";
  }
  return "Unknown";
}

ErrorCategory category_of(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_argument:
    case Errc::config_error:
      return ErrorCategory::config;
    case Errc::all_masked_row:
    case Errc::shape_mismatch:
    case Errc::length_mismatch:
    case Errc::non_finite_loss:
      return ErrorCategory::numeric;
    default:
      return ErrorCategory::data;
  }
}

Error::Error(Errc code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), message_(what) {}

}  // namespace emaattn
