#include "kdm/errors.hpp"

namespace kdm {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::zero_vector: return "ZeroVector";
    case ErrorCode::dim_mismatch: return "DimMismatch";
    case ErrorCode::shape_mismatch: return "ShapeMismatch";
    case ErrorCode::bad_weights: return "BadWeights";
    case ErrorCode::kernel_mismatch: return "KernelMismatch";
    case ErrorCode::wrong_kernel_kind: return "WrongKernelKind";
    case ErrorCode::label_shape_mismatch: return "LabelShapeMismatch";
    case ErrorCode::empty_dataset: return "EmptyDataset";
    case ErrorCode::non_finite_loss: return "NonFiniteLoss";
    case ErrorCode::parse_error: return "ParseError";
    case ErrorCode::missing_value: return "MissingValue";
    case ErrorCode::insufficient_class_instances: return "InsufficientClassInstances";
    case ErrorCode::bad_fractions: return "BadFractions";
    case ErrorCode::model_data_mismatch: return "ModelDataMismatch";
    case ErrorCode::single_class: return "SingleClass";
    case ErrorCode::bad_config: return "BadConfig";
    case ErrorCode::io_error: return "IoError";
  }
  return "UnknownError";
}

bool is_usage_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::non_finite_loss:
      return false;
    default:
      return true;
  }
}

}  // namespace kdm
