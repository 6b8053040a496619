#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace comix {

enum class ErrorCode {
  parse_malformed,
  schema_violation,
  serialize_invalid,
  format_ambiguous,
  format_unknown,
  line_malformed,
  unmapped_class,
  duplicate_image_id,
  coord_out_of_range,
  missing_dimensions,
  zero_dim_page,
  scope_mixed,
  no_classes,
  unknown_image_id,
  unknown_category,
  invalid_record,
  io_error,
  invalid_argument,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::parse_malformed: return "PARSE_MALFORMED";
    case ErrorCode::schema_violation: return "SCHEMA_VIOLATION";
    case ErrorCode::serialize_invalid: return "SERIALIZE_INVALID";
    case ErrorCode::format_ambiguous: return "FORMAT_AMBIGUOUS";
    case ErrorCode::format_unknown: return "FORMAT_UNKNOWN";
    case ErrorCode::line_malformed: return "LINE_MALFORMED";
    case ErrorCode::unmapped_class: return "UNMAPPED_CLASS";
    case ErrorCode::duplicate_image_id: return "DUPLICATE_IMAGE_ID";
    case ErrorCode::coord_out_of_range: return "COORD_OUT_OF_RANGE";
    case ErrorCode::missing_dimensions: return "MISSING_DIMENSIONS";
    case ErrorCode::zero_dim_page: return "ZERO_DIM_PAGE";
    case ErrorCode::scope_mixed: return "SCOPE_MIXED";
    case ErrorCode::no_classes: return "NO_CLASSES";
    case ErrorCode::unknown_image_id: return "UNKNOWN_IMAGE_ID";
    case ErrorCode::unknown_category: return "UNKNOWN_CATEGORY";
    case ErrorCode::invalid_record: return "INVALID_RECORD";
    case ErrorCode::io_error: return "IO_ERROR";
    case ErrorCode::invalid_argument: return "INVALID_ARGUMENT";
  }
  return "UNKNOWN";
}

/// Source position inside a text document. Zero means "not known".
struct SourcePos {
  std::int64_t line = 0;
  std::int64_t column = 0;
};

/// The single exception type thrown by the library.
///
/// `detail` carries a secondary machine-readable token, e.g. the validation
/// rule behind a SCHEMA_VIOLATION raised by an adapter.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message, SourcePos pos = {}, std::string detail = {})
      : std::runtime_error(compose(code, message, pos, detail)),
        code_(code),
        message_(std::move(message)),
        pos_(pos),
        detail_(std::move(detail)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& message() const noexcept { return message_; }
  const SourcePos& pos() const noexcept { return pos_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  static std::string compose(ErrorCode code, const std::string& message, SourcePos pos,
                             const std::string& detail) {
    std::string out(to_string(code));
    if (!detail.empty()) out += " " + detail;
    if (pos.line > 0) {
      out += " at line " + std::to_string(pos.line) + ", column " + std::to_string(pos.column);
    }
    out += ": " + message;
    return out;
  }

  ErrorCode code_;
  std::string message_;
  SourcePos pos_;
  std::string detail_;
};

}  // namespace comix
