#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace pws {

// Closed list of failure codes. The names double as the wire-protocol
// `error` strings, so they must never be renamed.
enum class ErrorCode {
  SyntaxError,
  ArityError,
  UnknownAddress,
  UnknownSheet,
  DuplicateSheet,
  InvalidSheetName,
  InvalidFormat,

  SheetNotVisible,
  NoUnlockedCells,
  ProtectionTabUnavailable,
  CornerNotSelectable,
  CellLocked,
  StructureProtected,
  WindowsProtected,
  VeryHiddenNotListable,
  WrongPassword,
  AlreadyProtected,

  SheetNotVisibleToRole,
  NotAuthenticated,
  RevokedAccess,
  EditDenied,
  FormulaForbidden,
  ExternalLinkForbidden,
  NotOwner,
  CannotDemoteOwner,
  OverrideForbidden,
  AuditFailed,
  UnknownVersion,

  BadCredentials,
  Throttled,
  BadRequest,
  UnknownWorkbook,
  CorruptStore,
  BindFailure,

  NoPassword,
  Infeasible,
};

constexpr std::string_view code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::ArityError: return "ArityError";
    case ErrorCode::UnknownAddress: return "UnknownAddress";
    case ErrorCode::UnknownSheet: return "UnknownSheet";
    case ErrorCode::DuplicateSheet: return "DuplicateSheet";
    case ErrorCode::InvalidSheetName: return "InvalidSheetName";
    case ErrorCode::InvalidFormat: return "InvalidFormat";
    case ErrorCode::SheetNotVisible: return "SheetNotVisible";
    case ErrorCode::NoUnlockedCells: return "NoUnlockedCells";
    case ErrorCode::ProtectionTabUnavailable: return "ProtectionTabUnavailable";
    case ErrorCode::CornerNotSelectable: return "CornerNotSelectable";
    case ErrorCode::CellLocked: return "CellLocked";
    case ErrorCode::StructureProtected: return "StructureProtected";
    case ErrorCode::WindowsProtected: return "WindowsProtected";
    case ErrorCode::VeryHiddenNotListable: return "VeryHiddenNotListable";
    case ErrorCode::WrongPassword: return "WrongPassword";
    case ErrorCode::AlreadyProtected: return "AlreadyProtected";
    case ErrorCode::SheetNotVisibleToRole: return "SheetNotVisibleToRole";
    case ErrorCode::NotAuthenticated: return "NotAuthenticated";
    case ErrorCode::RevokedAccess: return "RevokedAccess";
    case ErrorCode::EditDenied: return "EditDenied";
    case ErrorCode::FormulaForbidden: return "FormulaForbidden";
    case ErrorCode::ExternalLinkForbidden: return "ExternalLinkForbidden";
    case ErrorCode::NotOwner: return "NotOwner";
    case ErrorCode::CannotDemoteOwner: return "CannotDemoteOwner";
    case ErrorCode::OverrideForbidden: return "OverrideForbidden";
    case ErrorCode::AuditFailed: return "AuditFailed";
    case ErrorCode::UnknownVersion: return "UnknownVersion";
    case ErrorCode::BadCredentials: return "BadCredentials";
    case ErrorCode::Throttled: return "Throttled";
    case ErrorCode::BadRequest: return "BadRequest";
    case ErrorCode::UnknownWorkbook: return "UnknownWorkbook";
    case ErrorCode::CorruptStore: return "CorruptStore";
    case ErrorCode::BindFailure: return "BindFailure";
    case ErrorCode::NoPassword: return "NoPassword";
    case ErrorCode::Infeasible: return "Infeasible";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(code_name(code)) + ": " + message), code_(code), message_(message) {}

  ErrorCode code() const noexcept { return code_; }
  // The text without the code prefix that what() carries.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

// Formula syntax errors carry the character offset into the source text.
class SyntaxError : public Error {
 public:
  SyntaxError(std::size_t offset, const std::string& message)
      : Error(ErrorCode::SyntaxError, message + " at offset " + std::to_string(offset)),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace pws
