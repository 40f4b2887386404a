#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vidattack {

enum class Errc {
  ShapeMismatch,
  ZeroDirection,
  FrameOutOfRange,
  InvalidArgument,
  InvalidFile,
  RemoteUnavailable,
  BindFailure,
  NotAdversarialWithinCap,
  AllDrawsFailed,
  BudgetExhausted,
  StartingDirectionNotAdversarial,
  InsufficientCandidates,
  CleanSampleMisclassified,
  NoViableInitialization,
  EmptyMask,
  EmptyBatch,
  InvalidConfig,
};

constexpr std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::ZeroDirection: return "ZeroDirection";
    case Errc::FrameOutOfRange: return "FrameOutOfRange";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::InvalidFile: return "InvalidFile";
    case Errc::RemoteUnavailable: return "RemoteUnavailable";
    case Errc::BindFailure: return "BindFailure";
    case Errc::NotAdversarialWithinCap: return "NotAdversarialWithinCap";
    case Errc::AllDrawsFailed: return "AllDrawsFailed";
    case Errc::BudgetExhausted: return "BudgetExhausted";
    case Errc::StartingDirectionNotAdversarial: return "StartingDirectionNotAdversarial";
    case Errc::InsufficientCandidates: return "InsufficientCandidates";
    case Errc::CleanSampleMisclassified: return "CleanSampleMisclassified";
    case Errc::NoViableInitialization: return "NoViableInitialization";
    case Errc::EmptyMask: return "EmptyMask";
    case Errc::EmptyBatch: return "EmptyBatch";
    case Errc::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers can branch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace vidattack
