#pragma once

#include <stdexcept>
#include <string>

namespace holomodel {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PointOutsideDomain : Error { using Error::Error; };
struct AmplitudeOutOfRange : Error { using Error::Error; };
struct SingularAtBoundary : Error { using Error::Error; };
struct SequenceTooShort : Error { using Error::Error; };
struct PoleHit : Error { using Error::Error; };
struct DomainMismatch : Error { using Error::Error; };
struct OrbitEscapedDomain : Error { using Error::Error; };
struct NoConvergence : Error { using Error::Error; };
struct NotAFixedDirection : Error { using Error::Error; };
struct NotRepelling : Error { using Error::Error; };
struct RankUnstable : Error { using Error::Error; };
struct ModelNotConverged : Error { using Error::Error; };
struct WrongKind : Error { using Error::Error; };
struct NewtonFailed : Error { using Error::Error; };
struct StepUnbounded : Error { using Error::Error; };
struct OrbitTooShort : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };

} // namespace holomodel
