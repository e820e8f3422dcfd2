#pragma once

// Header names used between consumers, the PEP, the PDP and the PAP.

namespace dsac {

/// Presentation (compact JSON) sent by a consumer in distributed mode.
inline constexpr const char* kPresentationHeader = "X-Verifiable-Presentation";
/// Owner API key for PAP administration.
inline constexpr const char* kOwnerKeyHeader = "X-Owner-Key";
/// Shared secret the PDP uses when pulling policies from the PAP.
inline constexpr const char* kPdpSecretHeader = "X-PDP-Secret";

/// Prefix of the proxied NGSI-LD API.
inline constexpr const char* kNgsiPrefix = "/ngsi-ld/v1";

} // namespace dsac
