#pragma once

namespace netchoice {

/// Sets the spdlog level from NETCHOICE_LOG (trace, debug, info, warn,
/// error, off). Unset or unknown values mean warn. Safe to call repeatedly.
void configure_logging();

}  // namespace netchoice
