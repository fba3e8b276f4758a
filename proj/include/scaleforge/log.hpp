#pragma once

#include <spdlog/spdlog.h>

namespace scaleforge {

/// Applies the SCALEFORGE_LOG environment variable (trace, debug, info, warn, error, off).
/// Defaults to warn.
void init_logging();

}  // namespace scaleforge
