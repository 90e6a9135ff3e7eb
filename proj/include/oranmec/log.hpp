#pragma once

#include <spdlog/spdlog.h>

namespace oranmec {

// Shared stderr logger. The level comes from ORANMEC_LOG (trace, debug, info,
// warn, error, critical, off) and defaults to warn.
spdlog::logger& logger();

} // namespace oranmec
