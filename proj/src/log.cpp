#include "scaleforge/log.hpp"

#include <cstdlib>
#include <string>

#include <spdlog/sinks/stdout_color_sinks.h>

namespace scaleforge {

void init_logging() {
    auto logger = spdlog::get("scaleforge");
    if (!logger) logger = spdlog::stderr_color_mt("scaleforge");
    spdlog::set_default_logger(logger);
    auto level = spdlog::level::warn;
    if (const char* env = std::getenv("SCALEFORGE_LOG")) {
        level = spdlog::level::from_str(env);
    }
    spdlog::set_level(level);
}

}  // namespace scaleforge
