#include "oranmec/log.hpp"

#include <cstdlib>

#include <spdlog/sinks/stdout_color_sinks.h>

namespace oranmec {

spdlog::logger& logger()
{
    static std::shared_ptr<spdlog::logger> instance = [] {
        auto l = spdlog::stderr_color_mt("oranmec");
        auto level = spdlog::level::warn;
        if (const char* env = std::getenv("ORANMEC_LOG"))
            level = spdlog::level::from_str(env);
        l->set_level(level);
        l->set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
        return l;
    }();
    return *instance;
}

} // namespace oranmec
