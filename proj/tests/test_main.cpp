#define DOCTEST_CONFIG_IMPLEMENT
#include "doctest.h"

#include <spdlog/spdlog.h>

#include <cstdlib>

int main(int argc, char** argv) {
    const char* level = std::getenv("DTRADE_LOG_LEVEL");
    spdlog::set_level(level ? spdlog::level::from_str(level) : spdlog::level::off);
    doctest::Context ctx(argc, argv);
    return ctx.run();
}
