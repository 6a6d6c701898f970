#pragma once

#include <string_view>

// Progress messages for long-running stages. Silent unless a level is set;
// the command-line tool turns it on.
namespace wsp::log {

enum class Level { quiet, info };

void set_level(Level level);
void info(std::string_view message);

}  // namespace wsp::log
