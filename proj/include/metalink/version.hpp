#pragma once

#include <string_view>

namespace metalink {

std::string_view version();
// `git describe --always --dirty --tags` at configure time, or "unknown".
std::string_view git_describe();

}  // namespace metalink
