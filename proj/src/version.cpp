#include "metalink/version.hpp"

namespace metalink {

std::string_view version() { return METALINK_VERSION; }
std::string_view git_describe() { return METALINK_GIT_DESCRIBE; }

}  // namespace metalink
