#pragma once

#include <string>

namespace optopulse {

/// Shortest decimal representation that round-trips to the same double.
std::string format_double(double v);

}  // namespace optopulse
