#include "tradelab/format.hpp"

#include <array>
#include <charconv>

namespace tradelab {

std::string format_double(double value) {
  if (value == 0.0) value = 0.0;  // no "-0" in reports
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc{}) return "nan";
  return std::string(buf.data(), ptr);
}

}  // namespace tradelab
