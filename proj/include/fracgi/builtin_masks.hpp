#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string_view>
#include <vector>

#include "fracgi/object_model.hpp"

namespace fracgi {

// 7x9 binary letter "A" with exactly 20 transmitting units (m = 20).
inline ObjectMask letter_a_mask() {
  constexpr std::string_view rows[] = {
      "...#...", //
      "..#.#..", //
      "..#.#..", //
      ".#...#.", //
      ".#####.", //
      ".#...#.", //
      "#.....#", //
      "#.....#", //
      "#.....#", //
  };
  std::vector<double> units;
  for (auto row : rows)
    for (char c : row) units.push_back(c == '#' ? 1.0 : 0.0);
  return ObjectMask(7, 9, std::move(units));
}

// Binary mask with m ones. m = 20 gives the letter "A"; any other m gives a
// roughly square block with the first m units (row-major) transmitting and
// at least as many opaque units.
inline ObjectMask builtin_binary_mask(std::size_t m) {
  if (m == 20) return letter_a_mask();
  const std::size_t n = std::max<std::size_t>(2 * m, 2);
  const auto width = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
  const std::size_t height = (n + width - 1) / width;
  std::vector<double> units(width * height, 0.0);
  for (std::size_t i = 0; i < m; ++i) units[i] = 1.0;
  return ObjectMask(width, height, std::move(units));
}

} // namespace fracgi
