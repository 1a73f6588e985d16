#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace alm::text {

/// Splits UTF-8 text on Unicode whitespace. Empty tokens are dropped.
std::vector<std::string_view> split_whitespace(std::string_view s);

inline std::size_t word_count(std::string_view s) { return split_whitespace(s).size(); }

/// Trims Unicode whitespace from both ends.
std::string_view trim(std::string_view s);

/// Number of code points; invalid bytes count as one each.
std::size_t codepoint_count(std::string_view s);

}  // namespace alm::text
