#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace mixprompt {

std::string_view trim_view(std::string_view s) noexcept;
std::string trim(std::string_view s);
std::string to_lower_ascii(std::string_view s);
// Upper-cases the first byte if it is an ASCII letter.
std::string capitalize_first(std::string_view s);
bool iequals_ascii(std::string_view a, std::string_view b) noexcept;
bool starts_with_icase(std::string_view s, std::string_view prefix) noexcept;
std::vector<std::string> split_whitespace(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
// Replaces every run of whitespace (including newlines) with one space.
std::string collapse_whitespace(std::string_view s);

}  // namespace mixprompt
