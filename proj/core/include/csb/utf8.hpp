#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace csb::utf8 {

// Invalid sequences decode to U+FFFD; decoding never throws.
std::u32string decode(std::string_view text);
std::string encode(std::u32string_view codepoints);
void append(std::string& out, char32_t codepoint);

bool is_valid(std::string_view text);
std::size_t length(std::string_view text);

}  // namespace csb::utf8
