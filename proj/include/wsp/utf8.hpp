#pragma once

#include <cstddef>
#include <string>
#include <string_view>

// All character offsets in the toolkit count Unicode scalar values.
namespace wsp::utf8 {

/// Decodes UTF-8; throws ParseError on malformed input.
std::u32string decode(std::string_view s);

std::string encode(std::u32string_view s);
std::string encode(char32_t c);

/// Number of scalar values in a UTF-8 string.
std::size_t length(std::string_view s);

/// Inclusive slice [start, end] in scalar offsets.
std::string slice(std::string_view s, std::size_t start, std::size_t end);

bool is_space(char32_t c);

}  // namespace wsp::utf8
