#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace docrl::utf8 {

/// Decodes UTF-8 into scalar values. Invalid bytes map to 0xDC00 + byte so
/// decoding is total and distinct inputs stay distinct.
std::vector<char32_t> decode(std::string_view s);

/// Decodes the scalar starting at byte `i` into `cp` and returns its byte
/// length (always >= 1; invalid bytes decode as in `decode`).
std::size_t next(std::string_view s, std::size_t i, char32_t& cp);

void append(std::string& out, char32_t cp);
std::string encode(const std::vector<char32_t>& cps);

bool is_valid(std::string_view s);

/// Byte length of the sequence starting with lead byte `c` (1 for invalid).
std::size_t sequence_length(unsigned char c);

}  // namespace docrl::utf8
