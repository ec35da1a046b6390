// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace charnmt {

// Decodes UTF-8 into code points.  Malformed sequences yield U+FFFD for
// each offending byte; decoding never throws, since corpus files are
// user input.
std::u32string utf8_decode(std::string_view s);

std::string utf8_encode(char32_t c);
std::string utf8_encode(std::u32string_view s);

// Splits on runs of ASCII whitespace; no empty tokens.
std::vector<std::string> split_ws(std::string_view s);

}  // namespace charnmt
