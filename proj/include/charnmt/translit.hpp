// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace charnmt {

struct TranslitResult {
  std::string text;
  // Cyrillic-block code points with no table entry; they pass through
  // unchanged but callers may want to warn.
  std::size_t unmapped_cyrillic = 0;
};

// Cyrillic-to-Latin transliteration (ISO 9 system A: one Latin letter,
// possibly with diacritics, per Cyrillic letter).  Non-Cyrillic input
// passes through untouched, so the function is idempotent.
TranslitResult iso9_transliterate(std::string_view text);

// The embedded table as (cyrillic, latin) code-point string pairs, for
// inspection and the injectivity checks.
const std::vector<std::pair<char32_t, char32_t>>& iso9_table();

}  // namespace charnmt
