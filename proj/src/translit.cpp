// SPDX-License-Identifier: Apache-2.0
#include "charnmt/translit.hpp"

#include <unordered_map>

#include "charnmt/utf8.hpp"

namespace charnmt {

namespace {

// ISO 9 system A, full Russian alphabet, both cases.  The hard and
// soft signs map to the caseless modifier letters U+02BA / U+02B9, so
// those two rows share their output across case; every other mapping
// is distinct, which keeps the table injective within each case.
const std::vector<std::pair<char32_t, char32_t>> kIso9{
    {U'А', U'A'},  // А -> A
    {U'Б', U'B'},  // Б -> B
    {U'В', U'V'},  // В -> V
    {U'Г', U'G'},  // Г -> G
    {U'Д', U'D'},  // Д -> D
    {U'Е', U'E'},  // Е -> E
    {U'Ё', U'Ë'},  // Ё -> Ë
    {U'Ж', U'Ž'},  // Ж -> Ž
    {U'З', U'Z'},  // З -> Z
    {U'И', U'I'},  // И -> I
    {U'Й', U'J'},  // Й -> J
    {U'К', U'K'},  // К -> K
    {U'Л', U'L'},  // Л -> L
    {U'М', U'M'},  // М -> M
    {U'Н', U'N'},  // Н -> N
    {U'О', U'O'},  // О -> O
    {U'П', U'P'},  // П -> P
    {U'Р', U'R'},  // Р -> R
    {U'С', U'S'},  // С -> S
    {U'Т', U'T'},  // Т -> T
    {U'У', U'U'},  // У -> U
    {U'Ф', U'F'},  // Ф -> F
    {U'Х', U'H'},  // Х -> H
    {U'Ц', U'C'},  // Ц -> C
    {U'Ч', U'Č'},  // Ч -> Č
    {U'Ш', U'Š'},  // Ш -> Š
    {U'Щ', U'Ŝ'},  // Щ -> Ŝ
    {U'Ъ', U'ʺ'},  // Ъ -> modifier double prime
    {U'Ы', U'Y'},  // Ы -> Y
    {U'Ь', U'ʹ'},  // Ь -> modifier prime
    {U'Э', U'È'},  // Э -> È
    {U'Ю', U'Û'},  // Ю -> Û
    {U'Я', U'Â'},  // Я -> Â
    {U'а', U'a'},  // а -> a
    {U'б', U'b'},  // б -> b
    {U'в', U'v'},  // в -> v
    {U'г', U'g'},  // г -> g
    {U'д', U'd'},  // д -> d
    {U'е', U'e'},  // е -> e
    {U'ё', U'ë'},  // ё -> ë
    {U'ж', U'ž'},  // ж -> ž
    {U'з', U'z'},  // з -> z
    {U'и', U'i'},  // и -> i
    {U'й', U'j'},  // й -> j
    {U'к', U'k'},  // к -> k
    {U'л', U'l'},  // л -> l
    {U'м', U'm'},  // м -> m
    {U'н', U'n'},  // н -> n
    {U'о', U'o'},  // о -> o
    {U'п', U'p'},  // п -> p
    {U'р', U'r'},  // р -> r
    {U'с', U's'},  // с -> s
    {U'т', U't'},  // т -> t
    {U'у', U'u'},  // у -> u
    {U'ф', U'f'},  // ф -> f
    {U'х', U'h'},  // х -> h
    {U'ц', U'c'},  // ц -> c
    {U'ч', U'č'},  // ч -> č
    {U'ш', U'š'},  // ш -> š
    {U'щ', U'ŝ'},  // щ -> ŝ
    {U'ъ', U'ʺ'},  // ъ -> modifier double prime
    {U'ы', U'y'},  // ы -> y
    {U'ь', U'ʹ'},  // ь -> modifier prime
    {U'э', U'è'},  // э -> è
    {U'ю', U'û'},  // ю -> û
    {U'я', U'â'},  // я -> â
};

bool in_cyrillic_block(char32_t c) { return c >= 0x0400 && c <= 0x04FF; }

}  // namespace

const std::vector<std::pair<char32_t, char32_t>>& iso9_table() {
  return kIso9;
}

TranslitResult iso9_transliterate(std::string_view text) {
  static const std::unordered_map<char32_t, char32_t> lookup(kIso9.begin(),
                                                             kIso9.end());
  TranslitResult result;
  for (char32_t cp : utf8_decode(text)) {
    auto it = lookup.find(cp);
    if (it != lookup.end()) {
      result.text += utf8_encode(it->second);
    } else {
      if (in_cyrillic_block(cp)) ++result.unmapped_cyrillic;
      result.text += utf8_encode(cp);
    }
  }
  return result;
}

}  // namespace charnmt
