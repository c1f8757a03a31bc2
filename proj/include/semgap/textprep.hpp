#pragma once

// Sentence segmentation, alphabetic tokenization, vocabulary counting and the
// intermediate one-sentence-per-line corpus format.

#include <algorithm>
#include <array>
#include <cstdint>
#include <cwctype>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <locale.h>

#include "semgap/error.hpp"

namespace semgap {

enum class Source : std::uint8_t { kReview = 0, kDescription = 1 };

inline char source_code(Source s) { return s == Source::kReview ? 'R' : 'D'; }

inline Source other(Source s) {
  return s == Source::kReview ? Source::kDescription : Source::kReview;
}

struct SentenceRecord {
  std::vector<std::string> tokens;
  Source source = Source::kReview;
  std::string domain;
};

namespace utf8 {

inline constexpr char32_t kInvalid = 0xFFFFFFFF;

/// Decodes one code point at `pos` and advances it. Malformed sequences
/// consume one byte and yield kInvalid.
inline char32_t decode(std::string_view s, std::size_t& pos) {
  const auto b0 = static_cast<unsigned char>(s[pos]);
  if (b0 < 0x80) {
    ++pos;
    return b0;
  }
  int len = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    ++pos;
    return kInvalid;
  }
  if (pos + len > s.size()) {
    ++pos;
    return kInvalid;
  }
  for (int i = 1; i < len; ++i) {
    const auto b = static_cast<unsigned char>(s[pos + i]);
    if ((b & 0xC0) != 0x80) {
      ++pos;
      return kInvalid;
    }
    cp = (cp << 6) | (b & 0x3F);
  }
  // Overlong forms and surrogates are rejected.
  static constexpr std::array<char32_t, 5> kMin{0, 0, 0x80, 0x800, 0x10000};
  if (cp < kMin[len] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
    ++pos;
    return kInvalid;
  }
  pos += len;
  return cp;
}

inline void append(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

}  // namespace utf8

namespace detail {

// Character classes come from the C.UTF-8 locale; ASCII is handled inline.
inline locale_t utf8_locale() {
  static const locale_t loc = newlocale(LC_CTYPE_MASK, "C.UTF-8", static_cast<locale_t>(0));
  return loc;
}

inline bool is_letter(char32_t cp) {
  if (cp < 0x80) return (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z');
  if (cp == utf8::kInvalid) return false;
  const locale_t loc = utf8_locale();
  return loc != static_cast<locale_t>(0) && iswalpha_l(static_cast<wint_t>(cp), loc) != 0;
}

inline bool is_upper(char32_t cp) {
  if (cp < 0x80) return cp >= 'A' && cp <= 'Z';
  if (cp == utf8::kInvalid) return false;
  const locale_t loc = utf8_locale();
  return loc != static_cast<locale_t>(0) && iswupper_l(static_cast<wint_t>(cp), loc) != 0;
}

inline char32_t to_lower(char32_t cp) {
  if (cp < 0x80) return (cp >= 'A' && cp <= 'Z') ? cp + ('a' - 'A') : cp;
  const locale_t loc = utf8_locale();
  if (loc == static_cast<locale_t>(0)) return cp;
  return static_cast<char32_t>(towlower_l(static_cast<wint_t>(cp), loc));
}

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline std::string_view trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return s.substr(b, e - b);
}

inline bool is_terminal(char c) { return c == '.' || c == '!' || c == '?'; }

inline bool is_closer(char c) { return c == '"' || c == '\'' || c == ')' || c == ']'; }

// Lowercased token ending right before position `dot` (exclusive), with
// leading brackets and quotes removed.
inline std::string word_before(std::string_view s, std::size_t dot) {
  std::size_t b = dot;
  while (b > 0 && !is_space(s[b - 1])) --b;
  std::string w(s.substr(b, dot - b));
  std::size_t lead = 0;
  while (lead < w.size() && (w[lead] == '(' || w[lead] == '"' || w[lead] == '\'' || w[lead] == '[')) {
    ++lead;
  }
  w.erase(0, lead);
  for (char& c : w) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return w;
}

inline bool is_abbreviation(std::string_view w) {
  static constexpr std::array<std::string_view, 11> kAbbrev{
      "mr", "mrs", "dr", "st", "vs", "etc", "e.g", "i.e", "in", "oz", "ft"};
  return std::find(kAbbrev.begin(), kAbbrev.end(), w) != kAbbrev.end();
}

inline void split_line(std::string_view line, std::vector<std::string>& out) {
  std::size_t start = 0;
  std::size_t i = 0;
  while (i < line.size()) {
    if (!is_terminal(line[i])) {
      ++i;
      continue;
    }
    const std::size_t mark = i;
    std::size_t j = i;
    while (j < line.size() && is_terminal(line[j])) ++j;
    while (j < line.size() && is_closer(line[j])) ++j;
    const std::size_t end_of_sentence = j;
    if (j < line.size() && !is_space(line[j])) {
      i = j;
      continue;
    }
    while (j < line.size() && is_space(line[j])) ++j;
    bool boundary = false;
    if (j >= line.size()) {
      boundary = true;
    } else {
      std::size_t pos = j;
      const char32_t next = utf8::decode(line, pos);
      boundary = is_upper(next) || (next >= '0' && next <= '9');
    }
    // A single '.' after a known abbreviation never ends a sentence.
    if (boundary && line[mark] == '.' && end_of_sentence == mark + 1 &&
        is_abbreviation(word_before(line, mark))) {
      boundary = false;
    }
    if (boundary) {
      const auto piece = trim(line.substr(start, end_of_sentence - start));
      if (!piece.empty()) out.emplace_back(piece);
      start = j;
    }
    i = j;
  }
  const auto tail = trim(line.substr(std::min(start, line.size())));
  if (!tail.empty()) out.emplace_back(tail);
}

}  // namespace detail

/// Rule-based sentence splitter. A boundary is a run of `.`/`!`/`?` (plus
/// closing quotes or brackets) followed by whitespace and then an uppercase
/// letter, a digit or the end of text, unless the mark is the period of a
/// known abbreviation. With `tabular_hint` every newline is also a boundary;
/// otherwise newlines count as ordinary whitespace.
inline std::vector<std::string> split_sentences(std::string_view text, bool tabular_hint) {
  std::vector<std::string> out;
  if (!tabular_hint) {
    detail::split_line(text, out);
    return out;
  }
  std::size_t b = 0;
  while (b <= text.size()) {
    std::size_t e = text.find('\n', b);
    if (e == std::string_view::npos) e = text.size();
    detail::split_line(text.substr(b, e - b), out);
    b = e + 1;
  }
  return out;
}

/// Maximal runs of letters, lowercased. Everything else (digits, punctuation,
/// invalid UTF-8) separates tokens and is dropped.
inline std::vector<std::string> tokenize(std::string_view sentence) {
  std::vector<std::string> tokens;
  std::string current;
  std::size_t pos = 0;
  while (pos < sentence.size()) {
    const char32_t cp = utf8::decode(sentence, pos);
    if (detail::is_letter(cp)) {
      utf8::append(current, detail::to_lower(cp));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

/// Splits, tokenizes and drops sentences left without tokens.
inline std::vector<std::vector<std::string>> prepare_text(std::string_view text, bool tabular_hint) {
  std::vector<std::vector<std::string>> out;
  for (const auto& s : split_sentences(text, tabular_hint)) {
    auto toks = tokenize(s);
    if (!toks.empty()) out.push_back(std::move(toks));
  }
  return out;
}

struct WordCounts {
  std::uint64_t reviews = 0;
  std::uint64_t descriptions = 0;
  std::uint64_t mixed = 0;

  WordCounts& operator+=(const WordCounts& o) {
    reviews += o.reviews;
    descriptions += o.descriptions;
    mixed += o.mixed;
    return *this;
  }
  friend bool operator==(const WordCounts&, const WordCounts&) = default;
};

/// Per-word occurrence counts by source. `mixed` counts every occurrence in
/// the counted stream, so it is the mixed-corpus frequency when the counted
/// stream is the interleaved corpus.
struct VocabStats {
  std::unordered_map<std::string, WordCounts> words;
  std::uint64_t total_reviews = 0;
  std::uint64_t total_descriptions = 0;

  void add(std::string_view word, Source source, std::uint64_t n = 1) {
    auto& c = words[std::string(word)];
    (source == Source::kReview ? c.reviews : c.descriptions) += n;
    c.mixed += n;
    (source == Source::kReview ? total_reviews : total_descriptions) += n;
  }

  WordCounts get(const std::string& word) const {
    auto it = words.find(word);
    return it == words.end() ? WordCounts{} : it->second;
  }

  VocabStats& operator+=(const VocabStats& o) {
    for (const auto& [w, c] : o.words) words[w] += c;
    total_reviews += o.total_reviews;
    total_descriptions += o.total_descriptions;
    return *this;
  }

  friend bool operator==(const VocabStats&, const VocabStats&) = default;
};

template <typename Range>
VocabStats count_vocab(const Range& sentences) {
  VocabStats stats;
  for (const SentenceRecord& s : sentences) {
    for (const auto& t : s.tokens) stats.add(t, s.source);
  }
  return stats;
}

/// Dense word ids, assigned in first-seen order.
class Lexicon {
 public:
  std::uint32_t intern(std::string_view word) {
    auto it = ids_.find(std::string(word));
    if (it != ids_.end()) return it->second;
    const auto id = static_cast<std::uint32_t>(words_.size());
    words_.emplace_back(word);
    ids_.emplace(words_.back(), id);
    return id;
  }

  std::optional<std::uint32_t> find(const std::string& word) const {
    auto it = ids_.find(word);
    if (it == ids_.end()) return std::nullopt;
    return it->second;
  }

  const std::string& word(std::uint32_t id) const { return words_.at(id); }
  std::size_t size() const { return words_.size(); }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::uint32_t> ids_;
};

/// Sentences stored as flat word ids over a shared lexicon.
struct Corpus {
  std::shared_ptr<Lexicon> lexicon = std::make_shared<Lexicon>();
  std::vector<std::uint32_t> tokens;
  std::vector<std::size_t> offsets{0};
  std::vector<Source> sources;

  std::size_t size() const { return sources.size(); }
  bool empty() const { return sources.empty(); }
  std::size_t token_count() const { return tokens.size(); }

  std::span<const std::uint32_t> sentence(std::size_t i) const {
    return {tokens.data() + offsets[i], offsets[i + 1] - offsets[i]};
  }

  void add_ids(Source src, std::span<const std::uint32_t> ids) {
    tokens.insert(tokens.end(), ids.begin(), ids.end());
    offsets.push_back(tokens.size());
    sources.push_back(src);
  }

  void add(Source src, const std::vector<std::string>& words) {
    for (const auto& w : words) tokens.push_back(lexicon->intern(w));
    offsets.push_back(tokens.size());
    sources.push_back(src);
  }

  std::vector<std::string> words_of(std::size_t i) const {
    std::vector<std::string> out;
    for (auto id : sentence(i)) out.push_back(lexicon->word(id));
    return out;
  }

  /// Occurrences per lexicon id, split by source.
  std::vector<WordCounts> id_counts() const {
    std::vector<WordCounts> counts(lexicon->size());
    for (std::size_t i = 0; i < size(); ++i) {
      for (auto id : sentence(i)) {
        auto& c = counts[id];
        (sources[i] == Source::kReview ? c.reviews : c.descriptions) += 1;
        c.mixed += 1;
      }
    }
    return counts;
  }
};

/// count_vocab over a Corpus.
inline VocabStats count_vocab(const Corpus& corpus) {
  VocabStats stats;
  const auto counts = corpus.id_counts();
  for (std::size_t id = 0; id < counts.size(); ++id) {
    if (counts[id].mixed == 0) continue;
    stats.words.emplace(corpus.lexicon->word(static_cast<std::uint32_t>(id)), counts[id]);
    stats.total_reviews += counts[id].reviews;
    stats.total_descriptions += counts[id].descriptions;
  }
  return stats;
}

// Intermediate corpus format: "<R|D>\t<tok> <tok> ...\n".

inline void write_sentence_line(std::ostream& os, Source source,
                                const std::vector<std::string>& tokens) {
  os.put(source_code(source));
  os.put('\t');
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) os.put(' ');
    os << tokens[i];
  }
  os.put('\n');
}

/// Parses one intermediate line; throws DataError on a bad prefix.
inline std::pair<Source, std::vector<std::string>> parse_sentence_line(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  if (line.size() < 2 || line[1] != '\t' || (line[0] != 'R' && line[0] != 'D')) {
    throw DataError("intermediate corpus line lacks an R/D source prefix: '" +
                    std::string(line.substr(0, 40)) + "'");
  }
  const Source src = line[0] == 'R' ? Source::kReview : Source::kDescription;
  std::vector<std::string> toks;
  std::size_t b = 2;
  while (b < line.size()) {
    std::size_t e = line.find(' ', b);
    if (e == std::string_view::npos) e = line.size();
    if (e > b) toks.emplace_back(line.substr(b, e - b));
    b = e + 1;
  }
  return {src, std::move(toks)};
}

/// Reads every sentence of an intermediate corpus stream, invoking
/// `fn(Source, std::vector<std::string>&&)` per non-empty line.
template <typename Fn>
void read_sentence_lines(std::istream& is, Fn&& fn) {
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto [src, toks] = parse_sentence_line(line);
    if (toks.empty()) continue;
    fn(src, std::move(toks));
  }
}

}  // namespace semgap
