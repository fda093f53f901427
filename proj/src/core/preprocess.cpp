#include "emopred/preprocess.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include "emopred/data_io.hpp"
#include "emopred/error.hpp"

namespace emopred {
namespace {

bool is_ascii_alpha(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}
bool is_ascii_digit(char c) { return c >= '0' && c <= '9'; }
bool is_ascii_alnum(char c) { return is_ascii_alpha(c) || is_ascii_digit(c); }
bool is_upper(char c) { return c >= 'A' && c <= 'Z'; }
bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' ||
         c == '\f';
}
bool is_ascii_punct(char c) {
  return static_cast<unsigned char>(c) < 0x80 &&
         std::ispunct(static_cast<unsigned char>(c));
}
char lower(char c) { return is_upper(c) ? static_cast<char>(c - 'A' + 'a') : c; }

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = lower(c);
  return out;
}

bool iequals_prefix(std::string_view text, std::size_t pos,
                    std::string_view prefix) {
  if (text.size() - pos < prefix.size()) return false;
  for (std::size_t k = 0; k < prefix.size(); ++k) {
    if (lower(text[pos + k]) != prefix[k]) return false;
  }
  return true;
}

// True when a token may end at `pos`: end of input or a non-alphanumeric
// character follows.
bool boundary(std::string_view text, std::size_t pos) {
  return pos >= text.size() || !is_ascii_alnum(text[pos]);
}

std::size_t digit_run(std::string_view text, std::size_t pos) {
  std::size_t j = pos;
  while (j < text.size() && is_ascii_digit(text[j])) ++j;
  return j - pos;
}

// Scanners return the match length at `pos`, or 0 for no match.

std::size_t scan_tag(std::string_view text, std::size_t pos) {
  if (text[pos] != '<') return 0;
  const auto close = text.find('>', pos);
  if (close == std::string_view::npos) return 0;
  return is_tag(text.substr(pos, close - pos + 1)) ? close - pos + 1 : 0;
}

std::size_t scan_url(std::string_view text, std::size_t pos) {
  std::size_t prefix = 0;
  for (std::string_view p : {"https://", "http://", "www."}) {
    if (iequals_prefix(text, pos, p)) {
      prefix = p.size();
      break;
    }
  }
  if (prefix == 0) return 0;
  std::size_t j = pos + prefix;
  while (j < text.size() && !is_space(text[j])) ++j;
  while (j > pos + prefix &&
         std::string_view(".,!?;:)\"'").find(text[j - 1]) != std::string_view::npos) {
    --j;
  }
  return j > pos + prefix ? j - pos : 0;
}

std::size_t scan_email(std::string_view text, std::size_t pos) {
  const auto local_char = [](char c) {
    return is_ascii_alnum(c) || c == '.' || c == '_' || c == '%' || c == '+' ||
           c == '-';
  };
  std::size_t j = pos;
  while (j < text.size() && local_char(text[j])) ++j;
  if (j == pos || j >= text.size() || text[j] != '@') return 0;
  const std::size_t domain_begin = ++j;
  while (j < text.size() &&
         (is_ascii_alnum(text[j]) || text[j] == '.' || text[j] == '-')) {
    ++j;
  }
  while (j > domain_begin && (text[j - 1] == '.' || text[j - 1] == '-')) --j;
  const std::string_view domain = text.substr(domain_begin, j - domain_begin);
  const auto dot = domain.rfind('.');
  if (dot == std::string_view::npos || dot == 0) return 0;
  const std::string_view tld = domain.substr(dot + 1);
  if (tld.size() < 2 || !std::all_of(tld.begin(), tld.end(), is_ascii_alpha)) {
    return 0;
  }
  return j - pos;
}

std::size_t scan_prefixed_word(std::string_view text, std::size_t pos,
                               char sigil) {
  if (text[pos] != sigil) return 0;
  std::size_t j = pos + 1;
  while (j < text.size() && (is_ascii_alnum(text[j]) || text[j] == '_')) ++j;
  return j > pos + 1 ? j - pos : 0;
}

// Digits with optional thousands/decimal groups, e.g. 1,000.50
std::size_t scan_amount(std::string_view text, std::size_t pos) {
  std::size_t j = pos + digit_run(text, pos);
  if (j == pos) return 0;
  while (j + 1 < text.size() && (text[j] == '.' || text[j] == ',') &&
         is_ascii_digit(text[j + 1])) {
    j += 1;
    j += digit_run(text, j);
  }
  return j - pos;
}

constexpr std::array<std::string_view, 4> kCurrencySymbols = {
    "$", "\xE2\x82\xAC" /* euro */, "\xC2\xA3" /* pound */,
    "\xC2\xA5" /* yen */};

std::size_t scan_currency_symbol(std::string_view text, std::size_t pos) {
  for (auto sym : kCurrencySymbols) {
    if (text.substr(pos, sym.size()) == sym) return sym.size();
  }
  return 0;
}

std::size_t scan_magnitude(std::string_view text, std::size_t pos) {
  for (std::string_view suffix : {"mil", "bn", "k", "m", "b"}) {
    if (iequals_prefix(text, pos, suffix)) return suffix.size();
  }
  return 0;
}

std::size_t scan_money(std::string_view text, std::size_t pos) {
  if (const std::size_t sym = scan_currency_symbol(text, pos)) {
    const std::size_t amount = scan_amount(text, pos + sym);
    if (amount == 0) return 0;
    std::size_t j = pos + sym + amount;
    const std::size_t mag = scan_magnitude(text, j);
    if (mag && boundary(text, j + mag)) j += mag;
    return boundary(text, j) ? j - pos : 0;
  }
  // Amount, optional magnitude, then a symbol, e.g. 50€ or 5.5k€.
  const std::size_t amount = scan_amount(text, pos);
  if (amount == 0) return 0;
  std::size_t j = pos + amount;
  if (scan_currency_symbol(text, j) == 0) j += scan_magnitude(text, j);
  const std::size_t sym = scan_currency_symbol(text, j);
  if (sym == 0) return 0;
  return boundary(text, j + sym) ? j + sym - pos : 0;
}

std::size_t scan_meridiem(std::string_view text, std::size_t pos) {
  for (std::string_view m : {"a.m.", "p.m.", "am", "pm"}) {
    if (iequals_prefix(text, pos, m) && boundary(text, pos + m.size())) {
      return m.size();
    }
  }
  return 0;
}

std::size_t scan_time(std::string_view text, std::size_t pos) {
  const std::size_t h = digit_run(text, pos);
  if (h < 1 || h > 2) return 0;
  std::size_t j = pos + h;
  if (j >= text.size() || text[j] != ':' || digit_run(text, j + 1) != 2) return 0;
  j += 3;
  if (j < text.size() && text[j] == ':' && digit_run(text, j + 1) == 2) j += 3;
  if (const std::size_t m = scan_meridiem(text, j)) {
    j += m;
  } else if (j < text.size() && text[j] == ' ') {
    if (const std::size_t m2 = scan_meridiem(text, j + 1)) j += 1 + m2;
  }
  return boundary(text, j) ? j - pos : 0;
}

constexpr std::array<std::string_view, 24> kMonths = {
    "january", "february", "march", "april", "may", "june", "july",
    "august", "september", "october", "november", "december",
    "jan", "feb", "mar", "apr", "jun", "jul", "aug", "sept", "sep",
    "oct", "nov", "dec"};

std::size_t scan_month(std::string_view text, std::size_t pos) {
  std::size_t best = 0;
  const auto try_name = [&](std::string_view m) {
    if (m.size() > best && iequals_prefix(text, pos, m) &&
        boundary(text, pos + m.size())) {
      best = m.size();
    }
  };
  for (auto m : kMonths) try_name(m);
  if (best > 0 && best <= 4 && pos + best < text.size() &&
      text[pos + best] == '.') {
    ++best;  // "Jan."
  }
  return best;
}

// Day of month 1..31 with optional ordinal suffix.
std::size_t scan_day(std::string_view text, std::size_t pos) {
  const std::size_t d = digit_run(text, pos);
  if (d < 1 || d > 2) return 0;
  const int value = std::stoi(std::string(text.substr(pos, d)));
  if (value < 1 || value > 31) return 0;
  std::size_t j = pos + d;
  for (std::string_view suffix : {"st", "nd", "rd", "th"}) {
    if (iequals_prefix(text, j, suffix)) {
      j += suffix.size();
      break;
    }
  }
  return boundary(text, j) ? j - pos : 0;
}

std::size_t scan_year_tail(std::string_view text, std::size_t pos) {
  std::size_t j = pos;
  if (j < text.size() && text[j] == ',') ++j;
  if (j >= text.size() || text[j] != ' ') return 0;
  ++j;
  if (digit_run(text, j) != 4 || !boundary(text, j + 4)) return 0;
  return j + 4 - pos;
}

std::size_t scan_date(std::string_view text, std::size_t pos) {
  // Month-name first: "May 21, 2017", "April 23rd".
  if (const std::size_t m = scan_month(text, pos)) {
    std::size_t j = pos + m;
    if (j < text.size() && text[j] == ' ') {
      if (const std::size_t d = scan_day(text, j + 1)) {
        j += 1 + d;
        j += scan_year_tail(text, j);
        return j - pos;
      }
    }
    return 0;
  }
  // Day first: "23 April 2017", "23rd April".
  if (const std::size_t d = scan_day(text, pos)) {
    std::size_t j = pos + d;
    if (j < text.size() && text[j] == ' ') {
      if (const std::size_t m = scan_month(text, j + 1)) {
        j += 1 + m;
        j += scan_year_tail(text, j);
        return j - pos;
      }
    }
  }
  // Numeric: 07/11/2011, 2017-05-21, 21.05.17
  const std::size_t a = digit_run(text, pos);
  if (a < 1 || a > 4) return 0;
  std::size_t j = pos + a;
  if (j >= text.size()) return 0;
  const char sep = text[j];
  if (sep != '/' && sep != '-' && sep != '.') return 0;
  const std::size_t b = digit_run(text, j + 1);
  if (b < 1 || b > 2) return 0;
  j += 1 + b;
  if (j >= text.size() || text[j] != sep) return 0;
  const std::size_t c = digit_run(text, j + 1);
  j += 1 + c;
  const bool day_first = a <= 2 && (c == 2 || c == 4);
  const bool year_first = a == 4 && c >= 1 && c <= 2;
  if (!day_first && !year_first) return 0;
  return boundary(text, j) ? j - pos : 0;
}

std::size_t scan_number(std::string_view text, std::size_t pos) {
  std::size_t j = pos;
  if ((text[j] == '+' || text[j] == '-') && j + 1 < text.size() &&
      is_ascii_digit(text[j + 1])) {
    ++j;
  }
  const std::size_t amount = scan_amount(text, j);
  if (amount == 0) return 0;
  j += amount;
  if (j < text.size() && text[j] == '%') {
    ++j;
  } else {
    for (std::string_view suffix : {"st", "nd", "rd", "th"}) {
      if (iequals_prefix(text, j, suffix) && boundary(text, j + 2)) {
        j += 2;
        break;
      }
    }
  }
  return boundary(text, j) ? j - pos : 0;
}

bool is_emphasis_shape(std::string_view s) {
  if (s.size() < 3 || s.front() != '*' || s.back() != '*') return false;
  const auto inner = s.substr(1, s.size() - 2);
  return std::all_of(inner.begin(), inner.end(), is_ascii_alpha);
}

std::size_t scan_censored(std::string_view text, std::size_t pos) {
  std::size_t j = pos;
  std::size_t stars = 0, letters = 0;
  while (j < text.size() && (is_ascii_alpha(text[j]) || text[j] == '*')) {
    (text[j] == '*' ? stars : letters) += 1;
    ++j;
  }
  if (letters == 0 || stars < 2 || !boundary(text, j)) return 0;
  if (is_emphasis_shape(text.substr(pos, j - pos))) return 0;
  return j - pos;
}

std::size_t scan_emphasis(std::string_view text, std::size_t pos) {
  if (text[pos] != '*') return 0;
  std::size_t j = pos + 1;
  while (j < text.size() && is_ascii_alpha(text[j])) ++j;
  if (j == pos + 1 || j >= text.size() || text[j] != '*') return 0;
  ++j;
  return boundary(text, j) ? j - pos : 0;
}

// Alphanumerics with internal hyphens or apostrophes; at least one letter.
std::size_t scan_word(std::string_view text, std::size_t pos) {
  std::size_t j = pos;
  bool has_letter = false;
  while (j < text.size()) {
    if (is_ascii_alnum(text[j])) {
      has_letter = has_letter || is_ascii_alpha(text[j]);
      ++j;
    } else if ((text[j] == '-' || text[j] == '\'') && j > pos &&
               j + 1 < text.size() && is_ascii_alnum(text[j + 1])) {
      ++j;
    } else {
      break;
    }
  }
  return has_letter ? j - pos : 0;
}

std::size_t utf8_length(std::string_view text, std::size_t pos) {
  const auto lead = static_cast<unsigned char>(text[pos]);
  std::size_t len = 1;
  if ((lead & 0xE0) == 0xC0) {
    len = 2;
  } else if ((lead & 0xF0) == 0xE0) {
    len = 3;
  } else if ((lead & 0xF8) == 0xF0) {
    len = 4;
  }
  if (pos + len > text.size()) return 1;
  for (std::size_t k = 1; k < len; ++k) {
    if ((static_cast<unsigned char>(text[pos + k]) & 0xC0) != 0x80) return 1;
  }
  return len;
}

bool is_all_caps_word(std::string_view w) {
  return w.size() >= 2 && std::all_of(w.begin(), w.end(), is_upper);
}

void append_word(std::string word, TokenKind kind, const NgramStats* stats,
                 const NormalizeOptions& opts, std::string_view previous,
                 std::vector<std::string>& out) {
  word = to_lower(word);
  const bool elongated = collapse_elongation(word);
  if (opts.spell_correct && stats != nullptr &&
      std::all_of(word.begin(), word.end(), is_ascii_alpha) &&
      !stats->contains(word)) {
    SpellOptions so;
    so.max_edits = opts.max_edits;
    if (opts.bigram_rescoring && !previous.empty()) {
      so.previous = std::string(previous);
    }
    word = spell_correct(word, *stats, so);
  }
  out.push_back(std::move(word));
  if (elongated) out.emplace_back("<elongated>");
  if (kind == TokenKind::kAllCaps) out.emplace_back("<allcaps>");
}

void append_hashtag(std::string_view body, const NgramStats* stats,
                    const NormalizeOptions& opts,
                    std::vector<std::string>& out) {
  out.emplace_back("<hashtag>");
  if (!opts.drop_hashtag_body) {
    const std::string lowered = to_lower(body);
    std::size_t start = 0;
    while (start <= lowered.size()) {
      std::size_t us = lowered.find('_', start);
      if (us == std::string::npos) us = lowered.size();
      const std::string_view piece =
          std::string_view(lowered).substr(start, us - start);
      if (!piece.empty()) {
        if (opts.segment_hashtags && stats != nullptr) {
          auto seg = opts.bigram_rescoring
                         ? viterbi_segment_bigram(piece, *stats, opts.max_word_len)
                         : viterbi_segment(piece, *stats, opts.max_word_len);
          for (auto& p : seg.parts) out.push_back(std::move(p));
        } else {
          out.emplace_back(piece);
        }
      }
      start = us + 1;
    }
  }
  out.emplace_back("</hashtag>");
}

}  // namespace

std::string_view to_string(TokenKind kind) {
  switch (kind) {
    case TokenKind::kWord: return "Word";
    case TokenKind::kHashtag: return "Hashtag";
    case TokenKind::kUserHandle: return "UserHandle";
    case TokenKind::kUrl: return "Url";
    case TokenKind::kEmail: return "Email";
    case TokenKind::kNumber: return "Number";
    case TokenKind::kDate: return "Date";
    case TokenKind::kTime: return "Time";
    case TokenKind::kMoney: return "Money";
    case TokenKind::kEmoticon: return "Emoticon";
    case TokenKind::kPunctRun: return "PunctRun";
    case TokenKind::kEmphasis: return "Emphasis";
    case TokenKind::kCensored: return "Censored";
    case TokenKind::kAllCaps: return "AllCaps";
    case TokenKind::kTag: return "Tag";
    case TokenKind::kOther: return "Other";
  }
  return "Other";
}

std::string ProcessedText::join() const {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

const std::vector<std::string>& closed_tag_set() {
  static const std::vector<std::string> tags = {
      "<hashtag>", "</hashtag>", "<allcaps>", "<emphasis>", "<repeated>",
      "<elongated>", "<censored>", "<url>",    "<email>",    "<user>",
      "<number>",  "<date>",     "<time>",    "<money>",    "<happy>",
      "<sad>",     "<laugh>",    "<surprise>", "<annoyed>", "<kiss>",
      "<heart>"};
  return tags;
}

bool is_tag(std::string_view s) {
  const auto& tags = closed_tag_set();
  return std::find(tags.begin(), tags.end(), s) != tags.end();
}

EmoticonLexicon::EmoticonLexicon() {
  for (auto s : {":)", ":-)", "(:", "\\o/", "=)"}) add(s, "<happy>");
  for (auto s : {":D", ":-D", "xD", "XD"}) add(s, "<laugh>");
  for (auto s : {":(", ":-(", "):"}) add(s, "<sad>");
  for (auto s : {":o", ":O"}) add(s, "<surprise>");
  for (auto s : {":/", ":-/"}) add(s, "<annoyed>");
  add(":*", "<kiss>");
  add("<3", "<heart>");
}

EmoticonLexicon EmoticonLexicon::empty_lexicon() {
  return EmoticonLexicon(EmptyTag{});
}

void EmoticonLexicon::add(std::string surface, std::string tag) {
  if (surface.empty()) throw_invalid("emoticon surface is empty");
  if (!is_tag(tag)) throw_invalid("emoticon tag '" + tag + "' is not a known tag");
  for (auto& [s, t] : entries_) {
    if (s == surface) {
      t = std::move(tag);
      return;
    }
  }
  entries_.emplace_back(std::move(surface), std::move(tag));
  std::stable_sort(entries_.begin(), entries_.end(),
                   [](const auto& a, const auto& b) {
                     return a.first.size() > b.first.size();
                   });
}

void EmoticonLexicon::parse(const std::string& bytes) {
  const auto lines = split_lines(bytes);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto tab = lines[i].find('\t');
    if (tab == std::string::npos) {
      throw_format("lexicon line " + std::to_string(i + 1) + ": missing TAB");
    }
    add(lines[i].substr(0, tab), lines[i].substr(tab + 1));
  }
}

void EmoticonLexicon::load(const std::filesystem::path& path) {
  parse(read_file(path));
}

std::size_t EmoticonLexicon::match(std::string_view text,
                                   std::string* tag) const {
  for (const auto& [surface, t] : entries_) {
    if (text.substr(0, surface.size()) == surface &&
        boundary(text, surface.size())) {
      if (tag) *tag = t;
      return surface.size();
    }
  }
  return 0;
}

std::string_view EmoticonLexicon::tag_for(std::string_view surface) const {
  for (const auto& [s, t] : entries_) {
    if (s == surface) return t;
  }
  return {};
}

std::vector<Token> tokenize(std::string_view text,
                            const EmoticonLexicon& lexicon) {
  std::vector<Token> tokens;
  std::size_t pos = 0;
  while (pos < text.size()) {
    if (is_space(text[pos])) {
      ++pos;
      continue;
    }
    TokenKind kind = TokenKind::kOther;
    std::size_t len = 0;
    const auto attempt = [&](TokenKind k, std::size_t n) {
      if (len == 0 && n > 0) {
        kind = k;
        len = n;
      }
    };
    attempt(TokenKind::kTag, scan_tag(text, pos));
    attempt(TokenKind::kUrl, scan_url(text, pos));
    attempt(TokenKind::kEmail, scan_email(text, pos));
    attempt(TokenKind::kUserHandle, scan_prefixed_word(text, pos, '@'));
    attempt(TokenKind::kHashtag, scan_prefixed_word(text, pos, '#'));
    attempt(TokenKind::kMoney, scan_money(text, pos));
    attempt(TokenKind::kTime, scan_time(text, pos));
    attempt(TokenKind::kDate, scan_date(text, pos));
    attempt(TokenKind::kEmoticon, lexicon.match(text.substr(pos), nullptr));
    attempt(TokenKind::kNumber, scan_number(text, pos));
    attempt(TokenKind::kCensored, scan_censored(text, pos));
    attempt(TokenKind::kEmphasis, scan_emphasis(text, pos));
    if (len == 0) {
      if (const std::size_t w = scan_word(text, pos)) {
        const bool caps = is_all_caps_word(text.substr(pos, w));
        attempt(caps ? TokenKind::kAllCaps : TokenKind::kWord, w);
      }
    }
    if (len == 0 && is_ascii_punct(text[pos])) {
      std::size_t j = pos;
      while (j < text.size() && text[j] == text[pos]) ++j;
      attempt(TokenKind::kPunctRun, j - pos);
    }
    attempt(TokenKind::kOther, utf8_length(text, pos));
    tokens.push_back({std::string(text.substr(pos, len)), kind, pos, pos + len});
    pos += len;
  }
  return tokens;
}

std::vector<Token> tokenize(std::string_view text) {
  static const EmoticonLexicon lexicon;
  return tokenize(text, lexicon);
}

bool collapse_elongation(std::string& word) {
  std::string out;
  out.reserve(word.size());
  bool changed = false;
  std::size_t i = 0;
  while (i < word.size()) {
    std::size_t j = i;
    while (j < word.size() && word[j] == word[i]) ++j;
    if (j - i >= 3 && is_ascii_alpha(word[i])) {
      out += word[i];
      changed = true;
    } else {
      out.append(word, i, j - i);
    }
    i = j;
  }
  word = std::move(out);
  return changed;
}

ProcessedText normalize_annotate(const std::vector<Token>& tokens,
                                 const NgramStats* stats,
                                 const NormalizeOptions& opts,
                                 const EmoticonLexicon& lexicon) {
  ProcessedText result;
  auto& out = result.tokens;
  for (const auto& tok : tokens) {
    const std::string_view prev = out.empty() ? std::string_view() : out.back();
    switch (tok.kind) {
      case TokenKind::kWord:
      case TokenKind::kAllCaps:
        append_word(tok.surface, tok.kind, stats, opts, prev, out);
        break;
      case TokenKind::kEmphasis:
        append_word(tok.surface.substr(1, tok.surface.size() - 2),
                    TokenKind::kWord, stats, opts, prev, out);
        out.emplace_back("<emphasis>");
        break;
      case TokenKind::kHashtag:
        append_hashtag(std::string_view(tok.surface).substr(1), stats, opts, out);
        break;
      case TokenKind::kUserHandle: out.emplace_back("<user>"); break;
      case TokenKind::kUrl: out.emplace_back("<url>"); break;
      case TokenKind::kEmail: out.emplace_back("<email>"); break;
      case TokenKind::kNumber: out.emplace_back("<number>"); break;
      case TokenKind::kDate: out.emplace_back("<date>"); break;
      case TokenKind::kTime: out.emplace_back("<time>"); break;
      case TokenKind::kMoney: out.emplace_back("<money>"); break;
      case TokenKind::kCensored: out.emplace_back("<censored>"); break;
      case TokenKind::kEmoticon: {
        const auto tag = lexicon.tag_for(tok.surface);
        out.emplace_back(tag.empty() ? tok.surface : std::string(tag));
        break;
      }
      case TokenKind::kPunctRun:
        out.emplace_back(1, tok.surface.front());
        if (tok.surface.size() >= 2) out.emplace_back("<repeated>");
        break;
      case TokenKind::kTag:
      case TokenKind::kOther:
        out.push_back(tok.surface);
        break;
    }
  }
  return result;
}

Preprocessor::Preprocessor(std::shared_ptr<const NgramStats> stats,
                           NormalizeOptions opts, EmoticonLexicon lexicon)
    : stats_(std::move(stats)), opts_(opts), lexicon_(std::move(lexicon)) {}

ProcessedText Preprocessor::process(std::string_view text) const {
  return normalize_annotate(tokenize(text, lexicon_), stats_.get(), opts_,
                            lexicon_);
}

}  // namespace emopred
