#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "emopred/segment.hpp"

namespace emopred {

enum class TokenKind {
  kWord,
  kHashtag,
  kUserHandle,
  kUrl,
  kEmail,
  kNumber,
  kDate,
  kTime,
  kMoney,
  kEmoticon,
  kPunctRun,
  kEmphasis,
  kCensored,
  kAllCaps,
  // An annotation tag such as "<allcaps>"; lets processed output be fed back
  // through the tokenizer unchanged.
  kTag,
  kOther,
};

std::string_view to_string(TokenKind kind);

struct Token {
  std::string surface;
  TokenKind kind = TokenKind::kOther;
  // Byte offsets [begin, end) into the source string.
  std::size_t begin = 0;
  std::size_t end = 0;
};

struct ProcessedText {
  std::vector<std::string> tokens;

  std::string join() const;
};

// Surface -> tag map for emoticons. Matching is longest-surface-first.
class EmoticonLexicon {
 public:
  // The built-in minimal lexicon.
  EmoticonLexicon();

  static EmoticonLexicon empty_lexicon();
  // "surface TAB tag" per line, merged over the current entries.
  void load(const std::filesystem::path& path);
  void parse(const std::string& bytes);
  void add(std::string surface, std::string tag);

  // Longest entry that is a prefix of `text`; returns its length or 0.
  std::size_t match(std::string_view text, std::string* tag) const;
  std::string_view tag_for(std::string_view surface) const;

 private:
  struct EmptyTag {};
  explicit EmoticonLexicon(EmptyTag) {}

  std::vector<std::pair<std::string, std::string>> entries_;
};

// The closed set of tags that processed output may contain.
const std::vector<std::string>& closed_tag_set();
bool is_tag(std::string_view s);

std::vector<Token> tokenize(std::string_view text,
                            const EmoticonLexicon& lexicon);
std::vector<Token> tokenize(std::string_view text);

struct NormalizeOptions {
  bool segment_hashtags = true;
  bool spell_correct = false;
  bool bigram_rescoring = false;
  std::size_t max_edits = 2;
  std::size_t max_word_len = kDefaultMaxWordLen;
  // Hashtag bodies are dropped, keeping only the enclosing tags. Used when
  // counting word statistics so that unsplit hashtags do not become words.
  bool drop_hashtag_body = false;
};

// `stats` may be null; hashtags are then kept as a single lowercased word and
// spell correction is skipped.
ProcessedText normalize_annotate(const std::vector<Token>& tokens,
                                 const NgramStats* stats,
                                 const NormalizeOptions& opts,
                                 const EmoticonLexicon& lexicon);

// Collapses runs of three or more identical letters to one letter. Returns
// true when anything was collapsed.
bool collapse_elongation(std::string& word);

class Preprocessor {
 public:
  Preprocessor() = default;
  Preprocessor(std::shared_ptr<const NgramStats> stats, NormalizeOptions opts,
               EmoticonLexicon lexicon = EmoticonLexicon());

  ProcessedText process(std::string_view text) const;
  std::string process_line(std::string_view text) const {
    return process(text).join();
  }

  const NormalizeOptions& options() const { return opts_; }
  const NgramStats* stats() const { return stats_.get(); }

 private:
  std::shared_ptr<const NgramStats> stats_;
  NormalizeOptions opts_;
  EmoticonLexicon lexicon_;
};

}  // namespace emopred
