#include <gtest/gtest.h>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <memory>
#include <random>
#include <set>

#include "emopred/config.hpp"
#include "emopred/error.hpp"
#include "emopred/pipeline.hpp"
#include "emopred/preprocess.hpp"
#include "test_util.hpp"

using namespace emopred;

namespace {

const char* kTableInput =
    "The *new* season of #TwinPeaks is coming on May 21, 2017. CANT WAIT \\o/ "
    "!!! #tvseries #davidlynch :D";
const char* kTableOutput =
    "the new <emphasis> season of <hashtag> twin peaks </hashtag> is coming on "
    "<date> . cant <allcaps> wait <allcaps> <happy> ! <repeated> <hashtag> tv "
    "series </hashtag> <hashtag> david lynch </hashtag> <laugh>";

std::shared_ptr<const NgramStats> table_stats() {
  auto s = std::make_shared<NgramStats>();
  for (const char* w : {"twin", "peaks", "tv", "series", "david", "lynch"}) {
    s->set_unigram(w, 50);
  }
  for (const char* w : {"the", "a", "is", "of", "on"}) s->set_unigram(w, 200);
  return s;
}

Preprocessor table_preprocessor() {
  return Preprocessor(table_stats(), NormalizeOptions{});
}

std::vector<std::string> process(const Preprocessor& p, std::string_view text) {
  return p.process(text).tokens;
}

bool has_token(const std::vector<Token>& toks, TokenKind kind,
               std::string_view surface) {
  return std::any_of(toks.begin(), toks.end(), [&](const Token& t) {
    return t.kind == kind && t.surface == surface;
  });
}

}  // namespace

TEST(Preprocess, TableRowGolden) {
  EXPECT_EQ(table_preprocessor().process_line(kTableInput), kTableOutput);
}

TEST(Tokenize, TableRowKinds) {
  const std::string src =
      "The *new* season of #TwinPeaks is coming on May 21, 2017. CANT WAIT "
      "\\o/ !!!";
  const auto toks = tokenize(src);
  EXPECT_TRUE(has_token(toks, TokenKind::kEmphasis, "*new*"));
  EXPECT_TRUE(has_token(toks, TokenKind::kHashtag, "#TwinPeaks"));
  EXPECT_TRUE(has_token(toks, TokenKind::kDate, "May 21, 2017"));
  EXPECT_TRUE(has_token(toks, TokenKind::kAllCaps, "CANT"));
  EXPECT_TRUE(has_token(toks, TokenKind::kAllCaps, "WAIT"));
  EXPECT_TRUE(has_token(toks, TokenKind::kEmoticon, "\\o/"));
  EXPECT_TRUE(has_token(toks, TokenKind::kPunctRun, "!!!"));
}

TEST(Tokenize, Empty) {
  EXPECT_TRUE(tokenize("").empty());
  EXPECT_TRUE(tokenize("   \t ").empty());
  EXPECT_TRUE(table_preprocessor().process("").tokens.empty());
}

TEST(Tokenize, MoneyWordTime) {
  const auto toks = tokenize("$10 at 4:30pm");
  ASSERT_EQ(toks.size(), 3u);
  EXPECT_EQ(toks[0].kind, TokenKind::kMoney);
  EXPECT_EQ(toks[0].surface, "$10");
  EXPECT_EQ(toks[1].kind, TokenKind::kWord);
  EXPECT_EQ(toks[1].surface, "at");
  EXPECT_EQ(toks[2].kind, TokenKind::kTime);
  EXPECT_EQ(toks[2].surface, "4:30pm");
}

TEST(Tokenize, DatesTimesMoney) {
  const Preprocessor p = table_preprocessor();
  EXPECT_EQ(p.process_line("07/11/2011"), "<date>");
  EXPECT_EQ(p.process_line("April 23rd"), "<date>");
  EXPECT_EQ(p.process_line("11:00 am"), "<time>");
  EXPECT_EQ(p.process_line("$5.99 or 5.5k\xE2\x82\xAC or \xC2\xA3" "3m"),
            "<money> or <money> or <money>");
  EXPECT_EQ(p.process_line("42 and 3.14"), "<number> and <number>");
}

TEST(Tokenize, AllCapsNeedsTwoLetters) {
  const auto toks = tokenize("I A OK");
  ASSERT_EQ(toks.size(), 3u);
  EXPECT_EQ(toks[0].kind, TokenKind::kWord);
  EXPECT_EQ(toks[1].kind, TokenKind::kWord);
  EXPECT_EQ(toks[2].kind, TokenKind::kAllCaps);
}

TEST(Tokenize, SpansOrderedAndReconstruct) {
  std::mt19937_64 rng(3);
  const std::vector<std::string> pieces = {
      "Hello", "WORLD", "#TagHere", "@bob", "http://x.y/z", "a@b.com", ":)",
      "!!!",   "$3",    "s**t",     "*bold*", "12:30", "soooo", "\xF0\x9F\x98\x82",
      ",",     "x",     "\t",       "  "};
  for (int trial = 0; trial < 300; ++trial) {
    std::string src;
    const int n = static_cast<int>(rng() % 10);
    for (int i = 0; i < n; ++i) {
      src += pieces[rng() % pieces.size()];
      if (rng() % 3) src += ' ';
    }
    const auto toks = tokenize(src);
    std::size_t prev_end = 0;
    for (const auto& t : toks) {
      ASSERT_LE(prev_end, t.begin) << src;
      ASSERT_LT(t.begin, t.end) << src;
      EXPECT_EQ(src.substr(t.begin, t.end - t.begin), t.surface);
      for (std::size_t k = prev_end; k < t.begin; ++k) {
        EXPECT_TRUE(std::isspace(static_cast<unsigned char>(src[k]))) << src;
      }
      prev_end = t.end;
    }
    for (std::size_t k = prev_end; k < src.size(); ++k) {
      EXPECT_TRUE(std::isspace(static_cast<unsigned char>(src[k]))) << src;
    }
  }
}

TEST(Normalize, Hello) {
  EXPECT_EQ(process(table_preprocessor(), "HELLO"),
            (std::vector<std::string>{"hello", "<allcaps>"}));
}

TEST(Normalize, UserAndUrl) {
  EXPECT_EQ(process(table_preprocessor(), "@user http://a.b"),
            (std::vector<std::string>{"<user>", "<url>"}));
  EXPECT_EQ(process(table_preprocessor(), "mail me@x.org"),
            (std::vector<std::string>{"mail", "<email>"}));
}

TEST(Normalize, ElongatedCensoredRepeated) {
  const Preprocessor p = table_preprocessor();
  EXPECT_EQ(process(p, "soooo"),
            (std::vector<std::string>{"so", "<elongated>"}));
  EXPECT_EQ(process(p, "s**t"), (std::vector<std::string>{"<censored>"}));
  EXPECT_EQ(process(p, "??"), (std::vector<std::string>{"?", "<repeated>"}));
  EXPECT_EQ(process(p, "!"), (std::vector<std::string>{"!"}));
}

TEST(Normalize, CollapseElongation) {
  std::string w = "heyyyy";
  EXPECT_TRUE(collapse_elongation(w));
  EXPECT_EQ(w, "hey");
  w = "hello";
  EXPECT_FALSE(collapse_elongation(w));
  EXPECT_EQ(w, "hello");
}

TEST(Normalize, HashtagWithoutStatsIsOneWord) {
  const Preprocessor p;
  EXPECT_EQ(process(p, "#TwinPeaks"),
            (std::vector<std::string>{"<hashtag>", "twinpeaks", "</hashtag>"}));
}

TEST(Normalize, Idempotent) {
  const Preprocessor p = table_preprocessor();
  const std::vector<std::string> inputs = {
      kTableInput, "HELLO @user http://a.b :( <3", "soooo s**t ?? $10 at 4:30pm",
      "#davidlynch *wow* xD :-/ :o :*"};
  for (const auto& in : inputs) {
    const ProcessedText once = p.process(in);
    EXPECT_EQ(p.process(once.join()).tokens, once.tokens) << in;
  }
}

TEST(Normalize, OutputAlphabet) {
  const Preprocessor p = table_preprocessor();
  std::mt19937_64 rng(11);
  const std::vector<std::string> pieces = {
      kTableInput, "HeLLo", "WOW", "#CamelCase", "@Bob", "https://t.co/X",
      ":)", ":(", "XD", "<3", "!!!", "...", "$20", "10:45 PM", "Jan 3",
      "s**t", "*hi*", "cooool", "don't", "Z"};
  const auto& tags = closed_tag_set();
  const std::set<std::string> tagset(tags.begin(), tags.end());
  for (int trial = 0; trial < 200; ++trial) {
    std::string src;
    for (int i = 0; i < 6; ++i) src += pieces[rng() % pieces.size()] + " ";
    for (const auto& tok : process(p, src)) {
      if (tok.front() == '<' && tok.size() > 1) {
        EXPECT_TRUE(tagset.count(tok)) << tok;
        continue;
      }
      for (char c : tok) {
        EXPECT_FALSE(std::isupper(static_cast<unsigned char>(c))) << tok;
      }
    }
  }
}

TEST(Normalize, Deterministic) {
  const Preprocessor a = table_preprocessor();
  const Preprocessor b = table_preprocessor();
  EXPECT_EQ(a.process(kTableInput).tokens, b.process(kTableInput).tokens);
}

TEST(Normalize, SpellCorrectOnlyUnknownWords) {
  auto s = std::make_shared<NgramStats>();
  s->set_unigram("hello", 100);
  s->set_unigram("world", 100);
  NormalizeOptions opts;
  opts.spell_correct = true;
  opts.max_edits = 1;
  const Preprocessor p(s, opts);
  EXPECT_EQ(p.process_line("helo world qzqzq"), "hello world qzqzq");
}

TEST(EmoticonLexicon, BuiltinAndFile) {
  const EmoticonLexicon lex;
  EXPECT_EQ(lex.tag_for(":D"), "<laugh>");
  EXPECT_EQ(lex.tag_for("\\o/"), "<happy>");
  EXPECT_EQ(lex.tag_for("<3"), "<heart>");
  test::TempDir dir;
  {
    std::ofstream f(dir / "emo.tsv");
    f << ";)\t<happy>\n";
  }
  EmoticonLexicon ext;
  ext.load(dir / "emo.tsv");
  EXPECT_EQ(ext.tag_for(";)"), "<happy>");
  EXPECT_EQ(ext.tag_for(":)"), "<happy>");
  const Preprocessor p(nullptr, NormalizeOptions{}, ext);
  EXPECT_EQ(p.process_line("ok ;)"), "ok <happy>");
}

TEST(EmoticonLexicon, Errors) {
  EmoticonLexicon lex;
  EXPECT_THROW(lex.parse(":)\n"), Error);
  EXPECT_THROW(lex.load("/nonexistent/emo.tsv"), Error);
}

TEST(Preprocess, GoldenFromCorpusStats) {
  test::TempDir dir;
  RunConfig cfg;
  cfg.set("input", EMOPRED_TEST_DATA "/golden_corpus.txt");
  cfg.set("output", (dir / "stats.txt").string());
  run_stats(cfg, [](std::string_view) {});
  RunConfig pre;
  pre.set("stats", (dir / "stats.txt").string());
  EXPECT_EQ(make_preprocessor(pre).process_line(kTableInput), kTableOutput);
}
