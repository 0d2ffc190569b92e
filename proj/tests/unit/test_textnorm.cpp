#include <gtest/gtest.h>

#include <fstream>

#include "crs/textnorm.hpp"
#include "test_paths.hpp"

namespace crs {
namespace {

TEST(Tokenize, LowercasesAndSplitsOnPunctuation) {
    EXPECT_EQ(tokenize("Hello, World! It's 2013."), (TokenStream{"hello", "world", "it", "s", "2013"}));
}

TEST(Tokenize, KeepsRecSentinelAsOneToken) {
    EXPECT_EQ(tokenize("such as [REC]."), (TokenStream{"such", "as", "[REC]"}));
    EXPECT_EQ(tokenize("[rec][Rec]x"), (TokenStream{"[REC]", "[REC]", "x"}));
}

TEST(Tokenize, BrokenSentinelIsOrdinaryText) {
    EXPECT_EQ(tokenize("[REC x] [RE]"), (TokenStream{"rec", "x", "re"}));
}

TEST(Tokenize, EmptyAndSeparatorOnlyInputs) {
    EXPECT_TRUE(tokenize("").empty());
    EXPECT_TRUE(tokenize(" \t\n.,;!?").empty());
}

TEST(Tokenize, NonAsciiBytesSeparate) {
    EXPECT_EQ(tokenize("caf\xc3\xa9 na\xc3\xafve"), (TokenStream{"caf", "na", "ve"}));
}

TEST(Tokenize, StopwordsRemoveListedTokensOnly) {
    Stopwords sw({"the", "a"});
    EXPECT_EQ(tokenize("The cat and a [REC]", &sw), (TokenStream{"cat", "and", "[REC]"}));
}

TEST(Tokenize, TokenizeIntoAppends) {
    TokenStream out{"x"};
    tokenize_into("Y z", out);
    EXPECT_EQ(out, (TokenStream{"x", "y", "z"}));
    EXPECT_EQ(join_tokens(out), "x y z");
}

TEST(Stopwords, LoadsFileIgnoringBlankLines) {
    testing::TempDir dir;
    std::ofstream(dir / "sw.txt") << "the\n\nAnd\n  of  \n";
    const auto sw = Stopwords::load(dir / "sw.txt");
    EXPECT_EQ(sw.sorted(), (std::vector<std::string>{"and", "of", "the"}));
}

TEST(Stopwords, MissingFileThrows) { EXPECT_ANY_THROW(Stopwords::load("/nonexistent/stopwords.txt")); }

}  // namespace
}  // namespace crs
