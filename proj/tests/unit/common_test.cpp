#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "forge/common/digest.hpp"
#include "forge/common/error.hpp"
#include "forge/common/jsonl.hpp"
#include "forge/common/numeric.hpp"
#include "forge/common/parallel.hpp"
#include "forge/common/random.hpp"
#include "forge/common/tagged_text.hpp"
#include "forge/common/text.hpp"
#include "generators.hpp"

using namespace forge;

TEST(Digest, KnownVectors) {
    EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    EXPECT_TRUE(is_hex_digest(sha256_hex("x")));
    EXPECT_FALSE(is_hex_digest("ABC"));
}

TEST(Random, EngineMatchesStandardSequence) {
    // The standard fixes the 10000th output of a default-seeded mt19937_64.
    Rng rng(5489u);
    std::uint64_t v = 0;
    for (int i = 0; i < 10000; ++i) v = rng.next();
    EXPECT_EQ(v, 9981545732273789042ull);
}

TEST(Random, SplitMixReferenceValues) {
    // Reference outputs of SplitMix64 seeded with 0.
    std::uint64_t state = 0;
    EXPECT_EQ(splitmix64(state), 0xe220a8397b1dcdafull);
    EXPECT_EQ(splitmix64(state), 0x6e789e6aa1b965f4ull);
    EXPECT_EQ(splitmix64(state), 0x06c45d188009454full);
}

TEST(Random, DerivedSeedsDifferByLabelAndParent) {
    EXPECT_EQ(derive_seed(7, "a"), derive_seed(7, "a"));
    EXPECT_NE(derive_seed(7, "a"), derive_seed(7, "b"));
    EXPECT_NE(derive_seed(7, "a"), derive_seed(8, "a"));
}

TEST(Random, BelowStaysInRangeAndCoversIt) {
    Rng rng(1);
    std::vector<int> hits(7, 0);
    for (int i = 0; i < 7000; ++i) {
        auto v = rng.below(7);
        ASSERT_LT(v, 7u);
        ++hits[v];
    }
    for (int h : hits) EXPECT_GT(h, 800);
    EXPECT_THROW(rng.below(0), PreconditionError);
}

TEST(Random, UnitInHalfOpenInterval) {
    Rng rng(3);
    for (int i = 0; i < 10000; ++i) {
        double u = rng.unit();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
    }
}

TEST(Random, ShuffleIsPermutationAndSeeded) {
    std::vector<int> a(50), b;
    std::iota(a.begin(), a.end(), 0);
    b = a;
    Rng(11).shuffle(a);
    Rng(11).shuffle(b);
    EXPECT_EQ(a, b);
    auto sorted = a;
    std::sort(sorted.begin(), sorted.end());
    std::vector<int> expect(50);
    std::iota(expect.begin(), expect.end(), 0);
    EXPECT_EQ(sorted, expect);
    EXPECT_NE(a, expect);
}

TEST(Random, ChooseIndicesDistinctSortedAndReproducible) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        auto idx = choose_indices(100, 37, seed);
        ASSERT_EQ(idx.size(), 37u);
        ASSERT_TRUE(std::is_sorted(idx.begin(), idx.end()));
        ASSERT_EQ(std::set<std::size_t>(idx.begin(), idx.end()).size(), 37u);
        ASSERT_LT(idx.back(), 100u);
        ASSERT_EQ(idx, choose_indices(100, 37, seed));
    }
    auto all = choose_indices(5, 5, 9);
    EXPECT_EQ(all, (std::vector<std::size_t>{0, 1, 2, 3, 4}));
    EXPECT_THROW(choose_indices(3, 4, 0), PreconditionError);
}

TEST(Text, WhitespaceHelpers) {
    EXPECT_EQ(trim("  a b \n"), "a b");
    EXPECT_TRUE(is_blank(" \t\n"));
    EXPECT_FALSE(is_blank(" x "));
    EXPECT_EQ(normalize_whitespace("  a \t\n b  c "), "a b c");
}

TEST(Text, Utf8Counting) {
    EXPECT_EQ(utf8_length("abc"), 3u);
    EXPECT_EQ(utf8_length("头痛"), 2u);
    EXPECT_EQ(utf8_prefix("头痛abc", 3), "头痛a");
    EXPECT_EQ(utf8_prefix("ab", 10), "ab");
}

TEST(Text, SplitAndJoin) {
    auto lines = split_lines("a\r\nb\n\nc");
    EXPECT_EQ(lines, (std::vector<std::string>{"a", "b", "", "c"}));
    EXPECT_EQ(join({"x", "y", "z"}, ", "), "x, y, z");
    EXPECT_TRUE(starts_with_ci("Answer: B", "answer"));
}

TEST(Numeric, StableSumIsPermutationInvariant) {
    std::mt19937_64 gen(5);
    std::vector<double> v;
    for (int i = 0; i < 1000; ++i) v.push_back(static_cast<double>(gen() % 1000000) / 997.0 * ((i % 3) ? 1e-6 : 1e6));
    const double ref = stable_sum(v);
    for (int trial = 0; trial < 20; ++trial) {
        std::shuffle(v.begin(), v.end(), gen);
        ASSERT_EQ(stable_sum(v), ref);
    }
    EXPECT_EQ(stable_mean(std::vector<double>{}), 0.0);
    EXPECT_DOUBLE_EQ(stable_mean(std::vector<double>{1, 2, 3, 4}), 2.5);
}

TEST(Numeric, HalfUpFormatting) {
    EXPECT_EQ(format_half_up(4.595, 2), "4.60");
    EXPECT_EQ(format_half_up(4.594999, 2), "4.59");
    EXPECT_EQ(format_half_up(49.635, 2), "49.64");
    EXPECT_EQ(format_half_up(0.125, 2), "0.13");
    EXPECT_EQ(format_half_up(2.5, 0), "3");
    EXPECT_EQ(format_half_up(-1.005, 2), "-1.01");
    EXPECT_EQ(format_half_up(9.999, 2), "10.00");
    EXPECT_EQ(format_half_up(3.0, 2), "3.00");
}

TEST(TaggedText, RoundTrip) {
    std::vector<TaggedLine> lines{{"patient", "I feel sick"}, {"doctor", "Since when?"}};
    const std::string_view tags[] = {"patient", "doctor"};
    auto parsed = parse_tagged(render_tagged(lines), tags);
    ASSERT_TRUE(parsed);
    EXPECT_EQ(*parsed, lines);
}

TEST(TaggedText, PreambleContinuationAndTrailer) {
    const std::string_view tags[] = {"patient", "doctor"};
    auto parsed = parse_tagged("Sure, here it is:\n[patient] line one\nline two\n[doctor] ok\n[END]\nignored", tags);
    ASSERT_TRUE(parsed);
    ASSERT_EQ(parsed->size(), 2u);
    EXPECT_EQ((*parsed)[0].text, "line one\nline two");
}

TEST(TaggedText, Rejections) {
    const std::string_view tags[] = {"patient", "doctor"};
    EXPECT_FALSE(parse_tagged("[patient] a\n[doctor] b", tags));
    EXPECT_TRUE(parse_tagged("[patient] a\n[doctor] b", tags, false));
    EXPECT_FALSE(parse_tagged("[END]", tags));
    EXPECT_FALSE(parse_tagged("[patient]\n[doctor] b\n[END]", tags));
    EXPECT_FALSE(parse_tagged("[nurse] hi\n[END]", tags));
}

TEST(TaggedText, InputBlocks) {
    auto prompt = "Intro\n" + render_input_block("dialogue", "line a\nline b") + "\nOutro";
    auto body = extract_input_block(prompt, "dialogue");
    ASSERT_TRUE(body);
    EXPECT_EQ(*body, "line a\nline b");
    EXPECT_FALSE(extract_input_block(prompt, "case"));
}

TEST(Jsonl, ParseErrorCarriesLineNumber) {
    auto dir = testkit::scratch_dir("jsonl");
    write_text_atomic(dir / "x.jsonl", "{\"a\":1}\n\n{\"a\":2}\n{oops\n");
    try {
        read_jsonl(dir / "x.jsonl");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 4u);
    }
}

TEST(Jsonl, WriteReadRoundTrip) {
    auto dir = testkit::scratch_dir("jsonl");
    std::vector<json> records{{{"k", "v"}}, {{"n", 3}}};
    EXPECT_EQ(write_jsonl(dir / "nested" / "r.jsonl", records), 2u);
    EXPECT_EQ(read_jsonl(dir / "nested" / "r.jsonl"), records);
    EXPECT_TRUE(is_hex_digest(file_digest(dir / "nested" / "r.jsonl")));
}

TEST(Parallel, OrderedResultsAndFirstErrorByIndex) {
    std::vector<int> in(100);
    std::iota(in.begin(), in.end(), 0);
    auto out = parallel_map(in, 4, [](const int& x) { return x * 2; });
    for (int i = 0; i < 100; ++i) ASSERT_EQ(out[i], 2 * i);
    try {
        parallel_map(in, 4, [](const int& x) -> int {
            if (x == 70 || x == 30) throw Error("bad " + std::to_string(x));
            return x;
        });
        FAIL();
    } catch (const Error& e) {
        EXPECT_STREQ(e.what(), "bad 30");
    }
}
