// Copyright 2026 The DimCim Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <fstream>
#include <thread>

#include "dimcim/errors.hpp"
#include "dimcim/io.hpp"
#include "dimcim/text.hpp"
#include "test_support.hpp"

namespace dimcim {
namespace {

using testing::TempDir;

TEST(Text, LowerAndTrim) {
  EXPECT_EQ(text::to_lower("A Red CAFÉ"), "a red cafÉ");
  EXPECT_EQ(text::trim("  \t hi there \n"), "hi there");
  EXPECT_EQ(text::trim("   "), "");
}

TEST(Text, TokenizeSplitsOnAsciiPunctuation) {
  EXPECT_EQ(text::tokenize("A café-colored, SHORT-haired dog!"),
            (std::vector<std::string>{"a", "café", "colored", "short", "haired", "dog"}));
  EXPECT_TRUE(text::tokenize(" ,.;").empty());
}

TEST(Text, ContainsPhraseIsWholeWord) {
  EXPECT_TRUE(text::contains_phrase("A bed with pillows", "with pillows"));
  EXPECT_FALSE(text::contains_phrase("A bed without pillows", "with pillows"));
  EXPECT_FALSE(text::contains_phrase("a carpet", "car"));
  EXPECT_TRUE(text::contains_phrase("Metal Table", "metal table"));
  EXPECT_FALSE(text::contains_phrase("anything", ""));
}

TEST(Text, ContainsNounAcceptsPlural) {
  EXPECT_TRUE(text::contains_noun("two dogs on grass", "dog"));
  EXPECT_TRUE(text::contains_noun("red buses", "bus"));
  EXPECT_TRUE(text::contains_noun("fire hydrants", "fire hydrant"));
  EXPECT_FALSE(text::contains_phrase("two dogs on grass", "dog"));
  EXPECT_FALSE(text::contains_noun("hotdogs", "dog"));
}

TEST(Text, Singularize) {
  EXPECT_EQ(text::singularize("dogs"), "dog");
  EXPECT_EQ(text::singularize("benches"), "bench");
  EXPECT_EQ(text::singularize("puppies"), "puppy");
  EXPECT_EQ(text::singularize("bus"), "bus");
  EXPECT_EQ(text::singularize("glass"), "glass");
  EXPECT_EQ(text::singularize("children"), "child");
  EXPECT_EQ(text::singularize("gas"), "gas");
}

TEST(Text, IndefiniteArticle) {
  EXPECT_EQ(text::indefinite_article("orange"), "an");
  EXPECT_EQ(text::indefinite_article("metal"), "a");
  EXPECT_EQ(text::indefinite_article("unicorn"), "a");
  EXPECT_EQ(text::indefinite_article("hour"), "an");
  EXPECT_EQ(text::indefinite_article(""), "a");
}

TEST(Text, StartsWithWord) {
  EXPECT_TRUE(text::starts_with_word("without pillows", "without"));
  EXPECT_TRUE(text::starts_with_word("no leaves", "no "));
  EXPECT_FALSE(text::starts_with_word("nothing", "no "));
  EXPECT_FALSE(text::starts_with_word("snow", "no"));
  EXPECT_FALSE(text::starts_with_word("with pillows", "without"));
}

TEST(Text, Fnv1aKnownVectors) {
  EXPECT_EQ(text::fnv1a(""), 14695981039346656037ull);
  EXPECT_EQ(text::fnv1a("a"), 0xaf63dc4c8601ec8cull);
  EXPECT_EQ(text::fnv1a("foobar"), 0x85944171f73967e8ull);
}

TEST(Text, CsvFieldQuotesOnlyWhenNeeded) {
  EXPECT_EQ(text::csv_field("plain"), "plain");
  EXPECT_EQ(text::csv_field("a,b"), "\"a,b\"");
  EXPECT_EQ(text::csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
}

TEST(Text, FormatDoubleRoundTrips) {
  EXPECT_EQ(text::format_double(0.1), "0.1");
  EXPECT_EQ(text::format_double(-0.0), "0");
  EXPECT_EQ(text::format_double(std::nan("")), "nan");
  const double v = 0.7999999999999996;
  EXPECT_EQ(std::stod(text::format_double(v)), v);
  EXPECT_EQ(text::join({"a", "b", "c"}, ", "), "a, b, c");
}

TEST(Io, Sha256KnownVectors) {
  EXPECT_EQ(io::sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(io::sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Io, AtomicWriteAndRead) {
  TempDir dir;
  const auto path = dir / "nested" / "file.txt";
  io::write_file_atomic(path, "hello");
  EXPECT_EQ(io::read_file(path), "hello");
  io::write_file_atomic(path, "again");
  EXPECT_EQ(io::read_file(path), "again");
  EXPECT_FALSE(std::filesystem::exists(path.string() + ".tmp"));
  EXPECT_THROW(io::read_file(dir / "missing.txt"), IoError);
}

TEST(Io, JsonlRoundTripAndErrors) {
  TempDir dir;
  const auto path = dir / "x.jsonl";
  io::write_file_atomic(path, io::to_jsonl({{{"a", 1}}, {{"b", "two"}}}) + "\n");
  const auto records = io::read_jsonl(path);
  ASSERT_EQ(records.size(), 2u);
  EXPECT_EQ(records[1]["b"], "two");

  io::write_file_atomic(path, "{\"a\":1}\n{broken\n{\"c\":3}\n");
  EXPECT_THROW(io::read_jsonl(path), ParseError);
  EXPECT_THROW(io::read_jsonl(path, true), ParseError);

  io::write_file_atomic(path, "{\"a\":1}\n{\"b\":");
  EXPECT_THROW(io::read_jsonl(path), ParseError);
  EXPECT_EQ(io::read_jsonl(path, true).size(), 1u);
}

TEST(Io, AppenderRepairsTornTail) {
  TempDir dir;
  const auto path = dir / "log.jsonl";
  io::write_file_atomic(path, "{\"a\":1}\n{\"b\":");
  {
    io::JsonlAppender log(path, false);
    log.append({{"c", 3}});
  }
  const auto records = io::read_jsonl(path);
  ASSERT_EQ(records.size(), 2u);
  EXPECT_EQ(records[1]["c"], 3);
}

TEST(Io, AppenderIsThreadSafe) {
  TempDir dir;
  const auto path = dir / "log.jsonl";
  {
    io::JsonlAppender log(path, true);
    std::vector<std::thread> threads;
    for (int t = 0; t < 4; ++t) {
      threads.emplace_back([&log, t] {
        for (int i = 0; i < 50; ++i) log.append({{"t", t}, {"i", i}});
      });
    }
    for (auto& th : threads) th.join();
  }
  EXPECT_EQ(io::read_jsonl(path).size(), 200u);
}

}  // namespace
}  // namespace dimcim
