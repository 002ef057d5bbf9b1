#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

namespace flm {

using TokenId = int;

inline constexpr TokenId kEosId = 0;
inline constexpr TokenId kUnkId = 1;
inline constexpr std::string_view kEosToken = "<eos>";
inline constexpr std::string_view kUnkToken = "<unk>";
inline constexpr std::size_t kSpecialTokenCount = 2;

// Lowercased word-level tokens; runs of whitespace separate tokens and every
// ASCII punctuation character is a token of its own.
std::vector<std::string> tokenize(std::string_view text);
std::string detokenize(std::span<const std::string> tokens);
// A word as a CSV field, quoted when it holds a comma or a quote.
std::string csv_field(std::string_view word);

class Vocabulary {
 public:
  // Only the special tokens.
  Vocabulary();
  // Specials followed by `words` in the given order. Words must be unique and
  // must not collide with the special tokens.
  explicit Vocabulary(const std::vector<std::string>& words);

  std::size_t size() const { return id_to_word_.size(); }
  const std::vector<std::string>& words() const { return id_to_word_; }
  const std::string& word(TokenId id) const;
  // Unknown id for out-of-vocabulary words.
  TokenId id(std::string_view word) const;
  std::optional<TokenId> find(std::string_view word) const;
  bool is_special(TokenId id) const { return id >= 0 && id < static_cast<TokenId>(kSpecialTokenCount); }

  std::vector<TokenId> encode(std::string_view text) const;
  // Space-joined words; a trailing end token is dropped.
  std::string decode(std::span<const TokenId> ids) const;
  // SHA-256 over the ordered word list.
  std::string digest() const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.id_to_word_ == b.id_to_word_;
  }

 private:
  std::vector<std::string> id_to_word_;
  std::unordered_map<std::string, TokenId> word_to_id_;
};

struct Document {
  int year = 0;
  std::vector<TokenId> tokens;  // empty until the corpus is tokenized
  std::string raw_text;
};

// Documents grouped by integer year. Years form a contiguous range (gaps hold
// no documents). Immutable once handed out by the builders below.
class TemporalCorpus {
 public:
  TemporalCorpus() = default;

  // Adds an untokenized document. Returns false (and adds nothing) when the
  // text contains no tokens.
  bool add(int year, std::string raw_text);

  std::vector<int> years() const;
  bool empty() const { return docs_.empty(); }
  bool has_year(int year) const;
  const std::vector<Document>& docs(int year) const;
  std::size_t document_count() const;
  std::size_t token_count() const;
  std::vector<const Document*> all_docs() const;

  bool tokenized() const { return vocab_ != nullptr; }
  const Vocabulary& vocabulary() const;
  std::shared_ptr<const Vocabulary> vocabulary_ptr() const { return vocab_; }

  // Copy whose documents carry token ids under `vocab`.
  TemporalCorpus tokenized_with(std::shared_ptr<const Vocabulary> vocab) const;
  // Copy restricted to the listed years (others dropped).
  TemporalCorpus subset(const std::set<int>& years) const;

 private:
  std::map<int, std::vector<Document>> docs_;
  std::shared_ptr<const Vocabulary> vocab_;
};

struct IngestReport {
  std::size_t accepted = 0;
  std::size_t malformed = 0;            // unparseable lines/entries or bad field types
  std::size_t missing_fields = 0;       // entries lacking abstract/text or year
  std::size_t dropped_non_english = 0;  // failed the character-ratio filter
  std::vector<std::string> warnings;
};

struct IngestResult {
  TemporalCorpus corpus;
  IngestReport report;
  nlohmann::json header;  // artifact header line, if the file carried one
};

inline constexpr std::string_view kCorpusFormat = "futurelm-corpus";
inline constexpr int kCorpusFormatVersion = 1;

// One JSON record per line with a string `text` and an integer year field.
// A first line carrying a "format" key is treated as an artifact header and
// its version is checked.
IngestResult ingest_jsonl(const std::filesystem::path& path, std::string_view year_field = "year",
                          std::string_view text_field = "text");
// Bibliography entries with `abstract` and `year` fields.
IngestResult ingest_bibtex(const std::filesystem::path& path);

// Fraction of alphabetic characters that are ASCII letters; non-ASCII code
// points outside the common punctuation/symbol blocks count as alphabetic.
// Returns 0 when the text has no alphabetic characters.
double ascii_letter_ratio(std::string_view utf8);
bool looks_english(std::string_view utf8, double min_ratio = 0.9);

void write_jsonl(const std::filesystem::path& path, const TemporalCorpus& corpus,
                 const nlohmann::json& header);

struct VocabOptions {
  std::size_t max_size = 5000;
  std::size_t min_count = 1;
};

// Ranks words by corpus-wide count, ties broken lexicographically. Words below
// `min_count` are left out and will encode to the unknown id.
Vocabulary build_vocab(const TemporalCorpus& corpus, std::size_t max_size, std::size_t min_count);

class FrequencyTable {
 public:
  FrequencyTable() = default;
  FrequencyTable(std::vector<int> years, std::size_t vocab_size);

  const std::vector<int>& years() const { return years_; }
  std::size_t vocab_size() const { return vocab_size_; }
  bool has_year(int year) const;
  // Zero for years outside the table.
  std::uint64_t count(int year, TokenId w) const;
  std::uint64_t total(int year) const;
  std::uint64_t corpus_count(TokenId w) const;
  std::span<const std::uint64_t> year_counts(int year) const;

  void add(int year, TokenId w, std::uint64_t n = 1);

 private:
  const std::vector<std::uint64_t>* row(int year) const;

  std::vector<int> years_;
  std::size_t vocab_size_ = 0;
  std::map<int, std::vector<std::uint64_t>> counts_;
  std::map<int, std::uint64_t> totals_;
};

FrequencyTable frequency_table(const TemporalCorpus& corpus);

enum class StopwordSource { kThreshold, kFile, kMerged };

struct StopwordList {
  std::set<TokenId> ids;
  StopwordSource source = StopwordSource::kThreshold;

  bool contains(TokenId id) const { return ids.count(id) != 0; }
  bool empty() const { return ids.empty(); }
};

// Candidates are non-special words whose corpus-wide count exceeds
// `threshold`; an override file of `+word` / `-word` lines then forces words
// in or out. Unknown words in the override file are reported in `warnings`
// and ignored.
StopwordList curate_stopwords(const FrequencyTable& freq, const Vocabulary& vocab,
                              std::uint64_t threshold,
                              const std::optional<std::filesystem::path>& override_file = std::nullopt,
                              std::vector<std::string>* warnings = nullptr);
StopwordList stopwords_from_words(const Vocabulary& vocab, const std::vector<std::string>& words,
                                  std::vector<std::string>* warnings = nullptr);

struct YearSplit {
  TemporalCorpus train;
  TemporalCorpus dev;
  TemporalCorpus test;
  std::shared_ptr<const Vocabulary> vocab;
};

// Builds the vocabulary from the training years only and tokenizes all three
// slices with it. dev and test years must come after every training year.
YearSplit split_by_year(const TemporalCorpus& corpus, const std::set<int>& train_years, int dev_year,
                        int test_year, const VocabOptions& vocab_options = {});

}  // namespace flm
