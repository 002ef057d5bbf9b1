#include "futurelm/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "futurelm/checkpoint.hpp"
#include "futurelm/errors.hpp"

namespace flm {

// ---------------------------------------------------------------------------
// Tokenization

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (c < 0x80 && std::isspace(c)) {
      flush();
    } else if (c < 0x80 && std::ispunct(c)) {
      flush();
      out.emplace_back(1, ch);
    } else {
      cur.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
    }
  }
  flush();
  return out;
}

std::string detokenize(std::span<const std::string> tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out.push_back(' ');
    out += t;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

Vocabulary::Vocabulary(const std::vector<std::string>& words) {
  id_to_word_.emplace_back(kEosToken);
  id_to_word_.emplace_back(kUnkToken);
  for (const auto& w : words) id_to_word_.push_back(w);
  for (std::size_t i = 0; i < id_to_word_.size(); ++i) {
    if (!word_to_id_.emplace(id_to_word_[i], static_cast<TokenId>(i)).second) {
      throw ContractError("vocabulary word '" + id_to_word_[i] + "' appears twice");
    }
  }
}

const std::string& Vocabulary::word(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= id_to_word_.size()) {
    throw ContractError("token id " + std::to_string(id) + " outside vocabulary of size " +
                        std::to_string(size()));
  }
  return id_to_word_[id];
}

TokenId Vocabulary::id(std::string_view word) const { return find(word).value_or(kUnkId); }

std::optional<TokenId> Vocabulary::find(std::string_view word) const {
  auto it = word_to_id_.find(std::string(word));
  if (it == word_to_id_.end()) return std::nullopt;
  return it->second;
}

std::vector<TokenId> Vocabulary::encode(std::string_view text) const {
  std::vector<TokenId> ids;
  for (const auto& t : tokenize(text)) ids.push_back(id(t));
  return ids;
}

std::string Vocabulary::decode(std::span<const TokenId> ids) const {
  std::vector<std::string> words;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] == kEosId && i + 1 == ids.size()) break;
    words.push_back(word(ids[i]));
  }
  return detokenize(words);
}

std::string Vocabulary::digest() const {
  std::string joined;
  for (const auto& w : id_to_word_) {
    joined += w;
    joined.push_back('\n');
  }
  return sha256_hex(joined);
}

// ---------------------------------------------------------------------------
// TemporalCorpus

bool TemporalCorpus::add(int year, std::string raw_text) {
  Document doc;
  doc.year = year;
  if (vocab_) {
    doc.tokens = vocab_->encode(raw_text);
    if (doc.tokens.empty()) return false;
  } else if (tokenize(raw_text).empty()) {
    return false;
  }
  doc.raw_text = std::move(raw_text);
  docs_[year].push_back(std::move(doc));
  return true;
}

std::vector<int> TemporalCorpus::years() const {
  std::vector<int> ys;
  if (docs_.empty()) return ys;
  for (int y = docs_.begin()->first; y <= docs_.rbegin()->first; ++y) ys.push_back(y);
  return ys;
}

bool TemporalCorpus::has_year(int year) const {
  return !docs_.empty() && year >= docs_.begin()->first && year <= docs_.rbegin()->first;
}

const std::vector<Document>& TemporalCorpus::docs(int year) const {
  static const std::vector<Document> kNone;
  auto it = docs_.find(year);
  return it == docs_.end() ? kNone : it->second;
}

std::size_t TemporalCorpus::document_count() const {
  std::size_t n = 0;
  for (const auto& [_, ds] : docs_) n += ds.size();
  return n;
}

std::size_t TemporalCorpus::token_count() const {
  std::size_t n = 0;
  for (const auto& [_, ds] : docs_) {
    for (const auto& d : ds) n += d.tokens.size();
  }
  return n;
}

std::vector<const Document*> TemporalCorpus::all_docs() const {
  std::vector<const Document*> out;
  for (const auto& [_, ds] : docs_) {
    for (const auto& d : ds) out.push_back(&d);
  }
  return out;
}

const Vocabulary& TemporalCorpus::vocabulary() const {
  if (!vocab_) throw ContractError("corpus has not been tokenized against a vocabulary");
  return *vocab_;
}

TemporalCorpus TemporalCorpus::tokenized_with(std::shared_ptr<const Vocabulary> vocab) const {
  if (!vocab) throw ContractError("tokenized_with: null vocabulary");
  TemporalCorpus out;
  out.vocab_ = vocab;
  for (const auto& [year, ds] : docs_) {
    auto& dst = out.docs_[year];
    for (const auto& d : ds) {
      Document copy{year, vocab->encode(d.raw_text), d.raw_text};
      dst.push_back(std::move(copy));
    }
  }
  return out;
}

TemporalCorpus TemporalCorpus::subset(const std::set<int>& years) const {
  TemporalCorpus out;
  out.vocab_ = vocab_;
  for (const auto& [year, ds] : docs_) {
    if (years.count(year) != 0) out.docs_[year] = ds;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ingestion

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error while reading '" + path.string() + "'");
  return ss.str();
}

// Decodes one UTF-8 code point starting at s[i]; advances i. Invalid bytes
// decode to U+FFFD and consume one byte.
char32_t next_code_point(std::string_view s, std::size_t& i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  auto cont = [&](std::size_t k) -> int {
    if (i + k >= s.size()) return -1;
    const auto b = static_cast<unsigned char>(s[i + k]);
    return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
  };
  if (b0 < 0x80) {
    ++i;
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
    ++i;
    return 0xFFFD;
  }
  for (int k = 1; k < len; ++k) {
    const int c = cont(k);
    if (c < 0) {
      ++i;
      return 0xFFFD;
    }
    cp = (cp << 6) | static_cast<char32_t>(c);
  }
  i += len;
  return cp;
}

bool is_symbol_or_punct(char32_t cp) {
  return (cp >= 0x80 && cp <= 0xBF) || cp == 0xD7 || cp == 0xF7 || (cp >= 0x2000 && cp <= 0x2BFF) ||
         (cp >= 0x3000 && cp <= 0x303F) || (cp >= 0xFE30 && cp <= 0xFE4F) ||
         (cp >= 0xFF00 && cp <= 0xFF0F) || cp == 0xFFFD;
}

}  // namespace

double ascii_letter_ratio(std::string_view utf8) {
  std::size_t ascii = 0, other = 0;
  for (std::size_t i = 0; i < utf8.size();) {
    const char32_t cp = next_code_point(utf8, i);
    if (cp < 0x80) {
      if (std::isalpha(static_cast<int>(cp))) ++ascii;
    } else if (!is_symbol_or_punct(cp)) {
      ++other;
    }
  }
  if (ascii + other == 0) return 0.0;
  return static_cast<double>(ascii) / static_cast<double>(ascii + other);
}

bool looks_english(std::string_view utf8, double min_ratio) {
  return ascii_letter_ratio(utf8) >= min_ratio;
}

IngestResult ingest_jsonl(const std::filesystem::path& path, std::string_view year_field,
                          std::string_view text_field) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read corpus '" + path.string() + "'");
  IngestResult result;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      ++result.report.malformed;
      result.report.warnings.push_back("line " + std::to_string(lineno) + ": not valid JSON");
      continue;
    }
    if (lineno == 1 && rec.is_object() && rec.contains("format")) {
      if (rec["format"] != kCorpusFormat || rec.value("version", -1) != kCorpusFormatVersion) {
        throw ContractError("corpus '" + path.string() + "' has header " + rec.dump() +
                            "; expected format " + std::string(kCorpusFormat) + " version " +
                            std::to_string(kCorpusFormatVersion));
      }
      result.header = rec;
      continue;
    }
    if (!rec.is_object() || !rec.contains(year_field) || !rec.contains(text_field)) {
      ++result.report.missing_fields;
      result.report.warnings.push_back("line " + std::to_string(lineno) + ": missing '" +
                                       std::string(year_field) + "' or '" +
                                       std::string(text_field) + "'");
      continue;
    }
    const auto& y = rec[std::string(year_field)];
    const auto& t = rec[std::string(text_field)];
    if (!y.is_number_integer() || !t.is_string()) {
      ++result.report.malformed;
      result.report.warnings.push_back("line " + std::to_string(lineno) + ": wrong field types");
      continue;
    }
    if (!result.corpus.add(y.get<int>(), t.get<std::string>())) {
      ++result.report.malformed;
      result.report.warnings.push_back("line " + std::to_string(lineno) + ": text has no tokens");
      continue;
    }
    ++result.report.accepted;
  }
  if (in.bad()) throw IoError("error while reading '" + path.string() + "'");
  return result;
}

namespace {

struct BibEntry {
  std::string type;
  std::map<std::string, std::string> fields;
};

class BibParser {
 public:
  explicit BibParser(std::string_view src) : s_(src) {}

  // Returns false at end of input. Throws std::runtime_error with a reason
  // for an unparseable entry, after skipping past it.
  bool next(BibEntry& entry) {
    const auto at = s_.find('@', pos_);
    if (at == std::string_view::npos) return false;
    pos_ = at + 1;
    entry = BibEntry{};
    while (pos_ < s_.size() && std::isalpha(static_cast<unsigned char>(s_[pos_]))) {
      entry.type.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(s_[pos_++]))));
    }
    skip_ws();
    if (pos_ >= s_.size() || (s_[pos_] != '{' && s_[pos_] != '(')) {
      throw std::runtime_error("entry '@" + entry.type + "' has no body");
    }
    const char close = s_[pos_] == '{' ? '}' : ')';
    const std::size_t body_start = ++pos_;
    const auto body_end = find_close(body_start, close);
    if (body_end == std::string_view::npos) {
      pos_ = s_.size();
      throw std::runtime_error("entry '@" + entry.type + "' has unbalanced braces");
    }
    const std::string_view body = s_.substr(body_start, body_end - body_start);
    pos_ = body_end + 1;
    if (entry.type == "comment" || entry.type == "preamble" || entry.type == "string") {
      entry.type.clear();
      return true;
    }
    parse_body(body, entry);
    return true;
  }

 private:
  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  std::size_t find_close(std::size_t from, char close) const {
    int depth = 0;
    bool in_quote = false;
    for (std::size_t i = from; i < s_.size(); ++i) {
      const char c = s_[i];
      if (c == '\\') {
        ++i;
        continue;
      }
      if (c == '{') {
        ++depth;
      } else if (c == '}') {
        if (depth == 0 && close == '}') return i;
        --depth;
        if (depth < 0) return std::string_view::npos;
      } else if (c == '"' && depth == 0 && close == ')') {
        in_quote = !in_quote;
      } else if (c == ')' && close == ')' && depth == 0 && !in_quote) {
        return i;
      } else if (c == '@' && depth == 0 && close == '}') {
        // A new entry began before this one closed.
        return std::string_view::npos;
      }
    }
    return std::string_view::npos;
  }

  static std::string trim(std::string_view v) {
    const auto b = v.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = v.find_last_not_of(" \t\r\n");
    return std::string(v.substr(b, e - b + 1));
  }

  static void parse_body(std::string_view body, BibEntry& entry) {
    const auto comma = body.find(',');
    if (comma == std::string_view::npos) return;  // key only
    std::size_t i = comma + 1;
    while (i < body.size()) {
      while (i < body.size() && (std::isspace(static_cast<unsigned char>(body[i])) || body[i] == ',')) ++i;
      if (i >= body.size()) break;
      const auto eq = body.find('=', i);
      if (eq == std::string_view::npos) throw std::runtime_error("field without '='");
      std::string name = trim(body.substr(i, eq - i));
      for (auto& c : name) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      if (name.empty()) throw std::runtime_error("empty field name");
      i = eq + 1;
      std::string value;
      while (true) {
        while (i < body.size() && std::isspace(static_cast<unsigned char>(body[i]))) ++i;
        if (i >= body.size()) throw std::runtime_error("field '" + name + "' has no value");
        if (body[i] == '{') {
          int depth = 0;
          std::size_t j = i;
          for (; j < body.size(); ++j) {
            if (body[j] == '{') ++depth;
            if (body[j] == '}' && --depth == 0) break;
          }
          if (j >= body.size()) throw std::runtime_error("field '" + name + "' is unterminated");
          value += body.substr(i + 1, j - i - 1);
          i = j + 1;
        } else if (body[i] == '"') {
          int depth = 0;
          std::size_t j = i + 1;
          for (; j < body.size(); ++j) {
            if (body[j] == '{') ++depth;
            if (body[j] == '}') --depth;
            if (body[j] == '"' && depth == 0 && body[j - 1] != '\\') break;
          }
          if (j >= body.size()) throw std::runtime_error("field '" + name + "' is unterminated");
          value += body.substr(i + 1, j - i - 1);
          i = j + 1;
        } else {
          std::size_t j = i;
          while (j < body.size() && body[j] != ',' && body[j] != '#' &&
                 !std::isspace(static_cast<unsigned char>(body[j]))) {
            ++j;
          }
          value += body.substr(i, j - i);
          i = j;
        }
        while (i < body.size() && std::isspace(static_cast<unsigned char>(body[i]))) ++i;
        if (i < body.size() && body[i] == '#') {
          ++i;
          continue;
        }
        break;
      }
      std::string cleaned;
      for (char c : value) {
        if (c == '{' || c == '}') continue;
        cleaned.push_back(std::isspace(static_cast<unsigned char>(c)) ? ' ' : c);
      }
      entry.fields[name] = trim(cleaned);
    }
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

std::optional<int> parse_year(const std::string& s) {
  if (s.empty()) return std::nullopt;
  std::size_t used = 0;
  try {
    const int y = std::stoi(s, &used);
    if (used != s.size()) return std::nullopt;
    return y;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

}  // namespace

IngestResult ingest_bibtex(const std::filesystem::path& path) {
  const std::string src = read_file(path);
  IngestResult result;
  BibParser parser(src);
  std::size_t index = 0;
  while (true) {
    BibEntry entry;
    ++index;
    try {
      if (!parser.next(entry)) break;
    } catch (const std::runtime_error& e) {
      ++result.report.malformed;
      result.report.warnings.push_back("entry " + std::to_string(index) + ": " + e.what());
      continue;
    }
    if (entry.type.empty()) continue;
    auto abs = entry.fields.find("abstract");
    auto yr = entry.fields.find("year");
    if (abs == entry.fields.end() || yr == entry.fields.end() || abs->second.empty()) {
      ++result.report.missing_fields;
      continue;
    }
    const auto year = parse_year(yr->second);
    if (!year) {
      ++result.report.malformed;
      result.report.warnings.push_back("entry " + std::to_string(index) + ": year '" + yr->second +
                                       "' is not an integer");
      continue;
    }
    if (!looks_english(abs->second)) {
      ++result.report.dropped_non_english;
      continue;
    }
    if (!result.corpus.add(*year, abs->second)) {
      ++result.report.malformed;
      continue;
    }
    ++result.report.accepted;
  }
  return result;
}

void write_jsonl(const std::filesystem::path& path, const TemporalCorpus& corpus,
                 const nlohmann::json& header) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  nlohmann::json h = header;
  h["format"] = kCorpusFormat;
  h["version"] = kCorpusFormatVersion;
  out << h.dump() << '\n';
  for (int y : corpus.years()) {
    for (const auto& d : corpus.docs(y)) {
      out << nlohmann::json{{"year", y}, {"text", d.raw_text}}.dump() << '\n';
    }
  }
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// Vocabulary building, frequencies, stopwords, splits

Vocabulary build_vocab(const TemporalCorpus& corpus, std::size_t max_size, std::size_t min_count) {
  if (max_size < kSpecialTokenCount + 1) {
    throw ConfigError("vocabulary max_size " + std::to_string(max_size) +
                      " leaves no room beyond the " + std::to_string(kSpecialTokenCount) +
                      " special tokens");
  }
  if (corpus.empty()) throw ContractError("build_vocab on an empty corpus");
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto* d : corpus.all_docs()) {
    for (auto& t : tokenize(d->raw_text)) ++counts[t];
  }
  counts.erase(std::string(kEosToken));
  counts.erase(std::string(kUnkToken));
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::vector<std::string> words;
  for (const auto& [w, c] : ranked) {
    if (c < min_count || words.size() + kSpecialTokenCount >= max_size) break;
    words.push_back(w);
  }
  return Vocabulary(words);
}

FrequencyTable::FrequencyTable(std::vector<int> years, std::size_t vocab_size)
    : years_(std::move(years)), vocab_size_(vocab_size) {
  for (int y : years_) {
    counts_[y].assign(vocab_size_, 0);
    totals_[y] = 0;
  }
}

bool FrequencyTable::has_year(int year) const { return counts_.count(year) != 0; }

const std::vector<std::uint64_t>* FrequencyTable::row(int year) const {
  auto it = counts_.find(year);
  return it == counts_.end() ? nullptr : &it->second;
}

std::uint64_t FrequencyTable::count(int year, TokenId w) const {
  const auto* r = row(year);
  if (r == nullptr || w < 0 || static_cast<std::size_t>(w) >= vocab_size_) return 0;
  return (*r)[w];
}

std::uint64_t FrequencyTable::total(int year) const {
  auto it = totals_.find(year);
  return it == totals_.end() ? 0 : it->second;
}

std::uint64_t FrequencyTable::corpus_count(TokenId w) const {
  std::uint64_t n = 0;
  for (const auto& [_, r] : counts_) n += r.at(w);
  return n;
}

std::span<const std::uint64_t> FrequencyTable::year_counts(int year) const {
  const auto* r = row(year);
  if (r == nullptr) throw ContractError("frequency table has no year " + std::to_string(year));
  return *r;
}

void FrequencyTable::add(int year, TokenId w, std::uint64_t n) {
  auto it = counts_.find(year);
  if (it == counts_.end()) throw ContractError("frequency table has no year " + std::to_string(year));
  if (w < 0 || static_cast<std::size_t>(w) >= vocab_size_) {
    throw ContractError("token id " + std::to_string(w) + " outside frequency table vocabulary");
  }
  it->second[w] += n;
  totals_[year] += n;
}

FrequencyTable frequency_table(const TemporalCorpus& corpus) {
  if (!corpus.tokenized()) throw ContractError("frequency_table requires a tokenized corpus");
  FrequencyTable table(corpus.years(), corpus.vocabulary().size());
  for (int y : corpus.years()) {
    for (const auto& d : corpus.docs(y)) {
      for (TokenId t : d.tokens) table.add(y, t);
    }
  }
  return table;
}

StopwordList curate_stopwords(const FrequencyTable& freq, const Vocabulary& vocab,
                              std::uint64_t threshold,
                              const std::optional<std::filesystem::path>& override_file,
                              std::vector<std::string>* warnings) {
  if (threshold < 1) throw ConfigError("stopword threshold must be >= 1");
  if (freq.vocab_size() != vocab.size()) {
    throw ContractError("frequency table and vocabulary sizes differ");
  }
  StopwordList list;
  for (std::size_t w = kSpecialTokenCount; w < vocab.size(); ++w) {
    if (freq.corpus_count(static_cast<TokenId>(w)) > threshold) list.ids.insert(static_cast<TokenId>(w));
  }
  if (!override_file) return list;

  std::ifstream in(*override_file);
  if (!in) throw IoError("cannot read stopword override file '" + override_file->string() + "'");
  list.source = StopwordSource::kMerged;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const char op = line[0];
    const std::string word = line.substr(1);
    const auto id = vocab.find(word);
    if ((op != '+' && op != '-') || word.empty()) {
      if (warnings) warnings->push_back("override line " + std::to_string(lineno) + ": expected +word or -word");
      continue;
    }
    if (!id || vocab.is_special(*id)) {
      if (warnings) warnings->push_back("override line " + std::to_string(lineno) + ": unknown word '" + word + "'");
      continue;
    }
    if (op == '+') {
      list.ids.insert(*id);
    } else {
      list.ids.erase(*id);
    }
  }
  return list;
}

StopwordList stopwords_from_words(const Vocabulary& vocab, const std::vector<std::string>& words,
                                  std::vector<std::string>* warnings) {
  StopwordList list;
  list.source = StopwordSource::kFile;
  for (const auto& w : words) {
    if (auto id = vocab.find(w)) {
      list.ids.insert(*id);
    } else if (warnings) {
      warnings->push_back("stopword '" + w + "' is not in the vocabulary");
    }
  }
  return list;
}

YearSplit split_by_year(const TemporalCorpus& corpus, const std::set<int>& train_years, int dev_year,
                        int test_year, const VocabOptions& vocab_options) {
  if (train_years.empty()) throw ConfigError("no training years given");
  if (train_years.count(dev_year) || train_years.count(test_year) || dev_year == test_year) {
    throw ConfigError("train, dev and test years must be disjoint");
  }
  const int last_train = *train_years.rbegin();
  if (dev_year <= last_train || test_year <= last_train) {
    throw ConfigError("dev year " + std::to_string(dev_year) + " and test year " +
                      std::to_string(test_year) + " must follow the last training year " +
                      std::to_string(last_train));
  }
  const TemporalCorpus train_raw = corpus.subset(train_years);
  if (train_raw.empty()) throw ConfigError("the training years contain no documents");
  auto vocab = std::make_shared<const Vocabulary>(
      build_vocab(train_raw, vocab_options.max_size, vocab_options.min_count));
  YearSplit split;
  split.vocab = vocab;
  split.train = train_raw.tokenized_with(vocab);
  split.dev = corpus.subset({dev_year}).tokenized_with(vocab);
  split.test = corpus.subset({test_year}).tokenized_with(vocab);
  return split;
}

std::string csv_field(std::string_view word) {
  if (word.find_first_of(",\"\n") == std::string_view::npos) return std::string(word);
  std::string q = "\"";
  for (char c : word) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + '"';
}

}  // namespace flm
