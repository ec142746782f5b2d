// Bundled data assets: translation lexicon, country-capital table, word lists.
#pragma once

#include <array>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "iclprobe/common.hpp"

#ifndef ICLPROBE_DATA_DIR
#define ICLPROBE_DATA_DIR "data"
#endif

namespace iclprobe {

inline std::string default_data_dir() { return ICLPROBE_DATA_DIR; }

enum class Language { EN, DE, FR, ES, IT };

inline constexpr std::array<Language, 5> kLanguages = {Language::EN, Language::DE, Language::FR,
                                                       Language::ES, Language::IT};

inline std::string_view language_code(Language lang) {
  switch (lang) {
    case Language::EN: return "en";
    case Language::DE: return "de";
    case Language::FR: return "fr";
    case Language::ES: return "es";
    case Language::IT: return "it";
  }
  return "?";
}

inline Language parse_language(std::string_view code) {
  for (auto lang : kLanguages) {
    std::string upper(language_code(lang));
    for (auto& c : upper) c = static_cast<char>(c - 'a' + 'A');
    if (code == language_code(lang) || code == upper) return lang;
  }
  fail(ErrorCode::InvalidConfig, "unknown language code " + std::string(code));
}

namespace detail {

inline std::vector<std::string> split_csv_line(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> fields;
  std::string field;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else {
      field += c;
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

inline std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open " + path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    rows.push_back(split_csv_line(line));
  }
  return rows;
}

}  // namespace detail

/// Row-aligned word table: row i holds the same noun in every language.
class Lexicon {
 public:
  Lexicon() = default;
  explicit Lexicon(std::vector<std::array<std::string, 5>> rows) : rows_(std::move(rows)) {}

  std::size_t size() const noexcept { return rows_.size(); }
  const std::string& word(std::size_t row, Language lang) const {
    return rows_.at(row)[static_cast<std::size_t>(lang)];
  }

 private:
  std::vector<std::array<std::string, 5>> rows_;
};

inline Lexicon load_lexicon(const std::string& path) {
  auto rows = detail::read_csv(path);
  if (rows.empty()) fail(ErrorCode::Malformed, path + ": empty lexicon");
  const auto& header = rows.front();
  std::array<std::size_t, 5> column{};
  for (auto lang : kLanguages) {
    bool found = false;
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (header[c] == language_code(lang)) {
        column[static_cast<std::size_t>(lang)] = c;
        found = true;
      }
    }
    if (!found) fail(ErrorCode::Malformed, path + ": missing column " + std::string(language_code(lang)));
  }
  std::vector<std::array<std::string, 5>> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != header.size()) {
      fail(ErrorCode::Malformed, path + ": row " + std::to_string(r) + " has wrong field count");
    }
    std::array<std::string, 5> row;
    for (std::size_t l = 0; l < 5; ++l) row[l] = rows[r][column[l]];
    out.push_back(std::move(row));
  }
  return Lexicon(std::move(out));
}

struct CountryCapital {
  std::string country;
  std::string capital;
};

inline std::vector<CountryCapital> load_capitals(const std::string& path) {
  auto rows = detail::read_csv(path);
  if (rows.empty() || rows.front().size() != 2 || rows.front()[0] != "country") {
    fail(ErrorCode::Malformed, path + ": expected header country,capital");
  }
  std::vector<CountryCapital> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != 2) fail(ErrorCode::Malformed, path + ": bad row " + std::to_string(r));
    out.push_back({rows[r][0], rows[r][1]});
  }
  return out;
}

inline std::vector<std::string> load_word_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open " + path);
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) words.push_back(line);
  }
  return words;
}

struct DataAssets {
  std::string dir = default_data_dir();

  std::string lexicon_path() const { return dir + "/translations.csv"; }
  std::string capitals_path() const { return dir + "/capitals.csv"; }
  std::string frequent_words_path() const { return dir + "/frequent_en.txt"; }
  std::string critical_values_path() const { return dir + "/johansen_trace_cv.csv"; }
  std::string desk_vocab_path() const { return dir + "/desk_vocab.tsv"; }
};

}  // namespace iclprobe
