// Builds the small id-ordered BPE vocabulary shipped in data/desk_vocab.tsv.
//
// The training corpus is assembled from the bundled assets: frequent English
// words with Zipf-like weights, every lexicon word, the country-capital table
// rendered through the CF and country-capital templates, small integers and
// the delimiters. Frequent material is merged first and therefore gets low
// ids, mirroring how index order tracks frequency in production tokenizers.
#pragma once

#include <map>
#include <string>

#include "iclprobe/assets.hpp"
#include "iclprobe/bpe.hpp"
#include "iclprobe/tasks.hpp"

namespace iclprobe {

inline std::map<std::string, std::uint64_t> desk_corpus(const DataAssets& assets) {
  std::map<std::string, std::uint64_t> counts;
  const auto words = load_word_list(assets.frequent_words_path());
  for (std::size_t rank = 0; rank < words.size(); ++rank) {
    const std::uint64_t weight = 1 + 30000 / (rank + 1);
    count_chunks(" " + words[rank], weight, counts);
  }
  const auto lexicon = load_lexicon(assets.lexicon_path());
  for (std::size_t r = 0; r < lexicon.size(); ++r) {
    for (auto lang : kLanguages) count_chunks(" " + lexicon.word(r, lang), 3, counts);
  }
  const auto capitals = load_capitals(assets.capitals_path());
  for (std::size_t i = 0; i < capitals.size(); ++i) {
    count_chunks(country_capital_prompt_text(capitals[i]), 2, counts);
    count_chunks(" " + capitals[i].capital, 2, counts);
    count_chunks(cf_prompt_text(capitals[i], capitals[(i + 1) % capitals.size()]), 1, counts);
  }
  for (int n = 0; n < 1000; ++n) count_chunks(" " + std::to_string(n), 1 + 200 / (n + 1), counts);
  count_chunks(" ->", 5000, counts);
  count_chunks(";", 5000, counts);
  return counts;
}

inline Vocabulary build_desk_vocab(const DataAssets& assets, std::size_t max_merges = 12000) {
  BpeTrainOptions options;
  options.max_merges = max_merges;
  return train_bpe(desk_corpus(assets), options);
}

}  // namespace iclprobe
