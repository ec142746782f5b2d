// iclprobe-vocab: trains the desk-scale BPE vocabulary from the bundled assets.
#include <fstream>
#include <iostream>

#include "CLI11.hpp"

#include "iclprobe/desk_vocab.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Train the desk-scale BPE vocabulary from the bundled data assets"};
  iclprobe::DataAssets assets;
  std::string out = assets.desk_vocab_path();
  std::size_t merges = 12000;
  app.add_option("--data-dir", assets.dir, "Directory holding the bundled assets");
  app.add_option("--out", out, "Output vocabulary TSV");
  app.add_option("--merges", merges, "Maximum number of BPE merges");
  CLI11_PARSE(app, argc, argv);

  try {
    const auto vocab = iclprobe::build_desk_vocab(assets, merges);
    std::ofstream file(out, std::ios::binary);
    if (!file) {
      std::cerr << "cannot write " << out << '\n';
      return 2;
    }
    iclprobe::write_vocab(file, vocab);
    std::cout << "wrote " << vocab.size() << " tokens to " << out << '\n';
  } catch (const iclprobe::Error& e) {
    std::cerr << e.what() << '\n';
    return 1;
  }
  return 0;
}
