// Shared helpers for the test executables.
#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "iclprobe/assets.hpp"
#include "iclprobe/model/tensor_archive.hpp"
#include "iclprobe/pool.hpp"
#include "iclprobe/rng.hpp"
#include "iclprobe/vocab.hpp"

namespace iclprobe::test {

namespace fs = std::filesystem;

inline const Vocabulary& desk_vocab() {
  static const Vocabulary v = load_vocab(DataAssets{}.desk_vocab_path());
  return v;
}

inline const TokenPool& frequent_pool() {
  static const TokenPool p =
      build_pool_wordlist(desk_vocab(), load_word_list(DataAssets{}.frequent_words_path()), "frequent_en").pool;
  return p;
}

/// Fresh empty directory under the system temp dir.
inline fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("iclprobe-test-" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

struct CliRun {
  int code = 0;
  std::string out;
  std::string err;
};

/// Runs the built iclprobe binary with a shell-quoted argument list.
inline CliRun run_cli(const std::string& args, const fs::path& workdir) {
  const auto out = workdir / ".stdout";
  const auto err = workdir / ".stderr";
  const std::string cmd = "cd '" + workdir.string() + "' && '" + std::string(ICLPROBE_CLI_PATH) + "' " + args +
                          " > '" + out.string() + "' 2> '" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  CliRun r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_file(out);
  r.err = read_file(err);
  return r;
}

/// Linear-probe archive with seeded Gaussian embedding and unembedding.
inline TensorArchive random_probe_archive(std::int64_t vocab, std::int64_t dim, std::uint64_t seed, int reduction = 0) {
  Rng rng(seed);
  auto fill = [&](std::size_t n) {
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>(rng.normal());
    return v;
  };
  TensorArchive a;
  a.put("embedding", {vocab, dim}, fill(static_cast<std::size_t>(vocab * dim)));
  a.put("unembedding", {vocab, dim}, fill(static_cast<std::size_t>(vocab * dim)));
  a.put("reduction", {1}, {static_cast<float>(reduction)});
  return a;
}

}  // namespace iclprobe::test
