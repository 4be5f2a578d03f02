// tia-inspect: prints the fields and samples of one data packet.
// Exit status: 0 decoded, 2 decode error, 1 unreadable input.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <iterator>
#include <string>

#include "tia/inspect.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Decode and print one TiA data packet"};
  std::string path;
  std::string hex;
  bool lenient = false;
  auto* file_opt = app.add_option("file", path, "binary file holding exactly one packet");
  auto* hex_opt = app.add_option("--hex", hex, "packet bytes as hex, spaces optional");
  file_opt->excludes(hex_opt);
  app.add_flag("--lenient", lenient, "skip undefined signal flags instead of failing");
  CLI11_PARSE(app, argc, argv);

  tia::Bytes bytes;
  try {
    if (!hex.empty()) {
      bytes = tia::parse_hex(hex);
    } else if (!path.empty()) {
      std::ifstream in(path, std::ios::binary);
      if (!in) {
        std::cerr << "tia-inspect: cannot open " << path << '\n';
        return 1;
      }
      bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    } else {
      std::cerr << "tia-inspect: give a file or --hex\n";
      return 1;
    }
  } catch (const tia::Error& e) {
    std::cerr << "tia-inspect: " << e.what() << '\n';
    return 1;
  }

  tia::DecodeOptions options;
  if (lenient) options.mask_policy = tia::MaskPolicy::kLenient;
  try {
    std::cout << tia::inspect_report(bytes, options);
  } catch (const tia::Error& e) {
    std::cerr << "tia-inspect: " << to_string(e.code()) << ": " << e.what() << '\n';
    return 2;
  }
  return 0;
}
