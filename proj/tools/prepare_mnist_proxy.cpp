// Copyright 2026 The lowshot Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Expands the bundled MNIST sample (gzip CSV: 784 pixels then the digit label
// per row) into an image tree with two classes, even and odd digits.

#include <zlib.h>

#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lowshot/common.hpp"
#include "lowshot/raster.hpp"

namespace {

std::string gunzip_file(const std::string& path) {
  gzFile f = gzopen(path.c_str(), "rb");
  if (!f) throw lowshot::DataError("cannot open " + path);
  std::string out;
  char buf[1 << 16];
  int n = 0;
  while ((n = gzread(f, buf, sizeof buf)) > 0) out.append(buf, static_cast<std::size_t>(n));
  int err = 0;
  const char* msg = gzerror(f, &err);
  gzclose(f);
  if (n < 0 || (err != Z_OK && err != Z_STREAM_END)) {
    throw lowshot::DataError(path + ": " + (msg ? msg : "decompression failed"));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Write the even-vs-odd MNIST proxy dataset as PNG files"};
  std::string input, output;
  int limit = 0;
  app.add_option("input", input, "mnist csv.gz")->required()->check(CLI::ExistingFile);
  app.add_option("output", output, "Dataset root to create")->required();
  app.add_option("--per-digit", limit, "Keep at most this many images per digit (0 = all)");
  CLI11_PARSE(app, argc, argv);

  namespace fs = std::filesystem;
  try {
    const std::string text = gunzip_file(input);
    fs::create_directories(fs::path(output) / "even");
    fs::create_directories(fs::path(output) / "odd");
    std::istringstream in(text);
    std::string line;
    std::vector<int> per_digit(10, 0);
    std::size_t row = 0, written = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::vector<int> v;
      v.reserve(785);
      std::istringstream fields(line);
      std::string cell;
      while (std::getline(fields, cell, ',')) v.push_back(std::stoi(cell));
      if (v.size() != 785) throw lowshot::DataError(input + ": row " + std::to_string(row) + " has " + std::to_string(v.size()) + " fields");
      const int digit = v.back();
      if (digit < 0 || digit > 9) throw lowshot::DataError(input + ": bad label in row " + std::to_string(row));
      ++row;
      if (limit > 0 && per_digit[static_cast<std::size_t>(digit)] >= limit) continue;
      ++per_digit[static_cast<std::size_t>(digit)];
      lowshot::Raster img(28, 28);
      for (int p = 0; p < 784; ++p) {
        const auto g = static_cast<std::uint8_t>(v[static_cast<std::size_t>(p)]);
        for (int c = 0; c < 3; ++c) img.at(p / 28, p % 28, c) = g;
      }
      char name[32];
      std::snprintf(name, sizeof name, "d%d_%05zu.png", digit, row - 1);
      lowshot::write_png((fs::path(output) / (digit % 2 == 0 ? "even" : "odd") / name).string(), img);
      ++written;
    }
    std::cout << written << " images written to " << output << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
