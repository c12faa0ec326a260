#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "core/operators.hpp"
#include "core/tensor.hpp"

namespace sitcom {

using CsvRow = std::vector<std::string>;

// RFC-4180 style: fields with ',', '"' or newlines are quoted.
std::string csv_line(const CsvRow& fields);
std::vector<CsvRow> parse_csv(const std::string& text);
// %.17g, with "nan" / "inf" / "-inf" spelled out.
std::string format_number(double v);
double parse_number(const std::string& s);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& contents);

// Binary PGM (P5), values mapped from [-1, 1] to [0, 255] with clamping.
std::string encode_pgm(const Tensor& x, ImageShape shape);
void write_pgm(const std::filesystem::path& path, const Tensor& x, ImageShape shape);

}  // namespace sitcom
