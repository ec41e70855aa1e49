#pragma once

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

namespace n2v {

/// RFC-4180 field: quoted when it contains a comma, quote, CR or LF.
std::string csv_escape(std::string_view field);

/// Shortest round-trip decimal; "inf"/"-inf" for infinities, "nan" for NaN.
std::string format_real(double v);

/// Streams rows to a CSV file with a header line; rows end in "\n".
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::initializer_list<std::string_view> header);
  void row(const std::vector<std::string>& fields);
  /// Flushes and throws IoError if any write failed.
  void close();

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

}  // namespace n2v
