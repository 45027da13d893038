#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace groupsynth::csv {

struct Document {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

// RFC 4180 reader: quoted fields, doubled quotes, CRLF tolerated. Throws
// Error{IoError} when the file cannot be opened and Error{ParseError} on an
// unterminated quote.
Document read(const std::filesystem::path& path);
Document parse(std::string_view text);

void write_row(std::ostream& out, const std::vector<std::string>& fields);
void write(const std::filesystem::path& path, const Document& doc);

// Shortest representation that round-trips through strtod.
std::string format_exact(double value);

}  // namespace groupsynth::csv
