// io.hpp — CSV emission with reproducible formatting and manifest hashing.

#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace sbm::io {

// 17 significant digits: doubles round-trip exactly, so identical runs
// produce bit-identical files.
std::string format_double(double value);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::string comment;  // emitted first as "# ..." when nonempty
};

void write_csv(const std::filesystem::path& path, const CsvTable& table);

std::string read_file(const std::filesystem::path& path);

// SHA-1 of the git blob encoding "blob <size>\0<content>".
std::string git_blob_sha1(std::string_view content);

}  // namespace sbm::io
