#pragma once

#include "enfo/dataset.hpp"

#include <filesystem>
#include <iosfwd>

namespace enfo {

/// Header must read x0,...,x{d-1},y. Errors name the offending line.
Dataset read_csv(const std::filesystem::path& path);
Dataset parse_csv(std::istream& in, const std::string& source = "<stream>");

/// Writes values with 17 significant digits. Feature columns are always
/// labelled x0..x{d-1}.
void write_csv(const Dataset& data, const std::filesystem::path& path);
void write_csv(const Dataset& data, std::ostream& out);

}  // namespace enfo
