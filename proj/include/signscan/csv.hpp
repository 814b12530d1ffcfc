#pragma once

#include "signscan/types.hpp"

#include <string>

namespace signscan {

/// Comma-separated numeric grid, one observation per line, optional single
/// header row. Errors name the offending data row/column (1-based).
DataMatrix load_csv(const std::string& path, bool has_header);

/// Writes with 17 significant digits so load_csv(write_csv(x)) is bit-exact.
void write_csv(const DataMatrix& data, const std::string& path);

}  // namespace signscan
