#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "wproj/measure.hpp"

namespace wproj {

// JSON measure format, schema "dmeasure/1":
//   {"schema":"dmeasure/1","dim":d,"atoms":[[...],...],"weights":[...]}
// "weights" may be omitted for uniform weights. Writing uses 17 significant
// digits so that save -> load round-trips bit-exactly.

DiscreteMeasure load_measure(std::istream& in, const std::string& source_name = "<stream>");
DiscreteMeasure load_measure(const std::filesystem::path& path);

void save_measure(const DiscreteMeasure& m, std::ostream& out);
void save_measure(const DiscreteMeasure& m, const std::filesystem::path& path);

// 17-significant-digit formatting shared by file writers and the CLI.
std::string format_full(double x);

} // namespace wproj
