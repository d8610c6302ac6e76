#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "phil/harness/recording.hpp"

namespace phil {

/// Writes one CSV per recorder channel group plus metadata.csv. Full-rate
/// groups: grid, microgrid. Decimated groups: waveforms, loadbank.
void export_csv(const Recording& recording, const std::filesystem::path& dir);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<Real>> rows;
};

/// Reads a numeric CSV written by export_csv.
CsvTable read_csv(const std::filesystem::path& path);

/// Step indices kept at the given decimation.
std::size_t decimated_count(std::uint64_t steps, std::size_t decimation);

} // namespace phil
