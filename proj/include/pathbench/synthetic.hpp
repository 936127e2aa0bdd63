#pragma once

#include "pathbench/corpus.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace pathbench {

/// Seeded synthetic cohort spread over all 32 cancer types. Every record has
/// a report; about 85% carry a stage group and 90% a DSS follow-up.
std::vector<PathologyRecord> synthetic_records(std::size_t n, std::uint64_t seed);

/// Writes the cohort as a comma-separated report table and a tab-separated
/// clinical table with the default TCGA column names (DSS time in days).
/// Returns {reports path, clinical path}.
std::pair<std::filesystem::path, std::filesystem::path> write_synthetic_tables(
    std::span<const PathologyRecord> records, const std::filesystem::path& dir);

}  // namespace pathbench
