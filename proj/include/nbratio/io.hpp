#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "nbratio/estimators.hpp"
#include "nbratio/montecarlo.hpp"
#include "nbratio/serialize.hpp"

namespace nbratio {

enum class DataFormat { csv, json };

std::optional<DataFormat> parse_data_format(std::string_view name);

// CSV with a header row. Columns named pre* hold pre-treatment replicates,
// post* post-treatment replicates; an optional id/subject column is ignored.
// Replicates are pooled per subject. In unpaired mode a subject may leave all
// of one group's cells empty. Throws ParseError (row/column are 1-based file
// coordinates) or InconsistentReplicates.
PairedDataset parse_csv(std::string_view text, bool paired = true);

// {"pre": [...], "post": [...], "paired": bool}; each element is a count or
// an array of replicate counts.
PairedDataset parse_dataset_json(const Json& j, std::optional<bool> paired = std::nullopt);

// Format defaults to the file extension (.json, otherwise CSV).
PairedDataset ingest(const std::filesystem::path& path, std::optional<DataFormat> format = {},
                     std::optional<bool> paired = {});

// Tidy long format: method,r,statistic,value,replicates.
std::string scan_tidy_csv(const ScanResult& result);

}  // namespace nbratio
