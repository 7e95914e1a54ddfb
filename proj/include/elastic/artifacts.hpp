#pragma once

#include <string>
#include <utility>
#include <vector>

#include "elastic/config.hpp"
#include "elastic/experiments.hpp"

namespace elastic {

// SHA-1 of "blob <size>\0<content>", the id git gives the same file.
std::string git_blob_sha1(const std::string& content);

std::string table_csv(const Table& t);
std::string checks_csv(const Report& r);
// Matplotlib script that plots every table of the run from its CSV.
std::string plot_script(const Report& r);

struct OutputFile {
    std::string name;
    std::string sha1;
};

std::string manifest_json(const Report& r, const ExperimentConfig& c, const std::vector<OutputFile>& outputs);

// Writes checks.csv, one CSV per table, plot.py and manifest.json into dir.
std::vector<OutputFile> write_artifacts(const Report& r, const ExperimentConfig& c, const std::string& dir);

// One line per check: "PASS name (value ... threshold)".
std::string summary_text(const Report& r);

}  // namespace elastic
