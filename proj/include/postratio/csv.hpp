#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "postratio/dataset.hpp"

namespace postratio {

struct CsvOptions {
    /// Skip the first line.
    bool header = false;
    /// Interpret the label column as {0, 1} and remap 0 -> -1. Never applied implicitly.
    bool zero_one_labels = false;
    char delimiter = ',';
};

/// Parses "label,x1,...,xd" rows. Blank lines are ignored. Row numbers in
/// error messages are 1-based file lines.
LabeledDataset read_csv(std::istream& in, const CsvOptions& options = {});
LabeledDataset load_csv(const std::filesystem::path& path, const CsvOptions& options = {});

/// Writes rows with shortest round-trip float formatting, so that
/// load_csv(save_csv(d)) == d.
void write_csv(std::ostream& out, const LabeledDataset& data, bool header = false);
void save_csv(const std::filesystem::path& path, const LabeledDataset& data, bool header = false);

/// Reads feature-only rows (no label column) of a fixed width.
std::vector<std::vector<double>> read_points_csv(std::istream& in, bool header = false,
                                                 char delimiter = ',');

/// Shortest decimal representation that round-trips to the same double.
std::string format_double(double value);

}  // namespace postratio
