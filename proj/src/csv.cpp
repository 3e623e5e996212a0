#include "postratio/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

#include "postratio/error.hpp"

namespace postratio {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view line, char delimiter) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(delimiter, start);
        fields.push_back(trim(line.substr(start, pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return fields;
}

bool parse_double(std::string_view field, double& out) {
    if (!field.empty() && field.front() == '+') field.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), out);
    return ec == std::errc() && ptr == field.data() + field.size();
}

[[noreturn]] void row_error(std::size_t row, const std::string& what) {
    throw DataError(what + " at row " + std::to_string(row));
}

Label parse_label(std::string_view field, bool zero_one, std::size_t row) {
    double value = 0.0;
    if (!parse_double(field, value)) row_error(row, "invalid label");
    if (zero_one) {
        if (value == 0.0) return Label::Negative;
        if (value == 1.0) return Label::Positive;
    } else {
        if (value == -1.0) return Label::Negative;
        if (value == 1.0) return Label::Positive;
    }
    row_error(row, "invalid label");
}

}  // namespace

LabeledDataset read_csv(std::istream& in, const CsvOptions& options) {
    std::string line;
    std::size_t row = 0;
    bool have_dim = false;
    LabeledDataset data;
    std::vector<double> x;
    while (std::getline(in, line)) {
        ++row;
        if (row == 1 && options.header) continue;
        if (trim(line).empty()) continue;
        auto fields = split(line, options.delimiter);
        const std::size_t dim = fields.size() - 1;
        if (!have_dim) {
            data = LabeledDataset(dim);
            have_dim = true;
        } else if (dim != data.dim()) {
            row_error(row, "inconsistent dimension (expected " + std::to_string(data.dim()) +
                               " features, got " + std::to_string(dim) + ")");
        }
        Label y = parse_label(fields[0], options.zero_one_labels, row);
        x.assign(dim, 0.0);
        for (std::size_t c = 0; c < dim; ++c) {
            if (!parse_double(fields[c + 1], x[c]) || !std::isfinite(x[c]))
                row_error(row, "malformed value in column " + std::to_string(c + 2));
        }
        data.add(y, x);
    }
    if (!have_dim) throw DataError("empty CSV input");
    return data;
}

LabeledDataset load_csv(const std::filesystem::path& path, const CsvOptions& options) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    return read_csv(in, options);
}

std::string format_double(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return {buf, ptr};
}

void write_csv(std::ostream& out, const LabeledDataset& data, bool header) {
    if (header) {
        out << "label";
        for (std::size_t c = 0; c < data.dim(); ++c) out << ",x" << (c + 1);
        out << '\n';
    }
    for (std::size_t i = 0; i < data.size(); ++i) {
        out << static_cast<int>(data.label(i));
        for (double v : data.x(i)) out << ',' << format_double(v);
        out << '\n';
    }
}

void save_csv(const std::filesystem::path& path, const LabeledDataset& data, bool header) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    write_csv(out, data, header);
}

std::vector<std::vector<double>> read_points_csv(std::istream& in, bool header,
                                                 char delimiter) {
    std::vector<std::vector<double>> points;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (row == 1 && header) continue;
        if (trim(line).empty()) continue;
        auto fields = split(line, delimiter);
        std::vector<double> x(fields.size());
        for (std::size_t c = 0; c < fields.size(); ++c) {
            if (!parse_double(fields[c], x[c]) || !std::isfinite(x[c]))
                row_error(row, "malformed value in column " + std::to_string(c + 1));
        }
        if (!points.empty() && x.size() != points.front().size())
            row_error(row, "inconsistent dimension");
        points.push_back(std::move(x));
    }
    if (points.empty()) throw DataError("empty CSV input");
    return points;
}

}  // namespace postratio
