#pragma once

#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "errors.hpp"

namespace geopinn {

// Comma-separated output, header row, floats at 17 significant digits so
// that traces round-trip bitwise.
class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& columns)
        : out_(path) {
        if (!out_) throw IoError("cannot open '" + path.string() + "' for writing");
        for (std::size_t i = 0; i < columns.size(); ++i) {
            if (i) out_ << ',';
            out_ << columns[i];
        }
        out_ << '\n';
    }

    void row(const std::vector<double>& values) {
        char buf[32];
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (i) out_ << ',';
            std::snprintf(buf, sizeof buf, "%.17g", values[i]);
            out_ << buf;
        }
        out_ << '\n';
        out_.flush();
        if (!out_) throw IoError("write failure on csv stream");
    }

private:
    std::ofstream out_;
};

inline void write_csv_row(std::ostream& out, const std::vector<double>& values) {
    char buf[32];
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out << ',';
        std::snprintf(buf, sizeof buf, "%.17g", values[i]);
        out << buf;
    }
    out << '\n';
}

} // namespace geopinn
