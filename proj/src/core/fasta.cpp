#include "core/fasta.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace plm {

namespace {

void strip_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
}

bool blank(const std::string& line) {
    for (char c : line) {
        if (!std::isspace(static_cast<unsigned char>(c))) return false;
    }
    return true;
}

}  // namespace

bool FastaReader::next(FastaRecord& out) {
    if (done_) return false;

    out.header.clear();
    out.sequence.clear();
    bool in_record = false;

    std::string line;
    while (true) {
        if (have_pending_) {
            // a header read while finishing the previous record
            out.header = pending_header_;
            have_pending_ = false;
            in_record = true;
            continue;
        }
        if (!std::getline(in_, line)) break;
        ++line_;
        strip_cr(line);
        if (blank(line)) continue;
        if (line[0] == '>') {
            const std::string header = line.substr(1);
            if (!in_record) {
                out.header = header;
                header_line_ = line_;
                in_record = true;
            } else {
                if (out.sequence.empty()) {
                    throw FastaError(FastaError::Kind::empty_sequence, header_line_,
                                     "fasta: empty sequence under header at line " +
                                         std::to_string(header_line_));
                }
                pending_header_ = header;
                have_pending_ = true;
                header_line_ = line_;
                return true;
            }
        } else {
            if (!in_record) {
                throw FastaError(FastaError::Kind::data_before_header, line_,
                                 "fasta: sequence data before first '>' at line " +
                                     std::to_string(line_));
            }
            for (char c : line) {
                if (!std::isspace(static_cast<unsigned char>(c))) out.sequence.push_back(c);
            }
        }
    }

    done_ = true;
    if (!in_record) return false;
    if (out.sequence.empty()) {
        throw FastaError(FastaError::Kind::empty_sequence, header_line_,
                         "fasta: empty sequence under header at line " + std::to_string(header_line_));
    }
    return true;
}

std::vector<FastaRecord> read_fasta(std::istream& in) {
    std::vector<FastaRecord> out;
    FastaReader reader(in);
    FastaRecord rec;
    while (reader.next(rec)) out.push_back(rec);
    return out;
}

std::vector<FastaRecord> read_fasta_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FastaError(FastaError::Kind::io, 0, "fasta: cannot open " + path);
    return read_fasta(in);
}

void write_fasta(const std::vector<FastaRecord>& records, std::ostream& out, int line_width) {
    if (line_width < 1) throw UsageError("write_fasta: line_width must be positive");
    for (const auto& rec : records) {
        out << '>' << rec.header << '\n';
        for (size_t off = 0; off < rec.sequence.size(); off += static_cast<size_t>(line_width)) {
            out << rec.sequence.substr(off, static_cast<size_t>(line_width)) << '\n';
        }
    }
}

void write_fasta_file(const std::vector<FastaRecord>& records, const std::string& path,
                      int line_width) {
    std::ofstream out(path);
    if (!out) throw FastaError(FastaError::Kind::io, 0, "fasta: cannot open " + path + " for writing");
    write_fasta(records, out, line_width);
    if (!out) throw FastaError(FastaError::Kind::io, 0, "fasta: write failed for " + path);
}

std::vector<FastaRecord> filter_by_length(const std::vector<FastaRecord>& records, int max_len) {
    std::vector<FastaRecord> out;
    out.reserve(records.size());
    for (const auto& rec : records) {
        if (static_cast<int>(rec.sequence.size()) + 2 <= max_len) out.push_back(rec);
    }
    return out;
}

}  // namespace plm
