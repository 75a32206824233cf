#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "core/errors.hpp"

namespace plm {

struct FastaRecord {
    std::string header;    // text after '>' up to end of line (may be empty)
    std::string sequence;  // residue letters, whitespace stripped, non-empty
};

// Streaming FASTA reader: bounded memory in the size of one record.
// CR/LF line endings are tolerated; multi-line sequences are concatenated.
class FastaReader {
public:
    explicit FastaReader(std::istream& in) : in_(in) {}

    // Returns false at end of stream. Throws FastaError (with line numbers)
    // on sequence data before the first header or an empty sequence.
    bool next(FastaRecord& out);

private:
    std::istream& in_;
    std::string pending_header_;
    bool have_pending_ = false;
    int line_ = 0;
    int header_line_ = 0;
    bool done_ = false;
};

std::vector<FastaRecord> read_fasta(std::istream& in);
std::vector<FastaRecord> read_fasta_file(const std::string& path);

// Writes records with sequence lines wrapped at line_width; output always
// ends with a trailing newline. parse(write(r)) == r for valid records.
void write_fasta(const std::vector<FastaRecord>& records, std::ostream& out, int line_width = 60);
void write_fasta_file(const std::vector<FastaRecord>& records, const std::string& path,
                      int line_width = 60);

// Keeps records whose residue length + 2 special tokens fit within max_len
// ("below 512 tokens" counts [CLS]/[SEP]); preserves order.
std::vector<FastaRecord> filter_by_length(const std::vector<FastaRecord>& records, int max_len);

}  // namespace plm
