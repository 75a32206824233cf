#pragma once

#include <stdexcept>
#include <string>

namespace plm {

// Error taxonomy maps 1:1 onto the CLI exit-code contract:
//   UsageError -> 1, DataError -> 2, NumericError -> 3.
// ShapeError is an API-contract violation (mismatched dimensions etc.) and
// is treated as a usage error at the boundary.

struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ShapeError : UsageError {
    explicit ShapeError(const std::string& msg) : UsageError(msg) {}
};

struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// FASTA stream problems, tagged so tests can tell the cases apart.
struct FastaError : DataError {
    enum class Kind { data_before_header, empty_sequence, io };
    Kind kind;
    int line;
    FastaError(Kind k, int line_no, const std::string& msg)
        : DataError(msg), kind(k), line(line_no) {}
};

// Task-CSV problems, row-numbered (header is row 1).
struct CsvError : DataError {
    enum class Kind { bad_header, label_parse, label_length, unknown_split, bad_row, io };
    Kind kind;
    int row;
    CsvError(Kind k, int row_no, const std::string& msg)
        : DataError(msg), kind(k), row(row_no) {}
};

// Checkpoint file problems; each documented failure mode is distinct.
struct CheckpointError : DataError {
    enum class Kind { bad_magic, unsupported_version, truncated_payload, index_out_of_bounds, bad_header, io };
    Kind kind;
    CheckpointError(Kind k, const std::string& msg) : DataError(msg), kind(k) {}
};

// Metric preconditions (single-class AUC, constant-vector Spearman, ...).
struct MetricError : DataError {
    explicit MetricError(const std::string& msg) : DataError(msg) {}
};

struct ConfigError : UsageError {
    explicit ConfigError(const std::string& msg) : UsageError(msg) {}
};

}  // namespace plm
