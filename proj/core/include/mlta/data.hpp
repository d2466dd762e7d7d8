#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace mlta {

/// N x M matrix of binary responses with positive integer row weights.
///
/// A row of weight w is statistically identical to w copies of that row;
/// every estimator in the library multiplies per-row contributions by it.
class BinaryData {
public:
    BinaryData() = default;

    /// Validates cells (0/1) and weights (>= 1); throws ArgumentError.
    BinaryData(std::size_t n_vars, std::vector<std::uint8_t> cells, std::vector<double> weights,
               std::vector<std::string> names = {});

    static BinaryData from_rows(const std::vector<std::vector<int>>& rows,
                                std::vector<double> weights = {});

    std::size_t n_rows() const noexcept { return weights_.size(); }
    std::size_t n_vars() const noexcept { return n_vars_; }
    bool empty() const noexcept { return weights_.empty(); }

    std::uint8_t at(std::size_t n, std::size_t m) const { return cells_[n * n_vars_ + m]; }
    std::span<const std::uint8_t> row(std::size_t n) const {
        return {cells_.data() + n * n_vars_, n_vars_};
    }

    double weight(std::size_t n) const { return weights_[n]; }
    const std::vector<double>& weights() const noexcept { return weights_; }

    /// Sum of row weights.
    double effective_n() const noexcept;

    const std::vector<std::string>& names() const noexcept { return names_; }

    /// Same cells with replaced weights. Zero weights are allowed here and
    /// mark rows that drop out of every sum (used by delete-one resampling).
    BinaryData reweighted(std::vector<double> weights) const;

    /// One row per unit of weight.
    BinaryData expanded() const;

private:
    std::size_t n_vars_ = 0;
    std::vector<std::uint8_t> cells_;
    std::vector<double> weights_;
    std::vector<std::string> names_;
};

enum class MatrixFormat { DenseCsv, PatternCsv };

BinaryData load_matrix(std::istream& in, MatrixFormat format);
BinaryData load_matrix_file(const std::string& path, MatrixFormat format);

void write_dense_csv(std::ostream& out, const BinaryData& data);
void write_pattern_csv(std::ostream& out, const BinaryData& data);

struct PatternCount {
    std::string pattern;  // '0'/'1' characters, length M
    double observed = 0.0;

    bool operator==(const PatternCount&) const = default;
};

/// Unique response patterns with summed weights, lexicographic order.
std::vector<PatternCount> pattern_table(const BinaryData& data);

/// Collapses duplicate rows into weighted rows (pattern order).
BinaryData compress(const BinaryData& data);

/// Column-oriented table of categorical labels.
struct CategoricalTable {
    std::vector<std::string> column_names;
    std::vector<std::vector<std::string>> rows;

    std::size_t n_rows() const noexcept { return rows.size(); }
};

/// Parses a comma-separated categorical file. Without a header, columns are
/// named V1..Vk.
CategoricalTable load_categorical(std::istream& in, bool has_header);

/// Copy of the table without the given column. Throws ArgumentError if out of range.
CategoricalTable drop_column(const CategoricalTable& table, std::size_t column);

/// Labels for the two-variable decided/yes coding of a three-way response.
struct AbCoding {
    std::vector<std::string> yes{"y"};
    std::vector<std::string> no{"n"};
    std::vector<std::string> undecided{"?"};
};

/// Each column becomes (a, b): yes -> (1,1), no -> (1,0), undecided -> (0,0).
/// Output variables are named "<column>_a", "<column>_b".
BinaryData encode_categorical(const CategoricalTable& table, const AbCoding& coding = {});

}  // namespace mlta
