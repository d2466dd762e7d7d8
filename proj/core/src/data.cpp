#include "mlta/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>

#include "mlta/errors.hpp"

namespace mlta {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        const auto field = trim(std::string_view(line).substr(start, pos == std::string::npos ? std::string::npos : pos - start));
        out.emplace_back(field);
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

bool is_number(std::string_view s) {
    if (s.empty()) return false;
    double v = 0.0;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    return ec == std::errc() && ptr == end;
}

bool is_blank(const std::string& line) { return trim(line).empty(); }

struct Lines {
    std::vector<std::pair<std::size_t, std::string>> items;  // (1-based line number, text)
};

Lines read_lines(std::istream& in) {
    Lines lines;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (is_blank(line)) continue;
        lines.items.emplace_back(number, line);
    }
    return lines;
}

BinaryData load_dense(std::istream& in) {
    const auto lines = read_lines(in);
    std::vector<std::string> names;
    std::vector<std::uint8_t> cells;
    std::vector<double> weights;
    std::size_t width = 0;
    bool first = true;
    for (const auto& [number, text] : lines.items) {
        const auto fields = split_csv_line(text);
        if (first) {
            first = false;
            width = fields.size();
            if (std::any_of(fields.begin(), fields.end(), [](const std::string& f) { return !f.empty() && !is_number(f); })) {
                names = fields;
                continue;
            }
        }
        if (fields.size() != width) {
            throw ParseError("ragged row: expected " + std::to_string(width) + " fields, found " +
                                 std::to_string(fields.size()),
                             number, std::min(fields.size(), width) + 1);
        }
        for (std::size_t c = 0; c < fields.size(); ++c) {
            if (fields[c].empty()) {
                throw ParseError("missing value", number, c + 1);
            }
            if (fields[c] == "0") {
                cells.push_back(0);
            } else if (fields[c] == "1") {
                cells.push_back(1);
            } else {
                throw ParseError("non-binary cell '" + fields[c] + "'", number, c + 1);
            }
        }
        weights.push_back(1.0);
    }
    return BinaryData(width, std::move(cells), std::move(weights), std::move(names));
}

BinaryData load_patterns(std::istream& in) {
    const auto lines = read_lines(in);
    std::vector<std::uint8_t> cells;
    std::vector<double> weights;
    std::size_t width = 0;
    bool first = true;
    for (const auto& [number, text] : lines.items) {
        const auto fields = split_csv_line(text);
        if (first) {
            first = false;
            if (fields.size() == 2 && !is_number(fields[1])) continue;  // header
        }
        if (fields.size() != 2) {
            throw ParseError("expected 'pattern,count'", number, std::min<std::size_t>(fields.size(), 2) + 1);
        }
        const std::string& pattern = fields[0];
        if (width == 0) width = pattern.size();
        if (pattern.empty() || pattern.size() != width) {
            throw ParseError("pattern length " + std::to_string(pattern.size()) + " differs from " +
                                 std::to_string(width),
                             number, 1);
        }
        for (char ch : pattern) {
            if (ch != '0' && ch != '1') {
                throw ParseError(std::string("non-binary pattern character '") + ch + "'", number, 1);
            }
            cells.push_back(ch == '1' ? 1 : 0);
        }
        long long count = 0;
        const auto& cs = fields[1];
        auto [ptr, ec] = std::from_chars(cs.data(), cs.data() + cs.size(), count);
        if (ec != std::errc() || ptr != cs.data() + cs.size()) {
            throw ParseError("count '" + cs + "' is not an integer", number, 2);
        }
        if (count <= 0) {
            throw ParseError("count must be positive", number, 2);
        }
        weights.push_back(static_cast<double>(count));
    }
    return BinaryData(width, std::move(cells), std::move(weights));
}

}  // namespace

BinaryData::BinaryData(std::size_t n_vars, std::vector<std::uint8_t> cells, std::vector<double> weights,
                       std::vector<std::string> names)
    : n_vars_(n_vars), cells_(std::move(cells)), weights_(std::move(weights)), names_(std::move(names)) {
    if (cells_.size() != n_vars_ * weights_.size()) {
        throw ArgumentError("cell count does not match rows x variables");
    }
    if (!names_.empty() && names_.size() != n_vars_) {
        throw ArgumentError("variable name count does not match number of variables");
    }
    for (auto c : cells_) {
        if (c > 1) throw ArgumentError("cells must be 0 or 1");
    }
    for (double w : weights_) {
        if (!(w >= 1.0) || w != std::floor(w)) throw ArgumentError("row weights must be positive integers");
    }
}

BinaryData BinaryData::from_rows(const std::vector<std::vector<int>>& rows, std::vector<double> weights) {
    const std::size_t m = rows.empty() ? 0 : rows.front().size();
    std::vector<std::uint8_t> cells;
    cells.reserve(rows.size() * m);
    for (const auto& r : rows) {
        if (r.size() != m) throw ArgumentError("ragged rows");
        for (int v : r) {
            if (v != 0 && v != 1) throw ArgumentError("cells must be 0 or 1");
            cells.push_back(static_cast<std::uint8_t>(v));
        }
    }
    if (weights.empty()) weights.assign(rows.size(), 1.0);
    return BinaryData(m, std::move(cells), std::move(weights));
}

double BinaryData::effective_n() const noexcept {
    return std::accumulate(weights_.begin(), weights_.end(), 0.0);
}

BinaryData BinaryData::reweighted(std::vector<double> weights) const {
    if (weights.size() != weights_.size()) throw ArgumentError("weight vector length mismatch");
    for (double w : weights) {
        if (!(w >= 0.0)) throw ArgumentError("weights must be non-negative");
    }
    BinaryData out = *this;
    out.weights_ = std::move(weights);
    return out;
}

BinaryData BinaryData::expanded() const {
    std::vector<std::uint8_t> cells;
    std::vector<double> weights;
    for (std::size_t n = 0; n < n_rows(); ++n) {
        const auto copies = static_cast<std::size_t>(weights_[n]);
        for (std::size_t k = 0; k < copies; ++k) {
            auto r = row(n);
            cells.insert(cells.end(), r.begin(), r.end());
            weights.push_back(1.0);
        }
    }
    return BinaryData(n_vars_, std::move(cells), std::move(weights), names_);
}

BinaryData load_matrix(std::istream& in, MatrixFormat format) {
    return format == MatrixFormat::DenseCsv ? load_dense(in) : load_patterns(in);
}

BinaryData load_matrix_file(const std::string& path, MatrixFormat format) {
    std::ifstream in(path);
    if (!in) throw ArgumentError("cannot open '" + path + "'");
    return load_matrix(in, format);
}

void write_dense_csv(std::ostream& out, const BinaryData& data) {
    if (!data.names().empty()) {
        for (std::size_t m = 0; m < data.n_vars(); ++m) out << (m ? "," : "") << data.names()[m];
        out << '\n';
    }
    for (std::size_t n = 0; n < data.n_rows(); ++n) {
        const auto copies = static_cast<std::size_t>(data.weight(n));
        for (std::size_t k = 0; k < copies; ++k) {
            for (std::size_t m = 0; m < data.n_vars(); ++m) out << (m ? "," : "") << int(data.at(n, m));
            out << '\n';
        }
    }
}

void write_pattern_csv(std::ostream& out, const BinaryData& data) {
    out << "pattern,count\n";
    for (const auto& p : pattern_table(data)) {
        out << p.pattern << ',' << static_cast<long long>(p.observed) << '\n';
    }
}

std::vector<PatternCount> pattern_table(const BinaryData& data) {
    std::map<std::string, double> counts;
    std::string key(data.n_vars(), '0');
    for (std::size_t n = 0; n < data.n_rows(); ++n) {
        if (data.weight(n) <= 0.0) continue;
        for (std::size_t m = 0; m < data.n_vars(); ++m) key[m] = data.at(n, m) ? '1' : '0';
        counts[key] += data.weight(n);
    }
    std::vector<PatternCount> out;
    out.reserve(counts.size());
    for (auto& [pattern, count] : counts) out.push_back({pattern, count});
    return out;
}

BinaryData compress(const BinaryData& data) {
    const auto table = pattern_table(data);
    std::vector<std::uint8_t> cells;
    std::vector<double> weights;
    cells.reserve(table.size() * data.n_vars());
    for (const auto& p : table) {
        for (char ch : p.pattern) cells.push_back(ch == '1' ? 1 : 0);
        weights.push_back(p.observed);
    }
    return BinaryData(data.n_vars(), std::move(cells), std::move(weights), data.names());
}

CategoricalTable load_categorical(std::istream& in, bool has_header) {
    const auto lines = read_lines(in);
    CategoricalTable table;
    std::size_t width = 0;
    bool first = true;
    for (const auto& [number, text] : lines.items) {
        auto fields = split_csv_line(text);
        if (first) {
            first = false;
            width = fields.size();
            if (has_header) {
                table.column_names = std::move(fields);
                continue;
            }
            for (std::size_t c = 0; c < width; ++c) table.column_names.push_back("V" + std::to_string(c + 1));
        }
        if (fields.size() != width) {
            throw ParseError("ragged row", number, std::min(fields.size(), width) + 1);
        }
        table.rows.push_back(std::move(fields));
    }
    return table;
}

BinaryData encode_categorical(const CategoricalTable& table, const AbCoding& coding) {
    const std::size_t cols = table.column_names.size();
    auto contains = [](const std::vector<std::string>& set, const std::string& s) {
        return std::find(set.begin(), set.end(), s) != set.end();
    };
    std::vector<std::uint8_t> cells;
    cells.reserve(table.n_rows() * cols * 2);
    for (const auto& row : table.rows) {
        if (row.size() != cols) throw ArgumentError("categorical row width mismatch");
        for (std::size_t c = 0; c < cols; ++c) {
            const auto& label = row[c];
            if (contains(coding.yes, label)) {
                cells.push_back(1);
                cells.push_back(1);
            } else if (contains(coding.no, label)) {
                cells.push_back(1);
                cells.push_back(0);
            } else if (contains(coding.undecided, label)) {
                cells.push_back(0);
                cells.push_back(0);
            } else {
                throw EncodingError(table.column_names[c], label);
            }
        }
    }
    std::vector<std::string> names;
    for (const auto& c : table.column_names) {
        names.push_back(c + "_a");
        names.push_back(c + "_b");
    }
    return BinaryData(cols * 2, std::move(cells), std::vector<double>(table.n_rows(), 1.0), std::move(names));
}

CategoricalTable drop_column(const CategoricalTable& table, std::size_t column) {
    if (column >= table.column_names.size()) throw ArgumentError("column index out of range");
    CategoricalTable out;
    out.column_names = table.column_names;
    out.column_names.erase(out.column_names.begin() + static_cast<std::ptrdiff_t>(column));
    out.rows.reserve(table.rows.size());
    for (auto row : table.rows) {
        row.erase(row.begin() + static_cast<std::ptrdiff_t>(column));
        out.rows.push_back(std::move(row));
    }
    return out;
}

}  // namespace mlta
