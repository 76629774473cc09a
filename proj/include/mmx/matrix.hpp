#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "errors.hpp"

namespace mmx {

// Dense real matrix, row-major. Entries are validated finite on checked
// construction paths (from_entries, CSV/JSON loaders); values produced by
// in-library arithmetic stay finite by construction.
class Matrix {
  public:
    Matrix() = default;

    Matrix(int rows, int cols, double fill = 0.0) : rows_(rows), cols_(cols) {
        if (rows <= 0 || cols <= 0) throw invalid_matrix("matrix dimensions must be positive");
        if (!std::isfinite(fill)) throw invalid_matrix("matrix entries must be finite");
        entries_.assign(static_cast<std::size_t>(rows) * cols, fill);
    }

    static Matrix from_entries(int rows, int cols, std::vector<double> entries) {
        if (rows <= 0 || cols <= 0) throw invalid_matrix("matrix dimensions must be positive");
        if (entries.size() != static_cast<std::size_t>(rows) * cols)
            throw invalid_matrix("entry count does not match rows*cols");
        for (double v : entries)
            if (!std::isfinite(v)) throw invalid_matrix("matrix entries must be finite");
        Matrix a;
        a.rows_ = rows;
        a.cols_ = cols;
        a.entries_ = std::move(entries);
        return a;
    }

    static Matrix identity(int n) {
        Matrix a(n, n);
        for (int i = 0; i < n; ++i) a.at(i, i) = 1.0;
        return a;
    }

    static Matrix diag(const std::vector<double>& d, int rows, int cols) {
        Matrix a(rows, cols);
        const int r = std::min(rows, cols);
        if (static_cast<int>(d.size()) > r) throw dimension_error("too many diagonal values");
        for (int i = 0; i < static_cast<int>(d.size()); ++i) a.at(i, i) = d[i];
        return a;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }

    // 0-based internal accessors; the 1-based convention lives in IndexSet
    double& at(int i, int j) { return entries_[static_cast<std::size_t>(i) * cols_ + j]; }
    double at(int i, int j) const { return entries_[static_cast<std::size_t>(i) * cols_ + j]; }

    const std::vector<double>& entries() const { return entries_; }
    std::vector<double>& entries() { return entries_; }

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    bool all_finite() const {
        for (double v : entries_)
            if (!std::isfinite(v)) return false;
        return true;
    }

  private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> entries_;
};

inline Matrix operator+(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) throw dimension_error("matrix addition: shape mismatch");
    Matrix c = a;
    for (std::size_t i = 0; i < c.entries().size(); ++i) c.entries()[i] += b.entries()[i];
    return c;
}

inline Matrix operator-(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) throw dimension_error("matrix subtraction: shape mismatch");
    Matrix c = a;
    for (std::size_t i = 0; i < c.entries().size(); ++i) c.entries()[i] -= b.entries()[i];
    return c;
}

inline Matrix operator*(double s, const Matrix& a) {
    Matrix c = a;
    for (double& v : c.entries()) v *= s;
    return c;
}

inline Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) t.at(j, i) = a.at(i, j);
    return t;
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw dimension_error("matmul: inner dimensions differ");
    Matrix c(a.rows(), b.cols());
    for (int i = 0; i < a.rows(); ++i)
        for (int l = 0; l < a.cols(); ++l) {
            const double v = a.at(i, l);
            if (v == 0.0) continue;
            for (int j = 0; j < b.cols(); ++j) c.at(i, j) += v * b.at(l, j);
        }
    return c;
}

inline double frobenius_norm(const Matrix& a) {
    double s = 0.0;
    for (double v : a.entries()) s += v * v;
    return std::sqrt(s);
}

inline double inner(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) throw dimension_error("inner: shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.entries().size(); ++i) s += a.entries()[i] * b.entries()[i];
    return s;
}

// Sorted set of 1-based indices inside [1, universe].
struct IndexSet {
    int universe = 0;
    std::vector<int> members;

    static IndexSet of(int universe, std::vector<int> members) {
        if (universe <= 0) throw index_error("index set universe must be positive");
        int prev = 0;
        for (int v : members) {
            if (v <= prev) throw index_error("index set members must be strictly increasing");
            if (v > universe) throw index_error("index out of range");
            prev = v;
        }
        return IndexSet{universe, std::move(members)};
    }

    static IndexSet full(int universe) {
        std::vector<int> m(universe);
        for (int i = 0; i < universe; ++i) m[i] = i + 1;
        return IndexSet{universe, std::move(m)};
    }

    int size() const { return static_cast<int>(members.size()); }

    bool contains(int v) const {
        for (int m : members)
            if (m == v) return true;
        return false;
    }

    IndexSet complement() const {
        std::vector<int> out;
        out.reserve(universe - size());
        std::size_t p = 0;
        for (int v = 1; v <= universe; ++v) {
            if (p < members.size() && members[p] == v)
                ++p;
            else
                out.push_back(v);
        }
        return IndexSet{universe, std::move(out)};
    }
};

inline Matrix submatrix(const Matrix& a, const IndexSet& rows, const IndexSet& cols) {
    if (rows.universe != a.rows() || cols.universe != a.cols())
        throw index_error("submatrix: index universe does not match matrix shape");
    if (rows.size() == 0 || cols.size() == 0) throw index_error("submatrix: empty index set");
    Matrix out(rows.size(), cols.size());
    for (int i = 0; i < rows.size(); ++i)
        for (int j = 0; j < cols.size(); ++j)
            out.at(i, j) = a.at(rows.members[i] - 1, cols.members[j] - 1);
    return out;
}

// Inverse of submatrix: place a at rows x cols inside a p x m zero matrix.
inline Matrix block_embed(const Matrix& a, int p, int m, const IndexSet& rows,
                          const IndexSet& cols) {
    if (rows.size() != a.rows() || cols.size() != a.cols())
        throw dimension_error("block_embed: index set sizes must match the block");
    if (rows.universe != p || cols.universe != m)
        throw dimension_error("block_embed: index universes must be (p, m)");
    Matrix out(p, m);
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j)
            out.at(rows.members[i] - 1, cols.members[j] - 1) = a.at(i, j);
    return out;
}

// ---- serialization ------------------------------------------------------
// CSV: one line per row, '.' decimal separator, no header.

inline std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string to_csv(const Matrix& a) {
    std::string out;
    for (int i = 0; i < a.rows(); ++i) {
        for (int j = 0; j < a.cols(); ++j) {
            if (j) out += ',';
            out += format_real(a.at(i, j));
        }
        out += '\n';
    }
    return out;
}

inline Matrix matrix_from_csv(std::istream& in) {
    std::vector<double> entries;
    std::string line;
    int cols = -1, rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        int c = 0;
        while (std::getline(ss, cell, ',')) {
            try {
                entries.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw invalid_matrix("csv: unparsable entry '" + cell + "'");
            }
            ++c;
        }
        if (cols == -1)
            cols = c;
        else if (c != cols)
            throw invalid_matrix("csv: ragged rows");
        ++rows;
    }
    if (rows == 0) throw invalid_matrix("csv: empty input");
    return Matrix::from_entries(rows, cols, std::move(entries));
}

inline Matrix matrix_from_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open " + path);
    return matrix_from_csv(in);
}

inline nlohmann::ordered_json matrix_to_json(const Matrix& a) {
    return nlohmann::ordered_json{{"rows", a.rows()}, {"cols", a.cols()}, {"entries", a.entries()}};
}

inline Matrix matrix_from_json(const nlohmann::json& j) {
    try {
        return Matrix::from_entries(j.at("rows").get<int>(), j.at("cols").get<int>(),
                                    j.at("entries").get<std::vector<double>>());
    } catch (const nlohmann::json::exception& e) {
        throw invalid_matrix(std::string("matrix json: ") + e.what());
    }
}

} // namespace mmx
