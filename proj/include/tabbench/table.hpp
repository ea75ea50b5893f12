#pragma once

// Typed tabular data: schema, table storage, CSV + schema-manifest I/O,
// the train/val/test splitting protocol and preprocessing
// (imputation, one-hot encoding, z-score normalisation).

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "tabbench/error.hpp"
#include "tabbench/rng.hpp"

namespace tabbench {

enum class ColumnKind { Numeric, Categorical };

struct ColumnSchema {
    std::string name;
    ColumnKind kind = ColumnKind::Numeric;
    std::vector<std::string> categories;  // Categorical only

    bool operator==(const ColumnSchema&) const = default;
};

inline void validate_schema(const std::vector<ColumnSchema>& schema) {
    if (schema.empty()) throw ValidationError("schema: no columns");
    std::map<std::string, int> seen;
    for (const auto& col : schema) {
        if (col.name.empty()) throw ValidationError("schema: empty column name");
        if (!seen.emplace(col.name, 0).second)
            throw ValidationError("schema: duplicate column '" + col.name + "'");
        if (col.kind == ColumnKind::Categorical) {
            if (col.categories.empty())
                throw ValidationError("schema: column '" + col.name + "' has no categories");
            std::map<std::string, int> cats;
            for (const auto& c : col.categories)
                if (!cats.emplace(c, 0).second)
                    throw ValidationError("schema: duplicate category '" + c +
                                          "' in column '" + col.name + "'");
        }
    }
}

/// Column-major typed table. Cells are numeric, a category index, or missing.
/// Logically immutable once filled.
class DataTable {
public:
    DataTable(std::vector<ColumnSchema> schema, std::optional<std::string> target = {})
        : schema_(std::move(schema)), target_(std::move(target)) {
        validate_schema(schema_);
        if (target_) column_index(*target_);  // must exist
        cols_.resize(schema_.size());
    }

    const std::vector<ColumnSchema>& schema() const { return schema_; }
    const std::optional<std::string>& target() const { return target_; }
    std::size_t row_count() const { return nrows_; }
    std::size_t column_count() const { return schema_.size(); }

    std::size_t column_index(const std::string& name) const {
        for (std::size_t i = 0; i < schema_.size(); ++i)
            if (schema_[i].name == name) return i;
        throw ValidationError("unknown column '" + name + "'");
    }

    std::size_t target_index() const {
        if (!target_) throw ValidationError("table has no target column");
        return column_index(*target_);
    }

    std::size_t add_row() {
        for (std::size_t c = 0; c < cols_.size(); ++c) {
            cols_[c].missing.push_back(1);
            if (schema_[c].kind == ColumnKind::Numeric)
                cols_[c].num.push_back(0.0);
            else
                cols_[c].cat.push_back(0);
        }
        return nrows_++;
    }

    void reserve(std::size_t n) {
        for (std::size_t c = 0; c < cols_.size(); ++c) {
            cols_[c].missing.reserve(n);
            if (schema_[c].kind == ColumnKind::Numeric)
                cols_[c].num.reserve(n);
            else
                cols_[c].cat.reserve(n);
        }
    }

    void set_numeric(std::size_t col, std::size_t row, double v) {
        if (!std::isfinite(v))
            throw ValidationError("non-finite value in column '" + schema_[col].name + "'");
        cols_[col].num[row] = v;
        cols_[col].missing[row] = 0;
    }

    void set_category(std::size_t col, std::size_t row, std::int32_t idx) {
        if (idx < 0 || static_cast<std::size_t>(idx) >= schema_[col].categories.size())
            throw ValidationError("category index out of range in column '" +
                                  schema_[col].name + "'");
        cols_[col].cat[row] = idx;
        cols_[col].missing[row] = 0;
    }

    void set_missing(std::size_t col, std::size_t row) { cols_[col].missing[row] = 1; }

    bool is_missing(std::size_t col, std::size_t row) const {
        return cols_[col].missing[row] != 0;
    }
    double numeric(std::size_t col, std::size_t row) const { return cols_[col].num[row]; }
    std::int32_t category(std::size_t col, std::size_t row) const {
        return cols_[col].cat[row];
    }
    const std::string& category_label(std::size_t col, std::size_t row) const {
        return schema_[col].categories[static_cast<std::size_t>(cols_[col].cat[row])];
    }

    std::int32_t category_index_of(std::size_t col, const std::string& label) const {
        const auto& cats = schema_[col].categories;
        for (std::size_t i = 0; i < cats.size(); ++i)
            if (cats[i] == label) return static_cast<std::int32_t>(i);
        return -1;
    }

    /// Copy of the given rows, same schema and target.
    DataTable select_rows(const std::vector<std::size_t>& rows) const {
        DataTable out(schema_, target_);
        out.reserve(rows.size());
        for (std::size_t r : rows) {
            std::size_t nr = out.add_row();
            for (std::size_t c = 0; c < schema_.size(); ++c) {
                if (is_missing(c, r)) continue;
                if (schema_[c].kind == ColumnKind::Numeric)
                    out.set_numeric(c, nr, numeric(c, r));
                else
                    out.set_category(c, nr, category(c, r));
            }
        }
        return out;
    }

    bool same_schema(const DataTable& other) const { return schema_ == other.schema_; }

private:
    struct Column {
        std::vector<double> num;
        std::vector<std::int32_t> cat;
        std::vector<std::uint8_t> missing;
    };

    std::vector<ColumnSchema> schema_;
    std::optional<std::string> target_;
    std::vector<Column> cols_;
    std::size_t nrows_ = 0;
};

// ---------------------------------------------------------------------------
// CSV

namespace detail {

inline std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    out += '"';
    return out;
}

inline std::vector<std::string> csv_split_line(const std::string& line, std::size_t lineno) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += ch;
        }
    }
    if (quoted) throw ParseError("unterminated quote", lineno, line.size());
    fields.push_back(std::move(cur));
    return fields;
}

inline std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

} // namespace detail

/// Parse CSV text against a schema. The header row must match the schema
/// column names in order; empty cells become missing markers.
inline DataTable load_csv(const std::string& text, std::vector<ColumnSchema> schema,
                          std::optional<std::string> target = {}) {
    validate_schema(schema);
    DataTable table(schema, std::move(target));

    std::vector<std::string> lines;
    std::string cur;
    for (char ch : text) {
        if (ch == '\n') {
            if (!cur.empty() && cur.back() == '\r') cur.pop_back();
            lines.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += ch;
        }
    }
    if (!cur.empty()) {
        if (cur.back() == '\r') cur.pop_back();
        lines.push_back(std::move(cur));
    }
    if (lines.empty()) throw ParseError("empty CSV document", 1, 1);

    auto header = detail::csv_split_line(lines[0], 1);
    if (header.size() != schema.size())
        throw ParseError("header has " + std::to_string(header.size()) +
                             " columns, schema has " + std::to_string(schema.size()),
                         1, 1);
    for (std::size_t c = 0; c < schema.size(); ++c)
        if (header[c] != schema[c].name)
            throw ParseError("header column '" + header[c] + "' does not match schema '" +
                                 schema[c].name + "'",
                             1, c + 1);

    for (std::size_t li = 1; li < lines.size(); ++li) {
        if (lines[li].empty()) continue;
        auto fields = detail::csv_split_line(lines[li], li + 1);
        if (fields.size() != schema.size())
            throw ParseError("row has " + std::to_string(fields.size()) + " fields",
                             li + 1, 1);
        std::size_t r = table.add_row();
        for (std::size_t c = 0; c < schema.size(); ++c) {
            const std::string& cell = fields[c];
            if (cell.empty()) continue;  // missing
            if (schema[c].kind == ColumnKind::Numeric) {
                double v = 0.0;
                auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
                if (res.ec != std::errc() || res.ptr != cell.data() + cell.size())
                    throw ParseError("cannot parse numeric cell '" + cell +
                                         "' in column '" + schema[c].name + "'",
                                     li + 1, c + 1);
                if (!std::isfinite(v))
                    throw ParseError("non-finite numeric cell in column '" +
                                         schema[c].name + "'",
                                     li + 1, c + 1);
                table.set_numeric(c, r, v);
            } else {
                std::int32_t idx = table.category_index_of(c, cell);
                if (idx < 0)
                    throw ParseError("undeclared category '" + cell + "' in column '" +
                                         schema[c].name + "'",
                                     li + 1, c + 1);
                table.set_category(c, r, idx);
            }
        }
    }
    return table;
}

/// Shortest round-trip decimal formatting for numerics; missing = empty field.
inline std::string write_csv(const DataTable& table) {
    std::string out;
    const auto& schema = table.schema();
    for (std::size_t c = 0; c < schema.size(); ++c) {
        if (c) out += ',';
        out += detail::csv_quote(schema[c].name);
    }
    out += '\n';
    for (std::size_t r = 0; r < table.row_count(); ++r) {
        for (std::size_t c = 0; c < schema.size(); ++c) {
            if (c) out += ',';
            if (table.is_missing(c, r)) continue;
            if (schema[c].kind == ColumnKind::Numeric)
                out += detail::format_double(table.numeric(c, r));
            else
                out += detail::csv_quote(table.category_label(c, r));
        }
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// Schema manifest (JSON sidecar)

inline nlohmann::json schema_to_manifest(const std::vector<ColumnSchema>& schema,
                                         const std::optional<std::string>& target) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& col : schema) {
        nlohmann::json j;
        j["name"] = col.name;
        j["kind"] = col.kind == ColumnKind::Numeric ? "numeric" : "categorical";
        if (col.kind == ColumnKind::Categorical) j["categories"] = col.categories;
        if (target && *target == col.name) j["target"] = true;
        arr.push_back(std::move(j));
    }
    return arr;
}

inline std::pair<std::vector<ColumnSchema>, std::optional<std::string>>
manifest_to_schema(const nlohmann::json& manifest) {
    if (!manifest.is_array()) throw ParseError("manifest: expected a JSON array");
    std::vector<ColumnSchema> schema;
    std::optional<std::string> target;
    for (const auto& j : manifest) {
        ColumnSchema col;
        col.name = j.at("name").get<std::string>();
        std::string kind = j.at("kind").get<std::string>();
        if (kind == "numeric")
            col.kind = ColumnKind::Numeric;
        else if (kind == "categorical")
            col.kind = ColumnKind::Categorical;
        else
            throw ParseError("manifest: unknown kind '" + kind + "'");
        if (col.kind == ColumnKind::Categorical)
            col.categories = j.at("categories").get<std::vector<std::string>>();
        if (j.value("target", false)) {
            if (target) throw ParseError("manifest: multiple target columns");
            target = col.name;
        }
        schema.push_back(std::move(col));
    }
    validate_schema(schema);
    return {schema, target};
}

// ---------------------------------------------------------------------------
// Splitting: 80% test holdout complement, then 90/10 train/validation,
// stratified by class for classification targets.

struct SplitIndices {
    std::vector<std::size_t> train, val, test;
    std::int64_t seed = 0;
};

namespace detail {

/// Allocate `total` slots across groups proportionally to their sizes,
/// by largest remainder; every allocation is within one of the exact share.
inline std::vector<std::size_t> largest_remainder(const std::vector<std::size_t>& sizes,
                                                  std::size_t total) {
    double whole = 0.0;
    for (std::size_t s : sizes) whole += static_cast<double>(s);
    std::vector<std::size_t> alloc(sizes.size(), 0);
    std::vector<std::pair<double, std::size_t>> frac;
    std::size_t assigned = 0;
    for (std::size_t g = 0; g < sizes.size(); ++g) {
        double share = whole > 0 ? static_cast<double>(total) *
                                       static_cast<double>(sizes[g]) / whole
                                 : 0.0;
        alloc[g] = static_cast<std::size_t>(std::floor(share));
        alloc[g] = std::min(alloc[g], sizes[g]);
        assigned += alloc[g];
        frac.emplace_back(share - std::floor(share), g);
    }
    std::sort(frac.begin(), frac.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (const auto& [f, g] : frac) {
        if (assigned >= total) break;
        if (alloc[g] < sizes[g]) {
            ++alloc[g];
            ++assigned;
        }
    }
    return alloc;
}

} // namespace detail

inline SplitIndices split(const DataTable& table, std::int64_t seed) {
    const std::size_t n = table.row_count();
    if (n < 10) throw ValidationError("split: need at least 10 rows");
    auto n_test = static_cast<std::size_t>(std::llround(0.2 * static_cast<double>(n)));
    auto n_val = static_cast<std::size_t>(
        std::llround(0.1 * static_cast<double>(n - n_test)));

    bool stratify = false;
    std::size_t tcol = 0;
    if (table.target()) {
        tcol = table.target_index();
        stratify = table.schema()[tcol].kind == ColumnKind::Categorical;
    }

    // Group rows: one group per class when stratifying, else a single pool.
    std::vector<std::vector<std::size_t>> groups;
    if (stratify) {
        groups.resize(table.schema()[tcol].categories.size());
        for (std::size_t r = 0; r < n; ++r) {
            if (table.is_missing(tcol, r))
                throw ValidationError("split: missing target value at row " +
                                      std::to_string(r));
            groups[static_cast<std::size_t>(table.category(tcol, r))].push_back(r);
        }
        for (std::size_t g = 0; g < groups.size(); ++g)
            if (groups[g].size() == 1)
                throw ValidationError("split: class '" +
                                      table.schema()[tcol].categories[g] +
                                      "' has a single row; cannot stratify");
        groups.erase(std::remove_if(groups.begin(), groups.end(),
                                    [](const auto& g) { return g.empty(); }),
                     groups.end());
    } else {
        groups.emplace_back();
        groups[0].resize(n);
        for (std::size_t r = 0; r < n; ++r) groups[0][r] = r;
    }

    RngStream rng(static_cast<std::uint64_t>(seed), 0x5917u);
    for (auto& g : groups) {
        for (std::size_t i = g.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(rng.uniform_int(i));
            std::swap(g[i - 1], g[j]);
        }
    }

    std::vector<std::size_t> sizes;
    for (const auto& g : groups) sizes.push_back(g.size());
    auto test_quota = detail::largest_remainder(sizes, n_test);
    std::vector<std::size_t> remain_sizes;
    for (std::size_t g = 0; g < groups.size(); ++g)
        remain_sizes.push_back(sizes[g] - test_quota[g]);
    auto val_quota = detail::largest_remainder(remain_sizes, n_val);

    SplitIndices out;
    out.seed = seed;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const auto& rows = groups[g];
        std::size_t t = test_quota[g], v = val_quota[g];
        out.test.insert(out.test.end(), rows.begin(), rows.begin() + t);
        out.val.insert(out.val.end(), rows.begin() + t, rows.begin() + t + v);
        out.train.insert(out.train.end(), rows.begin() + t + v, rows.end());
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.val.begin(), out.val.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

// ---------------------------------------------------------------------------
// Preprocessing: impute -> one-hot -> z-score. Statistics come from the
// training table only; constant numeric columns record std 1 so their
// transformed cells map to 0.

class Preprocessor {
public:
    static Preprocessor fit(const DataTable& train) {
        if (train.row_count() == 0) throw ValidationError("fit_preprocessor: empty table");
        Preprocessor p;
        p.schema_ = train.schema();
        const auto& schema = p.schema_;
        p.stats_.resize(schema.size());
        std::size_t width = 0;
        for (std::size_t c = 0; c < schema.size(); ++c) {
            auto& st = p.stats_[c];
            st.offset = width;
            if (schema[c].kind == ColumnKind::Numeric) {
                std::vector<double> vals;
                for (std::size_t r = 0; r < train.row_count(); ++r)
                    if (!train.is_missing(c, r)) vals.push_back(train.numeric(c, r));
                if (vals.empty())
                    throw ValidationError("fit_preprocessor: column '" + schema[c].name +
                                          "' is entirely missing");
                st.mean = mean_of_(vals);
                st.std = stddev_pop_(vals, st.mean);
                if (st.std <= 0.0) st.std = 1.0;
                width += 1;
            } else {
                std::vector<std::size_t> counts(schema[c].categories.size(), 0);
                std::size_t present = 0;
                for (std::size_t r = 0; r < train.row_count(); ++r)
                    if (!train.is_missing(c, r)) {
                        ++counts[static_cast<std::size_t>(train.category(c, r))];
                        ++present;
                    }
                if (present == 0)
                    throw ValidationError("fit_preprocessor: column '" + schema[c].name +
                                          "' is entirely missing");
                st.mode = static_cast<std::int32_t>(
                    std::max_element(counts.begin(), counts.end()) - counts.begin());
                width += schema[c].categories.size();
            }
        }
        p.width_ = width;
        return p;
    }

    std::size_t width() const { return width_; }
    const std::vector<ColumnSchema>& schema() const { return schema_; }

    double numeric_mean(std::size_t col) const { return stats_[col].mean; }
    double numeric_std(std::size_t col) const { return stats_[col].std; }
    std::int32_t categorical_mode(std::size_t col) const { return stats_[col].mode; }

    /// Encoded width of a single column (1 for numeric, #categories otherwise).
    std::size_t column_width(std::size_t col) const {
        return schema_[col].kind == ColumnKind::Numeric ? 1
                                                        : schema_[col].categories.size();
    }
    std::size_t column_offset(std::size_t col) const { return stats_[col].offset; }

    Eigen::MatrixXd transform(const DataTable& table) const {
        if (table.schema() != schema_)
            throw ValidationError("apply_preprocessor: schema mismatch");
        Eigen::MatrixXd out = Eigen::MatrixXd::Zero(
            static_cast<Eigen::Index>(table.row_count()),
            static_cast<Eigen::Index>(width_));
        for (std::size_t r = 0; r < table.row_count(); ++r)
            for (std::size_t c = 0; c < schema_.size(); ++c) {
                const auto& st = stats_[c];
                if (schema_[c].kind == ColumnKind::Numeric) {
                    double v = table.is_missing(c, r) ? st.mean : table.numeric(c, r);
                    out(static_cast<Eigen::Index>(r),
                        static_cast<Eigen::Index>(st.offset)) = (v - st.mean) / st.std;
                } else {
                    std::int32_t idx =
                        table.is_missing(c, r) ? st.mode : table.category(c, r);
                    out(static_cast<Eigen::Index>(r),
                        static_cast<Eigen::Index>(st.offset +
                                                  static_cast<std::size_t>(idx))) = 1.0;
                }
            }
        return out;
    }

    /// Imputed raw numeric value (train mean for missing cells).
    double raw_numeric(const DataTable& t, std::size_t col, std::size_t row) const {
        return t.is_missing(col, row) ? stats_[col].mean : t.numeric(col, row);
    }
    /// Imputed category index (train mode for missing cells).
    std::int32_t raw_category(const DataTable& t, std::size_t col, std::size_t row) const {
        return t.is_missing(col, row) ? stats_[col].mode : t.category(col, row);
    }

private:
    static double mean_of_(const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    }
    static double stddev_pop_(const std::vector<double>& v, double m) {
        double s = 0.0;
        for (double x : v) s += (x - m) * (x - m);
        return std::sqrt(s / static_cast<double>(v.size()));
    }

    struct ColumnStats {
        std::size_t offset = 0;
        double mean = 0.0;
        double std = 1.0;
        std::int32_t mode = 0;
    };

    std::vector<ColumnSchema> schema_;
    std::vector<ColumnStats> stats_;
    std::size_t width_ = 0;
};

inline Preprocessor fit_preprocessor(const DataTable& train) { return Preprocessor::fit(train); }

inline Eigen::MatrixXd apply_preprocessor(const Preprocessor& p, const DataTable& table) {
    return p.transform(table);
}

} // namespace tabbench
