#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fare/errors.hpp"
#include "fare/random.hpp"

namespace fare {

// ---------------------------------------------------------------------------
// Schema configuration
// ---------------------------------------------------------------------------

// Column roles and binarization maps for one dataset. Loaded from a JSON
// file shipped alongside the CSV:
//   {"label_column": "income", "positive_label_value": ">50K",
//    "protected_column": "sex", "protected_one_value": "Female",
//    "categorical_columns": ["workclass", ...], "na_values": ["?"]}
struct SchemaConfig {
    std::string label_column;
    std::string protected_column;
    std::string positive_label_value;
    std::string protected_one_value;
    std::vector<std::string> categorical_columns;
    std::vector<std::string> na_values = {""};

    static SchemaConfig from_json(const nlohmann::json& j) {
        SchemaConfig s;
        try {
            s.label_column = j.at("label_column").get<std::string>();
            s.protected_column = j.at("protected_column").get<std::string>();
            s.positive_label_value = j.at("positive_label_value").get<std::string>();
            s.protected_one_value = j.at("protected_one_value").get<std::string>();
            if (j.contains("categorical_columns"))
                s.categorical_columns = j.at("categorical_columns").get<std::vector<std::string>>();
            if (j.contains("na_values")) {
                s.na_values = j.at("na_values").get<std::vector<std::string>>();
                s.na_values.push_back("");
            }
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("bad schema config: ") + e.what());
        }
        if (s.label_column == s.protected_column)
            throw ConfigError("label_column and protected_column must differ");
        return s;
    }

    static SchemaConfig from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open schema config: " + path);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("cannot parse schema config " + path + ": " + e.what());
        }
        return from_json(j);
    }

    bool is_na(const std::string& v) const {
        return std::find(na_values.begin(), na_values.end(), v) != na_values.end();
    }
};

// ---------------------------------------------------------------------------
// Raw CSV data
// ---------------------------------------------------------------------------

struct RawDataset {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;  // rows.size() x columns.size()
    SchemaConfig schema;
    std::size_t dropped_rows = 0;  // rows discarded for missing values

    std::size_t column_index(const std::string& name) const {
        auto it = std::find(columns.begin(), columns.end(), name);
        if (it == columns.end()) throw DataError("column not found: " + name);
        return static_cast<std::size_t>(it - columns.begin());
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

// RFC-4180 record reader: quoted fields, doubled quotes, fields may
// contain commas and newlines. Returns false at end of input.
inline bool read_csv_record(std::istream& in, std::vector<std::string>& fields) {
    fields.clear();
    std::string field;
    bool in_quotes = false;
    bool saw_any = false;
    int c;
    while ((c = in.get()) != EOF) {
        saw_any = true;
        char ch = static_cast<char>(c);
        if (in_quotes) {
            if (ch == '"') {
                if (in.peek() == '"') {
                    field.push_back('"');
                    in.get();
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(ch);
            }
        } else if (ch == '"') {
            in_quotes = true;
        } else if (ch == ',') {
            fields.push_back(field);
            field.clear();
        } else if (ch == '\n') {
            if (!field.empty() && field.back() == '\r') field.pop_back();
            fields.push_back(field);
            return true;
        } else {
            field.push_back(ch);
        }
    }
    if (!saw_any) return false;
    if (!field.empty() && field.back() == '\r') field.pop_back();
    fields.push_back(field);
    return true;
}

}  // namespace detail

// Parses a CSV file with a header row, drops rows that have a missing
// value in any column, and verifies the schema's columns exist and that
// label/protected columns are binarizable (exactly two distinct values,
// with the configured positive/one value among them).
inline RawDataset load_csv(const std::string& path, const SchemaConfig& schema) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open dataset file: " + path);

    RawDataset raw;
    raw.schema = schema;
    std::vector<std::string> fields;
    if (!detail::read_csv_record(in, fields) || fields.empty())
        throw DataError("empty CSV file: " + path);
    for (auto& f : fields) raw.columns.push_back(detail::trim(f));

    for (const auto& required :
         {schema.label_column, schema.protected_column}) {
        if (std::find(raw.columns.begin(), raw.columns.end(), required) == raw.columns.end())
            throw DataError("schema column missing from CSV header: " + required);
    }
    for (const auto& cat : schema.categorical_columns) {
        if (std::find(raw.columns.begin(), raw.columns.end(), cat) == raw.columns.end())
            throw DataError("schema column missing from CSV header: " + cat);
    }

    while (detail::read_csv_record(in, fields)) {
        if (fields.size() == 1 && detail::trim(fields[0]).empty()) continue;  // blank line
        if (fields.size() != raw.columns.size())
            throw DataError(path + ": row with " + std::to_string(fields.size()) +
                            " fields, expected " + std::to_string(raw.columns.size()));
        std::vector<std::string> row;
        row.reserve(fields.size());
        bool missing = false;
        for (auto& f : fields) {
            std::string v = detail::trim(f);
            if (schema.is_na(v)) missing = true;
            row.push_back(std::move(v));
        }
        if (missing) {
            ++raw.dropped_rows;
        } else {
            raw.rows.push_back(std::move(row));
        }
    }
    if (raw.rows.empty()) throw DataError(path + ": no usable rows after dropping missing values");

    for (const auto& [col, one_value] :
         {std::pair{schema.label_column, schema.positive_label_value},
          std::pair{schema.protected_column, schema.protected_one_value}}) {
        std::size_t idx = raw.column_index(col);
        std::set<std::string> distinct;
        for (const auto& row : raw.rows) distinct.insert(row[idx]);
        if (distinct.size() != 2)
            throw DataError("column '" + col + "' is not binary: " +
                            std::to_string(distinct.size()) + " distinct values");
        if (!distinct.count(one_value))
            throw DataError("column '" + col + "' never takes the configured value '" +
                            one_value + "'");
    }
    return raw;
}

// ---------------------------------------------------------------------------
// Numeric dataset
// ---------------------------------------------------------------------------

// Feature matrix plus protected attribute and label vectors. X is
// row-major n x d.
struct Dataset {
    std::vector<double> X;
    std::vector<int> a;
    std::vector<int> y;
    std::size_t d = 0;
    std::vector<std::string> feature_names;

    std::size_t size() const { return a.size(); }
    const double* row(std::size_t i) const { return X.data() + i * d; }

    Dataset subset(const std::vector<std::size_t>& idx) const {
        Dataset out;
        out.d = d;
        out.feature_names = feature_names;
        out.X.reserve(idx.size() * d);
        out.a.reserve(idx.size());
        out.y.reserve(idx.size());
        for (std::size_t i : idx) {
            out.X.insert(out.X.end(), row(i), row(i) + d);
            out.a.push_back(a[i]);
            out.y.push_back(y[i]);
        }
        return out;
    }
};

// Both protected-attribute values and both label values must occur, or
// the harness refuses the dataset.
inline void validate_margins(const Dataset& ds, const std::string& context) {
    bool a0 = false, a1 = false, y0 = false, y1 = false;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        (ds.a[i] == 1 ? a1 : a0) = true;
        (ds.y[i] == 1 ? y1 : y0) = true;
    }
    if (!(a0 && a1 && y0 && y1))
        throw DataError(context + ": degenerate dataset, needs both protected groups "
                                  "and both label values");
}

// Z-scores the given feature columns in place using statistics of the
// rows in `fit_rows` (population 1/n variance convention).
inline void standardize_columns(Dataset& ds, const std::vector<std::size_t>& columns,
                                const std::vector<std::size_t>& fit_rows) {
    for (std::size_t c : columns) {
        double mean = 0.0;
        for (std::size_t i : fit_rows) mean += ds.X[i * ds.d + c];
        mean /= static_cast<double>(fit_rows.size());
        double var = 0.0;
        for (std::size_t i : fit_rows) {
            double delta = ds.X[i * ds.d + c] - mean;
            var += delta * delta;
        }
        var /= static_cast<double>(fit_rows.size());
        double scale = var > 0.0 ? 1.0 / std::sqrt(var) : 1.0;
        for (std::size_t i = 0; i < ds.size(); ++i) {
            double& v = ds.X[i * ds.d + c];
            v = (v - mean) * scale;
        }
    }
}

struct PreprocessResult {
    Dataset data;
    std::vector<std::string> dropped_columns;  // zero-variance numerics
};

// Turns raw string rows into the numeric design matrix:
//   - label/protected columns binarized per schema,
//   - categorical columns one-hot encoded (lexicographic category order),
//   - remaining columns parsed as numerics and z-scored on `fit_rows`
//     (all rows when empty); zero-variance numerics are dropped.
inline PreprocessResult preprocess(const RawDataset& raw,
                                   std::vector<std::size_t> fit_rows = {}) {
    const auto& schema = raw.schema;
    const std::size_t n = raw.rows.size();
    if (fit_rows.empty()) {
        fit_rows.resize(n);
        for (std::size_t i = 0; i < n; ++i) fit_rows[i] = i;
    }

    const std::size_t label_idx = raw.column_index(schema.label_column);
    const std::size_t prot_idx = raw.column_index(schema.protected_column);
    std::set<std::size_t> categorical;
    for (const auto& cat : schema.categorical_columns) {
        std::size_t idx = raw.column_index(cat);
        if (idx == label_idx || idx == prot_idx)
            throw ConfigError("column '" + cat + "' cannot be both categorical and label/protected");
        categorical.insert(idx);
    }

    std::vector<std::size_t> numeric_cols;
    for (std::size_t c = 0; c < raw.columns.size(); ++c) {
        if (c == label_idx || c == prot_idx || categorical.count(c)) continue;
        numeric_cols.push_back(c);
    }

    // Category vocabularies, lexicographic for reproducibility.
    std::map<std::size_t, std::vector<std::string>> vocab;
    for (std::size_t c : categorical) {
        std::set<std::string> values;
        for (const auto& row : raw.rows) values.insert(row[c]);
        vocab[c] = std::vector<std::string>(values.begin(), values.end());
    }

    PreprocessResult result;
    Dataset& ds = result.data;

    // Numeric block first, then one-hot blocks in header order.
    std::vector<std::size_t> kept_numeric;
    std::vector<std::vector<double>> numeric_values(numeric_cols.size());
    for (std::size_t k = 0; k < numeric_cols.size(); ++k) {
        std::size_t c = numeric_cols[k];
        auto& col = numeric_values[k];
        col.reserve(n);
        for (const auto& row : raw.rows) {
            try {
                std::size_t pos = 0;
                double v = std::stod(row[c], &pos);
                if (pos != row[c].size()) throw std::invalid_argument(row[c]);
                col.push_back(v);
            } catch (const std::exception&) {
                throw DataError("column '" + raw.columns[c] + "' is not numeric (value '" +
                                row[c] + "'); declare it categorical in the schema");
            }
        }
        double mean = 0.0;
        for (std::size_t i : fit_rows) mean += col[i];
        mean /= static_cast<double>(fit_rows.size());
        double var = 0.0;
        for (std::size_t i : fit_rows) var += (col[i] - mean) * (col[i] - mean);
        var /= static_cast<double>(fit_rows.size());
        if (var <= 0.0) {
            result.dropped_columns.push_back(raw.columns[c]);
            continue;
        }
        kept_numeric.push_back(k);
        ds.feature_names.push_back(raw.columns[c]);
    }
    for (std::size_t c : categorical)
        for (const auto& v : vocab[c]) ds.feature_names.push_back(raw.columns[c] + "=" + v);

    ds.d = ds.feature_names.size();
    ds.X.assign(n * ds.d, 0.0);
    ds.a.resize(n);
    ds.y.resize(n);

    for (std::size_t i = 0; i < n; ++i) {
        const auto& row = raw.rows[i];
        std::size_t out = 0;
        for (std::size_t k : kept_numeric) ds.X[i * ds.d + out++] = numeric_values[k][i];
        for (std::size_t c : categorical) {
            const auto& values = vocab[c];
            auto it = std::lower_bound(values.begin(), values.end(), row[c]);
            ds.X[i * ds.d + out + static_cast<std::size_t>(it - values.begin())] = 1.0;
            out += values.size();
        }
        ds.a[i] = row[prot_idx] == schema.protected_one_value ? 1 : 0;
        ds.y[i] = row[label_idx] == schema.positive_label_value ? 1 : 0;
    }

    std::vector<std::size_t> numeric_out(kept_numeric.size());
    for (std::size_t k = 0; k < kept_numeric.size(); ++k) numeric_out[k] = k;
    standardize_columns(ds, numeric_out, fit_rows);
    return result;
}

// ---------------------------------------------------------------------------
// Train/test split
// ---------------------------------------------------------------------------

struct Split {
    Dataset train;
    Dataset test;
    int attempts = 1;
};

namespace detail {

inline std::array<bool, 4> cells_present(const Dataset& ds) {
    std::array<bool, 4> cells{false, false, false, false};
    for (std::size_t i = 0; i < ds.size(); ++i)
        cells[static_cast<std::size_t>(ds.a[i] * 2 + ds.y[i])] = true;
    return cells;
}

inline bool margins_ok(const Dataset& ds) {
    bool a0 = false, a1 = false, y0 = false, y1 = false;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        (ds.a[i] == 1 ? a1 : a0) = true;
        (ds.y[i] == 1 ? y1 : y0) = true;
    }
    return a0 && a1 && y0 && y1;
}

}  // namespace detail

// Random disjoint partition, a function of the rng stream only. The
// test partition must contain every (a, y) cell that exists in the full
// dataset (cells the dataset never realizes are not demanded), and both
// partitions must keep both a-values and both y-values; otherwise the
// shuffle is retried, up to 100 times.
inline Split train_test_split(const Dataset& ds, double test_fraction, RandomSource rng) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw ConfigError("test_fraction must be in (0, 1)");
    const std::size_t n = ds.size();
    const std::size_t n_test =
        static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_fraction));
    if (n_test == 0 || n_test == n)
        throw ConfigError("test_fraction leaves an empty partition");

    const auto required = detail::cells_present(ds);
    std::vector<std::size_t> order(n);
    for (int attempt = 1; attempt <= 100; ++attempt) {
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        for (std::size_t i = n - 1; i > 0; --i)
            std::swap(order[i], order[rng.uniform_below(i + 1)]);

        std::vector<std::size_t> test_idx(order.begin(), order.begin() + n_test);
        std::vector<std::size_t> train_idx(order.begin() + n_test, order.end());
        std::sort(test_idx.begin(), test_idx.end());
        std::sort(train_idx.begin(), train_idx.end());

        Split split;
        split.test = ds.subset(test_idx);
        split.train = ds.subset(train_idx);
        split.attempts = attempt;

        auto test_cells = detail::cells_present(split.test);
        bool ok = detail::margins_ok(split.test) && detail::margins_ok(split.train);
        for (std::size_t cell = 0; cell < 4; ++cell)
            if (required[cell] && !test_cells[cell]) ok = false;
        if (ok) return split;
    }
    throw DataError("could not produce a non-degenerate train/test split in 100 attempts");
}

// ---------------------------------------------------------------------------
// Synthetic dataset
// ---------------------------------------------------------------------------

// Two-dimensional two-group dataset with extreme group imbalance:
// 10,000 points for group 0 from N((0,0), I) labeled by the sign of the
// first coordinate, and 100 points for group 1 from N((10,10), I)
// labeled by the sign of the second. Each group is linearly separable
// on its own. Features are emitted unstandardized.
inline Dataset generate_synthetic(RandomSource rng) {
    constexpr std::size_t kGroup0 = 10000;
    constexpr std::size_t kGroup1 = 100;
    Dataset ds;
    ds.d = 2;
    ds.feature_names = {"x1", "x2"};
    ds.X.reserve((kGroup0 + kGroup1) * 2);
    ds.a.reserve(kGroup0 + kGroup1);
    ds.y.reserve(kGroup0 + kGroup1);
    for (std::size_t i = 0; i < kGroup0; ++i) {
        double x1 = rng.normal();
        double x2 = rng.normal();
        ds.X.push_back(x1);
        ds.X.push_back(x2);
        ds.a.push_back(0);
        ds.y.push_back(x1 > 0.0 ? 1 : 0);
    }
    for (std::size_t i = 0; i < kGroup1; ++i) {
        double x1 = 10.0 + rng.normal();
        double x2 = 10.0 + rng.normal();
        ds.X.push_back(x1);
        ds.X.push_back(x2);
        ds.a.push_back(1);
        ds.y.push_back(x2 > 0.0 ? 1 : 0);
    }
    return ds;
}

// Draws one point from the synthetic population (group picked with the
// 10000:100 mixture weight). Used by the coverage diagnostics.
inline void sample_synthetic_point(RandomSource& rng, double* x, int& a, int& y) {
    constexpr double kGroup1Weight = 100.0 / 10100.0;
    if (rng.uniform01() < kGroup1Weight) {
        x[0] = 10.0 + rng.normal();
        x[1] = 10.0 + rng.normal();
        a = 1;
        y = x[1] > 0.0 ? 1 : 0;
    } else {
        x[0] = rng.normal();
        x[1] = rng.normal();
        a = 0;
        y = x[0] > 0.0 ? 1 : 0;
    }
}

// ---------------------------------------------------------------------------
// Pool and labeled set
// ---------------------------------------------------------------------------

// Unlabeled pool over rows of a training Dataset. Ids are row indices;
// they are unique, stable across removals, and never resampled.
class Pool {
public:
    Pool() = default;
    explicit Pool(std::size_t n) {
        active_.resize(n);
        for (std::size_t i = 0; i < n; ++i) active_[i] = i;
        removed_.assign(n, false);
    }

    std::size_t size() const { return active_.size(); }
    bool empty() const { return active_.empty(); }
    const std::vector<std::size_t>& ids() const { return active_; }

    bool contains(std::size_t id) const {
        return id < removed_.size() && !removed_[id];
    }

    void remove(const std::vector<std::size_t>& ids) {
        for (std::size_t id : ids) {
            if (id >= removed_.size() || removed_[id])
                throw DataError("pool id " + std::to_string(id) + " absent or already removed");
        }
        std::set<std::size_t> unique(ids.begin(), ids.end());
        if (unique.size() != ids.size()) throw DataError("duplicate ids in pool removal");
        for (std::size_t id : ids) removed_[id] = true;
        active_.erase(std::remove_if(active_.begin(), active_.end(),
                                     [&](std::size_t id) { return removed_[id]; }),
                      active_.end());
    }

private:
    std::vector<std::size_t> active_;  // ascending ids
    std::vector<bool> removed_;
};

// Labeled examples carrying the sampling metadata the importance
// weights need: nu is the population weight (1/|initial pool|), nu_tr
// the probability the acquisition distribution assigned when the point
// was drawn.
struct LabeledSet {
    std::vector<double> X;  // row-major n x d
    std::vector<int> a;
    std::vector<int> y;
    std::vector<double> nu;
    std::vector<double> nu_tr;
    std::vector<std::size_t> ids;
    std::size_t d = 0;

    std::size_t size() const { return a.size(); }
    const double* row(std::size_t i) const { return X.data() + i * d; }
    double weight(std::size_t i) const { return nu[i] / nu_tr[i]; }

    void append(const Dataset& source, std::size_t id, double nu_i, double nu_tr_i) {
        if (nu_i <= 0.0 || nu_tr_i <= 0.0)
            throw DataError("labeled example needs positive nu and nu_tr");
        if (d == 0) d = source.d;
        X.insert(X.end(), source.row(id), source.row(id) + source.d);
        a.push_back(source.a[id]);
        y.push_back(source.y[id]);
        nu.push_back(nu_i);
        nu_tr.push_back(nu_tr_i);
        ids.push_back(id);
    }
};

}  // namespace fare
