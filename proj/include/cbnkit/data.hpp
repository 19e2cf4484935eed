#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace cbnkit {

/// Half-open source interval [min, max) mapped onto one target state label.
struct Bin {
    double min = 0.0;
    double max = 0.0;
    std::string state;
};

/// How a source value becomes a state. An empty bin list means identity:
/// the source value must equal (numerically or textually) one of the labels.
struct RecodeRule {
    std::vector<Bin> bins;

    bool is_identity() const { return bins.empty(); }
};

struct VariableSpec {
    std::string name;
    std::vector<std::string> states;
    RecodeRule recode;

    int cardinality() const { return static_cast<int>(states.size()); }

    /// Looks up a cell value among the state labels. Exact text match wins;
    /// otherwise "1.0" matches the label "1".
    std::optional<int> state_index(std::string_view cell) const;

    /// Maps a raw source value through the recode rule. Throws DataError when
    /// no bin (or, for identity rules, no label) covers the value.
    int recode_value(double source) const;

    /// Throws DataError if labels are duplicated or fewer than two.
    void validate() const;
};

std::vector<VariableSpec> parse_variable_specs(const nlohmann::json& j);
std::vector<VariableSpec> load_variable_specs(const std::filesystem::path& path);
nlohmann::json to_json(const std::vector<VariableSpec>& specs);

/// The 22 BRFSS variables with the recodings that produce Table-1 style states.
const std::vector<VariableSpec>& brfss_variables();

/// Immutable column-oriented table of state indices.
class Dataset {
public:
    Dataset() = default;
    Dataset(std::vector<VariableSpec> variables, std::vector<std::vector<std::uint8_t>> columns,
            std::size_t dropped_rows = 0);

    std::size_t n_rows() const { return n_rows_; }
    std::size_t n_vars() const { return variables_.size(); }
    std::size_t dropped_rows() const { return dropped_rows_; }

    const std::vector<VariableSpec>& variables() const { return variables_; }
    const VariableSpec& variable(std::size_t i) const { return variables_.at(i); }
    int cardinality(std::size_t i) const { return variables_[i].cardinality(); }
    std::vector<int> cardinalities() const;
    std::vector<std::string> names() const;

    /// Column index of a variable; throws DataError on unknown names.
    int index_of(std::string_view name) const;
    std::optional<int> find(std::string_view name) const;

    const std::vector<std::uint8_t>& column(std::size_t i) const { return columns_[i]; }
    std::uint8_t at(std::size_t row, std::size_t var) const { return columns_[var][row]; }

    Dataset select_rows(std::span<const std::size_t> rows) const;
    Dataset select_columns(std::span<const std::string> names) const;

private:
    std::vector<VariableSpec> variables_;
    std::vector<std::vector<std::uint8_t>> columns_;
    std::size_t n_rows_ = 0;
    std::size_t dropped_rows_ = 0;
};

/// Numeric CSV as read from disk, before recoding.
struct RawTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> values;  // column-major
    std::size_t dropped_rows = 0;

    std::size_t n_rows() const { return values.empty() ? 0 : values.front().size(); }
    std::optional<std::size_t> find(std::string_view name) const;
};

/// Reads a numeric CSV. Rows with an empty or non-numeric cell in any of
/// `required` (all columns when empty) are dropped and counted.
RawTable read_raw_csv(const std::filesystem::path& path, std::span<const std::string> required = {});

/// Loads categorical data whose cells are state labels. Columns are reordered
/// to spec order; rows with empty or unparseable cells are dropped; a numeric
/// cell outside the declared states is an error.
Dataset load_csv(const std::filesystem::path& path, const std::vector<VariableSpec>& specs);

void write_csv(const Dataset& data, const std::filesystem::path& path);

/// Applies each spec's recode rule to the matching source column.
Dataset preprocess(const RawTable& raw, const std::vector<VariableSpec>& specs);

/// Same, starting from categorical data whose labels are numeric source codes.
/// Columns whose states already equal the target states pass through unchanged,
/// which makes preprocessing idempotent.
Dataset preprocess(const Dataset& raw, const std::vector<VariableSpec>& specs);

Dataset preprocess_brfss(const RawTable& raw);
Dataset preprocess_brfss(const Dataset& raw);

struct Marginal {
    std::string name;
    std::vector<std::string> states;
    std::vector<double> frequencies;
};

std::vector<Marginal> marginals(const Dataset& data);
void write_marginals_csv(const std::vector<Marginal>& m, const std::filesystem::path& path);
nlohmann::json marginals_json(const std::vector<Marginal>& m);

/// Dense joint counts over `scope`; the first scope variable varies fastest.
struct ContingencyTable {
    std::vector<int> scope;
    std::vector<int> cardinalities;
    std::vector<std::size_t> strides;
    std::vector<std::uint64_t> counts;

    std::size_t size() const { return counts.size(); }
    std::uint64_t total() const;
    std::size_t index(std::span<const int> states) const;
};

inline constexpr std::size_t kMaxTableCells = 10'000'000;

ContingencyTable count(const Dataset& data, std::span<const int> scope);
ContingencyTable count(const Dataset& data, std::span<const std::string> scope);

/// Product of cardinalities, throws DataError past kMaxTableCells.
std::size_t table_size(const Dataset& data, std::span<const int> scope);

}  // namespace cbnkit
