#include "cbnkit/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include "cbnkit/errors.hpp"
#include "csv.hpp"

namespace cbnkit {

namespace {

std::string strip_bom(std::string s) {
    if (s.size() >= 3 && static_cast<unsigned char>(s[0]) == 0xEF && static_cast<unsigned char>(s[1]) == 0xBB &&
        static_cast<unsigned char>(s[2]) == 0xBF) {
        s.erase(0, 3);
    }
    return s;
}

std::vector<std::string> read_header(std::istream& in, const std::filesystem::path& path) {
    std::string line;
    if (!csv::getline(in, line)) throw DataError("empty file (no header): " + path.string());
    line = strip_bom(std::move(line));
    std::vector<std::string> header;
    for (auto f : csv::split(line)) header.emplace_back(f);
    std::set<std::string> seen(header.begin(), header.end());
    if (seen.size() != header.size()) throw DataError("duplicate column in header: " + path.string());
    return header;
}

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open file: " + path.string());
    return in;
}

}  // namespace

std::optional<int> VariableSpec::state_index(std::string_view cell) const {
    for (std::size_t i = 0; i < states.size(); ++i) {
        if (states[i] == cell) return static_cast<int>(i);
    }
    auto v = csv::parse_double(cell);
    if (!v) return std::nullopt;
    for (std::size_t i = 0; i < states.size(); ++i) {
        auto s = csv::parse_double(states[i]);
        if (s && *s == *v) return static_cast<int>(i);
    }
    return std::nullopt;
}

int VariableSpec::recode_value(double source) const {
    if (!std::isfinite(source)) throw DataError(name + ": non-finite source value");
    if (recode.is_identity()) {
        for (std::size_t i = 0; i < states.size(); ++i) {
            auto s = csv::parse_double(states[i]);
            if (s && *s == source) return static_cast<int>(i);
        }
    } else {
        for (const auto& bin : recode.bins) {
            if (source >= bin.min && source < bin.max) {
                auto idx = state_index(bin.state);
                if (!idx) throw DataError(name + ": bin maps to unknown state '" + bin.state + "'");
                return *idx;
            }
        }
    }
    std::ostringstream msg;
    msg << name << ": source value " << source << " is outside the declared range";
    throw DataError(msg.str());
}

void VariableSpec::validate() const {
    if (name.empty()) throw DataError("variable with empty name");
    if (states.size() < 2) throw DataError(name + ": cardinality must be at least 2");
    if (states.size() > 255) throw DataError(name + ": more than 255 states");
    std::set<std::string> unique(states.begin(), states.end());
    if (unique.size() != states.size()) throw DataError(name + ": duplicate state labels");
    for (const auto& bin : recode.bins) {
        if (!(bin.min < bin.max)) throw DataError(name + ": empty recode bin");
        if (!state_index(bin.state)) throw DataError(name + ": bin maps to unknown state '" + bin.state + "'");
    }
}

std::vector<VariableSpec> parse_variable_specs(const nlohmann::json& j) {
    const auto& arr = j.is_object() ? j.at("variables") : j;
    std::vector<VariableSpec> out;
    for (const auto& v : arr) {
        VariableSpec spec;
        spec.name = v.at("name").get<std::string>();
        for (const auto& s : v.at("states")) {
            spec.states.push_back(s.is_string() ? s.get<std::string>() : s.dump());
        }
        if (v.contains("recode")) {
            for (const auto& b : v.at("recode").at("bins")) {
                Bin bin;
                bin.min = b.at("min").get<double>();
                bin.max = b.at("max").is_null() ? std::numeric_limits<double>::infinity() : b.at("max").get<double>();
                bin.state = b.at("state").is_string() ? b.at("state").get<std::string>() : b.at("state").dump();
                spec.recode.bins.push_back(std::move(bin));
            }
        }
        spec.validate();
        out.push_back(std::move(spec));
    }
    std::set<std::string> names;
    for (const auto& s : out) {
        if (!names.insert(s.name).second) throw DataError("duplicate variable name: " + s.name);
    }
    return out;
}

std::vector<VariableSpec> load_variable_specs(const std::filesystem::path& path) {
    auto in = open_input(path);
    nlohmann::json j;
    try {
        in >> j;
        return parse_variable_specs(j);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("invalid variable spec " + path.string() + ": " + e.what());
    }
}

nlohmann::json to_json(const std::vector<VariableSpec>& specs) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& s : specs) {
        nlohmann::json v{{"name", s.name}, {"states", s.states}};
        if (!s.recode.is_identity()) {
            nlohmann::json bins = nlohmann::json::array();
            for (const auto& b : s.recode.bins) {
                nlohmann::json max = std::isinf(b.max) ? nlohmann::json(nullptr) : nlohmann::json(b.max);
                bins.push_back({{"min", b.min}, {"max", max}, {"state", b.state}});
            }
            v["recode"] = {{"bins", bins}};
        }
        arr.push_back(std::move(v));
    }
    return {{"variables", arr}};
}

const std::vector<VariableSpec>& brfss_variables() {
    static const std::vector<VariableSpec> specs = [] {
        constexpr double inf = std::numeric_limits<double>::infinity();
        auto binary = [](std::string name) { return VariableSpec{std::move(name), {"0", "1"}, {}}; };
        auto days = [&](std::string name) {
            return VariableSpec{std::move(name), {"0", "1", "2"}, {{{0, 10, "0"}, {10, 20, "1"}, {20, 31, "2"}}}};
        };
        std::vector<VariableSpec> v;
        v.push_back(binary("Diabetes_binary"));
        v.push_back(binary("HighBP"));
        v.push_back(binary("HighChol"));
        v.push_back({"BMI", {"0", "1", "2"}, {{{0, 25, "0"}, {25, 40, "1"}, {40, inf, "2"}}}});
        v.push_back(binary("HeartDiseaseorAttack"));
        v.push_back(binary("CholCheck"));
        v.push_back(binary("Stroke"));
        v.push_back(binary("Smoker"));
        v.push_back(binary("Fruits"));
        v.push_back(binary("Veggies"));
        v.push_back(binary("HvyAlcoholConsump"));
        v.push_back(binary("AnyHealthcare"));
        v.push_back(binary("NoDocbcCost"));
        v.push_back(days("MentHlth"));
        v.push_back(days("PhysHlth"));
        v.push_back(binary("DiffWalk"));
        v.push_back(binary("Sex"));
        // Source codes are the 13 five-year groups (1 = 18-24 ... 13 = 80+).
        v.push_back({"Age",
                     {"1", "2", "3", "4", "5", "6"},
                     {{{1, 3, "1"}, {3, 5, "2"}, {5, 7, "3"}, {7, 9, "4"}, {9, 11, "5"}, {11, 14, "6"}}}});
        v.push_back({"Income", {"1", "2", "3", "4"}, {{{1, 3, "1"}, {3, 5, "2"}, {5, 7, "3"}, {7, 9, "4"}}}});
        v.push_back({"Education", {"1", "2", "3"}, {{{1, 3, "1"}, {3, 5, "2"}, {5, 7, "3"}}}});
        v.push_back({"GenHlth", {"1", "2", "3"}, {{{1, 3, "1"}, {3, 5, "2"}, {5, 6, "3"}}}});
        v.push_back(binary("PhysActivity"));
        for (const auto& s : v) s.validate();
        return v;
    }();
    return specs;
}

Dataset::Dataset(std::vector<VariableSpec> variables, std::vector<std::vector<std::uint8_t>> columns,
                 std::size_t dropped_rows)
    : variables_(std::move(variables)), columns_(std::move(columns)), dropped_rows_(dropped_rows) {
    if (variables_.size() != columns_.size()) throw DataError("variable/column count mismatch");
    n_rows_ = columns_.empty() ? 0 : columns_.front().size();
    for (std::size_t i = 0; i < columns_.size(); ++i) {
        if (columns_[i].size() != n_rows_) throw DataError("ragged columns");
        const auto card = static_cast<std::uint8_t>(variables_[i].cardinality());
        for (auto v : columns_[i]) {
            if (v >= card) throw DataError(variables_[i].name + ": state index exceeds cardinality");
        }
    }
}

std::vector<int> Dataset::cardinalities() const {
    std::vector<int> out;
    out.reserve(variables_.size());
    for (const auto& v : variables_) out.push_back(v.cardinality());
    return out;
}

std::vector<std::string> Dataset::names() const {
    std::vector<std::string> out;
    out.reserve(variables_.size());
    for (const auto& v : variables_) out.push_back(v.name);
    return out;
}

std::optional<int> Dataset::find(std::string_view name) const {
    for (std::size_t i = 0; i < variables_.size(); ++i) {
        if (variables_[i].name == name) return static_cast<int>(i);
    }
    return std::nullopt;
}

int Dataset::index_of(std::string_view name) const {
    auto idx = find(name);
    if (!idx) throw DataError("unknown variable: " + std::string(name));
    return *idx;
}

Dataset Dataset::select_rows(std::span<const std::size_t> rows) const {
    std::vector<std::vector<std::uint8_t>> cols(columns_.size());
    for (std::size_t c = 0; c < columns_.size(); ++c) {
        cols[c].reserve(rows.size());
        for (auto r : rows) cols[c].push_back(columns_[c].at(r));
    }
    return Dataset(variables_, std::move(cols));
}

Dataset Dataset::select_columns(std::span<const std::string> names) const {
    std::vector<VariableSpec> vars;
    std::vector<std::vector<std::uint8_t>> cols;
    for (const auto& n : names) {
        auto i = static_cast<std::size_t>(index_of(n));
        vars.push_back(variables_[i]);
        cols.push_back(columns_[i]);
    }
    return Dataset(std::move(vars), std::move(cols), dropped_rows_);
}

std::optional<std::size_t> RawTable::find(std::string_view name) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (columns[i] == name) return i;
    }
    return std::nullopt;
}

RawTable read_raw_csv(const std::filesystem::path& path, std::span<const std::string> required) {
    auto in = open_input(path);
    RawTable t;
    t.columns = read_header(in, path);
    t.values.resize(t.columns.size());
    std::vector<bool> needed(t.columns.size(), required.empty());
    for (const auto& r : required) {
        auto idx = t.find(r);
        if (!idx) throw DataError("missing column '" + r + "' in " + path.string());
        needed[*idx] = true;
    }
    std::string line;
    std::vector<double> row(t.columns.size());
    while (csv::getline(in, line)) {
        if (csv::trim(line).empty()) continue;
        auto fields = csv::split(line);
        bool ok = fields.size() == t.columns.size();
        for (std::size_t c = 0; ok && c < fields.size(); ++c) {
            auto v = csv::parse_double(fields[c]);
            if (v) {
                row[c] = *v;
            } else if (needed[c]) {
                ok = false;
            } else {
                row[c] = std::numeric_limits<double>::quiet_NaN();
            }
        }
        if (!ok) {
            ++t.dropped_rows;
            continue;
        }
        for (std::size_t c = 0; c < row.size(); ++c) t.values[c].push_back(row[c]);
    }
    return t;
}

Dataset load_csv(const std::filesystem::path& path, const std::vector<VariableSpec>& specs) {
    auto in = open_input(path);
    auto header = read_header(in, path);
    {
        std::set<std::string> have(header.begin(), header.end());
        std::set<std::string> want;
        for (const auto& s : specs) want.insert(s.name);
        if (have != want) {
            std::string detail;
            for (const auto& w : want) {
                if (!have.count(w)) detail += " missing '" + w + "'";
            }
            for (const auto& h : have) {
                if (!want.count(h)) detail += " unexpected '" + h + "'";
            }
            throw DataError("header mismatch in " + path.string() + ":" + detail);
        }
    }
    std::vector<std::size_t> source_of(specs.size());
    for (std::size_t i = 0; i < specs.size(); ++i) {
        source_of[i] = static_cast<std::size_t>(std::find(header.begin(), header.end(), specs[i].name) - header.begin());
    }
    std::vector<std::vector<std::uint8_t>> cols(specs.size());
    std::size_t dropped = 0;
    std::size_t line_no = 1;
    std::string line;
    std::vector<std::uint8_t> row(specs.size());
    while (csv::getline(in, line)) {
        ++line_no;
        if (csv::trim(line).empty()) continue;
        auto fields = csv::split(line);
        bool ok = fields.size() == header.size();
        for (std::size_t i = 0; ok && i < specs.size(); ++i) {
            auto cell = fields[source_of[i]];
            if (cell.empty()) {
                ok = false;
                break;
            }
            auto idx = specs[i].state_index(cell);
            if (idx) {
                row[i] = static_cast<std::uint8_t>(*idx);
            } else if (csv::parse_double(cell)) {
                throw DataError(path.string() + ":" + std::to_string(line_no) + ": value '" + std::string(cell) +
                                "' exceeds declared states of " + specs[i].name);
            } else {
                ok = false;
            }
        }
        if (!ok) {
            ++dropped;
            continue;
        }
        for (std::size_t i = 0; i < specs.size(); ++i) cols[i].push_back(row[i]);
    }
    if (cols.empty() || cols.front().empty()) throw DataError("zero usable rows in " + path.string());
    return Dataset(specs, std::move(cols), dropped);
}

void write_csv(const Dataset& data, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    for (std::size_t c = 0; c < data.n_vars(); ++c) out << (c ? "," : "") << data.variable(c).name;
    out << '\n';
    for (std::size_t r = 0; r < data.n_rows(); ++r) {
        for (std::size_t c = 0; c < data.n_vars(); ++c) {
            out << (c ? "," : "") << data.variable(c).states[data.at(r, c)];
        }
        out << '\n';
    }
}

Dataset preprocess(const RawTable& raw, const std::vector<VariableSpec>& specs) {
    std::vector<std::vector<std::uint8_t>> cols(specs.size());
    for (std::size_t i = 0; i < specs.size(); ++i) {
        auto src = raw.find(specs[i].name);
        if (!src) throw DataError("raw table lacks source column " + specs[i].name);
        const auto& values = raw.values[*src];
        cols[i].reserve(values.size());
        for (double v : values) cols[i].push_back(static_cast<std::uint8_t>(specs[i].recode_value(v)));
    }
    if (cols.empty() || cols.front().empty()) throw DataError("preprocess: zero rows");
    return Dataset(specs, std::move(cols), raw.dropped_rows);
}

Dataset preprocess(const Dataset& raw, const std::vector<VariableSpec>& specs) {
    std::vector<std::vector<std::uint8_t>> cols(specs.size());
    for (std::size_t i = 0; i < specs.size(); ++i) {
        auto src = static_cast<std::size_t>(raw.index_of(specs[i].name));
        const auto& source_spec = raw.variable(src);
        if (source_spec.states == specs[i].states) {
            cols[i] = raw.column(src);
            continue;
        }
        std::vector<std::uint8_t> lookup(source_spec.states.size());
        for (std::size_t s = 0; s < source_spec.states.size(); ++s) {
            auto v = csv::parse_double(source_spec.states[s]);
            if (!v) throw DataError(specs[i].name + ": non-numeric source state '" + source_spec.states[s] + "'");
            lookup[s] = static_cast<std::uint8_t>(specs[i].recode_value(*v));
        }
        const auto& col = raw.column(src);
        cols[i].reserve(col.size());
        for (auto v : col) cols[i].push_back(lookup[v]);
    }
    return Dataset(specs, std::move(cols), raw.dropped_rows());
}

Dataset preprocess_brfss(const RawTable& raw) { return preprocess(raw, brfss_variables()); }
Dataset preprocess_brfss(const Dataset& raw) { return preprocess(raw, brfss_variables()); }

std::vector<Marginal> marginals(const Dataset& data) {
    std::vector<Marginal> out;
    const double n = static_cast<double>(data.n_rows());
    for (std::size_t v = 0; v < data.n_vars(); ++v) {
        std::vector<std::uint64_t> counts(static_cast<std::size_t>(data.cardinality(v)), 0);
        for (auto s : data.column(v)) ++counts[s];
        Marginal m{data.variable(v).name, data.variable(v).states, {}};
        for (auto c : counts) m.frequencies.push_back(n > 0 ? static_cast<double>(c) / n : 0.0);
        out.push_back(std::move(m));
    }
    return out;
}

void write_marginals_csv(const std::vector<Marginal>& m, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << "variable,state,frequency\n";
    out.precision(17);
    for (const auto& v : m) {
        for (std::size_t s = 0; s < v.states.size(); ++s) out << v.name << ',' << v.states[s] << ',' << v.frequencies[s] << '\n';
    }
}

nlohmann::json marginals_json(const std::vector<Marginal>& m) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& v : m) arr.push_back({{"variable", v.name}, {"states", v.states}, {"frequencies", v.frequencies}});
    return arr;
}

std::uint64_t ContingencyTable::total() const { return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}); }

std::size_t ContingencyTable::index(std::span<const int> states) const {
    std::size_t idx = 0;
    for (std::size_t i = 0; i < states.size(); ++i) idx += strides[i] * static_cast<std::size_t>(states[i]);
    return idx;
}

std::size_t table_size(const Dataset& data, std::span<const int> scope) {
    std::size_t size = 1;
    for (int v : scope) {
        if (v < 0 || static_cast<std::size_t>(v) >= data.n_vars()) throw DataError("variable index out of range");
        size *= static_cast<std::size_t>(data.cardinality(static_cast<std::size_t>(v)));
        if (size > kMaxTableCells) throw DataError("contingency table exceeds the dense cell cap");
    }
    return size;
}

ContingencyTable count(const Dataset& data, std::span<const int> scope) {
    if (scope.empty()) throw DataError("count: empty scope");
    ContingencyTable t;
    t.scope.assign(scope.begin(), scope.end());
    const auto size = table_size(data, scope);
    std::size_t stride = 1;
    for (int v : scope) {
        t.cardinalities.push_back(data.cardinality(static_cast<std::size_t>(v)));
        t.strides.push_back(stride);
        stride *= static_cast<std::size_t>(t.cardinalities.back());
    }
    t.counts.assign(size, 0);
    const auto n = data.n_rows();
    std::vector<std::uint32_t> index(n, 0);
    for (std::size_t k = 0; k < scope.size(); ++k) {
        const auto& col = data.column(static_cast<std::size_t>(scope[k]));
        const auto s = static_cast<std::uint32_t>(t.strides[k]);
        for (std::size_t r = 0; r < n; ++r) index[r] += s * col[r];
    }
    for (auto i : index) ++t.counts[i];
    return t;
}

ContingencyTable count(const Dataset& data, std::span<const std::string> scope) {
    std::vector<int> idx;
    for (const auto& name : scope) idx.push_back(data.index_of(name));
    return count(data, idx);
}

}  // namespace cbnkit
