#include "mminfer/io.hpp"
#include "mminfer/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <set>

namespace mminfer {

namespace {

std::string trim(std::string_view v) {
    const auto b = v.find_first_not_of(" \t\r\"");
    if (b == std::string_view::npos) return {};
    const auto e = v.find_last_not_of(" \t\r\"");
    return std::string(v.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& line, char delim) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(delim, start);
        out.push_back(trim(std::string_view(line).substr(start, pos == std::string::npos ? pos : pos - start)));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

double parse_number(const std::string& text, std::size_t line, const std::string& column) {
    const std::string lowered = [&] {
        std::string t = text;
        std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
        return t;
    }();
    if (lowered == "nan" || lowered == "na" || lowered.empty()) return std::numeric_limits<double>::quiet_NaN();
    if (lowered == "inf" || lowered == "+inf") return std::numeric_limits<double>::infinity();
    if (lowered == "-inf") return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    const char* first = text.data();
    if (!text.empty() && text.front() == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw Error(ErrorCode::ParseError, fmt::format("line {}: cannot parse {} value '{}'", line, column, text));
    }
    return v;
}

std::optional<std::size_t> find_column(const std::vector<std::string>& header, const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
}

} // namespace

std::vector<std::string> InputTable::cluster_labels() const {
    std::set<std::string> labels;
    for (const auto& r : rows) {
        if (r.cluster) labels.insert(*r.cluster);
    }
    return {labels.begin(), labels.end()};
}

InputTable parse_csv(std::istream& in, const CsvOptions& options) {
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
        if (!trim(line).empty()) {
            header = split(line, options.delimiter);
            break;
        }
    }
    if (header.empty()) throw Error(ErrorCode::MissingColumn, "input has no header row");

    const auto s_col = find_column(header, options.substrate_col);
    const auto v_col = find_column(header, options.velocity_col);
    if (!s_col) throw Error(ErrorCode::MissingColumn, fmt::format("missing column '{}'", options.substrate_col));
    if (!v_col) throw Error(ErrorCode::MissingColumn, fmt::format("missing column '{}'", options.velocity_col));
    const auto g_col = find_column(header, options.group_col);
    const auto c_col = find_column(header, options.cluster_col);
    if (options.require_group && !g_col) {
        throw Error(ErrorCode::MissingColumn, fmt::format("missing group column '{}'", options.group_col));
    }
    if (options.require_cluster && !c_col) {
        throw Error(ErrorCode::MissingColumn, fmt::format("missing cluster column '{}'", options.cluster_col));
    }

    InputTable table;
    table.has_group = g_col.has_value();
    table.has_cluster = c_col.has_value();
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        ++table.rows_in;
        const auto fields = split(line, options.delimiter);
        if (fields.size() != header.size()) {
            throw Error(ErrorCode::ParseError,
                        fmt::format("line {}: expected {} fields, found {}", line_no, header.size(), fields.size()));
        }
        InputRow row;
        row.line = line_no;
        row.substrate = parse_number(fields[*s_col], line_no, options.substrate_col);
        row.velocity = parse_number(fields[*v_col], line_no, options.velocity_col);
        if (g_col) row.group = fields[*g_col];
        if (c_col) row.cluster = fields[*c_col];

        if (row.substrate == options.sentinel || row.velocity == options.sentinel) {
            ++table.dropped.sentinel;
            continue;
        }
        if (!std::isfinite(row.substrate) || !std::isfinite(row.velocity)) {
            ++table.dropped.non_finite;
            continue;
        }
        if (row.substrate < 0.0) {
            ++table.dropped.negative_substrate;
            continue;
        }
        table.rows.push_back(std::move(row));
    }
    if (table.rows.empty()) {
        throw Error(ErrorCode::EmptyAfterFiltering,
                    fmt::format("no usable rows ({} read, {} dropped)", table.rows_in, table.dropped.total()));
    }
    return table;
}

InputTable ingest_csv(const std::filesystem::path& path, const CsvOptions& options) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::InvalidInput, fmt::format("cannot open '{}'", path.string()));
    return parse_csv(in, options);
}

Dataset to_dataset(const InputTable& table) {
    std::vector<double> s, y;
    for (const auto& r : table.rows) {
        s.push_back(r.substrate);
        y.push_back(r.velocity);
    }
    return Dataset(std::move(s), std::move(y));
}

std::map<std::string, Dataset> to_panel(const InputTable& table) {
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> cols;
    for (const auto& r : table.rows) {
        auto& [s, y] = cols[r.group.value_or("")];
        s.push_back(r.substrate);
        y.push_back(r.velocity);
    }
    std::map<std::string, Dataset> panel;
    for (auto& [label, sy] : cols) {
        // Groups are validated when fitted so one bad group does not sink the panel.
        panel.emplace(label, Dataset::relaxed(std::move(sy.first), std::move(sy.second)));
    }
    return panel;
}

ClusteredDataset to_clustered(const InputTable& table) {
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> cols;
    for (const auto& r : table.rows) {
        auto& [s, y] = cols[r.cluster.value_or("")];
        s.push_back(r.substrate);
        y.push_back(r.velocity);
    }
    std::vector<Dataset> clusters;
    std::vector<std::string> ids;
    for (auto& [label, sy] : cols) {
        ids.push_back(label);
        clusters.push_back(Dataset::relaxed(std::move(sy.first), std::move(sy.second)));
    }
    return ClusteredDataset(std::move(clusters), std::move(ids));
}

std::string fnv1a_hex(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return fmt::format("{:016x}", h);
}

} // namespace mminfer
