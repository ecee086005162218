#pragma once
// CSV ingestion for (substrate, velocity[, group][, cluster]) tables.

#include "mminfer/mm_core.hpp"

#include <cstddef>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mminfer {

struct CsvOptions {
    char delimiter = ',';
    std::string substrate_col = "substrate";
    std::string velocity_col = "velocity";
    std::string group_col = "group";
    std::string cluster_col = "cluster";
    // A missing group/cluster column is an error only when required.
    bool require_group = false;
    bool require_cluster = false;
    double sentinel = -9999.0;
};

struct InputRow {
    double substrate = 0.0;
    double velocity = 0.0;
    std::optional<std::string> group;
    std::optional<std::string> cluster;
    // 1-based line number in the source.
    std::size_t line = 0;
};

struct DropCounts {
    std::size_t sentinel = 0;
    std::size_t non_finite = 0;
    std::size_t negative_substrate = 0;

    std::size_t total() const noexcept { return sentinel + non_finite + negative_substrate; }
};

struct InputTable {
    std::vector<InputRow> rows;
    std::size_t rows_in = 0;
    DropCounts dropped;
    bool has_group = false;
    bool has_cluster = false;

    std::vector<std::string> cluster_labels() const;
    bool clustered_fitting_enabled() const { return cluster_labels().size() >= 2; }
};

// Throws Error(MissingColumn | ParseError | EmptyAfterFiltering).
InputTable parse_csv(std::istream& in, const CsvOptions& options = {});
InputTable ingest_csv(const std::filesystem::path& path, const CsvOptions& options = {});

Dataset to_dataset(const InputTable& table);
// Labels in first-appearance order are not preserved; the map sorts them.
std::map<std::string, Dataset> to_panel(const InputTable& table);
ClusteredDataset to_clustered(const InputTable& table);

// FNV-1a 64-bit digest of a byte string, as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view bytes);

} // namespace mminfer
