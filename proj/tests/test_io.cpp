#include "mminfer/errors.hpp"
#include "mminfer/io.hpp"

#include <doctest.h>
#include <sstream>

using namespace mminfer;

namespace {

InputTable parse(const std::string& text, const CsvOptions& o = {}) {
    std::istringstream in(text);
    return parse_csv(in, o);
}

ErrorCode code_of(const std::string& text, const CsvOptions& o = {}) {
    try {
        (void)parse(text, o);
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("no error raised");
    return ErrorCode::InvalidInput;
}

} // namespace

TEST_CASE("two data rows") {
    const auto t = parse("substrate,velocity\n1,2\n3,4\n");
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows_in == 2);
    CHECK(t.dropped.total() == 0);
    CHECK(t.rows[0].substrate == 1);
    CHECK(t.rows[1].velocity == 4);
    CHECK(t.rows[1].line == 3);
    CHECK_FALSE(t.has_group);
    CHECK_FALSE(t.clustered_fitting_enabled());
}

TEST_CASE("sentinel, non-finite and negative rows are dropped and counted") {
    const auto t = parse("substrate,velocity\n1,2\n-9999,5\n2,-9999\n3,nan\n-1,4\n5,6\n\n");
    CHECK(t.rows.size() == 2);
    CHECK(t.rows_in == 6);
    CHECK(t.dropped.sentinel == 2);
    CHECK(t.dropped.non_finite == 1);
    CHECK(t.dropped.negative_substrate == 1);
    CHECK(t.rows_in == t.rows.size() + t.dropped.total());
}

TEST_CASE("cluster labels enable clustered fitting") {
    std::string text = "substrate,velocity,cluster\n";
    for (const char* c : {"a", "b", "c"}) {
        for (int s : {5, 20, 80}) text += std::to_string(s) + "," + std::to_string(s) + "," + c + "\n";
    }
    const auto t = parse(text);
    CHECK(t.has_cluster);
    CHECK(t.cluster_labels() == std::vector<std::string>{"a", "b", "c"});
    CHECK(t.clustered_fitting_enabled());
    const ClusteredDataset d = to_clustered(t);
    CHECK(d.cluster_count() == 3);
    CHECK(d.total_size() == 9);
    CHECK(d.ids()[2] == "c");
}

TEST_CASE("custom columns, delimiter and groups") {
    CsvOptions o;
    o.delimiter = ';';
    o.substrate_col = "conc";
    o.velocity_col = "rate";
    o.group_col = "enzyme";
    o.require_group = true;
    const auto t = parse("enzyme;conc;rate;note\nx;1;2;a\ny;3;4;b\nx;5;6;c\n", o);
    CHECK(t.has_group);
    const auto panel = to_panel(t);
    REQUIRE(panel.size() == 2);
    CHECK(panel.at("x").size() == 2);
    CHECK(panel.at("y").s()[0] == 3);
}

TEST_CASE("ingestion errors") {
    CHECK(code_of("substrate,rate\n1,2\n") == ErrorCode::MissingColumn);
    CHECK(code_of("") == ErrorCode::MissingColumn);
    CsvOptions need_group;
    need_group.require_group = true;
    CHECK(code_of("substrate,velocity\n1,2\n", need_group) == ErrorCode::MissingColumn);
    CHECK(code_of("substrate,velocity\n1,abc\n") == ErrorCode::ParseError);
    CHECK(code_of("substrate,velocity\n1,2,3\n") == ErrorCode::ParseError);
    CHECK(code_of("substrate,velocity\n-9999,1\nnan,2\n") == ErrorCode::EmptyAfterFiltering);
    CHECK(code_of("substrate,velocity\n") == ErrorCode::EmptyAfterFiltering);
}

TEST_CASE("dataset conversion validates the design") {
    const auto t = parse("substrate,velocity\n1,2\n3,4\n");
    CHECK_THROWS_AS(to_dataset(t), Error);
    const auto ok = parse("substrate,velocity\n1,2\n3,4\n9,5\n");
    CHECK(to_dataset(ok).size() == 3);
}

TEST_CASE("digest") {
    CHECK(fnv1a_hex("") == "cbf29ce484222325");
    CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
    CHECK(fnv1a_hex("a") != fnv1a_hex("b"));
}
