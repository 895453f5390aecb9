#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "moddiff/core/data_table.hpp"
#include "moddiff/core/rng.hpp"

using namespace moddiff;

namespace {

std::string temp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

} // namespace

TEST_CASE("duplicate or ragged columns are rejected") {
    DataTable t;
    t.add_column("a", ColumnRole::State, {1.0, 2.0});
    CHECK_THROWS_AS(t.add_column("a", ColumnRole::State, {3.0, 4.0}), SchemaError);
    CHECK_THROWS_AS(t.add_column("b", ColumnRole::State, {3.0}), SchemaError);
}

TEST_CASE("boolean columns must be 0/1") {
    DataTable t;
    t.add_column("X_M", ColumnRole::Boolean, {0.0, 1.0, 0.5});
    CHECK_THROWS_AS(t.validate(), SchemaError);
}

TEST_CASE("roles are inferred from names on load") {
    CHECK(role_from_name("t") == ColumnRole::Index);
    CHECK(role_from_name("X_Battery") == ColumnRole::Boolean);
    CHECK(role_from_name("speed_setpoint") == ColumnRole::Imposed);
    CHECK(role_from_name("I_VehicleSpeed") == ColumnRole::Internal);
    CHECK(role_from_name("B_SOC") == ColumnRole::State);
}

TEST_CASE("csv round-trips bit-exactly") {
    auto eng = make_engine(3, "csv");
    DataTable t;
    const std::size_t n = 257;
    std::vector<double> idx(n), a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
        idx[i] = static_cast<double>(i);
        a[i] = uniform(eng, -1e9, 1e9);
        b[i] = uniform(eng, -1e-9, 1e-9);
    }
    a[0] = 0.1; // classic non-representable decimal
    a[1] = 1.0 / 3.0;
    a[2] = -0.0;
    t.add_column("t", ColumnRole::Index, std::move(idx));
    t.add_column("a", ColumnRole::State, std::move(a));
    t.add_column("b", ColumnRole::State, std::move(b));

    const std::string path = temp_path("moddiff_roundtrip.csv");
    save_csv(t, path);
    DataTable r = load_csv(path);
    std::remove(path.c_str());

    REQUIRE(r.n_rows() == t.n_rows());
    REQUIRE(r.n_cols() == t.n_cols());
    for (const char* name : {"a", "b"}) {
        auto x = t.col(name);
        auto y = r.col(name);
        for (std::size_t i = 0; i < x.size(); ++i) {
            // bit-exact round trip, including -0.0
            CHECK(std::memcmp(&x[i], &y[i], sizeof(double)) == 0);
        }
    }
}

TEST_CASE("t column is written first") {
    DataTable t;
    t.add_column("a", ColumnRole::State, {1.0});
    t.add_column("t", ColumnRole::Index, {0.0});
    const std::string path = temp_path("moddiff_header.csv");
    save_csv(t, path);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    std::remove(path.c_str());
    CHECK(header.rfind("t,", 0) == 0);
}
