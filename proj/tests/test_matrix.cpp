#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "spectro/errors.hpp"
#include "spectro/matrix.hpp"
#include "spectro/rng.hpp"

using namespace spectro;

namespace {

std::string temp_path(const std::string& name) {
    return std::string("/tmp/spectro_test_") + name;
}

void write_susc_raw(const std::string& path, uint64_t n, uint64_t h,
                    const std::vector<float>& payload, const char* magic = "SUSC",
                    uint32_t version = 1) {
    std::ofstream out(path, std::ios::binary);
    out.write(magic, 4);
    out.write(reinterpret_cast<const char*>(&version), 4);
    out.write(reinterpret_cast<const char*>(&n), 8);
    out.write(reinterpret_cast<const char*>(&h), 8);
    out.write(reinterpret_cast<const char*>(payload.data()),
              static_cast<std::streamsize>(payload.size() * 4));
}

} // namespace

TEST_CASE("load_matrix round trips a 2x3 payload") {
    const auto path = temp_path("roundtrip.susc");
    write_susc_raw(path, 2, 3, {1, 2, 3, 4, 5, 6});
    auto m = load_matrix(path);
    REQUIRE(m.n() == 2);
    REQUIRE(m.h() == 3);
    CHECK(m.values.at(0, 0) == 1.0);
    CHECK(m.values.at(0, 2) == 3.0);
    CHECK(m.values.at(1, 0) == 4.0);
    CHECK(m.values.at(1, 2) == 6.0);
    std::remove(path.c_str());
}

TEST_CASE("load_matrix rejects truncated payloads") {
    const auto path = temp_path("trunc.susc");
    write_susc_raw(path, 2, 3, {1, 2, 3, 4, 5});
    CHECK_THROWS_AS(load_matrix(path), TruncationError);
    std::remove(path.c_str());
}

TEST_CASE("load_matrix rejects oversized payloads") {
    const auto path = temp_path("over.susc");
    write_susc_raw(path, 2, 3, {1, 2, 3, 4, 5, 6, 7});
    CHECK_THROWS_AS(load_matrix(path), TruncationError);
    std::remove(path.c_str());
}

TEST_CASE("load_matrix names the NaN cell") {
    const auto path = temp_path("nan.susc");
    write_susc_raw(path, 2, 3, {1, std::nanf(""), 3, 4, 5, 6});
    try {
        load_matrix(path);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("(0,1)") != std::string::npos);
    }
    std::remove(path.c_str());
}

TEST_CASE("load_matrix rejects bad magic") {
    const auto path = temp_path("magic.susc");
    write_susc_raw(path, 1, 1, {1}, "XUSC");
    CHECK_THROWS_AS(load_matrix(path), FormatError);
    std::remove(path.c_str());
}

TEST_CASE("save/load is bit exact for finite float matrices") {
    Rng rng(42);
    SusceptibilityMatrix m;
    m.values = Matrix(17, 5);
    for (auto& v : m.values.data) v = static_cast<float>(rng.next_normal() * 1e3);
    for (size_t i = 0; i < 17; ++i) m.row_ids.push_back("r" + std::to_string(i));
    for (size_t j = 0; j < 5; ++j) m.component_ids.push_back("c" + std::to_string(j));
    const auto path = temp_path("bitexact.susc");
    save_matrix(path, m);
    auto back = load_matrix(path);
    REQUIRE(back.n() == m.n());
    REQUIRE(back.h() == m.h());
    for (size_t i = 0; i < m.values.data.size(); ++i)
        CHECK(back.values.data[i] == m.values.data[i]);
    std::remove(path.c_str());
}

TEST_CASE("token metadata round trip and pairing checks") {
    const auto path = temp_path("meta.jsonl");
    {
        std::ofstream out(path);
        out << R"({"context":[5,7],"target":9,"dataset_tag":"arxiv","decoded_target":" the"})"
            << "\n";
        out << R"({"context":[1],"target":2,"dataset_tag":"cc","decoded_target":"\n"})" << "\n";
    }
    auto recs = load_token_metadata(path);
    REQUIRE(recs.size() == 2);
    CHECK(recs[0].context == std::vector<int64_t>{5, 7});
    CHECK(recs[0].target == 9);
    CHECK(recs[0].dataset_tag == "arxiv");
    CHECK(recs[0].decoded_target == " the");

    CHECK_THROWS_AS(load_token_metadata(path, 4), PairingError);
    std::remove(path.c_str());
}

TEST_CASE("empty metadata file gives an empty table") {
    const auto path = temp_path("empty.jsonl");
    std::ofstream(path).close();
    CHECK(load_token_metadata(path).empty());
    std::remove(path.c_str());
}

TEST_CASE("metadata schema errors carry the line number") {
    const auto path = temp_path("badmeta.jsonl");
    {
        std::ofstream out(path);
        out << R"({"context":[5],"target":1,"dataset_tag":"x","decoded_target":"a"})" << "\n";
        out << R"({"context":[5],"dataset_tag":"x","decoded_target":"a"})" << "\n";
    }
    try {
        load_token_metadata(path);
        FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
        CHECK(std::string(e.what()).find("target") != std::string::npos);
    }
    std::remove(path.c_str());
}
