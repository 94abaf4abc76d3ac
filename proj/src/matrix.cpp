#include "spectro/matrix.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "spectro/errors.hpp"
#include "spectro/sha256.hpp"

namespace spectro {

namespace {

constexpr char kMagic[4] = {'S', 'U', 'S', 'C'};
constexpr uint32_t kVersion = 1;

template <typename T>
void read_le(std::istream& in, T& out) {
    unsigned char buf[sizeof(T)];
    in.read(reinterpret_cast<char*>(buf), sizeof(T));
    T v = 0;
    for (size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(buf[i]) << (8 * i);
    out = v;
}

template <typename T>
void write_le(std::ostream& out, T v) {
    unsigned char buf[sizeof(T)];
    for (size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

float f32_from_bits(uint32_t bits) {
    float f;
    std::memcpy(&f, &bits, 4);
    return f;
}

uint32_t bits_from_f32(float f) {
    uint32_t b;
    std::memcpy(&b, &f, 4);
    return b;
}

} // namespace

std::string sha256_hex(const std::string& bytes) {
    Sha256 h;
    h.update(bytes.data(), bytes.size());
    return h.hex_digest();
}

std::string sha256_file_hex(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path);
    Sha256 h;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof(buf));
        h.update(buf, static_cast<size_t>(in.gcount()));
    }
    return h.hex_digest();
}

SusceptibilityMatrix load_matrix(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open matrix file " + path);

    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError(path + ": bad magic, expected SUSC");
    uint32_t version;
    read_le(in, version);
    if (!in || version != kVersion)
        throw FormatError(path + ": unsupported version " + std::to_string(version));
    uint64_t n = 0, h = 0;
    read_le(in, n);
    read_le(in, h);
    if (!in) throw FormatError(path + ": header ends early");
    if (n == 0 || h == 0) throw FormatError(path + ": dimensions must be positive");

    SusceptibilityMatrix m;
    m.values = Matrix(n, h);
    std::vector<unsigned char> raw(4 * h);
    for (uint64_t i = 0; i < n; ++i) {
        in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
        if (static_cast<size_t>(in.gcount()) != raw.size())
            throw TruncationError(path + ": header says " + std::to_string(n) + "x" +
                                  std::to_string(h) + " but payload ends in row " +
                                  std::to_string(i));
        for (uint64_t j = 0; j < h; ++j) {
            uint32_t bits = uint32_t(raw[4 * j]) | uint32_t(raw[4 * j + 1]) << 8 |
                            uint32_t(raw[4 * j + 2]) << 16 | uint32_t(raw[4 * j + 3]) << 24;
            double v = f32_from_bits(bits);
            if (!std::isfinite(v))
                throw DataError(path + ": non-finite entry at (" + std::to_string(i) + "," +
                                std::to_string(j) + ")");
            m.values.at(i, j) = v;
        }
    }
    char extra;
    if (in.read(&extra, 1))
        throw TruncationError(path + ": payload longer than header declares");

    m.row_ids.reserve(n);
    for (uint64_t i = 0; i < n; ++i) m.row_ids.push_back("row" + std::to_string(i));
    m.component_ids.reserve(h);
    for (uint64_t j = 0; j < h; ++j) m.component_ids.push_back("c" + std::to_string(j));

    // Optional sidecar with component labels.
    std::ifstream side(path + ".meta.json");
    if (side) {
        nlohmann::json js;
        try {
            side >> js;
        } catch (const std::exception& e) {
            throw FormatError(path + ".meta.json: " + e.what());
        }
        if (js.contains("component_ids")) {
            auto ids = js["component_ids"].get<std::vector<std::string>>();
            if (ids.size() == h) m.component_ids = std::move(ids);
        }
    }
    return m;
}

void save_matrix(const std::string& path, const SusceptibilityMatrix& m, bool write_sidecar) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path);
    out.write(kMagic, 4);
    write_le(out, kVersion);
    write_le(out, static_cast<uint64_t>(m.values.rows));
    write_le(out, static_cast<uint64_t>(m.values.cols));
    for (double v : m.values.data) {
        uint32_t bits = bits_from_f32(static_cast<float>(v));
        write_le(out, bits);
    }
    if (write_sidecar) {
        nlohmann::json side;
        side["component_ids"] = m.component_ids;
        std::ofstream s(path + ".meta.json");
        s << side.dump(2) << "\n";
    }
}

std::vector<TokenRecord> load_token_metadata(const std::string& path,
                                             std::optional<size_t> expected_rows) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open metadata file " + path);
    std::vector<TokenRecord> recs;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json js;
        try {
            js = nlohmann::json::parse(line);
        } catch (const std::exception& e) {
            throw SchemaError(path + " line " + std::to_string(lineno) + ": " + e.what());
        }
        TokenRecord r;
        for (const char* field : {"context", "target", "dataset_tag", "decoded_target"}) {
            if (!js.contains(field))
                throw SchemaError(path + " line " + std::to_string(lineno) +
                                  ": missing field '" + field + "'");
        }
        try {
            r.context = js["context"].get<std::vector<int64_t>>();
            r.target = js["target"].get<int64_t>();
            r.dataset_tag = js["dataset_tag"].get<std::string>();
            r.decoded_target = js["decoded_target"].get<std::string>();
        } catch (const std::exception& e) {
            throw SchemaError(path + " line " + std::to_string(lineno) + ": " + e.what());
        }
        if (r.context.empty())
            throw SchemaError(path + " line " + std::to_string(lineno) + ": empty context");
        recs.push_back(std::move(r));
    }
    if (expected_rows && recs.size() != *expected_rows)
        throw PairingError(path + ": " + std::to_string(recs.size()) +
                           " records but paired matrix has " + std::to_string(*expected_rows) +
                           " rows");
    return recs;
}

void save_token_metadata(const std::string& path, const std::vector<TokenRecord>& recs) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path);
    for (const auto& r : recs) {
        nlohmann::json js;
        js["context"] = r.context;
        js["target"] = r.target;
        js["dataset_tag"] = r.dataset_tag;
        js["decoded_target"] = r.decoded_target;
        out << js.dump() << "\n";
    }
}

} // namespace spectro
