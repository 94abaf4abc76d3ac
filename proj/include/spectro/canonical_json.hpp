#pragma once

#include <cmath>
#include <cstdio>
#include <string>

#include "json.hpp"

namespace spectro {

// Canonical serialization for report outputs: keys sorted (nlohmann's
// default object is already ordered), floats printed with %.9g so that
// reruns with identical seeds produce byte-identical files.
inline void canonical_dump(const nlohmann::json& j, std::string& out) {
    using nlohmann::json;
    switch (j.type()) {
        case json::value_t::object: {
            out.push_back('{');
            bool first = true;
            for (auto it = j.begin(); it != j.end(); ++it) {
                if (!first) out.push_back(',');
                first = false;
                out += json(it.key()).dump();
                out.push_back(':');
                canonical_dump(it.value(), out);
            }
            out.push_back('}');
            break;
        }
        case json::value_t::array: {
            out.push_back('[');
            bool first = true;
            for (const auto& v : j) {
                if (!first) out.push_back(',');
                first = false;
                canonical_dump(v, out);
            }
            out.push_back(']');
            break;
        }
        case json::value_t::number_float: {
            double v = j.get<double>();
            if (!std::isfinite(v)) {
                out += "null";
            } else {
                char buf[40];
                std::snprintf(buf, sizeof(buf), "%.9g", v);
                out += buf;
            }
            break;
        }
        default:
            out += j.dump();
    }
}

inline std::string canonical_dump(const nlohmann::json& j) {
    std::string out;
    canonical_dump(j, out);
    return out;
}

} // namespace spectro
