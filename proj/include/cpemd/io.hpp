#pragma once

#include <charconv>
#include <fstream>
#include <sstream>

#include "core.hpp"

namespace cpemd {

// Point files: UTF-8 text, one point per line, comma- or whitespace-separated
// decimal reals, '#' comment lines. Supply files: one integer per line.

inline std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',' || c == ' ' || c == '\t' || c == '\r') {
            if (!cur.empty()) out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

inline PointSet load_points(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw input_error("cannot open point file: " + path);
    PointSet P;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line[0] == '#') continue;
        auto fields = split_fields(line);
        if (fields.empty()) continue;
        std::vector<double> coords;
        coords.reserve(fields.size());
        for (auto& f : fields) {
            try {
                std::size_t used = 0;
                double v = std::stod(f, &used);
                if (used != f.size()) throw std::invalid_argument(f);
                if (!std::isfinite(v))
                    throw input_error(path + ":" + std::to_string(lineno) +
                                      ": non-finite coordinate");
                coords.push_back(v);
            } catch (const input_error&) {
                throw;
            } catch (const std::exception&) {
                throw input_error(path + ":" + std::to_string(lineno) +
                                  ": cannot parse coordinate '" + f + "'");
            }
        }
        if (P.dim == 0) {
            P.dim = static_cast<int>(coords.size());
        } else if (static_cast<int>(coords.size()) != P.dim) {
            throw input_error(path + ":" + std::to_string(lineno) + ": ragged row (expected " +
                              std::to_string(P.dim) + " fields, got " +
                              std::to_string(coords.size()) + ")");
        }
        P.push_back(coords);
    }
    if (P.size() == 0) throw input_error(path + ": no points");
    double hi = 1.0;
    for (double v : P.data) hi = std::max(hi, std::abs(v));
    P.phi = hi;
    return P;
}

inline SupplyDemand load_supply(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw input_error("cannot open supply file: " + path);
    SupplyDemand b;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line[0] == '#') continue;
        auto fields = split_fields(line);
        if (fields.empty()) continue;
        if (fields.size() != 1)
            throw input_error(path + ":" + std::to_string(lineno) +
                              ": expected one integer per line");
        long long v = 0;
        auto [ptr, ec] =
            std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), v);
        if (ec != std::errc() || ptr != fields[0].data() + fields[0].size())
            throw input_error(path + ":" + std::to_string(lineno) + ": cannot parse integer '" +
                              fields[0] + "'");
        b.b.push_back(v);
    }
    if (b.b.empty()) throw input_error(path + ": no entries");
    return b;
}

inline void save_points(const std::string& path, const PointSet& P) {
    std::ofstream out(path);
    if (!out) throw input_error("cannot write point file: " + path);
    out << "# d=" << P.dim << "\n";
    for (std::size_t i = 0; i < P.size(); ++i) {
        auto p = P.point(i);
        for (int k = 0; k < P.dim; ++k) {
            if (k) out << ",";
            std::ostringstream ss;
            ss.precision(17);
            ss << p[k];
            out << ss.str();
        }
        out << "\n";
    }
}

}  // namespace cpemd
