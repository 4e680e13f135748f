#include "wproj/measure_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "wproj/errors.hpp"

namespace wproj {

namespace {

using nlohmann::json;

double number_field(const json& j, const std::string& where) {
    if (!j.is_number()) throw ParseError(where + ": expected a number");
    return j.get<double>();
}

} // namespace

std::string format_full(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

DiscreteMeasure load_measure(std::istream& in, const std::string& source_name) {
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(source_name + ": " + e.what());
    }
    if (!j.is_object()) throw ParseError(source_name + ": top level must be an object");
    if (!j.contains("schema") || !j["schema"].is_string())
        throw ParseError(source_name + ": missing string field 'schema'");
    const std::string schema = j["schema"].get<std::string>();
    if (schema != "dmeasure/1")
        throw SchemaVersionUnsupported(source_name + ": unsupported schema '" + schema + "'");
    if (!j.contains("dim") || !j["dim"].is_number_integer())
        throw ParseError(source_name + ": missing integer field 'dim'");
    const int dim = j["dim"].get<int>();
    if (dim <= 0) throw ParseError(source_name + ": 'dim' must be positive");
    if (!j.contains("atoms") || !j["atoms"].is_array())
        throw ParseError(source_name + ": missing array field 'atoms'");

    std::vector<double> coords;
    std::size_t n = 0;
    for (const auto& row : j["atoms"]) {
        if (!row.is_array() || row.size() != static_cast<std::size_t>(dim))
            throw ParseError(source_name + ": atoms[" + std::to_string(n) + "] must be an array of " +
                             std::to_string(dim) + " numbers");
        for (const auto& c : row)
            coords.push_back(number_field(c, source_name + ": atoms[" + std::to_string(n) + "]"));
        ++n;
    }
    if (n == 0) throw ParseError(source_name + ": 'atoms' is empty");

    std::vector<double> weights;
    if (j.contains("weights")) {
        if (!j["weights"].is_array())
            throw ParseError(source_name + ": 'weights' must be an array");
        std::size_t k = 0;
        for (const auto& w : j["weights"]) {
            weights.push_back(number_field(w, source_name + ": weights[" + std::to_string(k) + "]"));
            ++k;
        }
        if (weights.size() != n)
            throw ParseError(source_name + ": " + std::to_string(weights.size()) + " weights for " +
                             std::to_string(n) + " atoms");
    } else {
        weights.assign(n, 1.0);
    }

    try {
        return DiscreteMeasure(dim, std::move(coords), std::move(weights));
    } catch (const Error& e) {
        throw ParseError(source_name + ": " + e.what());
    }
}

DiscreteMeasure load_measure(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path.string() + ": cannot open file");
    return load_measure(in, path.string());
}

void save_measure(const DiscreteMeasure& m, std::ostream& out) {
    out << "{\"schema\":\"dmeasure/1\",\"dim\":" << m.dim() << ",\"atoms\":[";
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (i) out << ',';
        out << '[';
        const auto x = m.atom(i);
        for (std::size_t k = 0; k < x.size(); ++k) {
            if (k) out << ',';
            out << format_full(x[k]);
        }
        out << ']';
    }
    out << "],\"weights\":[";
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (i) out << ',';
        out << format_full(m.weight(i));
    }
    out << "]}\n";
}

void save_measure(const DiscreteMeasure& m, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ParseError(path.string() + ": cannot open file for writing");
    save_measure(m, out);
    out.flush();
    if (!out) throw ParseError(path.string() + ": write failed");
}

} // namespace wproj
