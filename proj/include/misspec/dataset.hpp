#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace misspec {

enum class Statistic { density, overall_density, front_location };

inline std::string to_string(Statistic s) {
    switch (s) {
        case Statistic::density: return "density";
        case Statistic::overall_density: return "overall_density";
        case Statistic::front_location: return "front_location";
    }
    throw std::logic_error("unknown statistic");
}

inline Statistic statistic_from_string(const std::string& s) {
    if (s == "density") return Statistic::density;
    if (s == "overall_density") return Statistic::overall_density;
    if (s == "front_location") return Statistic::front_location;
    throw std::invalid_argument("unknown statistic kind: " + s);
}

struct Record {
    std::string scenario_id;
    Statistic statistic;
    double time;
    int replicate;
    double value;
};

// Shortest representation that round-trips a double exactly.
inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    double back;
    std::sscanf(buf, "%lg", &back);
    if (back == v) {
        for (int prec = 1; prec < 17; ++prec) {
            char shorter[32];
            std::snprintf(shorter, sizeof shorter, "%.*g", prec, v);
            std::sscanf(shorter, "%lg", &back);
            if (back == v) return shorter;
        }
    }
    return buf;
}

// Tagged observation records plus the generative metadata echo. Persists as a
// CSV with a JSON sidecar; inference reads generative values from the
// metadata, never from hard-coded numbers.
struct Dataset {
    std::vector<Record> records;
    nlohmann::json metadata = nlohmann::json::object();

    std::set<std::string> group_ids() const {
        std::set<std::string> ids;
        for (const auto& r : records) ids.insert(r.scenario_id);
        return ids;
    }

    Dataset filtered(const std::string& group) const {
        Dataset out;
        out.metadata = metadata;
        for (const auto& r : records)
            if (r.scenario_id == group) out.records.push_back(r);
        if (out.records.empty()) throw std::invalid_argument("no records with scenario_id '" + group + "'");
        return out;
    }

    void write_csv(const std::string& path) const {
        std::ofstream os(path);
        if (!os) throw std::runtime_error("cannot write " + path);
        os << "scenario_id,statistic,time,replicate,value\n";
        for (const auto& r : records)
            os << r.scenario_id << ',' << to_string(r.statistic) << ',' << format_double(r.time) << ','
               << r.replicate << ',' << format_double(r.value) << '\n';
    }

    void write_metadata(const std::string& path) const {
        std::ofstream os(path);
        if (!os) throw std::runtime_error("cannot write " + path);
        os << metadata.dump(2) << '\n';
    }

    static Dataset read_csv(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw std::invalid_argument("cannot read " + path);
        Dataset ds;
        std::string line;
        int lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            if (line.empty()) continue;
            if (lineno == 1) {
                if (line != "scenario_id,statistic,time,replicate,value")
                    throw std::invalid_argument(path + ":1: unexpected CSV header");
                continue;
            }
            std::istringstream ss(line);
            std::string id, stat, time_s, rep_s, val_s;
            if (!std::getline(ss, id, ',') || !std::getline(ss, stat, ',') || !std::getline(ss, time_s, ',') ||
                !std::getline(ss, rep_s, ',') || !std::getline(ss, val_s))
                throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": malformed CSV row");
            try {
                ds.records.push_back(Record{id, statistic_from_string(stat), std::stod(time_s),
                                            std::stoi(rep_s), std::stod(val_s)});
            } catch (const std::exception& e) {
                throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": " + e.what());
            }
        }
        if (ds.records.empty()) throw std::invalid_argument(path + ": no data records");
        // Sidecar is optional on read; fits fall back to explicit config.
        std::ifstream meta(path.substr(0, path.rfind('.')) + ".meta.json");
        if (meta) meta >> ds.metadata;
        return ds;
    }
};

}  // namespace misspec
