#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <system_error>

#include <json.hpp>

#include "mgsim/engine.hpp"

namespace mgsim {

using json = nlohmann::json;

// Shortest round-trip decimal form, independent of the global locale.
inline std::string format_number(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    if (res.ec != std::errc()) throw std::runtime_error("csv: number formatting failed");
    return std::string(buf, res.ptr);
}

inline std::string timeseries_header(int n_dg) {
    std::string h = "t";
    for (int k = 1; k <= n_dg; ++k) {
        const std::string tag = ",dg" + std::to_string(k) + "_";
        h += tag + "vod" + tag + "voq" + tag + "P" + tag + "Q" + tag + "omega" + tag + "dvn";
    }
    return h + ",msg_count";
}

inline std::string timeseries_csv(const TimeSeriesLog& log) {
    std::string out = timeseries_header(log.n_dg()) + "\n";
    for (int i = 0; i < log.n_samples(); ++i) {
        out += format_number(log.t[i]);
        for (int k = 0; k < log.n_dg(); ++k) {
            out += ',' + format_number(log.v_od[k][i]);
            out += ',' + format_number(log.v_oq[k][i]);
            out += ',' + format_number(log.P[k][i]);
            out += ',' + format_number(log.Q[k][i]);
            out += ',' + format_number(log.omega[k][i]);
            out += ',' + format_number(log.dv_n[k][i]);
        }
        out += ',' + std::to_string(log.msg_count[i]);
        out += '\n';
    }
    return out;
}

inline json metrics_to_json(const RunMetrics& m) {
    json doc;
    doc["per_dg"] = json::array();
    for (size_t k = 0; k < m.settled.size(); ++k) {
        json d;
        d["settled"] = static_cast<bool>(m.settled[k]);
        d["settling_time"] = m.settled[k] ? json(m.settling_time[k]) : json(nullptr);
        d["final_error"] = m.final_error[k];
        doc["per_dg"].push_back(d);
    }
    doc["total_messages"] = m.total_messages;
    doc["peak_deviation"] = m.peak_deviation;
    doc["t_activate"] = std::isfinite(m.t_activate) ? json(m.t_activate) : json(nullptr);
    doc["v_ref"] = m.v_ref;
    doc["t_end"] = m.t_end;
    return doc;
}

inline RunMetrics metrics_from_json(const json& doc) {
    RunMetrics m;
    for (const json& d : doc.at("per_dg")) {
        const bool settled = d.at("settled").get<bool>();
        m.settled.push_back(settled);
        m.settling_time.push_back(settled ? d.at("settling_time").get<double>()
                                          : std::numeric_limits<double>::quiet_NaN());
        m.final_error.push_back(d.at("final_error").get<double>());
    }
    m.total_messages = doc.at("total_messages").get<std::int64_t>();
    m.peak_deviation = doc.at("peak_deviation").get<double>();
    m.t_activate = doc.at("t_activate").is_null() ? std::numeric_limits<double>::infinity()
                                                  : doc.at("t_activate").get<double>();
    m.v_ref = doc.at("v_ref").get<double>();
    m.t_end = doc.at("t_end").get<double>();
    return m;
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << content;
    if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

}  // namespace mgsim
