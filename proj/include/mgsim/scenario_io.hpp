#pragma once

#include <fstream>
#include <initializer_list>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mgsim/engine.hpp"

namespace mgsim {

using json = nlohmann::json;

// Scenario plus the list of JSON paths that were filled from defaults.
struct ParsedScenario {
    Scenario scenario;
    std::vector<std::string> defaults_applied;
};

namespace detail {

inline void check_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) throw std::invalid_argument("scenario: \"" + path + "\" must be an object");
    for (const auto& item : obj.items()) {
        bool ok = false;
        for (const char* k : allowed) ok = ok || (item.key() == k);
        if (!ok)
            throw std::invalid_argument("scenario: unknown key \"" + (path.empty() ? item.key() : path + "." + item.key()) +
                                        "\"");
    }
}

inline double as_num(const json& v, const std::string& path) {
    if (!v.is_number()) throw std::invalid_argument("scenario: \"" + path + "\" must be a number");
    return v.get<double>();
}

inline int as_index(const json& v, const std::string& path, int n) {
    if (!v.is_number_integer()) throw std::invalid_argument("scenario: \"" + path + "\" must be a DG number");
    const int k = v.get<int>();
    if (k < 1 || k > n)
        throw std::invalid_argument("scenario: \"" + path + "\" must be between 1 and " + std::to_string(n));
    return k - 1;  // external numbering is 1-based
}

inline std::string as_str(const json& v, const std::string& path) {
    if (!v.is_string()) throw std::invalid_argument("scenario: \"" + path + "\" must be a string");
    return v.get<std::string>();
}

inline const json& array_at(const json& obj, const char* key, const std::string& path) {
    const json& v = obj.at(key);
    if (!v.is_array()) throw std::invalid_argument("scenario: \"" + path + "\" must be an array");
    return v;
}

inline DGParams dg_from_json(const json& obj, const std::string& path, std::vector<std::string>& defaults) {
    check_keys(obj, path,
               {"r_f", "L_f", "C_f", "r_c", "L_c", "omega_c", "K_pv", "K_iv", "K_pc", "K_ic", "F", "m", "n",
                "omega_n", "V_n"});
    DGParams p;
    auto field = [&](const char* key, double& slot) {
        if (obj.contains(key))
            slot = as_num(obj.at(key), path + "." + key);
        else
            defaults.push_back(path + "." + key);
    };
    field("r_f", p.r_f);
    field("L_f", p.L_f);
    field("C_f", p.C_f);
    field("r_c", p.r_c);
    field("L_c", p.L_c);
    field("omega_c", p.omega_c);
    field("K_pv", p.K_pv);
    field("K_iv", p.K_iv);
    field("K_pc", p.K_pc);
    field("K_ic", p.K_ic);
    field("F", p.F);
    field("m", p.m);
    field("n", p.n);
    field("omega_n", p.omega_n);
    field("V_n", p.V_n);
    return p;
}

}  // namespace detail

// Two-feeder default plant: DGs 1-3 with loads 1-2 on the first feeder,
// DGs 4-6 with loads 3-4 on the second, joined by a two-segment tie line.
inline NetworkModel default_network() {
    NetworkModel net;
    net.buses = {"bus1", "bus2", "bus3", "bus4", "bus5", "bus6"};
    auto segment = [](const char* a, const char* b, int n) {
        return Line{a, b, 0.23 * n, 0.318e-3 * n};
    };
    net.lines = {segment("bus1", "bus2", 1), segment("bus2", "bus3", 1), segment("bus3", "bus4", 2),
                 segment("bus4", "bus5", 1), segment("bus5", "bus6", 1)};
    net.loads = {Load{"load1", "bus1", 25.0, 10e-3, true}, Load{"load2", "bus3", 25.0, 10e-3, true},
                 Load{"load3", "bus4", 25.0, 10e-3, true}, Load{"load4", "bus6", 25.0, 10e-3, true}};
    net.dg_bus = {"bus1", "bus2", "bus3", "bus4", "bus5", "bus6"};
    return net;
}

inline CommGraph default_zonal_graph() {
    return build_zonal_graph(6, {{0, 1, 2}, {3, 4, 5}}, {0, 3},
                             {CommEdge{0, 1}, CommEdge{0, 2}, CommEdge{3, 4}, CommEdge{3, 5}},
                             Eigen::VectorXd::Constant(6, 30.0));
}

// Single-leader baseline: DG1 pinned, messages relayed hop by hop along the
// feeder. Same directed-edge count as a star from DG1.
inline CommGraph default_global_graph() {
    return build_zonal_graph(6, {{0, 1, 2, 3, 4, 5}}, {0},
                             {CommEdge{0, 1}, CommEdge{1, 2}, CommEdge{2, 3}, CommEdge{3, 4}, CommEdge{4, 5}},
                             Eigen::VectorXd::Constant(6, 30.0));
}

inline std::vector<LoadEvent> default_events() {
    return {LoadEvent{0.2, "load4", LoadEvent::Kind::scale, 0.5}};
}

inline ParsedScenario scenario_from_json(const json& doc) {
    using detail::as_index;
    using detail::as_num;
    using detail::as_str;
    using detail::check_keys;

    ParsedScenario out;
    Scenario& scn = out.scenario;
    std::vector<std::string>& defaults = out.defaults_applied;

    check_keys(doc, "", {"dgs", "network", "graph", "secondary", "sim", "events", "defaults_applied"});

    if (doc.contains("dgs")) {
        const json& dgs = detail::array_at(doc, "dgs", "dgs");
        if (dgs.empty()) throw std::invalid_argument("scenario: \"dgs\" must not be empty");
        for (size_t k = 0; k < dgs.size(); ++k)
            scn.dg_params.push_back(detail::dg_from_json(dgs[k], "dgs[" + std::to_string(k) + "]", defaults));
    } else {
        scn.dg_params.assign(6, DGParams{});
        defaults.push_back("dgs");
    }
    const int n = scn.n_dg();

    if (doc.contains("network")) {
        const json& nw = doc.at("network");
        check_keys(nw, "network", {"buses", "lines", "loads", "attachments"});
        NetworkModel net;
        for (const json& b : detail::array_at(nw, "buses", "network.buses"))
            net.buses.push_back(as_str(b, "network.buses[]"));
        const json& lines = detail::array_at(nw, "lines", "network.lines");
        for (size_t k = 0; k < lines.size(); ++k) {
            const std::string path = "network.lines[" + std::to_string(k) + "]";
            check_keys(lines[k], path, {"from", "to", "r", "l"});
            net.lines.push_back(Line{as_str(lines[k].at("from"), path + ".from"),
                                     as_str(lines[k].at("to"), path + ".to"), as_num(lines[k].at("r"), path + ".r"),
                                     as_num(lines[k].at("l"), path + ".l")});
        }
        const json& loads = detail::array_at(nw, "loads", "network.loads");
        for (size_t k = 0; k < loads.size(); ++k) {
            const std::string path = "network.loads[" + std::to_string(k) + "]";
            check_keys(loads[k], path, {"id", "bus", "r", "l", "enabled"});
            Load ld;
            ld.id = as_str(loads[k].at("id"), path + ".id");
            ld.bus = as_str(loads[k].at("bus"), path + ".bus");
            ld.r = as_num(loads[k].at("r"), path + ".r");
            ld.l = as_num(loads[k].at("l"), path + ".l");
            if (loads[k].contains("enabled")) {
                if (!loads[k].at("enabled").is_boolean())
                    throw std::invalid_argument("scenario: \"" + path + ".enabled\" must be a boolean");
                ld.enabled = loads[k].at("enabled").get<bool>();
            }
            net.loads.push_back(ld);
        }
        for (const json& a : detail::array_at(nw, "attachments", "network.attachments"))
            net.dg_bus.push_back(as_str(a, "network.attachments[]"));
        scn.network = std::move(net);
    } else {
        scn.network = default_network();
        defaults.push_back("network");
    }

    if (doc.contains("graph")) {
        const json& gr = doc.at("graph");
        check_keys(gr, "graph", {"zones", "leaders", "edges", "c_v", "g"});
        std::vector<std::vector<int>> zones;
        std::vector<int> leaders;
        std::vector<CommEdge> edges;
        Eigen::VectorXd coupling = Eigen::VectorXd::Constant(n, 30.0);
        double g = 1.0;
        const json& jz = detail::array_at(gr, "zones", "graph.zones");
        for (size_t z = 0; z < jz.size(); ++z) {
            const std::string path = "graph.zones[" + std::to_string(z) + "]";
            if (!jz[z].is_array()) throw std::invalid_argument("scenario: \"" + path + "\" must be an array");
            std::vector<int> zone;
            for (const json& a : jz[z]) zone.push_back(as_index(a, path + "[]", n));
            zones.push_back(std::move(zone));
        }
        for (const json& a : detail::array_at(gr, "leaders", "graph.leaders"))
            leaders.push_back(as_index(a, "graph.leaders[]", n));
        const json& je = detail::array_at(gr, "edges", "graph.edges");
        for (size_t k = 0; k < je.size(); ++k) {
            const std::string path = "graph.edges[" + std::to_string(k) + "]";
            check_keys(je[k], path, {"a", "b", "weight"});
            CommEdge e;
            e.a = as_index(je[k].at("a"), path + ".a", n);
            e.b = as_index(je[k].at("b"), path + ".b", n);
            if (je[k].contains("weight")) e.weight = as_num(je[k].at("weight"), path + ".weight");
            edges.push_back(e);
        }
        if (gr.contains("c_v")) {
            const json& jc = gr.at("c_v");
            if (jc.is_array()) {
                if (static_cast<int>(jc.size()) != n)
                    throw std::invalid_argument("scenario: \"graph.c_v\" must list one gain per DG");
                for (int k = 0; k < n; ++k) coupling(k) = as_num(jc[k], "graph.c_v[]");
            } else {
                coupling.setConstant(as_num(jc, "graph.c_v"));
            }
        } else {
            defaults.push_back("graph.c_v");
        }
        if (gr.contains("g"))
            g = as_num(gr.at("g"), "graph.g");
        else
            defaults.push_back("graph.g");
        scn.graph = build_zonal_graph(n, zones, leaders, edges, coupling, g);
    } else {
        if (n != 6) throw std::invalid_argument("scenario: \"graph\" is required when the DG count is not 6");
        scn.graph = default_zonal_graph();
        defaults.push_back("graph");
    }

    if (doc.contains("secondary")) {
        const json& sec = doc.at("secondary");
        check_keys(sec, "secondary", {"v_ref", "t_activate", "T_comm"});
        auto field = [&](const char* key, double& slot) {
            if (sec.contains(key))
                slot = as_num(sec.at(key), std::string("secondary.") + key);
            else
                defaults.push_back(std::string("secondary.") + key);
        };
        field("v_ref", scn.secondary.v_ref);
        field("t_activate", scn.secondary.t_activate);
        field("T_comm", scn.secondary.T_comm);
    } else {
        defaults.push_back("secondary");
    }

    int common_frame = -1;
    if (doc.contains("sim")) {
        const json& sim = doc.at("sim");
        check_keys(sim, "sim", {"dt", "t_end", "decimation", "common_frame"});
        if (sim.contains("dt"))
            scn.dt = as_num(sim.at("dt"), "sim.dt");
        else
            defaults.push_back("sim.dt");
        if (sim.contains("t_end"))
            scn.t_end = as_num(sim.at("t_end"), "sim.t_end");
        else
            defaults.push_back("sim.t_end");
        if (sim.contains("decimation")) {
            if (!sim.at("decimation").is_number_integer())
                throw std::invalid_argument("scenario: \"sim.decimation\" must be an integer");
            scn.log_decimation = sim.at("decimation").get<int>();
        } else {
            defaults.push_back("sim.decimation");
        }
        if (sim.contains("common_frame")) common_frame = as_index(sim.at("common_frame"), "sim.common_frame", n);
    } else {
        defaults.push_back("sim");
    }
    if (common_frame < 0) {
        // lowest-numbered leader hosts the common reference frame
        for (int k = 0; k < n && common_frame < 0; ++k)
            if (scn.graph.pinning(k) > 0.0) common_frame = k;
        defaults.push_back("sim.common_frame");
    }
    scn.common_frame_dg = common_frame;

    if (doc.contains("events")) {
        const json& evs = detail::array_at(doc, "events", "events");
        for (size_t k = 0; k < evs.size(); ++k) {
            const std::string path = "events[" + std::to_string(k) + "]";
            check_keys(evs[k], path, {"t", "load", "kind", "factor"});
            LoadEvent e;
            e.t = as_num(evs[k].at("t"), path + ".t");
            e.load_id = as_str(evs[k].at("load"), path + ".load");
            const std::string kind = as_str(evs[k].at("kind"), path + ".kind");
            if (kind == "toggle")
                e.kind = LoadEvent::Kind::toggle;
            else if (kind == "scale")
                e.kind = LoadEvent::Kind::scale;
            else
                throw std::invalid_argument("scenario: \"" + path + ".kind\" must be \"toggle\" or \"scale\"");
            if (evs[k].contains("factor")) e.factor = as_num(evs[k].at("factor"), path + ".factor");
            if (e.kind == LoadEvent::Kind::scale && !(e.factor > 0.0))
                throw std::invalid_argument("scenario: \"" + path + ".factor\" must be > 0");
            scn.events.push_back(e);
        }
    } else {
        // the bundled disturbance only makes sense on the bundled network
        if (!doc.contains("network")) scn.events = default_events();
        defaults.push_back("events");
    }

    scn.validate();
    return out;
}

inline ParsedScenario parse_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("scenario: cannot read file '" + path + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw std::runtime_error("scenario: '" + path + "' is not valid JSON: " + e.what());
    }
    return scenario_from_json(doc);
}

// Fully resolved document: every field explicit, so a re-parse applies no
// defaults and yields an equal Scenario.
inline json scenario_to_json(const Scenario& scn, const std::vector<std::string>& defaults_applied = {}) {
    json doc;
    for (const auto& p : scn.dg_params) {
        json d;
        d["r_f"] = p.r_f;
        d["L_f"] = p.L_f;
        d["C_f"] = p.C_f;
        d["r_c"] = p.r_c;
        d["L_c"] = p.L_c;
        d["omega_c"] = p.omega_c;
        d["K_pv"] = p.K_pv;
        d["K_iv"] = p.K_iv;
        d["K_pc"] = p.K_pc;
        d["K_ic"] = p.K_ic;
        d["F"] = p.F;
        d["m"] = p.m;
        d["n"] = p.n;
        d["omega_n"] = p.omega_n;
        d["V_n"] = p.V_n;
        doc["dgs"].push_back(d);
    }
    json nw;
    nw["buses"] = scn.network.buses;
    nw["lines"] = json::array();
    for (const auto& ln : scn.network.lines)
        nw["lines"].push_back({{"from", ln.from}, {"to", ln.to}, {"r", ln.r}, {"l", ln.l}});
    nw["loads"] = json::array();
    for (const auto& ld : scn.network.loads)
        nw["loads"].push_back({{"id", ld.id}, {"bus", ld.bus}, {"r", ld.r}, {"l", ld.l}, {"enabled", ld.enabled}});
    nw["attachments"] = scn.network.dg_bus;
    doc["network"] = nw;

    json gr;
    gr["zones"] = json::array();
    for (const auto& zone : scn.graph.zones) {
        json z = json::array();
        for (int a : zone) z.push_back(a + 1);
        gr["zones"].push_back(z);
    }
    json leaders = json::array();
    double g = 1.0;
    for (int k = 0; k < scn.graph.n; ++k)
        if (scn.graph.pinning(k) > 0.0) {
            leaders.push_back(k + 1);
            g = scn.graph.pinning(k);
        }
    gr["leaders"] = leaders;
    gr["edges"] = json::array();
    for (int a = 0; a < scn.graph.n; ++a)
        for (int b = a + 1; b < scn.graph.n; ++b)
            if (scn.graph.adjacency(a, b) > 0.0)
                gr["edges"].push_back({{"a", a + 1}, {"b", b + 1}, {"weight", scn.graph.adjacency(a, b)}});
    json cv = json::array();
    for (int k = 0; k < scn.graph.n; ++k) cv.push_back(scn.graph.coupling(k));
    gr["c_v"] = cv;
    gr["g"] = g;
    doc["graph"] = gr;

    doc["secondary"] = {{"v_ref", scn.secondary.v_ref},
                        {"t_activate", scn.secondary.t_activate},
                        {"T_comm", scn.secondary.T_comm}};
    doc["sim"] = {{"dt", scn.dt},
                  {"t_end", scn.t_end},
                  {"decimation", scn.log_decimation},
                  {"common_frame", scn.common_frame_dg + 1}};
    doc["events"] = json::array();
    for (const auto& e : scn.events)
        doc["events"].push_back({{"t", e.t},
                                 {"load", e.load_id},
                                 {"kind", e.kind == LoadEvent::Kind::toggle ? "toggle" : "scale"},
                                 {"factor", e.factor}});
    if (!defaults_applied.empty()) doc["defaults_applied"] = defaults_applied;
    return doc;
}

inline std::string serialize_scenario(const Scenario& scn, const std::vector<std::string>& defaults_applied = {}) {
    return scenario_to_json(scn, defaults_applied).dump(2) + "\n";
}

inline bool scenario_equal(const Scenario& a, const Scenario& b) {
    return scenario_to_json(a) == scenario_to_json(b);
}

// The two bundled experiment configurations. They differ only in the
// communication graph: two pinned zones versus a single pinned leader.
inline ParsedScenario zonal_preset() { return scenario_from_json(json::object()); }

inline ParsedScenario global_preset() {
    ParsedScenario out = zonal_preset();
    out.scenario.graph = default_global_graph();
    return out;
}

}  // namespace mgsim
