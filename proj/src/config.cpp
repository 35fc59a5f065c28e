#include "bmc/config.hpp"

#include <fstream>
#include <sstream>

namespace bmc {

namespace {

const ordered_json& require(const ordered_json& j, const std::string& path, const char* key) {
    if (!j.contains(key)) throw ConfigError(path.empty() ? key : path + "." + key, "missing");
    return j[key];
}

double num_at(const ordered_json& j, const std::string& path, const char* key, double fallback,
              bool required = false) {
    if (!j.contains(key)) {
        if (required) throw ConfigError(path + "." + key, "missing");
        return fallback;
    }
    if (!j[key].is_number()) throw ConfigError(path + "." + key, "must be a number");
    return j[key].get<double>();
}

std::string str_at(const ordered_json& j, const std::string& path, const char* key,
                   const std::string& fallback = "", bool required = false) {
    if (!j.contains(key)) {
        if (required) throw ConfigError(path + "." + key, "missing");
        return fallback;
    }
    if (!j[key].is_string()) throw ConfigError(path + "." + key, "must be a string");
    return j[key].get<std::string>();
}

std::shared_ptr<const Space> parse_space(const ordered_json& j) {
    std::string type = str_at(j, "space", "type", "", true);
    if (type == "gw" || type == "singleton")
        return std::make_shared<Space>(Space::explicit_kernel({"o"}, {{1.0}}));
    if (type == "tree" || type == "free_group") {
        StepLaw law;
        if (j.contains("step_law")) {
            const auto& sl = j["step_law"];
            if (sl.is_string()) {
                std::string s = sl.get<std::string>();
                if (s == "simple") {
                    law.kind = StepLaw::Kind::simple;
                } else {
                    throw ConfigError("space.step_law", "unknown step law '" + s + "'");
                }
            } else if (sl.is_array()) {
                law.kind = StepLaw::Kind::generator_weights;
                for (const auto& w : sl) {
                    if (!w.is_number()) throw ConfigError("space.step_law", "weights must be numbers");
                    law.weights.push_back(w.get<double>());
                }
            } else if (sl.is_object()) {
                law.kind = StepLaw::Kind::radial;
                law.back = num_at(sl, "space.step_law", "back", 0.0, true);
            } else {
                throw ConfigError("space.step_law", "must be 'simple', a weight list, or {back: p}");
            }
        }
        try {
            if (type == "tree") {
                int degree = static_cast<int>(num_at(j, "space", "degree", 0, true));
                return std::make_shared<Space>(Space::tree(degree, law));
            }
            int rank = static_cast<int>(num_at(j, "space", "rank", 0, true));
            return std::make_shared<Space>(Space::free_group(rank, law));
        } catch (const std::invalid_argument& e) {
            throw ConfigError("space", e.what());
        }
    }
    if (type == "explicit") {
        const auto& states = require(j, "space", "states");
        const auto& matrix = require(j, "space", "matrix");
        if (!states.is_array()) throw ConfigError("space.states", "must be an array of names");
        if (!matrix.is_array()) throw ConfigError("space.matrix", "must be an array of rows");
        std::vector<std::string> names;
        for (const auto& s : states) names.push_back(s.get<std::string>());
        std::vector<std::vector<double>> rows;
        for (const auto& r : matrix) {
            std::vector<double> row;
            for (const auto& p : r) row.push_back(p.get<double>());
            rows.push_back(std::move(row));
        }
        try {
            return std::make_shared<Space>(Space::explicit_kernel(std::move(names), std::move(rows)));
        } catch (const std::invalid_argument& e) {
            throw ConfigError("space.matrix", e.what());
        }
    }
    throw ConfigError("space.type", "unknown space type '" + type + "'");
}

OffspringPMF parse_offspring(const ordered_json& j, const std::string& path) {
    std::string kind = str_at(j, path, "kind", "", true);
    try {
        if (kind == "delta")
            return OffspringPMF::delta(static_cast<std::int64_t>(num_at(j, path, "k", 0, true)));
        if (kind == "geometric") return OffspringPMF::geometric(num_at(j, path, "q", 0, true));
        if (kind == "heavy_tail")
            return OffspringPMF::heavy_tail(num_at(j, path, "mean", 2.0, true),
                                            static_cast<std::int64_t>(num_at(j, path, "k0", 2)));
        if (kind == "explicit") {
            const auto& pmf = require(j, path, "pmf");
            std::vector<std::pair<std::int64_t, double>> entries;
            for (const auto& e : pmf) {
                if (!e.is_array() || e.size() != 2)
                    throw ConfigError(path + ".pmf", "entries must be [k, p] pairs");
                entries.emplace_back(e[0].get<std::int64_t>(), e[1].get<double>());
            }
            return OffspringPMF::explicit_pmf(std::move(entries));
        }
    } catch (const std::invalid_argument& e) {
        throw ConfigError(path, e.what());
    }
    throw ConfigError(path + ".kind", "unknown offspring kind '" + kind + "'");
}

std::shared_ptr<const BranchingLaw> parse_branching(const ordered_json& j,
                                                    std::shared_ptr<const Space> space) {
    std::string mode_s = str_at(j, "branching", "mode", "independent");
    BranchingLaw::Mode mode;
    if (mode_s == "independent") mode = BranchingLaw::Mode::independent;
    else if (mode_s == "vertex_coupled") mode = BranchingLaw::Mode::vertex_coupled;
    else if (mode_s == "mixture") mode = BranchingLaw::Mode::mixture;
    else throw ConfigError("branching.mode", "unknown mode '" + mode_s + "'");
    double lambda = num_at(j, "branching", "lambda", 0.5);
    auto base = parse_offspring(require(j, "branching", "offspring"), "branching.offspring");
    auto law = std::make_shared<BranchingLaw>(std::move(space), mode, std::move(base), lambda);
    if (j.contains("overrides")) {
        int idx = 0;
        for (const auto& ov : j["overrides"]) {
            std::string path = "branching.overrides[" + std::to_string(idx++) + "]";
            auto pmf = parse_offspring(require(ov, path, "offspring"), path + ".offspring");
            try {
                if (ov.contains("band")) {
                    const auto& b = ov["band"];
                    if (!b.is_array() || b.size() != 2)
                        throw ConfigError(path + ".band", "must be [lo, hi]");
                    law->add_band_override(b[0].get<std::int64_t>(), b[1].get<std::int64_t>(),
                                           std::move(pmf));
                } else if (ov.contains("state")) {
                    law->add_state_override(law->space().parse_vertex(ov["state"].get<std::string>()),
                                            std::move(pmf));
                } else {
                    throw ConfigError(path, "needs 'band' or 'state'");
                }
            } catch (const std::invalid_argument& e) {
                throw ConfigError(path, e.what());
            }
        }
    }
    return law;
}

}  // namespace

ordered_json parse_config_text(const std::string& text) {
    ordered_json doc = ordered_json::parse(text, nullptr, false);
    if (doc.is_discarded()) throw ConfigError("", "config is not valid JSON");
    return doc;
}

ordered_json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("", "cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

StudyConfig parse_study_config(const ordered_json& doc, long long seed_override,
                               int threads_override) {
    StudyConfig cfg;
    cfg.space = parse_space(require(doc, "", "space"));
    cfg.law = parse_branching(require(doc, "", "branching"), cfg.space);

    const auto& run_j = require(doc, "", "run");
    cfg.horizon = static_cast<int>(num_at(run_j, "run", "horizon", 0, true));
    cfg.trajectories = static_cast<std::int64_t>(num_at(run_j, "run", "trajectories", 0, true));
    cfg.cap = static_cast<std::int64_t>(num_at(run_j, "run", "cap", 10000000));
    if (cfg.horizon < 0) throw ConfigError("run.horizon", "must be >= 0");
    if (cfg.trajectories < 1) throw ConfigError("run.trajectories", "must be >= 1");
    if (cfg.cap < 1) throw ConfigError("run.cap", "must be >= 1");

    if (run_j.contains("initial")) {
        std::vector<Population::Entry> entries;
        for (const auto& e : run_j["initial"]) {
            if (!e.is_array() || e.size() != 2)
                throw ConfigError("run.initial", "entries must be [vertex, count] pairs");
            try {
                entries.emplace_back(cfg.space->parse_vertex(e[0].get<std::string>()),
                                     e[1].get<std::int64_t>());
            } catch (const std::invalid_argument& ex) {
                throw ConfigError("run.initial", ex.what());
            }
        }
        cfg.initial = Population::from_pairs(std::move(entries));
    } else {
        cfg.initial = Population::singleton(cfg.space->root());
    }
    if (run_j.contains("watched")) {
        for (const auto& w : run_j["watched"]) {
            try {
                cfg.watched.push_back(cfg.space->parse_vertex(w.get<std::string>()));
            } catch (const std::invalid_argument& ex) {
                throw ConfigError("run.watched", ex.what());
            }
        }
    }
    std::string engine = str_at(run_j, "run", "engine", "general");
    if (engine == "general") cfg.engine = Engine::general;
    else if (engine == "radial") cfg.engine = Engine::radial;
    else throw ConfigError("run.engine", "unknown engine '" + engine + "'");

    if (doc.contains("study")) {
        const auto& st = doc["study"];
        cfg.epsilon = num_at(st, "study", "epsilon", cfg.epsilon);
        cfg.depth = static_cast<int>(num_at(st, "study", "depth", cfg.depth));
        cfg.truncated_fraction_limit =
            num_at(st, "study", "truncated_fraction_limit", cfg.truncated_fraction_limit);
        cfg.median_decline_from =
            static_cast<int>(num_at(st, "study", "median_decline_from", cfg.median_decline_from));
        if (st.contains("histogram_verdicts")) {
            if (!st["histogram_verdicts"].is_boolean())
                throw ConfigError("study.histogram_verdicts", "must be a boolean");
            cfg.histogram_verdicts = st["histogram_verdicts"].get<bool>();
        }
        if (st.contains("phi")) {
            for (const auto& c : st["phi"]) {
                if (!c.is_array() || c.size() != 2)
                    throw ConfigError("study.phi", "entries must be [anchor_word, coefficient]");
                try {
                    cfg.phi.cylinders.emplace_back(cfg.space->parse_vertex(c[0].get<std::string>()),
                                                   c[1].get<double>());
                } catch (const std::invalid_argument& ex) {
                    throw ConfigError("study.phi", ex.what());
                }
            }
        }
        if (st.contains("x0")) {
            try {
                cfg.x0 = cfg.space->parse_vertex(st["x0"].get<std::string>());
            } catch (const std::invalid_argument& ex) {
                throw ConfigError("study.x0", ex.what());
            }
        } else {
            cfg.x0 = cfg.space->root();
        }
        if (st.contains("s_grid")) {
            for (const auto& s : st["s_grid"]) {
                if (!s.is_number()) throw ConfigError("study.s_grid", "must be numbers");
                cfg.s_grid.push_back(s.get<double>());
            }
        }
    } else {
        cfg.x0 = cfg.space->root();
    }

    cfg.seed = seed_override >= 0 ? static_cast<std::uint64_t>(seed_override)
                                  : static_cast<std::uint64_t>(num_at(doc, "", "seed", 1));
    cfg.threads = threads_override >= 0 ? threads_override
                                        : static_cast<int>(num_at(doc, "", "threads", 0));

    // the echo pins everything that affects results; worker count does not
    // (trajectories merge by index), so it stays out of the reports
    cfg.echo = doc;
    cfg.echo.erase("threads");
    cfg.echo["seed"] = cfg.seed;
    return cfg;
}

}  // namespace bmc
