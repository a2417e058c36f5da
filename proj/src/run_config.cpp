#include "sbm/run_config.hpp"

#include <nlohmann/json.hpp>

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "sbm/hilbert.hpp"
#include "sbm/io.hpp"

namespace sbm::cli {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& message) {
    throw std::invalid_argument("config: " + message);
}

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

double to_double(const std::string& value, const std::string& key) {
    try {
        std::size_t used = 0;
        const double x = std::stod(value, &used);
        if (used != value.size()) fail("trailing characters in value for " + key);
        return x;
    } catch (const std::invalid_argument&) {
        fail("cannot parse number for " + key + ": '" + value + "'");
    } catch (const std::out_of_range&) {
        fail("number out of range for " + key + ": '" + value + "'");
    }
}

long long to_int(const std::string& value, const std::string& key) {
    try {
        std::size_t used = 0;
        const long long x = std::stoll(value, &used);
        if (used != value.size()) fail("trailing characters in value for " + key);
        return x;
    } catch (const std::exception&) {
        fail("cannot parse integer for " + key + ": '" + value + "'");
    }
}

std::uint64_t to_uint64(const std::string& value, const std::string& key) {
    try {
        std::size_t used = 0;
        const unsigned long long x = std::stoull(value, &used);
        if (used != value.size()) fail("trailing characters in value for " + key);
        return x;
    } catch (const std::exception&) {
        fail("cannot parse seed for " + key + ": '" + value + "'");
    }
}

bool to_bool(const std::string& value, const std::string& key) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    fail("expected true/false for " + key + ", got '" + value + "'");
}

models::Model parse_model(const std::string& value) {
    if (value == "tc") return models::Model::TavisCummings;
    if (value == "gd") return models::Model::GeneralizedDicke;
    if (value == "btc") return models::Model::BoundaryTimeCrystal;
    fail("unknown model '" + value + "' (expected tc, gd or btc)");
}

std::string model_name(models::Model model) {
    switch (model) {
        case models::Model::TavisCummings: return "tc";
        case models::Model::GeneralizedDicke: return "gd";
        case models::Model::BoundaryTimeCrystal: return "btc";
    }
    fail("unknown model enum");
}

RunUnravelling parse_unravelling(const std::string& value) {
    if (value == "counting") return RunUnravelling::Counting;
    if (value == "homodyne") return RunUnravelling::Homodyne;
    if (value == "none") return RunUnravelling::None;
    fail("unknown unravelling '" + value + "'");
}

std::string unravelling_name(RunUnravelling u) {
    switch (u) {
        case RunUnravelling::Counting: return "counting";
        case RunUnravelling::Homodyne: return "homodyne";
        case RunUnravelling::None: return "none";
    }
    fail("unknown unravelling enum");
}

models::ParamTarget parse_target(const std::string& value) {
    if (value == "omega") return models::ParamTarget::Omega;
    if (value == "lambda") return models::ParamTarget::Lambda;
    fail("unknown target '" + value + "' (expected omega or lambda)");
}

std::string target_name(models::ParamTarget target) {
    return target == models::ParamTarget::Omega ? "omega" : "lambda";
}

// "dicke(M_z, n)" or "coherent(theta, phi, n)"
InitialState parse_initial(const std::string& value) {
    const auto open = value.find('(');
    const auto close = value.rfind(')');
    if (open == std::string::npos || close == std::string::npos || close < open) {
        fail("initial state must look like dicke(M_z,n) or coherent(theta,phi,n)");
    }
    const std::string name = trim(value.substr(0, open));
    std::vector<std::string> args;
    std::stringstream ss(value.substr(open + 1, close - open - 1));
    std::string item;
    while (std::getline(ss, item, ',')) args.push_back(trim(item));

    InitialState initial;
    if (name == "dicke") {
        if (args.size() != 2) fail("dicke initial state takes (M_z, n)");
        initial.kind = InitialKind::Dicke;
        initial.m_z = to_double(args[0], "initial.m_z");
        initial.n = static_cast<int>(to_int(args[1], "initial.n"));
    } else if (name == "coherent") {
        if (args.size() != 3) fail("coherent initial state takes (theta, phi, n)");
        initial.kind = InitialKind::Coherent;
        initial.theta = to_double(args[0], "initial.theta");
        initial.phi = to_double(args[1], "initial.phi");
        initial.n = static_cast<int>(to_int(args[2], "initial.n"));
    } else {
        fail("unknown initial state '" + name + "'");
    }
    return initial;
}

std::string initial_to_string(const InitialState& initial) {
    std::ostringstream out;
    if (initial.kind == InitialKind::Dicke) {
        out << "dicke(" << io::format_double(initial.m_z) << "," << initial.n << ")";
    } else {
        out << "coherent(" << io::format_double(initial.theta) << ","
            << io::format_double(initial.phi) << "," << initial.n << ")";
    }
    return out.str();
}

void apply_key(RunConfig& config, const std::string& section,
               const std::string& key, const std::string& value) {
    if (section == "model") {
        if (key == "model") config.model.model = parse_model(value);
        else if (key == "omega") config.model.omega = to_double(value, key);
        else if (key == "delta_spin") config.model.delta_spin = to_double(value, key);
        else if (key == "delta_boson") config.model.delta_boson = to_double(value, key);
        else if (key == "lambda") config.model.lambda = to_double(value, key);
        else if (key == "kappa") config.model.kappa = to_double(value, key);
        else if (key == "gamma") config.model.gamma = to_double(value, key);
        else fail("unknown key '" + key + "' in [model]");
    } else if (section == "space") {
        if (key == "n_spins") config.space.n_spins = static_cast<int>(to_int(value, key));
        else if (key == "fock_cutoff") {
            config.space.fock_cutoff = static_cast<int>(to_int(value, key));
        } else fail("unknown key '" + key + "' in [space]");
    } else if (section == "run") {
        if (key == "unravelling") config.run.unravelling = parse_unravelling(value);
        else if (key == "target") config.run.target = parse_target(value);
        else if (key == "initial") config.run.initial = parse_initial(value);
        else if (key == "dt") config.run.dt = to_double(value, key);
        else if (key == "t_final") config.run.t_final = to_double(value, key);
        else if (key == "n_traj") config.run.n_traj = static_cast<int>(to_int(value, key));
        else if (key == "master_seed") config.run.master_seed = to_uint64(value, key);
        else if (key == "sample_stride") {
            config.run.sample_stride = static_cast<int>(to_int(value, key));
        } else if (key == "phi") config.run.phi = to_double(value, key);
        else if (key == "n_random") {
            config.run.n_random = static_cast<int>(to_int(value, key));
        } else fail("unknown key '" + key + "' in [run]");
    } else if (section == "outputs") {
        if (key == "directory") config.outputs.directory = value;
        else if (key == "format") {
            if (value != "csv") fail("unsupported output format '" + value + "'");
            config.outputs.format = value;
        } else if (key == "dump_records") config.outputs.dump_records = to_bool(value, key);
        else if (key == "dump_limit") {
            config.outputs.dump_limit = static_cast<int>(to_int(value, key));
        } else fail("unknown key '" + key + "' in [outputs]");
    } else if (section == "meanfield") {
        config.meanfield.present = true;
        if (key == "lambda_min") config.meanfield.lambda_min = to_double(value, key);
        else if (key == "lambda_max") config.meanfield.lambda_max = to_double(value, key);
        else if (key == "lambda_count") {
            config.meanfield.lambda_count = static_cast<int>(to_int(value, key));
        } else if (key == "flow_lambda") {
            config.meanfield.flow_lambda = to_double(value, key);
        } else if (key == "m_x") config.meanfield.m_x = to_double(value, key);
        else if (key == "m_y") config.meanfield.m_y = to_double(value, key);
        else if (key == "m_z") config.meanfield.m_z = to_double(value, key);
        else if (key == "m_q") config.meanfield.m_q = to_double(value, key);
        else if (key == "m_p") config.meanfield.m_p = to_double(value, key);
        else fail("unknown key '" + key + "' in [meanfield]");
    } else {
        fail("unknown section [" + section + "]");
    }
}

void validate(const RunConfig& config) {
    if (config.space.n_spins < 1) fail("space.n_spins must be >= 1");
    if (config.space.fock_cutoff < 0) fail("space.fock_cutoff must be >= 0");
    if (config.run.dt <= 0) fail("run.dt must be positive");
    if (config.run.t_final <= 0) fail("run.t_final must be positive");
    if (config.run.sample_stride < 1) fail("run.sample_stride must be >= 1");
    if (config.run.n_traj < 0) fail("run.n_traj must be >= 0");
    if (config.model.model == models::Model::BoundaryTimeCrystal) {
        if (config.model.gamma <= 0) fail("model.gamma must be positive for btc");
    } else {
        if (config.model.kappa <= 0) fail("model.kappa must be positive");
    }
}

RunConfig parse_ini(const std::string& text) {
    RunConfig config;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto comment = line.find_first_of("#;");
        if (comment != std::string::npos) line = line.substr(0, comment);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') fail("malformed section header on line " +
                                         std::to_string(line_no));
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            fail("expected key = value on line " + std::to_string(line_no));
        }
        if (section.empty()) fail("key outside any section on line " +
                                  std::to_string(line_no));
        apply_key(config, section, trim(line.substr(0, eq)),
                  trim(line.substr(eq + 1)));
    }
    validate(config);
    return config;
}

template <typename T>
void walk_json_section(RunConfig& config, const std::string& section, const T& obj) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        const json& v = it.value();
        std::string text;
        if (v.is_string()) {
            text = v.template get<std::string>();
        } else if (v.is_boolean()) {
            text = v.template get<bool>() ? "true" : "false";
        } else if (v.is_number_unsigned()) {
            text = std::to_string(v.template get<std::uint64_t>());
        } else if (v.is_number_integer()) {
            text = std::to_string(v.template get<std::int64_t>());
        } else if (v.is_number_float()) {
            text = io::format_double(v.template get<double>());
        } else {
            fail("unsupported JSON value for " + section + "." + it.key());
        }
        apply_key(config, section, it.key(), text);
    }
}

RunConfig parse_json_config(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& err) {
        fail(std::string("invalid JSON: ") + err.what());
    }
    if (!doc.is_object()) fail("top-level JSON value must be an object");
    RunConfig config;
    for (auto it = doc.begin(); it != doc.end(); ++it) {
        if (!it.value().is_object()) {
            fail("section '" + it.key() + "' must be an object");
        }
        walk_json_section(config, it.key(), it.value());
    }
    validate(config);
    return config;
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) continue;
        return c == '{' ? parse_json_config(text) : parse_ini(text);
    }
    fail("empty configuration");
}

RunConfig parse_config_file(const std::filesystem::path& path) {
    return parse_config_text(io::read_file(path));
}

models::ModelParams RunConfig::model_params() const {
    models::ModelParams params;
    params.model = model.model;
    params.omega = model.omega;
    params.delta_spin = model.delta_spin;
    params.delta_boson = model.delta_boson;
    params.lambda = model.lambda;
    params.kappa = model.kappa;
    params.gamma = model.gamma;
    params.phi_lo = run.phi;
    return params;
}

hilbert::CompositeSpace RunConfig::composite_space() const {
    return hilbert::make_space(space.n_spins, space.fock_cutoff);
}

Vector RunConfig::initial_state() const {
    const auto cs = composite_space();
    if (run.initial.kind == InitialKind::Dicke) {
        return hilbert::dicke_number_state(cs, run.initial.m_z, run.initial.n);
    }
    return hilbert::spin_coherent_state(cs, run.initial.theta, run.initial.phi,
                                        run.initial.n);
}

json config_to_json(const RunConfig& config) {
    json j;
    j["model"] = {{"model", model_name(config.model.model)},
                  {"omega", config.model.omega},
                  {"delta_spin", config.model.delta_spin},
                  {"delta_boson", config.model.delta_boson},
                  {"lambda", config.model.lambda},
                  {"kappa", config.model.kappa},
                  {"gamma", config.model.gamma}};
    j["space"] = {{"n_spins", config.space.n_spins},
                  {"fock_cutoff", config.space.fock_cutoff}};
    j["run"] = {{"unravelling", unravelling_name(config.run.unravelling)},
                {"target", target_name(config.run.target)},
                {"initial", initial_to_string(config.run.initial)},
                {"dt", config.run.dt},
                {"t_final", config.run.t_final},
                {"n_traj", config.run.n_traj},
                {"master_seed", config.run.master_seed},
                {"sample_stride", config.run.sample_stride},
                {"phi", config.run.phi},
                {"n_random", config.run.n_random}};
    j["outputs"] = {{"directory", config.outputs.directory},
                    {"format", config.outputs.format},
                    {"dump_records", config.outputs.dump_records},
                    {"dump_limit", config.outputs.dump_limit}};
    if (config.meanfield.present) {
        j["meanfield"] = {{"lambda_min", config.meanfield.lambda_min},
                          {"lambda_max", config.meanfield.lambda_max},
                          {"lambda_count", config.meanfield.lambda_count},
                          {"flow_lambda", config.meanfield.flow_lambda},
                          {"m_x", config.meanfield.m_x},
                          {"m_y", config.meanfield.m_y},
                          {"m_z", config.meanfield.m_z},
                          {"m_q", config.meanfield.m_q},
                          {"m_p", config.meanfield.m_p}};
    }
    return j;
}

RunConfig config_from_json(const json& j) {
    return parse_json_config(j.dump());
}

std::string config_hash(const RunConfig& config) {
    return io::git_blob_sha1(config_to_json(config).dump());
}

}  // namespace sbm::cli
