#include "cli.hpp"

#include "aidi/bench.hpp"
#include "aidi/csv.hpp"
#include "aidi/editing.hpp"
#include "aidi/error.hpp"
#include "aidi/inversion.hpp"
#include "aidi/tensor_io.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <vector>

namespace aidi::cli {

namespace {

class UsageError : public Error {
public:
    using Error::Error;
};

std::string normalize_key(std::string key) {
    for (char& c : key)
        if (c == '_') c = '-';
    return key;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

// Flags that take a value. Grid accepts comma-separated lists for steps,
// omega and method.
struct Flag {
    std::string name;
    std::string help;
};

const std::vector<Flag> kValueFlags{
    {"config", "key = value file; flags override it"},
    {"seed", "seed for the default latent, predictor and stochastic draws"},
    {"steps", "number of scheduled steps (grid: comma list)"},
    {"omega", "guidance scale for inversion/reconstruction (grid: comma list)"},
    {"omega-e", "editing guidance scale inside the mask"},
    {"eta", "stochastic editing strength (0 = deterministic)"},
    {"method", "euler | plain | aidi_e | aidi_a (grid: comma list)"},
    {"iters", "fixed-point iterations per step"},
    {"window", "Anderson window (aidi_a)"},
    {"tol", "early-stop residual tolerance (0 disables)"},
    {"predictor", "predictor weight file (default: built-in contractive)"},
    {"in", "input latent tensor file (default: seeded random)"},
    {"out", "output tensor file (grid: CSV path)"},
    {"report", "inversion residual report CSV"},
    {"scores", "edit candidate scores CSV"},
    {"shape", "shape of the default random latent, e.g. 1,8,8"},
    {"schedule", "alpha-bar file, one value per line for t = 1..T"},
    {"n-candidates", "stochastic edit candidates"},
    {"polarity", "anchor polarity: positive | negative"},
    {"mask-m", "mask normalisation range M"},
    {"delta", "mask threshold (default: map mean)"},
    {"attention", "attention map tensor file (default: centred Gaussian blob)"},
};
const std::vector<Flag> kSwitches{
    {"binary", "write tensors in the float32 binary format"},
    {"timing", "record wall_ms in the grid CSV (breaks byte-determinism)"},
};

template <class List>
bool known(const List& list, const std::string& key) {
    return std::any_of(list.begin(), list.end(), [&](const Flag& f) { return f.name == key; });
}

struct Settings {
    std::map<std::string, std::string> values;
    std::map<std::string, bool> switches;

    std::optional<std::string> get(const std::string& k) const {
        auto it = values.find(k);
        if (it == values.end()) return std::nullopt;
        return it->second;
    }
    bool on(const std::string& k) const {
        auto it = switches.find(k);
        return it != switches.end() && it->second;
    }
};

template <class T>
T parse_number(const std::string& key, const std::string& text) {
    std::istringstream ss(text);
    T v{};
    ss >> v;
    if (ss.fail() || !(ss >> std::ws).eof()) throw UsageError("--" + key + ": cannot parse '" + text + "'");
    return v;
}

template <class T>
T number_or(const Settings& s, const std::string& key, T fallback) {
    auto v = s.get(key);
    return v ? parse_number<T>(key, *v) : fallback;
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

Shape parse_shape_flag(const std::string& text) {
    Shape shape;
    for (const auto& d : split_list(text)) {
        const auto v = parse_number<long long>("shape", d);
        if (v <= 0) throw UsageError("--shape: dims must be positive");
        shape.push_back(static_cast<std::size_t>(v));
    }
    if (shape.empty()) throw UsageError("--shape: empty");
    return shape;
}

NoiseSchedule base_schedule(const Settings& s) {
    if (auto f = s.get("schedule")) return load_alpha_bar_file(*f);
    return build_schedule();
}

std::uint64_t seed_of(const Settings& s) { return number_or<std::uint64_t>(s, "seed", 0); }

Latent input_latent(const Settings& s) {
    if (auto f = s.get("in")) return load_tensor(*f);
    const Shape shape = s.get("shape") ? parse_shape_flag(*s.get("shape")) : kDefaultLatentShape;
    return random_latent(shape, seed_of(s) + 1);
}

std::shared_ptr<const NoisePredictor> predictor(const Settings& s, std::size_t dim) {
    if (auto f = s.get("predictor")) return load_predictor(*f);
    return default_bench_predictor(dim, seed_of(s));
}

int steps_of(const Settings& s, const NoiseSchedule& base) {
    const int steps = number_or<int>(s, "steps", 20);
    if (steps < 1 || steps > base.big_t()) throw UsageError("--steps must be in [1, " + std::to_string(base.big_t()) + "]");
    return steps;
}

std::optional<FixedPointConfig> method_config(const Settings& s, int steps) {
    const auto method = parse_method(s.get("method").value_or("aidi_e"));
    auto cfg = fixed_point_config(method, number_or<int>(s, "iters", default_iterations(steps)),
                                  number_or<int>(s, "window", 2));
    if (cfg) cfg->residual_tol = number_or<double>(s, "tol", 0.0);
    if (cfg) cfg->validate();
    return cfg;
}

void write_output(const Settings& s, const Latent& t) {
    if (auto f = s.get("out")) save_tensor(t, *f, s.on("binary"));
}

void write_report(const Settings& s, const InversionReport& report) {
    if (auto f = s.get("report")) {
        std::ofstream out(*f);
        if (!out) throw IoError("cannot write report " + *f);
        write_report_csv(report, out);
    }
}

EditConfig edit_config(const Settings& s, int steps) {
    EditConfig cfg;
    cfg.omega = number_or<double>(s, "omega", 1.0);
    cfg.omega_e = number_or<double>(s, "omega-e", 7.0);
    cfg.fixed_point = method_config(s, steps);
    cfg.stochastic.eta = number_or<double>(s, "eta", 0.0);
    cfg.stochastic.seed = seed_of(s);
    cfg.n_candidates = number_or<int>(s, "n-candidates", 1);
    cfg.mask.big_m = number_or<double>(s, "mask-m", 10.0);
    if (auto d = s.get("delta")) cfg.mask.delta = parse_number<double>("delta", *d);
    cfg.mask.polarity = parse_polarity(s.get("polarity").value_or("positive"));
    if (auto f = s.get("attention")) cfg.attention = fixed_source(load_attention(*f));
    cfg.validate();
    return cfg;
}

std::string method_name(const Settings& s) { return s.get("method").value_or("aidi_e"); }

int cmd_invert(const Settings& s, std::ostream& out) {
    const NoiseSchedule base = base_schedule(s);
    const int steps = steps_of(s, base);
    const NoiseSchedule schedule = subsample(base, steps);
    const Latent z0 = input_latent(s);
    const auto pred = predictor(s, z0.size());
    const double omega = number_or<double>(s, "omega", 1.0);
    auto inv = invert_trajectory(schedule, *pred, z0, PromptId::Source, omega, method_config(s, steps));
    SampleOptions opts;
    opts.omega = omega;
    const Latent rec = sample_trajectory(schedule, *pred, inv.z_T, opts).back();
    inv.report.round_trip_l2 = relative_l2(rec, z0);
    write_output(s, inv.z_T);
    write_report(s, inv.report);
    out << "invert method=" << method_name(s) << " steps=" << steps << " omega=" << format_real(omega)
        << " round_trip_relative_l2=" << format_real(*inv.report.round_trip_l2) << " nfe=" << inv.report.nfe
        << " wall_ms=" << format_real(inv.report.wall_ms) << '\n';
    return kExitOk;
}

int cmd_reconstruct(const Settings& s, std::ostream& out) {
    const NoiseSchedule base = base_schedule(s);
    const int steps = steps_of(s, base);
    const NoiseSchedule schedule = subsample(base, steps);
    const Latent z0 = input_latent(s);
    const auto pred = predictor(s, z0.size());
    EditConfig cfg = edit_config(s, steps);
    cfg.omega_e = std::max(cfg.omega_e, cfg.omega);
    const auto rec = reconstruct(schedule, *pred, z0, PromptId::Source, cfg);
    write_output(s, rec.z0_rec);
    write_report(s, rec.report);
    out << "reconstruct method=" << method_name(s) << " steps=" << steps << " omega=" << format_real(cfg.omega)
        << " relative_l2=" << format_real(*rec.report.round_trip_l2) << " psnr=" << format_real(psnr(rec.z0_rec, z0))
        << " nfe=" << (rec.report.nfe + rec.sampling_nfe) << '\n';
    return kExitOk;
}

int cmd_edit(const Settings& s, std::ostream& out) {
    const NoiseSchedule base = base_schedule(s);
    const int steps = steps_of(s, base);
    const NoiseSchedule schedule = subsample(base, steps);
    const Latent z0 = input_latent(s);
    const auto pred = predictor(s, z0.size());
    const EditConfig cfg = edit_config(s, steps);
    const auto res = edit(schedule, *pred, z0, PromptId::Source, PromptId::Target, cfg);
    write_output(s, res.best());
    if (auto f = s.get("scores")) {
        std::ofstream csv(*f);
        if (!csv) throw IoError("cannot write scores " + *f);
        write_scores_csv(res, csv);
    }
    out << "edit method=" << method_name(s) << " steps=" << steps << " omega=" << format_real(cfg.omega)
        << " omega_e=" << format_real(cfg.omega_e) << " eta=" << format_real(cfg.stochastic.eta)
        << " candidates=" << res.candidates.size() << " best=" << res.ranking.front()
        << " best_score=" << format_real(res.scores[res.ranking.front()])
        << " reconstruction_relative_l2=" << format_real(*res.reconstruction.report.round_trip_l2) << '\n';
    return kExitOk;
}

int cmd_grid(const Settings& s, std::ostream& out) {
    ExperimentGrid grid;
    grid.seed = seed_of(s);
    grid.schedule = base_schedule(s);
    if (auto v = s.get("steps")) {
        grid.step_counts.clear();
        for (const auto& x : split_list(*v)) grid.step_counts.push_back(parse_number<int>("steps", x));
    }
    if (auto v = s.get("omega")) {
        grid.omegas.clear();
        for (const auto& x : split_list(*v)) grid.omegas.push_back(parse_number<double>("omega", x));
    }
    if (auto v = s.get("method")) {
        grid.methods.clear();
        for (const auto& x : split_list(*v)) grid.methods.push_back(parse_method(x));
    }
    if (auto v = s.get("iters")) grid.iters = parse_number<int>("iters", *v);
    grid.window = number_or<int>(s, "window", 2);
    if (auto f = s.get("in")) grid.z0 = load_tensor(*f);
    if (auto v = s.get("shape")) grid.latent_shape = parse_shape_flag(*v);
    if (auto f = s.get("predictor")) grid.predictor = load_predictor(*f);
    grid.record_timing = s.on("timing");
    for (int st : grid.step_counts)
        if (st > grid.schedule->big_t()) throw UsageError("--steps entries must be <= T");

    const auto rows = run_grid(grid);
    if (auto f = s.get("out")) {
        std::ofstream csv(*f, std::ios::binary);
        if (!csv) throw IoError("cannot write grid CSV " + *f);
        write_grid_csv(rows, csv);
        out << "grid rows=" << rows.size() << " out=" << *f << '\n';
    } else {
        write_grid_csv(rows, out);
    }
    return kExitOk;
}

}  // namespace

std::map<std::string, std::string> parse_config(std::istream& in) {
    std::map<std::string, std::string> kv;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw UsageError("config line " + std::to_string(line_no) + ": expected 'key = value'");
        const std::string key = normalize_key(trim(line.substr(0, eq)));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw UsageError("config line " + std::to_string(line_no) + ": empty key");
        kv[key] = value;
    }
    return kv;
}

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Accelerated iterative diffusion inversion on toy noise predictors"};
    app.require_subcommand(1);
    struct Sub {
        std::string name;
        std::string help;
        int (*fn)(const Settings&, std::ostream&);
    };
    const std::vector<Sub> subs{
        {"invert", "invert a latent to noise and report the round-trip error", cmd_invert},
        {"reconstruct", "invert then sample back with the same prompt", cmd_reconstruct},
        {"edit", "invert, then edit towards the target prompt with blended guidance", cmd_edit},
        {"grid", "reconstruction-accuracy grid over steps x omega x method", cmd_grid},
    };

    std::map<std::string, std::string> cli_values;
    std::map<std::string, bool> cli_switches;
    std::map<std::string, CLI::App*> apps;
    for (const auto& sub : subs) {
        auto* sc = app.add_subcommand(sub.name, sub.help);
        for (const auto& f : kValueFlags) sc->add_option("--" + f.name, cli_values[sub.name + "/" + f.name], f.help);
        for (const auto& f : kSwitches) sc->add_flag("--" + f.name, cli_switches[sub.name + "/" + f.name], f.help);
        apps[sub.name] = sc;
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n" << app.help();
        return kExitUsage;
    }

    for (const auto& sub : subs) {
        CLI::App* sc = apps[sub.name];
        if (!sc->parsed()) continue;
        if (sc->get_option("--help")->count() > 0) {
            out << sc->help();
            return kExitOk;
        }
        try {
            Settings settings;
            const auto flag_given = [&](const std::string& f) { return sc->get_option("--" + f)->count() > 0; };
            if (flag_given("config")) {
                const std::string path = cli_values[sub.name + "/config"];
                std::ifstream in(path);
                if (!in) throw UsageError("cannot open config file " + path);
                for (auto& [k, v] : parse_config(in)) {
                    const bool is_value = known(kValueFlags, k);
                    const bool is_switch = known(kSwitches, k);
                    if (is_value && k != "config") {
                        settings.values[k] = v;
                    } else if (is_switch) {
                        settings.switches[k] = (v == "true" || v == "1" || v == "yes" || v == "on");
                    } else {
                        throw UsageError("config file: unknown key '" + k + "'");
                    }
                }
            }
            for (const auto& f : kValueFlags)
                if (flag_given(f.name)) settings.values[f.name] = cli_values[sub.name + "/" + f.name];
            for (const auto& f : kSwitches)
                if (flag_given(f.name)) settings.switches[f.name] = cli_switches[sub.name + "/" + f.name];
            return sub.fn(settings, out);
        } catch (const NumericError& e) {
            err << "numeric failure: " << e.what() << '\n';
            return kExitNumeric;
        } catch (const Error& e) {
            err << "error: " << e.what() << '\n';
            return kExitUsage;
        }
    }
    return kExitUsage;
}

}  // namespace aidi::cli
