#include "fairvar/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "fairvar/errors.hpp"

namespace fairvar {

using nlohmann::json;

namespace {

/// Typed access to one JSON object; problems are appended to `violations`.
class Reader {
public:
    Reader(const json& j, std::string prefix, std::vector<std::string>& violations)
        : j_(j), prefix_(std::move(prefix)), violations_(violations)
    {
    }

    bool has(const char* key) const { return j_.contains(key); }

    void uint(const char* key, std::uint64_t& out) { read(key, out, &json::is_number_unsigned, "a nonnegative integer"); }

    void size(const char* key, std::size_t& out)
    {
        std::uint64_t v = out;
        uint(key, v);
        out = static_cast<std::size_t>(v);
    }

    void integer(const char* key, int& out) { read(key, out, &json::is_number_integer, "an integer"); }

    void real(const char* key, double& out) { read(key, out, &json::is_number, "a number"); }

    void string(const char* key, std::string& out) { read(key, out, &json::is_string, "a string"); }

    void sizes(const char* key, std::vector<std::size_t>& out)
    {
        list(key, out, &json::is_number_unsigned, "a list of nonnegative integers");
    }

    void reals(const char* key, std::vector<double>& out) { list(key, out, &json::is_number, "a list of numbers"); }

    template <typename Enum, typename Parse>
    void enumeration(const char* key, Enum& out, Parse parse)
    {
        std::string name;
        if (!has(key)) {
            return;
        }
        if (!j_.at(key).is_string()) {
            fail(key, "expected a string");
            return;
        }
        try {
            out = parse(j_.at(key).get<std::string>());
        } catch (const std::invalid_argument& e) {
            fail(key, e.what());
        }
    }

    /// Sub-object reader, or nullopt (with a violation) if `key` is not an object.
    std::optional<Reader> object(const char* key)
    {
        if (!has(key)) {
            return std::nullopt;
        }
        if (!j_.at(key).is_object()) {
            fail(key, "expected an object");
            return std::nullopt;
        }
        return Reader(j_.at(key), path(key), violations_);
    }

    void reject_unknown(std::initializer_list<const char*> known)
    {
        const std::set<std::string> names(known.begin(), known.end());
        for (const auto& [key, value] : j_.items()) {
            if (!names.contains(key)) {
                violations_.push_back(path(key) + ": unknown key");
            }
        }
    }

    void fail(const std::string& key, const std::string& message) { violations_.push_back(path(key) + ": " + message); }

private:
    std::string path(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

    template <typename T>
    void read(const char* key, T& out, bool (json::*check)() const noexcept, const char* what)
    {
        if (!has(key)) {
            return;
        }
        const json& v = j_.at(key);
        if (!(v.*check)()) {
            fail(key, std::string("expected ") + what);
            return;
        }
        out = v.get<T>();
    }

    template <typename T>
    void list(const char* key, std::vector<T>& out, bool (json::*check)() const noexcept, const char* what)
    {
        if (!has(key)) {
            return;
        }
        const json& v = j_.at(key);
        bool ok = v.is_array();
        if (ok) {
            for (const auto& e : v) {
                ok = ok && (e.*check)();
            }
        }
        if (!ok) {
            fail(key, std::string("expected ") + what);
            return;
        }
        out = v.get<std::vector<T>>();
    }

    const json& j_;
    std::string prefix_;
    std::vector<std::string>& violations_;
};

BatchSelection parse_selection(const std::string& name)
{
    if (name == "suffix") {
        return BatchSelection::suffix;
    }
    if (name == "random") {
        return BatchSelection::random;
    }
    throw std::invalid_argument("unknown batch selection '" + name + "'");
}

MitigationSetup parse_setup(const std::string& name)
{
    for (auto s : {MitigationSetup::baseline, MitigationSetup::reweighing, MitigationSetup::eo_loss}) {
        if (mitigation_setup_name(s) == name) {
            return s;
        }
    }
    throw std::invalid_argument("unknown mitigation setup '" + name + "'");
}

bool one_of(const std::string& command, std::initializer_list<const char*> names)
{
    for (const char* n : names) {
        if (command == n) {
            return true;
        }
    }
    return false;
}

}  // namespace

std::string preset_name(Preset preset) { return preset == Preset::desk ? "desk" : "paper"; }

Preset parse_preset(const std::string& name)
{
    if (name == "paper") {
        return Preset::paper;
    }
    if (name == "desk") {
        return Preset::desk;
    }
    throw std::invalid_argument("unknown preset '" + name + "' (expected paper or desk)");
}

RunConfig preset_config(Preset preset)
{
    RunConfig c;
    c.preset = preset;
    if (preset == Preset::desk) {
        c.train.epochs = 150;
        c.train.window_first = 80;
        c.train.window_last = 150;
        c.train.learning_rate = 0.1;
        c.experiment.n_runs = 10;
        c.experiment.checkpoint_runs = 8;
        c.experiment.n_checkpoints = 40;
        c.experiment.t_max = 50;
        c.experiment.s_max = 10;
        c.experiment.repeats = 3;
    }
    return c;
}

void apply_json(RunConfig& config, const json& j, std::vector<std::string>& violations)
{
    if (!j.is_object()) {
        violations.emplace_back("config: top level must be an object");
        return;
    }
    Reader root(j, "", violations);
    root.reject_unknown({"preset", "dataset", "split", "train", "experiment", "master_seed", "output_dir", "jobs"});
    root.enumeration("preset", config.preset, parse_preset);
    root.uint("master_seed", config.master_seed);
    root.size("jobs", config.jobs);
    std::string out_dir = config.output_dir.string();
    root.string("output_dir", out_dir);
    config.output_dir = out_dir;

    if (auto d = root.object("dataset")) {
        std::string source = config.dataset.synthetic ? "synthetic" : "csv";
        d->string("source", source);
        auto& s = config.dataset.synth;
        if (source == "synthetic") {
            config.dataset.synthetic = true;
            d->reject_unknown({"source", "n", "dims", "proportions", "separation", "group_shift", "noise", "seed"});
            d->size("n", s.n);
            d->size("dims", s.dims);
            std::vector<double> props(s.proportions.begin(), s.proportions.end());
            d->reals("proportions", props);
            if (props.size() == kSubgroups) {
                std::copy(props.begin(), props.end(), s.proportions.begin());
            } else {
                d->fail("proportions", "expected four shares (F+, M+, M-, F-)");
            }
            d->real("separation", s.separation);
            d->real("group_shift", s.group_shift);
            d->real("noise", s.noise);
            d->uint("seed", s.seed);
        } else if (source == "csv") {
            config.dataset.synthetic = false;
            d->reject_unknown({"source", "path", "label_column", "sensitive_column"});
            std::string path = config.dataset.csv_path.string();
            d->string("path", path);
            config.dataset.csv_path = path;
            d->string("label_column", config.dataset.label_column);
            d->string("sensitive_column", config.dataset.sensitive_column);
        } else {
            d->fail("source", "expected synthetic or csv");
        }
    }

    if (auto s = root.object("split")) {
        s->reject_unknown({"ratios", "seed"});
        std::vector<double> ratios(config.split_ratios.begin(), config.split_ratios.end());
        s->reals("ratios", ratios);
        if (ratios.size() == 3) {
            std::copy(ratios.begin(), ratios.end(), config.split_ratios.begin());
        } else {
            s->fail("ratios", "expected three ratios (train, validation, test)");
        }
        s->uint("seed", config.split_seed);
    }

    if (auto t = root.object("train")) {
        auto& tc = config.train;
        t->reject_unknown({"hidden_sizes", "learning_rate", "batch_size", "epochs", "dropout_rate", "loss", "eo_lambda",
                           "window"});
        t->sizes("hidden_sizes", tc.hidden_sizes);
        t->real("learning_rate", tc.learning_rate);
        t->size("batch_size", tc.batch_size);
        t->integer("epochs", tc.epochs);
        t->real("dropout_rate", tc.dropout_rate);
        t->enumeration("loss", tc.loss, parse_loss_kind);
        t->real("eo_lambda", tc.eo_lambda);
        if (t->has("window")) {
            const json& w = j.at("train").at("window");
            if (w.is_array() && w.size() == 2 && w[0].is_number_integer() && w[1].is_number_integer()) {
                tc.window_first = w[0].get<int>();
                tc.window_last = w[1].get<int>();
            } else {
                t->fail("window", "expected [first, last] epochs");
            }
        }
    }

    if (auto e = root.object("experiment")) {
        auto& x = config.experiment;
        e->reject_unknown({"n_runs", "mode", "b_values", "selection", "ratio_values", "varied_group",
                           "checkpoint_runs", "n_checkpoints", "t_max", "s_max", "repeats", "passes",
                           "mc_dropout_rate", "proxy_runs", "n_seeds", "setups"});
        e->size("n_runs", x.n_runs);
        e->enumeration("mode", x.mode, parse_decouple_mode);
        e->sizes("b_values", x.b_values);
        e->enumeration("selection", x.selection, parse_selection);
        e->reals("ratio_values", x.ratio_values);
        e->integer("varied_group", x.varied_group);
        e->size("checkpoint_runs", x.checkpoint_runs);
        e->size("n_checkpoints", x.n_checkpoints);
        e->size("t_max", x.t_max);
        e->size("s_max", x.s_max);
        e->size("repeats", x.repeats);
        e->size("passes", x.passes);
        e->real("mc_dropout_rate", x.mc_dropout_rate);
        e->size("proxy_runs", x.proxy_runs);
        e->size("n_seeds", x.n_seeds);
        if (e->has("setups")) {
            const json& s = j.at("experiment").at("setups");
            std::vector<MitigationSetup> setups;
            bool ok = s.is_array() && !s.empty();
            if (ok) {
                for (const auto& name : s) {
                    try {
                        ok = ok && name.is_string();
                        if (ok) {
                            setups.push_back(parse_setup(name.get<std::string>()));
                        }
                    } catch (const std::invalid_argument&) {
                        ok = false;
                    }
                }
            }
            if (ok) {
                x.setups = setups;
            } else {
                e->fail("setups", "expected a nonempty list of baseline, reweighing, eo_loss");
            }
        }
    }
}

RunConfig load_config(const std::optional<std::filesystem::path>& path, std::optional<Preset> preset_override)
{
    json j = json::object();
    if (path) {
        std::ifstream in(*path, std::ios::binary);
        if (!in) {
            throw ConfigError({"config: cannot read '" + path->string() + "'"});
        }
        std::stringstream ss;
        ss << in.rdbuf();
        try {
            j = json::parse(ss.str());
        } catch (const json::parse_error& e) {
            throw ConfigError({std::string("config: invalid JSON: ") + e.what()});
        }
    }
    std::vector<std::string> violations;
    Preset preset = Preset::paper;
    if (j.is_object() && j.contains("preset") && j.at("preset").is_string()) {
        try {
            preset = parse_preset(j.at("preset").get<std::string>());
        } catch (const std::invalid_argument&) {
        }
    }
    if (preset_override) {
        preset = *preset_override;
    }
    RunConfig config = preset_config(preset);
    apply_json(config, j, violations);
    config.preset = preset;
    if (!violations.empty()) {
        throw ConfigError(std::move(violations));
    }
    return config;
}

json to_json(const RunConfig& c)
{
    json dataset;
    if (c.dataset.synthetic) {
        const auto& s = c.dataset.synth;
        dataset = {{"source", "synthetic"},  {"n", s.n},
                   {"dims", s.dims},          {"proportions", s.proportions},
                   {"separation", s.separation}, {"group_shift", s.group_shift},
                   {"noise", s.noise},        {"seed", s.seed}};
    } else {
        dataset = {{"source", "csv"},
                   {"path", c.dataset.csv_path.string()},
                   {"label_column", c.dataset.label_column},
                   {"sensitive_column", c.dataset.sensitive_column}};
    }
    const auto& t = c.train;
    const auto& x = c.experiment;
    json setups = json::array();
    for (auto s : x.setups) {
        setups.push_back(mitigation_setup_name(s));
    }
    return {{"preset", preset_name(c.preset)},
            {"dataset", dataset},
            {"split", {{"ratios", c.split_ratios}, {"seed", c.split_seed}}},
            {"train",
             {{"hidden_sizes", t.hidden_sizes},
              {"learning_rate", t.learning_rate},
              {"batch_size", t.batch_size},
              {"epochs", t.epochs},
              {"dropout_rate", t.dropout_rate},
              {"loss", loss_kind_name(t.loss)},
              {"eo_lambda", t.eo_lambda},
              {"window", {t.window_first, t.window_last}}}},
            {"experiment",
             {{"n_runs", x.n_runs},
              {"mode", decouple_mode_name(x.mode)},
              {"b_values", x.b_values},
              {"selection", x.selection == BatchSelection::suffix ? "suffix" : "random"},
              {"ratio_values", x.ratio_values},
              {"varied_group", x.varied_group},
              {"checkpoint_runs", x.checkpoint_runs},
              {"n_checkpoints", x.n_checkpoints},
              {"t_max", x.t_max},
              {"s_max", x.s_max},
              {"repeats", x.repeats},
              {"passes", x.passes},
              {"mc_dropout_rate", x.mc_dropout_rate},
              {"proxy_runs", x.proxy_runs},
              {"n_seeds", x.n_seeds},
              {"setups", setups}}},
            {"master_seed", c.master_seed},
            {"output_dir", c.output_dir.string()},
            {"jobs", c.jobs}};
}

std::vector<std::string> static_violations(const RunConfig& c, const std::string& command)
{
    std::vector<std::string> v = c.train.violations(0);
    const auto& x = c.experiment;
    const auto& t = c.train;

    if (c.jobs == 0) {
        v.emplace_back("jobs: must be at least 1");
    }
    if (c.output_dir.empty()) {
        v.emplace_back("output_dir: must not be empty");
    }
    if (c.dataset.synthetic) {
        const auto& s = c.dataset.synth;
        if (s.n < 4) {
            v.emplace_back("dataset.n: at least 4 rows are required");
        }
        if (s.dims < 2) {
            v.emplace_back("dataset.dims: at least 2 features are required");
        }
        double total = 0.0;
        bool positive = true;
        for (double p : s.proportions) {
            positive = positive && p > 0.0;
            total += p;
        }
        if (!positive || std::abs(total - 1.0) > 1e-9) {
            v.emplace_back("dataset.proportions: shares must be positive and sum to 1");
        }
        if (!(s.noise > 0.0) || !std::isfinite(s.noise)) {
            v.emplace_back("dataset.noise: must be positive");
        }
        if (!std::isfinite(s.separation) || !std::isfinite(s.group_shift)) {
            v.emplace_back("dataset: separation and group_shift must be finite");
        }
    } else if (c.dataset.csv_path.empty()) {
        v.emplace_back("dataset.path: required for csv datasets");
    }

    double total = 0.0;
    bool nonnegative = true;
    for (double r : c.split_ratios) {
        nonnegative = nonnegative && r >= 0.0;
        total += r;
    }
    if (!nonnegative || std::abs(total - 1.0) > 1e-9) {
        v.emplace_back("split.ratios: must be nonnegative and sum to 1");
    } else if (!(c.split_ratios[0] > 0.0) || !(c.split_ratios[2] > 0.0)) {
        v.emplace_back("split.ratios: train and test shares must be positive");
    } else if (command == "suffix" && !(c.split_ratios[1] > 0.0)) {
        v.emplace_back("split.ratios: donor selection needs a validation share");
    }

    const bool experiment = !one_of(command, {"generate", "metrics"});
    if (experiment && t.epochs < 1) {
        v.emplace_back("train.epochs: experiments need at least one epoch");
    }
    const int window = t.window_last - t.window_first + 1;
    if (command == "decouple" && x.n_runs < 2) {
        v.emplace_back("experiment.n_runs: at least two runs are required");
    }
    if (command == "decouple" && window < 2) {
        v.emplace_back("train.window: correlation needs at least two epochs");
    }
    if (command == "changes" && window < 2) {
        v.emplace_back("train.window: prediction tracking needs T2 > T1");
    }
    if (command == "uncertainty") {
        if (x.passes < 2) {
            v.emplace_back("experiment.passes: at least two passes are required");
        }
        if (!(x.mc_dropout_rate > 0.0 && x.mc_dropout_rate < 1.0)) {
            v.emplace_back("experiment.mc_dropout_rate: must lie in (0, 1)");
        }
    }
    if (one_of(command, {"suffix", "manipulate"})) {
        if (x.checkpoint_runs == 0) {
            v.emplace_back("experiment.checkpoint_runs: must be positive");
        }
        if (x.n_checkpoints == 0) {
            v.emplace_back("experiment.n_checkpoints: must be positive");
        } else if (window > 0 && x.n_checkpoints > x.checkpoint_runs * static_cast<std::size_t>(window)) {
            v.emplace_back("experiment.n_checkpoints: exceeds checkpoint_runs times the window length");
        }
    }
    if (command == "suffix" && x.b_values.empty()) {
        v.emplace_back("experiment.b_values: at least one value is required");
    }
    if (command == "manipulate") {
        if (x.ratio_values.empty()) {
            v.emplace_back("experiment.ratio_values: at least one value is required");
        }
        for (double r : x.ratio_values) {
            if (!(r > 0.0) || !std::isfinite(r)) {
                v.emplace_back("experiment.ratio_values: ratios must be positive");
                break;
            }
        }
        if (x.varied_group < -1 || x.varied_group > 1) {
            v.emplace_back("experiment.varied_group: must be 0, 1 or -1 (auto)");
        }
    }
    if (command == "proxy") {
        if (x.proxy_runs < 5) {
            v.emplace_back("experiment.proxy_runs: at least 5 runs are required");
        }
        if (window < 5) {
            v.emplace_back("train.window: the single-run sample needs at least 5 epochs");
        }
    }
    if (command == "blackswan") {
        if (x.t_max == 0 || x.s_max == 0 || x.repeats == 0) {
            v.emplace_back("experiment: t_max, s_max and repeats must be positive");
        }
        if (static_cast<long long>(x.t_max) > t.epochs) {
            v.emplace_back("experiment.t_max: exceeds train.epochs");
        }
    }
    if (command == "mitigate" && x.n_seeds < 3) {
        v.emplace_back("experiment.n_seeds: at least three seeds are required");
    }
    return v;
}

Splits materialize(const RunConfig& config)
{
    Dataset data = config.dataset.synthetic
                       ? synth_generate(config.dataset.synth)
                       : load_csv(config.dataset.csv_path, config.dataset.label_column,
                                  config.dataset.sensitive_column);
    return split(data, config.split_ratios, config.split_seed);
}

std::vector<std::string> data_violations(const RunConfig& config, const std::string& command, const Splits& splits)
{
    std::vector<std::string> v;
    const std::size_t n_train = splits.train.size();
    if (n_train == 0) {
        v.emplace_back("split.ratios: the training split is empty");
        return v;
    }
    for (auto& s : config.train.violations(n_train)) {
        if (s.rfind("batch_size", 0) == 0) {
            v.push_back("train." + s);
        }
    }
    if (command == "suffix" && config.train.batch_size > 0) {
        const std::size_t batches = (n_train + config.train.batch_size - 1) / config.train.batch_size;
        for (std::size_t b : config.experiment.b_values) {
            if (b > batches) {
                v.push_back("experiment.b_values: " + std::to_string(b) + " exceeds the " + std::to_string(batches) +
                            " batches of an epoch");
                break;
            }
        }
    }
    if (command == "suffix" && splits.validation.size() == 0) {
        v.emplace_back("split.ratios: the validation split is empty");
    }
    if (splits.test.size() == 0 && command != "generate") {
        v.emplace_back("split.ratios: the test split is empty");
    }
    return v;
}

ExperimentContext make_context(const RunConfig& config, Splits splits)
{
    ExperimentContext ctx;
    ctx.splits = std::move(splits);
    ctx.base = config.train;
    ctx.master_seed = config.master_seed;
    ctx.jobs = config.jobs;
    return ctx;
}

}  // namespace fairvar
