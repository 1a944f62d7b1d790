#include "fgd/cli.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "fgd/errors.hpp"
#include "fgd/theory.hpp"

namespace fgd::cli {

namespace {

namespace pt = boost::property_tree;

std::string field(const std::string& section, const std::string& key)
{
    return "[" + section + "] " + key;
}

std::string trim(std::string s)
{
    const auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

template <class T>
T parse_number(const std::string& name, const std::string& raw)
{
    const std::string text = trim(raw);
    T value{};
    const char* first = text.data();
    const char* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (text.empty() || ec != std::errc() || ptr != last)
        throw ConfigError(name + ": cannot parse '" + raw + "'");
    return value;
}

long parse_positive(const std::string& name, const std::string& raw)
{
    const long v = parse_number<long>(name, raw);
    if (v < 1)
        throw ConfigError(name + ": must be positive, got " + std::to_string(v));
    return v;
}

int parse_positive_int(const std::string& name, const std::string& raw)
{
    const long v = parse_positive(name, raw);
    if (v > std::numeric_limits<int>::max())
        throw ConfigError(name + ": too large");
    return static_cast<int>(v);
}

double parse_positive_double(const std::string& name, const std::string& raw)
{
    const double v = parse_number<double>(name, raw);
    if (!(v > 0.0) || !std::isfinite(v))
        throw ConfigError(name + ": must be positive and finite");
    return v;
}

bool parse_bool(const std::string& name, const std::string& raw)
{
    const std::string t = trim(raw);
    if (t == "true" || t == "1" || t == "yes")
        return true;
    if (t == "false" || t == "0" || t == "no")
        return false;
    throw ConfigError(name + ": expected true or false, got '" + raw + "'");
}

template <class T>
std::vector<T> parse_list(const std::string& name, const std::string& raw)
{
    std::string text = raw;
    std::replace(text.begin(), text.end(), ',', ' ');
    std::istringstream in(text);
    std::vector<T> out;
    std::string token;
    while (in >> token)
        out.push_back(parse_number<T>(name, token));
    if (out.empty())
        throw ConfigError(name + ": empty list");
    return out;
}

const std::set<std::string> kRunKeys = {"study", "seed", "out", "threads", "repetitions",
                                        "paper_scale"};
const std::set<std::string> kPlanKeys = {
    "n_samples",   "repetitions", "checkpoints", "n_checkpoints",   "first_checkpoint",
    "schedule_policy", "c1",      "c2",          "alpha",           "afgd_rate_scale",
    "half_width",  "noise_std"};
const std::set<std::string> kVerifyKeys = {"mc_samples",        "instances",
                                           "sign_constant",     "tolerance_se",
                                           "bias_trajectories", "bias_mc_samples",
                                           "bias_tolerance_se"};
const std::set<std::string> kBoundKeys = {"theorem", "d",     "n_samples",     "repetitions",
                                          "ell",     "c1",    "c2",            "alpha",
                                          "n_checkpoints", "half_width", "tolerance_se"};

std::set<std::string> study_keys(Study study)
{
    std::set<std::string> keys = kPlanKeys;
    switch (study) {
    case Study::DimSweep:
        keys.insert("dims");
        break;
    case Study::RepsSweep:
        keys.insert({"ells", "d"});
        break;
    case Study::RankSweep:
        keys.insert({"ranks", "d"});
        break;
    case Study::StepTrace:
        keys.insert("d");
        break;
    }
    return keys;
}

using Section = std::map<std::string, std::string>;

void check_keys(const std::string& section, const Section& values, const std::set<std::string>& allowed)
{
    for (const auto& [key, value] : values) {
        if (!allowed.contains(key))
            throw ConfigError("unknown key " + field(section, key));
    }
}

void apply_plan_section(ExperimentPlan& plan, const std::string& sec, const Section& values)
{
    for (const auto& [key, raw] : values) {
        const std::string name = field(sec, key);
        if (key == "dims" || key == "ells" || key == "ranks") {
            plan.axis_values = parse_list<int>(name, raw);
            for (int v : plan.axis_values) {
                if (v < 1)
                    throw ConfigError(name + ": entries must be positive");
            }
        } else if (key == "d") {
            plan.d = parse_positive_int(name, raw);
            if (plan.study == Study::StepTrace)
                plan.axis_values = {plan.d};
        } else if (key == "n_samples") {
            plan.n_samples = parse_positive(name, raw);
        } else if (key == "repetitions") {
            plan.repetitions = parse_positive_int(name, raw);
        } else if (key == "checkpoints") {
            plan.checkpoints = parse_list<long>(name, raw);
        } else if (key == "n_checkpoints") {
            plan.n_checkpoints = parse_positive_int(name, raw);
        } else if (key == "first_checkpoint") {
            plan.first_checkpoint = parse_positive(name, raw);
        } else if (key == "schedule_policy") {
            plan.schedule_policy = parse_schedule_policy(trim(raw));
        } else if (key == "c1") {
            plan.c1 = parse_positive_double(name, raw);
        } else if (key == "c2") {
            plan.c2 = parse_positive_double(name, raw);
        } else if (key == "alpha") {
            plan.constant_alpha = parse_positive_double(name, raw);
        } else if (key == "afgd_rate_scale") {
            plan.afgd_rate_scale = parse_positive_double(name, raw);
        } else if (key == "half_width") {
            plan.half_width = parse_positive_double(name, raw);
        } else if (key == "noise_std") {
            plan.noise_std = parse_number<double>(name, raw);
            if (!(plan.noise_std >= 0.0))
                throw ConfigError(name + ": must be nonnegative");
        }
    }
}

void apply_verify_section(VerifyOptions& v, const Section& values)
{
    for (const auto& [key, raw] : values) {
        const std::string name = field("verify", key);
        if (key == "mc_samples")
            v.mc_samples = parse_positive(name, raw);
        else if (key == "instances")
            v.instances = parse_positive_int(name, raw);
        else if (key == "sign_constant")
            v.sign_constant = parse_number<double>(name, raw);
        else if (key == "tolerance_se")
            v.tolerance_se = parse_positive_double(name, raw);
        else if (key == "bias_trajectories")
            v.bias_trajectories = parse_positive(name, raw);
        else if (key == "bias_mc_samples")
            v.bias_mc_samples = parse_positive(name, raw);
        else if (key == "bias_tolerance_se")
            v.bias_tolerance_se = parse_positive_double(name, raw);
    }
}

void apply_bound_section(BoundOptions& b, const Section& values)
{
    for (const auto& [key, raw] : values) {
        const std::string name = field("bound", key);
        if (key == "theorem") {
            b.theorem = parse_positive_int(name, raw);
            if (b.theorem != 2 && b.theorem != 4)
                throw ConfigError(name + ": must be 2 or 4");
        } else if (key == "d") {
            b.d = parse_positive_int(name, raw);
        } else if (key == "n_samples") {
            b.n_samples = parse_positive(name, raw);
        } else if (key == "repetitions") {
            b.repetitions = parse_positive_int(name, raw);
        } else if (key == "ell") {
            b.ell = parse_positive_int(name, raw);
        } else if (key == "c1") {
            b.c1 = parse_positive_double(name, raw);
        } else if (key == "c2") {
            b.c2 = parse_positive_double(name, raw);
        } else if (key == "alpha") {
            b.constant_alpha = parse_positive_double(name, raw);
        } else if (key == "n_checkpoints") {
            b.n_checkpoints = parse_positive_int(name, raw);
        } else if (key == "half_width") {
            b.half_width = parse_positive_double(name, raw);
        } else if (key == "tolerance_se") {
            b.tolerance_se = parse_positive_double(name, raw);
        }
    }
}

std::map<std::string, Section> read_sections(const std::string& text)
{
    pt::ptree tree;
    std::istringstream in(text);
    try {
        pt::ini_parser::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    std::map<std::string, Section> sections;
    for (const auto& [name, node] : tree) {
        if (node.empty())
            throw ConfigError("config: key '" + name + "' must be inside a section");
        Section& sec = sections[name];
        for (const auto& [key, leaf] : node)
            sec[key] = leaf.data();
    }
    return sections;
}

Study study_from_sections(const std::map<std::string, Section>& sections,
                          const Overrides& overrides)
{
    if (overrides.study)
        return parse_study(*overrides.study);
    if (auto it = sections.find("run"); it != sections.end()) {
        if (auto s = it->second.find("study"); s != it->second.end())
            return parse_study(trim(s->second));
    }
    return Study::StepTrace;
}

// Picks the entry with the largest standardized deviation.
VerifyRow summarize(const std::string& identity, int instance, const OracleResult& r,
                    double tolerance_se)
{
    Eigen::Index bi = 0, bj = 0;
    double worst = -1.0;
    for (Eigen::Index i = 0; i < r.exact.rows(); ++i) {
        for (Eigen::Index j = 0; j < r.exact.cols(); ++j) {
            const double dev = std::abs(r.empirical(i, j) - r.exact(i, j));
            const double se = r.std_error(i, j);
            const double z = dev == 0.0 ? 0.0 : (se > 0.0 ? dev / se : HUGE_VAL);
            if (z > worst) {
                worst = z;
                bi = i;
                bj = j;
            }
        }
    }
    VerifyRow row;
    row.identity = identity;
    row.instance = instance;
    row.exact = r.exact(bi, bj);
    row.empirical = r.empirical(bi, bj);
    row.deviation = std::abs(row.empirical - row.exact);
    row.tolerance = tolerance_se * r.std_error(bi, bj);
    row.passed = row.deviation <= row.tolerance;
    return row;
}

int uniform_int(Rng& rng, int lo, int hi)
{
    return lo + static_cast<int>(std::floor(rng.uniform() * (hi - lo + 1)));
}

std::string csv_escape(const std::string& s)
{
    if (s.find_first_of(",\"\n") == std::string::npos)
        return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"')
            out += '"';
        out += c;
    }
    return out + "\"";
}

void write_file(const std::filesystem::path& path, const std::string& content)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << content;
    if (!out)
        throw std::runtime_error("failed writing " + path.string());
}

}  // namespace

Config parse_config(const std::string& text, const Overrides& overrides)
{
    const auto sections = read_sections(text);
    const Study study = study_from_sections(sections, overrides);

    Config config;
    bool paper_scale = overrides.paper_scale;
    if (auto it = sections.find("run"); it != sections.end()) {
        check_keys("run", it->second, kRunKeys);
        if (auto p = it->second.find("paper_scale"); p != it->second.end())
            paper_scale = paper_scale || parse_bool(field("run", "paper_scale"), p->second);
    }
    config.paper_scale = paper_scale;
    config.plan = paper_scale ? paper_plan(study) : desk_plan(study);

    if (auto it = sections.find("run"); it != sections.end()) {
        for (const auto& [key, raw] : it->second) {
            const std::string f = field("run", key);
            if (key == "seed")
                config.plan.master_seed = parse_number<std::uint64_t>(f, raw);
            else if (key == "out")
                config.out_dir = trim(raw);
            else if (key == "threads")
                config.plan.threads = parse_number<int>(f, raw);
            else if (key == "repetitions")
                config.plan.repetitions = config.bound.repetitions = parse_positive_int(f, raw);
        }
    }
    for (const auto& [name, values] : sections) {
        if (name == "run") {
            continue;
        } else if (name == "verify") {
            check_keys(name, values, kVerifyKeys);
            apply_verify_section(config.verify, values);
        } else if (name == "bound") {
            check_keys(name, values, kBoundKeys);
            apply_bound_section(config.bound, values);
        } else {
            Study section_study;
            try {
                section_study = parse_study(name);
            } catch (const ConfigError&) {
                throw ConfigError("unknown section [" + name + "]");
            }
            check_keys(name, values, study_keys(section_study));
        }
    }
    // The study's own section wins over [run] for shared keys.
    if (auto it = sections.find(std::string(study_name(study))); it != sections.end())
        apply_plan_section(config.plan, it->first, it->second);

    if (overrides.seed)
        config.plan.master_seed = *overrides.seed;
    if (overrides.out_dir)
        config.out_dir = *overrides.out_dir;
    if (overrides.repetitions) {
        if (*overrides.repetitions < 1)
            throw ConfigError("--reps: must be at least 1");
        config.plan.repetitions = config.bound.repetitions = *overrides.repetitions;
    }
    if (overrides.threads)
        config.plan.threads = *overrides.threads;
    if (config.plan.threads < 0)
        throw ConfigError("threads: must be nonnegative (0 = hardware concurrency)");
    config.plan.validate();
    return config;
}

Config resolve_config(const Overrides& overrides)
{
    std::string text;
    if (overrides.config_path) {
        std::ifstream in(*overrides.config_path, std::ios::binary);
        if (!in)
            throw ConfigError("cannot read config file " + overrides.config_path->string());
        std::ostringstream buf;
        buf << in.rdbuf();
        text = buf.str();
    }
    return parse_config(text, overrides);
}

std::string format_double(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string run_csv(const RunRecord& record)
{
    std::ostringstream out;
    out << "study,axis_value,optimizer,ell,repetition,step,metric_name,value\n";
    const std::string study(study_name(record.plan.study));
    for (const SeriesRecord& s : record.series) {
        const std::string prefix = study + "," + std::to_string(s.axis_value) + ","
                                   + csv_escape(s.role) + ","
                                   + std::to_string(s.optimizer.inner_updates()) + ",";
        for (std::size_t r = 0; r < s.reps.size(); ++r) {
            const RepSeries& rep = s.reps[r];
            for (std::size_t j = 0; j < rep.steps.size(); ++j)
                out << prefix << r << "," << rep.steps[j] << "," << s.metric_name << ","
                    << format_double(rep.values[j]) << "\n";
        }
        for (const MetricPoint& p : s.summary.points)
            out << prefix << "mean," << p.step << "," << s.metric_name << ","
                << format_double(p.mean) << "\n";
        for (const MetricPoint& p : s.summary.points)
            out << prefix << "std," << p.step << "," << s.metric_name << ","
                << format_double(p.std) << "\n";
    }
    return out.str();
}

nlohmann::ordered_json run_metadata(const RunRecord& record, const Config& config)
{
    const ExperimentPlan& p = record.plan;
    nlohmann::ordered_json plan;
    plan["study"] = study_name(p.study);
    plan["axis_values"] = p.axis_values;
    plan["d"] = p.d;
    plan["n_samples"] = p.n_samples;
    plan["repetitions"] = p.repetitions;
    plan["master_seed"] = p.master_seed;
    plan["checkpoints"] = record.checkpoints;
    plan["schedule_policy"] = schedule_policy_name(p.schedule_policy);
    plan["c1_override"] = p.c1 ? nlohmann::json(*p.c1) : nlohmann::json(nullptr);
    plan["c2_override"] = p.c2 ? nlohmann::json(*p.c2) : nlohmann::json(nullptr);
    plan["constant_alpha"] =
        p.constant_alpha ? nlohmann::json(*p.constant_alpha) : nlohmann::json(nullptr);
    plan["afgd_rate_scale"] = p.afgd_rate_scale;
    plan["half_width"] = p.half_width;
    plan["noise_std"] = p.noise_std;
    plan["threads"] = p.threads;
    plan["paper_scale"] = config.paper_scale;

    nlohmann::ordered_json policies;
    policies["theta0"] = "zero vector";
    policies["theta_star"] = p.study == Study::DimSweep
                                 ? "uniform on [-10,10]^d, then L2-normalized"
                                 : "uniform on [-10,10]^d";
    policies["sgd_schedule"] = "same rule as FGD with ell = 1";
    policies["afgd_schedule"] = "FGD(ell) rule with every rate times afgd_rate_scale";
    policies["std_denominator"] = "n-1";
    policies["metric_iterate"] = "final iterate at each checkpoint";
    policies["mspe_sigma"] = "analytic second moment";
    policies["epoch_rate_index"] = "continues across epochs: i = (e-1)*n + k";
    policies["embedding"] = "iid N(0,1) entries, redrawn per repetition";
    policies["random_streams"] =
        "problem and data shared across optimizers per (axis, repetition); perturbations keyed by "
        "inner updates per sample";

    nlohmann::ordered_json meta;
    meta["version"] = record.version;
    meta["study"] = study_name(p.study);
    meta["wall_seconds"] = record.wall_seconds;
    meta["out_dir"] = config.out_dir.string();
    meta["plan"] = plan;
    meta["policies"] = policies;
    meta["csv_columns"] = {"study", "axis_value", "optimizer", "ell", "repetition",
                           "step",  "metric_name", "value"};
    return meta;
}

std::vector<VerifyRow> run_oracle_suite(const VerifyOptions& options, std::uint64_t seed)
{
    std::vector<VerifyRow> rows;
    const long mc = options.mc_samples;
    for (int inst = 0; inst < options.instances; ++inst) {
        {
            Rng setup(derive_seed(seed, 0, 0, inst));
            Rng draws(derive_seed(seed, 0, 1, inst));
            const Vector v = setup.normal_vector(uniform_int(setup, 2, 6));
            rows.push_back(summarize("forward_gradient_unbiased", inst,
                                     oracle_forward_gradient(v, mc, draws), options.tolerance_se));
        }
        {
            Rng setup(derive_seed(seed, 1, 0, inst));
            Rng draws(derive_seed(seed, 1, 1, inst));
            const int d = uniform_int(setup, 2, 4);
            Matrix a(d, d);
            for (Eigen::Index i = 0; i < a.size(); ++i)
                a.data()[i] = setup.normal();
            const Matrix gamma = a * a.transpose() / d + 0.5 * Matrix::Identity(d, d);
            const Vector u = setup.normal_vector(d);
            rows.push_back(summarize("gaussian_fourth_moment", inst,
                                     oracle_isserlis(gamma, u, mc, draws), options.tolerance_se));
        }
        {
            Rng setup(derive_seed(seed, 2, 0, inst));
            Rng draws(derive_seed(seed, 2, 1, inst));
            const Vector a =
                setup.normal_vector(uniform_int(setup, 2, 5)) * std::exp(setup.uniform(-1.0, 1.0));
            rows.push_back(summarize("sign_moment", inst,
                                     oracle_sign_moment(a, mc, draws, options.sign_constant),
                                     options.tolerance_se));
        }
        {
            Rng setup(derive_seed(seed, 3, 0, inst));
            Rng draws(derive_seed(seed, 3, 1, inst));
            const int d = uniform_int(setup, 2, 5);
            const Vector x = setup.normal_vector(d);
            const double alpha = setup.uniform(0.1, 0.75) / x.squaredNorm();
            const int r = uniform_int(setup, 1, 5);
            const Vector start = setup.normal_vector(d);
            const Vector target = setup.normal_vector(d);
            rows.push_back(summarize("noise_correlation", inst,
                                     oracle_noise_correlation(x, alpha, r, mc, draws, start, target),
                                     options.tolerance_se));
        }
    }
    {
        Rng setup(derive_seed(seed, 4, 0, 0));
        Rng draws(derive_seed(seed, 4, 1, 0));
        const int d = 3;
        const int ell = 2;
        const CovariateSpec spec = CovariateSpec::full_cube(d);
        const SecondMomentSummary sigma = second_moment(spec);
        BiasPlan plan{theorem2_schedule(sigma, spec.norm_bound(), ell), ell, 5, spec,
                      options.bias_mc_samples};
        const Vector theta_star = draw_theta_star(d, ThetaStarPolicy::UniformBox, setup);
        const Vector theta0 = Vector::Zero(d);
        rows.push_back(summarize("bias_product", 0,
                                 oracle_bias(plan, theta0, theta_star, options.bias_trajectories,
                                             draws),
                                 options.bias_tolerance_se));
    }
    return rows;
}

BoundResult run_bound_check(const BoundOptions& options, std::uint64_t seed)
{
    if (options.theorem != 2 && options.theorem != 4)
        throw ConfigError("[bound] theorem: must be 2 or 4");
    const CovariateSpec spec = CovariateSpec::full_cube(options.d, options.half_width);
    const SecondMomentSummary sigma = second_moment(spec);
    const double b = spec.norm_bound();
    const int ell = options.ell;

    BoundResult result;
    result.repetitions = options.repetitions;
    if (options.constant_alpha) {
        result.schedule = Schedule::constant(*options.constant_alpha, ell);
    } else {
        ScheduleConstants c = options.theorem == 2 ? theorem2_constants(sigma, b, ell)
                                                   : theorem4_constants(sigma, b, ell);
        if (options.c1)
            c.c1 = *options.c1;
        if (options.c2)
            c.c2 = *options.c2;
        result.schedule = Schedule::theorem_form(c.c1, c.c2, ell);
    }
    if (options.theorem == 2)
        check_theorem2_admissible(result.schedule, sigma, b);
    else
        check_theorem4_admissible(result.schedule, sigma, b);

    Rng problem(derive_seed(seed, 0, 0, 0));
    const Vector theta_star = draw_theta_star(options.d, ThetaStarPolicy::UniformBox, problem);
    const ModelSpec model(spec, theta_star);
    const Vector theta0 = Vector::Zero(options.d);
    const OptimizerKind opt =
        options.theorem == 2 ? OptimizerKind::fgd(ell) : OptimizerKind::afgd(ell);
    const auto metric = [&](const Vector& theta) {
        return options.theorem == 2 ? mspe(theta, theta_star, sigma.sigma) : mse(theta, theta_star);
    };

    std::vector<long> grid{0};
    for (long k : log_grid(1, options.n_samples, options.n_checkpoints))
        grid.push_back(k);

    std::vector<RepSeries> reps(static_cast<std::size_t>(options.repetitions));
    for (int r = 0; r < options.repetitions; ++r) {
        Rng data_rng(derive_seed(seed, 0, 1, r));
        Rng xi_rng(derive_seed(seed, 0, 2, r));
        const auto path = run_trajectory(model, opt, result.schedule, options.n_samples, grid,
                                         theta0, data_rng, xi_rng);
        RepSeries& out = reps[static_cast<std::size_t>(r)];
        out.steps = grid;
        for (const Checkpoint& c : path)
            out.values.push_back(metric(c.theta));
    }
    const MetricSeries summary =
        aggregate(options.theorem == 2 ? MetricKind::Mspe : MetricKind::Mse, reps);

    const double start = metric(theta0);
    const double sqrt_reps = std::sqrt(static_cast<double>(options.repetitions));
    for (const MetricPoint& p : summary.points) {
        const double bound =
            options.theorem == 2
                ? theorem2_bound(p.step, result.schedule, b, sigma, start)
                : theorem4_bound(p.step, result.schedule, sigma, options.d, start, b);
        result.rows.push_back({p.step, p.mean, p.std, bound});
        if (p.mean > bound + options.tolerance_se * p.std / sqrt_reps)
            result.violations.push_back(p.step);
    }
    return result;
}

std::string bound_csv(const BoundResult& result)
{
    std::ostringstream out;
    out << "step,measured_mean,measured_std,bound\n";
    for (const BoundRow& r : result.rows)
        out << r.step << "," << format_double(r.measured_mean) << ","
            << format_double(r.measured_std) << "," << format_double(r.bound) << "\n";
    return out.str();
}

int cmd_run(const Config& config, std::ostream& log)
{
    const RunRecord record = run_study(config.plan);
    std::filesystem::create_directories(config.out_dir);
    const std::string name(study_name(record.plan.study));
    const auto csv_path = config.out_dir / (name + ".csv");
    const auto meta_path = config.out_dir / (name + ".meta");
    write_file(csv_path, run_csv(record));
    write_file(meta_path, run_metadata(record, config).dump(2) + "\n");
    log << "wrote " << csv_path.string() << " and " << meta_path.string() << " ("
        << record.series.size() << " series, " << std::fixed << std::setprecision(1)
        << record.wall_seconds << " s)\n";
    return kExitOk;
}

int cmd_verify(const Config& config, std::ostream& out)
{
    const auto rows = run_oracle_suite(config.verify, config.plan.master_seed);
    out << std::left << std::setw(28) << "identity" << std::setw(6) << "inst" << std::setw(16)
        << "exact" << std::setw(16) << "empirical" << std::setw(13) << "deviation"
        << std::setw(13) << "tolerance" << "status\n";
    std::set<std::string> failing;
    for (const VerifyRow& r : rows) {
        out << std::left << std::setw(28) << r.identity << std::setw(6) << r.instance
            << std::setprecision(8) << std::setw(16) << r.exact << std::setw(16) << r.empirical
            << std::setprecision(4) << std::setw(13) << r.deviation << std::setw(13)
            << r.tolerance << (r.passed ? "ok" : "FAIL") << "\n";
        if (!r.passed)
            failing.insert(r.identity);
    }
    if (failing.empty()) {
        out << "all identities within tolerance (mc_samples = " << config.verify.mc_samples
            << ")\n";
        return kExitOk;
    }
    out << "failing identities:";
    for (const std::string& f : failing)
        out << " " << f;
    out << "\n";
    return kExitCheckFailed;
}

int cmd_bound(const Config& config, std::ostream& out)
{
    const BoundResult result = run_bound_check(config.bound, config.plan.master_seed);
    std::filesystem::create_directories(config.out_dir);
    const auto path = config.out_dir / "bound.csv";
    write_file(path, bound_csv(result));
    out << "wrote " << path.string() << " (c1 = " << format_double(result.schedule.c1)
        << ", c2 = " << format_double(result.schedule.c2) << ", " << result.rows.size()
        << " checkpoints)\n";
    if (result.violations.empty())
        return kExitOk;
    out << "measured error exceeds the bound at steps:";
    for (long k : result.violations)
        out << " " << k;
    out << "\n";
    return kExitCheckFailed;
}

}  // namespace fgd::cli
