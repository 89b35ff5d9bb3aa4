#include "experiment_util.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>

namespace loopspace {

namespace detail {

BridgeSampler make_sampler(const ExperimentConfig& cfg)
{
    try {
        return BridgeSampler(cfg.bridge());
    } catch (const ContractViolation& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

CameronMartinVector require_h0(const ExperimentConfig& cfg, const TimeGrid& g, const std::string& experiment)
{
    const CameronMartinVector h = cfg.h_vector(g);
    if (!h.in_H0) throw ConfigError(experiment + ": h must vanish at s = 1 (use Fourier modes)");
    return h;
}

HFamily family(std::initializer_list<HFamily::Term> terms)
{
    HFamily f;
    f.kind = HFamily::Kind::Fourier;
    f.terms = terms;
    return f;
}

double family_inner(const HFamily& a, const HFamily& b)
{
    int d = 1;
    for (const auto& t : a.terms) d = std::max(d, t.component + 1);
    for (const auto& t : b.terms) d = std::max(d, t.component + 1);
    auto f = [&](double s) { return a.hdot(s, d).dot(b.hdot(s, d)); };
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, 1.0, 15, 1e-14);
}

}  // namespace detail

bool ExperimentReport::passed() const
{
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

const Check* ExperimentReport::find_check(const std::string& name) const
{
    for (const auto& c : checks)
        if (c.name == name) return &c;
    return nullptr;
}

const ResultRow* ExperimentReport::find_row(const std::string& statistic) const
{
    for (const auto& r : rows)
        if (r.statistic == statistic) return &r;
    return nullptr;
}

void ExperimentReport::row(std::string statistic, double value, double ci_lo, double ci_hi, std::size_t n,
                           std::string flags)
{
    rows.push_back({std::move(statistic), value, ci_lo, ci_hi, n, std::move(flags)});
}

void ExperimentReport::row(const std::string& statistic, const MCStat& st, std::string flags)
{
    if (flags.empty()) flags = to_string(st.stability);
    row(statistic, st.mean, st.ci_lo(), st.ci_hi(), st.n, std::move(flags));
}

bool ExperimentReport::check_max(const ExperimentConfig& cfg, const std::string& name, double measured, double hi)
{
    hi = cfg.threshold(name, hi);
    const bool ok = measured <= hi;
    checks.push_back({name, measured, -std::numeric_limits<double>::infinity(), hi, ok});
    return ok;
}

bool ExperimentReport::check_min(const ExperimentConfig& cfg, const std::string& name, double measured, double lo)
{
    lo = cfg.threshold(name, lo);
    const bool ok = measured >= lo;
    checks.push_back({name, measured, lo, std::numeric_limits<double>::infinity(), ok});
    return ok;
}

bool ExperimentReport::check_range(const ExperimentConfig& cfg, const std::string& name, double measured, double lo,
                                   double hi)
{
    lo = cfg.threshold(name + ".lo", lo);
    hi = cfg.threshold(name + ".hi", hi);
    const bool ok = lo <= measured && measured <= hi;
    checks.push_back({name, measured, lo, hi, ok});
    return ok;
}

bool ExperimentReport::check_flag(const std::string& name, bool ok, double measured)
{
    checks.push_back({name, measured, std::nan(""), std::nan(""), ok});
    return ok;
}

const std::vector<ExperimentInfo>& experiment_registry()
{
    static const std::vector<ExperimentInfo> registry{
        {"bridge-marginal", "goodness of fit of the loop marginals at s = 1/4, 1/2, 3/4 and splice sensitivity",
         {"bonferroni_min_p", "eps_halving_z"},
         bridge_marginal_experiment},
        {"ibp", "integration by parts for five cylindrical (F, G, h) triples",
         {"triple1_z", "triple2_z", "triple3_z", "triple4_z", "triple5_z", "closed_form_lhs_z",
          "closed_form_rhs_z"},
         ibp_experiment},
        {"divergence-rate", "L2 distance of the truncated divergence against the remaining energy of h",
         {"closed_form_z", "rate_slope"},
         divergence_rate_experiment},
        {"antidev-rate", "L2 distance of x(s) to x(1) against 1 - s", {"rate_slope"}, antidev_rate_experiment},
        {"fernique-sup", "exponential moment of the squared sup of the anti-development",
         {"exp_moment_stable", "oracle_z"},
         fernique_sup_experiment},
        {"fernique-holder", "Holder norm closed form and its exponential moment below the rate constant",
         {"linear_path_error", "exp_moment_stable"},
         fernique_holder_experiment},
        {"div-tail", "tail slope of the divergence against t^2 and its Gaussian moment",
         {"tail_slope", "exp_moment_stable"},
         div_tail_experiment},
        {"exp-linear", "exponential moment of |divergence| at large lambda", {"exp_moment_stable"},
         exp_linear_experiment},
        {"driver-flow", "flow exactness, group property, endpoint preservation and distance bound",
         {"flat_exactness", "group_slope", "endpoint_max", "distance_excess"},
         driver_flow_experiment},
        {"quasi-invariance", "paired test of E f(flow) against E f K and E K = 1",
         {"closed_form_rel", "paired_z", "mean_k_z", "k_l2_excess_z"},
         quasi_invariance_experiment},
        {"gradient-check", "derivative of the divergence against central finite differences",
         {"relative_error", "flat_inner_error"},
         gradient_check_experiment},
        {"structural", "frame drift, curvature-kernel skew symmetry, Chapman-Kolmogorov and round-trip order",
         {"frame_drift", "q_skew", "chapman_kolmogorov", "roundtrip_order", "roundtrip_error"},
         structural_experiment},
    };
    return registry;
}

const ExperimentInfo* find_experiment(const std::string& name)
{
    for (const auto& e : experiment_registry())
        if (e.name == name) return &e;
    return nullptr;
}

ExperimentReport run_experiment(const std::string& name, const ExperimentConfig& cfg)
{
    const ExperimentInfo* info = find_experiment(name);
    if (!info) throw ConfigError("unknown experiment '" + name + "'");
    cfg.validate();
    for (const auto& [key, value] : cfg.thresholds) {
        const bool known = std::any_of(info->checks.begin(), info->checks.end(), [&](const std::string& c) {
            return key == c || key == c + ".lo" || key == c + ".hi";
        });
        if (!known) throw ConfigError("config: threshold." + key + " is not a check of " + name);
    }
    const auto start = std::chrono::steady_clock::now();
    ExperimentReport report = info->run(cfg);
    report.experiment = name;
    report.manifold = cfg.model().name();
    report.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

namespace {

std::string num(double x)
{
    if (std::isnan(x)) return "";
    std::ostringstream os;
    os << std::setprecision(10) << x;
    return os.str();
}

}  // namespace

void write_report(const ExperimentReport& report, const ExperimentConfig& cfg, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir / "plots");
    {
        std::ofstream csv(dir / "results.csv");
        csv << "experiment,statistic,value,ci_lo,ci_hi,n,flags\n";
        for (const auto& r : report.rows)
            csv << report.experiment << ',' << r.statistic << ',' << num(r.value) << ',' << num(r.ci_lo) << ','
                << num(r.ci_hi) << ',' << r.n << ',' << r.flags << '\n';
        // thresholds sit in the interval columns next to the measured value
        for (const auto& c : report.checks)
            csv << report.experiment << ",check:" << c.name << ',' << num(c.measured) << ',' << num(c.lo) << ','
                << num(c.hi) << ",0," << (c.pass ? "PASS" : "FAIL") << '\n';
    }
    {
        std::ofstream out(dir / "summary.txt");
        out << "experiment: " << report.experiment << '\n'
            << "manifold:   " << report.manifold << '\n'
            << "runtime:    " << std::fixed << std::setprecision(1) << report.runtime_s << " s\n"
            << "status:     " << (report.passed() ? "PASS" : "FAIL") << "\n\n";
        out << std::defaultfloat << std::setprecision(6);
        out << "config\n";
        for (const auto& [k, v] : cfg.entries()) out << "  " << k << " = " << v << '\n';
        for (const auto& [k, v] : cfg.thresholds) out << "  threshold." << k << " = " << v << '\n';
        out << "\nchecks\n";
        for (const auto& c : report.checks) {
            out << "  [" << (c.pass ? "PASS" : "FAIL") << "] " << c.name << ": " << c.measured;
            if (std::isfinite(c.lo) && std::isfinite(c.hi))
                out << " in [" << c.lo << ", " << c.hi << "]";
            else if (std::isfinite(c.hi))
                out << " <= " << c.hi;
            else if (std::isfinite(c.lo))
                out << " >= " << c.lo;
            out << '\n';
        }
        out << "\nresults\n";
        for (const auto& r : report.rows) {
            out << "  " << r.statistic << " = " << r.value;
            if (r.ci_lo != r.ci_hi) out << "  [" << r.ci_lo << ", " << r.ci_hi << "]";
            if (r.n) out << "  n=" << r.n;
            if (!r.flags.empty()) out << "  " << r.flags;
            out << '\n';
        }
        if (!report.notes.empty()) {
            out << "\nnotes\n";
            for (const auto& n : report.notes) out << "  " << n << '\n';
        }
    }
    for (const auto& [name, pts] : report.plots) {
        std::ofstream dat(dir / "plots" / (name + ".dat"));
        dat << std::setprecision(12);
        for (const auto& [x, y] : pts) dat << x << ' ' << y << '\n';
    }
}

int exit_status(const ExperimentReport& report) { return report.passed() ? 0 : 1; }

}  // namespace loopspace
