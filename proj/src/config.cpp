#include "loopspace/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace loopspace {

namespace {

std::string trim(const std::string& s)
{
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& text)
{
    const std::string v = trim(text);
    T out{};
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size() || v.empty())
        throw ConfigError("config: bad value '" + text + "' for " + key);
    return out;
}

template <class T>
std::vector<T> parse_list(const std::string& key, const std::string& text)
{
    std::vector<T> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_number<T>(key, item));
    if (out.empty()) throw ConfigError("config: empty list for " + key);
    return out;
}

template <class T>
std::string join(const std::vector<T>& xs)
{
    std::ostringstream os;
    os.precision(17);
    for (std::size_t i = 0; i < xs.size(); ++i) os << (i ? "," : "") << xs[i];
    return os.str();
}

std::string fmt(double x)
{
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
}

}  // namespace

ManifoldModel ExperimentConfig::model() const
{
    if (manifold == "sphere") return ManifoldModel::unit_sphere2();
    return ManifoldModel::flat_torus(torus_lengths);
}

BridgeConfig ExperimentConfig::bridge() const
{
    BridgeConfig b = BridgeConfig::make(model(), grid_n, eps_splice, seed);
    b.kernel = heatkernel;
    return b;
}

CameronMartinVector ExperimentConfig::h_vector(const TimeGrid& g) const
{
    return CameronMartinVector::from_family(g, model().dim(), h);
}

double ExperimentConfig::threshold(const std::string& name, double fallback) const
{
    const auto it = thresholds.find(name);
    return it == thresholds.end() ? fallback : it->second;
}

void ExperimentConfig::set(const std::string& raw_key, const std::string& raw_value)
{
    const std::string key = trim(raw_key);
    const std::string value = trim(raw_value);
    if (key == "manifold") {
        if (value != "sphere" && value != "torus") throw ConfigError("config: manifold must be sphere or torus");
        manifold = value;
    } else if (key == "torus.lengths") {
        torus_lengths = parse_list<double>(key, value);
    } else if (key == "grid.N") {
        grid_n = parse_number<int>(key, value);
    } else if (key == "bridge.eps_splice") {
        eps_splice = parse_number<double>(key, value);
    } else if (key == "seed") {
        seed = parse_number<std::uint64_t>(key, value);
    } else if (key == "samples") {
        samples = parse_number<std::size_t>(key, value);
    } else if (key == "workers") {
        workers = parse_number<int>(key, value);
    } else if (key == "h.family") {
        if (value == "fourier")
            h.kind = HFamily::Kind::Fourier;
        else if (value == "polynomial")
            h.kind = HFamily::Kind::Polynomial;
        else
            throw ConfigError("config: h.family must be fourier or polynomial");
    } else if (key == "h.modes" || key == "h.components" || key == "h.coeffs") {
        const std::size_t n = key == "h.coeffs" ? parse_list<double>(key, value).size() : parse_list<int>(key, value).size();
        h_list_lengths[key] = n;
        if (h.terms.size() != n) h.terms.resize(n);
        if (key == "h.modes") {
            const auto v = parse_list<int>(key, value);
            for (std::size_t i = 0; i < n; ++i) h.terms[i].mode = v[i];
        } else if (key == "h.components") {
            const auto v = parse_list<int>(key, value);
            for (std::size_t i = 0; i < n; ++i) h.terms[i].component = v[i];
        } else {
            const auto v = parse_list<double>(key, value);
            for (std::size_t i = 0; i < n; ++i) h.terms[i].coeff = v[i];
        }
    } else if (key == "flow.dt") {
        flow.dt = parse_number<double>(key, value);
    } else if (key == "flow.t_final") {
        flow.t_final = parse_number<double>(key, value);
    } else if (key == "flow.picard_iters") {
        flow.picard_iters = parse_number<int>(key, value);
    } else if (key == "holder.m") {
        holder.m = parse_number<int>(key, value);
    } else if (key == "holder.alpha") {
        holder.alpha = parse_number<double>(key, value);
    } else if (key == "heatkernel.series_tol") {
        heatkernel.series_tol = parse_number<double>(key, value);
    } else if (key == "heatkernel.max_terms") {
        heatkernel.max_terms = parse_number<int>(key, value);
    } else if (key == "heatkernel.t_min") {
        heatkernel.t_min = parse_number<double>(key, value);
    } else if (key == "rate.s_values") {
        rate_s = parse_list<double>(key, value);
    } else if (key == "rate.mode") {
        rate_mode = parse_number<int>(key, value);
    } else if (key == "exp_linear.lambda") {
        lambda_linear = parse_number<double>(key, value);
    } else if (key == "fernique.lambda") {
        fernique_lambda = parse_number<double>(key, value);
    } else if (key == "gradient.paths") {
        gradient_paths = parse_number<int>(key, value);
    } else if (key.rfind("threshold.", 0) == 0 && key.size() > 10) {
        thresholds[key.substr(10)] = parse_number<double>(key, value);
    } else {
        throw ConfigError("config: unknown key '" + key + "'");
    }
}

void ExperimentConfig::validate() const
{
    try {
        if (manifold == "torus")
            require(!torus_lengths.empty() && torus_lengths.size() <= 3, "torus.lengths: need 1 to 3 lengths");
        for (double L : torus_lengths) require(L > 0.0, "torus.lengths: lengths must be positive");
        bridge().validate();
        flow.validate();
        require(workers >= 1, "workers must be at least 1");
        require(!h.terms.empty(), "h: at least one term");
        for (const auto& [k, n] : h_list_lengths)
            require(n == h.terms.size(), "h.modes, h.components and h.coeffs must have equal lengths");
        const int d = model().dim();
        for (const auto& t : h.terms) {
            require(t.component >= 0 && t.component < d, "h.components: out of range for the manifold");
            require(h.kind == HFamily::Kind::Polynomial ? t.mode >= 0 : t.mode >= 1, "h.modes: out of range");
        }
        require(holder.m >= 1 && holder.alpha > 0.0, "holder: need m >= 1 and alpha > 0");
        require(heatkernel.series_tol > 0.0 && heatkernel.max_terms > 0 && heatkernel.t_min > 0.0,
                "heatkernel: options must be positive");
        require(rate_s.size() >= 3, "rate.s_values: need at least three points");
        for (double s : rate_s) require(s > 0.0 && s < 1.0, "rate.s_values: must lie in (0, 1)");
        require(rate_mode >= 1, "rate.mode: must be positive");
        require(lambda_linear > 0.0 && fernique_lambda > 0.0, "lambda values must be positive");
        require(gradient_paths >= 1, "gradient.paths: must be positive");
    } catch (const ContractViolation& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

ExperimentConfig ExperimentConfig::parse(const std::string& text)
{
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        cfg.set(line.substr(0, eq), line.substr(eq + 1));
    }
    return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& file)
{
    std::ifstream in(file);
    if (!in) throw ConfigError("config: cannot open " + file.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

std::vector<std::pair<std::string, std::string>> ExperimentConfig::entries() const
{
    std::vector<int> modes, comps;
    std::vector<double> coeffs;
    for (const auto& t : h.terms) {
        modes.push_back(t.mode);
        comps.push_back(t.component);
        coeffs.push_back(t.coeff);
    }
    return {{"manifold", manifold},
            {"torus.lengths", join(torus_lengths)},
            {"grid.N", std::to_string(grid_n)},
            {"bridge.eps_splice", fmt(eps_splice)},
            {"seed", std::to_string(seed)},
            {"samples", std::to_string(samples)},
            {"workers", std::to_string(workers)},
            {"h.family", h.kind == HFamily::Kind::Fourier ? "fourier" : "polynomial"},
            {"h.modes", join(modes)},
            {"h.components", join(comps)},
            {"h.coeffs", join(coeffs)},
            {"flow.dt", fmt(flow.dt)},
            {"flow.t_final", fmt(flow.t_final)},
            {"flow.picard_iters", std::to_string(flow.picard_iters)},
            {"holder.m", std::to_string(holder.m)},
            {"holder.alpha", fmt(holder.alpha)},
            {"heatkernel.series_tol", fmt(heatkernel.series_tol)},
            {"heatkernel.max_terms", std::to_string(heatkernel.max_terms)},
            {"heatkernel.t_min", fmt(heatkernel.t_min)},
            {"rate.s_values", join(rate_s)},
            {"rate.mode", std::to_string(rate_mode)},
            {"exp_linear.lambda", fmt(lambda_linear)},
            {"fernique.lambda", fmt(fernique_lambda)},
            {"gradient.paths", std::to_string(gradient_paths)}};
}

}  // namespace loopspace
