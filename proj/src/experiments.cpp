#include "kloosterlab/experiments.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "kloosterlab/analytic.hpp"
#include "kloosterlab/arith.hpp"
#include "kloosterlab/characters.hpp"
#include "kloosterlab/congruence.hpp"
#include "kloosterlab/expsum.hpp"
#include "kloosterlab/hecke.hpp"
#include "kloosterlab/moments.hpp"
#include "kloosterlab/parallel.hpp"

namespace kloosterlab {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Config parsing

namespace {

std::string config_message(const std::string& origin, int line, const std::string& field, const std::string& msg) {
    std::string s = origin.empty() ? "<config>" : origin;
    if (line > 0) s += ":" + std::to_string(line);
    s += ": ";
    if (!field.empty()) s += "field '" + field + "': ";
    return s + msg;
}

int line_at(const std::string& text, std::size_t byte) {
    byte = std::min(byte, text.size());
    return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

// First line mentioning "key", preferring one after "section" if given.
int line_of(const std::string& text, const std::string& key, const std::string& section = "") {
    const std::string needle = "\"" + key + "\"";
    std::size_t from = 0;
    if (!section.empty()) {
        auto s = text.find("\"" + section + "\"");
        if (s != std::string::npos) from = s;
    }
    auto pos = text.find(needle, from);
    if (pos == std::string::npos) pos = text.find(needle);
    return pos == std::string::npos ? 0 : line_at(text, pos);
}

} // namespace

ConfigError::ConfigError(const std::string& origin, int line, const std::string& field, const std::string& message)
    : std::runtime_error(config_message(origin, line, field, message)), line_(line), field_(field) {}

const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names{"kloosterman-audit", "sigma-audit", "theorem5-sweep",
                                                "census-sweep",      "jutila",      "voronoi",
                                                "diagonal",          "moment",      "shifted-convolution"};
    return names;
}

ExperimentConfig parse_config(const std::string& text, const std::string& origin, bool quick) {
    json j;
    try {
        j = json::parse(text, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError(origin, line_at(text, e.byte == 0 ? 0 : e.byte - 1), "", std::string("malformed JSON: ") + e.what());
    }
    auto fail = [&](const std::string& field, const std::string& msg) -> ConfigError {
        return ConfigError(origin, line_of(text, field), field, msg);
    };
    if (!j.is_object()) throw ConfigError(origin, 1, "", "top level must be an object");
    static const std::set<std::string> known{"experiment", "seed", "eps_power", "output", "description", "params", "quick"};
    for (auto& [k, v] : j.items())
        if (!known.count(k)) throw fail(k, "unknown key");

    ExperimentConfig cfg;
    cfg.origin = origin;
    cfg.text = text;
    cfg.quick = quick;
    if (!j.contains("experiment")) throw ConfigError(origin, 0, "experiment", "missing");
    if (!j["experiment"].is_string()) throw fail("experiment", "expected a string");
    cfg.experiment = j["experiment"].get<std::string>();
    const auto& names = experiment_names();
    if (std::find(names.begin(), names.end(), cfg.experiment) == names.end())
        throw fail("experiment", "unknown experiment '" + cfg.experiment + "'");
    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned()) throw fail("seed", "expected a non-negative integer");
        cfg.seed = j["seed"].get<u64>();
    }
    if (j.contains("eps_power")) {
        if (!j["eps_power"].is_number() || j["eps_power"].get<double>() < 0)
            throw fail("eps_power", "expected a non-negative number");
        cfg.eps_power = j["eps_power"].get<double>();
    }
    if (j.contains("output")) {
        if (!j["output"].is_string()) throw fail("output", "expected a string");
        cfg.output = j["output"].get<std::string>();
    }
    if (j.contains("description") && !j["description"].is_string()) throw fail("description", "expected a string");
    cfg.params = json::object();
    if (j.contains("params")) {
        if (!j["params"].is_object()) throw fail("params", "expected an object");
        cfg.params = j["params"];
    }
    if (j.contains("quick")) {
        if (!j["quick"].is_object()) throw fail("quick", "expected an object");
        if (quick) cfg.params.merge_patch(j["quick"]);
    }
    return cfg;
}

ExperimentConfig load_config(const std::string& path, bool quick) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(path, 0, "", "cannot open file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path, quick);
}

// ---------------------------------------------------------------------------
// Tables and their formats

void ReportTable::add(std::vector<Cell> row) {
    if (row.size() != columns.size()) throw std::logic_error("ReportTable: row width does not match the columns");
    rows.push_back(std::move(row));
}

std::string format_cell(const Cell& c) {
    if (auto* i = std::get_if<i64>(&c)) return std::to_string(*i);
    if (auto* d = std::get_if<double>(&c)) {
        if (std::isnan(*d)) return "nan";
        if (std::isinf(*d)) return *d > 0 ? "inf" : "-inf";
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.12g", *d);
        return buf;
    }
    return std::get<std::string>(c);
}

namespace {

void check_token(const std::string& s) {
    if (s.find_first_of(",\"\n\r") != std::string::npos)
        throw std::invalid_argument("report cell contains a separator: " + s);
}

std::string header_line(const std::string& experiment) {
    return "# kloosterlab-report v" + std::to_string(kReportSchemaVersion) + " " + experiment;
}

// integer, then floating point, else a string
Cell parse_token(const std::string& s) {
    if (!s.empty()) {
        std::size_t i = s[0] == '-' ? 1 : 0;
        if (i < s.size() && std::all_of(s.begin() + static_cast<std::ptrdiff_t>(i), s.end(), [](char c) {
                return c >= '0' && c <= '9';
            })) {
            try {
                return static_cast<i64>(std::stoll(s));
            } catch (const std::out_of_range&) {
            }
        }
        char* end = nullptr;
        const double d = std::strtod(s.c_str(), &end);
        if (end == s.c_str() + s.size()) return d;
    }
    return s;
}

std::vector<std::string> split_commas(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

} // namespace

void write_csv(const ReportTable& t, std::ostream& out) {
    out << header_line(t.experiment) << '\n';
    for (std::size_t i = 0; i < t.columns.size(); ++i) {
        check_token(t.columns[i]);
        out << (i ? "," : "") << t.columns[i];
    }
    out << '\n';
    for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            const std::string s = format_cell(row[i]);
            check_token(s);
            out << (i ? "," : "") << s;
        }
        out << '\n';
    }
}

void write_jsonl(const ReportTable& t, std::ostream& out) {
    out << "{\"schema\":\"kloosterlab-report\",\"version\":" << kReportSchemaVersion
        << ",\"experiment\":" << json(t.experiment).dump() << ",\"columns\":" << json(t.columns).dump() << "}\n";
    for (const auto& row : t.rows) {
        out << '{';
        for (std::size_t i = 0; i < row.size(); ++i) {
            const std::string s = format_cell(row[i]);
            const bool bare = !std::holds_alternative<std::string>(row[i]) && s != "nan" && s != "inf" && s != "-inf";
            out << (i ? "," : "") << json(t.columns[i]).dump() << ':' << (bare ? s : json(s).dump());
        }
        out << "}\n";
    }
}

ReportTable read_csv(std::istream& in) {
    ReportTable t;
    std::string line;
    const std::string prefix = "# kloosterlab-report v";
    if (!std::getline(in, line) || line.rfind(prefix, 0) != 0) throw std::runtime_error("read_csv: missing schema header");
    std::istringstream hs(line.substr(prefix.size()));
    int version = 0;
    hs >> version >> t.experiment;
    if (version != kReportSchemaVersion) throw std::runtime_error("read_csv: unsupported schema version");
    if (!std::getline(in, line)) throw std::runtime_error("read_csv: missing column row");
    t.columns = split_commas(line);
    int lineno = 2;
    while (std::getline(in, line)) {
        ++lineno;
        auto toks = split_commas(line);
        if (toks.size() != t.columns.size())
            throw std::runtime_error("read_csv: line " + std::to_string(lineno) + " has the wrong width");
        std::vector<Cell> row;
        for (auto& s : toks) row.push_back(parse_token(s));
        t.rows.push_back(std::move(row));
    }
    return t;
}

ReportTable read_jsonl(std::istream& in) {
    ReportTable t;
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("read_jsonl: empty input");
    try {
        auto h = json::parse(line);
        if (h.value("schema", "") != "kloosterlab-report" || h.value("version", 0) != kReportSchemaVersion)
            throw std::runtime_error("read_jsonl: unsupported schema header");
        t.experiment = h.at("experiment").get<std::string>();
        t.columns = h.at("columns").get<std::vector<std::string>>();
        int lineno = 1;
        while (std::getline(in, line)) {
            ++lineno;
            auto r = json::parse(line);
            if (!r.is_object() || r.size() != t.columns.size())
                throw std::runtime_error("read_jsonl: line " + std::to_string(lineno) + " has the wrong width");
            std::vector<Cell> row;
            for (auto& c : t.columns) {
                const auto& v = r.at(c);
                if (v.is_number_integer()) row.emplace_back(v.get<i64>());
                else if (v.is_number()) row.emplace_back(v.get<double>());
                else row.push_back(parse_token(v.get<std::string>()));
            }
            t.rows.push_back(std::move(row));
        }
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("read_jsonl: ") + e.what());
    }
    return t;
}

// ---------------------------------------------------------------------------
// Parameter access

namespace {

class Params {
public:
    explicit Params(const ExperimentConfig& cfg) : cfg_(cfg) {}

    [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
        throw ConfigError(cfg_.origin, line_of(cfg_.text, key, "params"), "params." + key, msg);
    }

    bool has(const std::string& key) const { return cfg_.params.contains(key); }

    u64 uint(const std::string& key, u64 def, u64 lo = 0, u64 hi = UINT64_MAX) {
        const auto* v = fetch(key);
        u64 x = def;
        if (v) {
            if (!v->is_number_unsigned()) fail(key, "expected a non-negative integer");
            x = v->get<u64>();
        }
        if (x < lo || x > hi) fail(key, "out of range [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
        return x;
    }

    double real(const std::string& key, double def) {
        const auto* v = fetch(key);
        if (!v) return def;
        if (!v->is_number()) fail(key, "expected a number");
        return v->get<double>();
    }

    bool flag(const std::string& key, bool def) {
        const auto* v = fetch(key);
        if (!v) return def;
        if (!v->is_boolean()) fail(key, "expected true or false");
        return v->get<bool>();
    }

    std::vector<u64> uints(const std::string& key, std::vector<u64> def) {
        const auto* v = fetch(key);
        if (!v) return def;
        if (!v->is_array()) fail(key, "expected an array of non-negative integers");
        std::vector<u64> out;
        for (const auto& x : *v) {
            if (!x.is_number_unsigned()) fail(key, "expected an array of non-negative integers");
            out.push_back(x.get<u64>());
        }
        return out;
    }

    std::vector<double> reals(const std::string& key, std::vector<double> def) {
        const auto* v = fetch(key);
        if (!v) return def;
        if (!v->is_array()) fail(key, "expected an array of numbers");
        std::vector<double> out;
        for (const auto& x : *v) {
            if (!x.is_number()) fail(key, "expected an array of numbers");
            out.push_back(x.get<double>());
        }
        return out;
    }

    std::vector<std::pair<int, int>> weight_pairs(const std::string& key, std::vector<std::pair<int, int>> def) {
        const auto* v = fetch(key);
        if (v) {
            def.clear();
            if (!v->is_array()) fail(key, "expected an array of [k1, k2] pairs");
            for (const auto& x : *v) {
                if (!x.is_array() || x.size() != 2 || !x[0].is_number_unsigned() || !x[1].is_number_unsigned())
                    fail(key, "expected an array of [k1, k2] pairs");
                def.emplace_back(x[0].get<int>(), x[1].get<int>());
            }
        }
        for (auto [a, b] : def) {
            check_weight(key, a);
            check_weight(key, b);
            if ((a - b) % 4 != 0) fail(key, "weights must agree mod 4");
        }
        return def;
    }

    void check_weight(const std::string& key, int k) const {
        const auto& w = supported_weights();
        if (std::find(w.begin(), w.end(), k) == w.end()) fail(key, "unsupported weight " + std::to_string(k));
    }

    void check_primes(const std::string& key, const std::vector<u64>& ps, u64 lo) const {
        if (ps.empty()) fail(key, "must not be empty");
        for (u64 p : ps)
            if (p < lo || !is_prime(p)) fail(key, std::to_string(p) + " is not a prime >= " + std::to_string(lo));
    }

    // unknown keys are errors
    void finish() const {
        for (auto& [k, v] : cfg_.params.items())
            if (!seen_.count(k)) fail(k, "unknown parameter for " + cfg_.experiment);
    }

private:
    const json* fetch(const std::string& key) {
        seen_.insert(key);
        auto it = cfg_.params.find(key);
        return it == cfg_.params.end() ? nullptr : &*it;
    }

    const ExperimentConfig& cfg_;
    std::set<std::string> seen_;
};

using Row = std::vector<Cell>;

i64 as_i64(u64 x) { return static_cast<i64>(x); }
i64 flag01(bool b) { return b ? 1 : 0; }

u64 draw(std::mt19937_64& rng, u64 n) { return n == 0 ? 0 : rng() % n; }

u64 least_nonresidue(u64 p) {
    u64 v = 2;
    while (kronecker_symbol(static_cast<i64>(v), static_cast<i64>(p)) != -1) ++v;
    return v;
}

double median_of(std::vector<double> v) {
    if (v.empty()) return NAN;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// round to the printed precision so summaries match the CSV
double printed(double x) { return std::isfinite(x) ? std::strtod(format_cell(x).c_str(), nullptr) : x; }

std::string describe(const std::string& what, const Row& row, const std::vector<std::string>& cols) {
    std::string s = what + " (";
    for (std::size_t i = 0; i < row.size() && i < 8; ++i) s += (i ? " " : "") + cols[i] + "=" + format_cell(row[i]);
    return s + ")";
}

// ---------------------------------------------------------------------------
// kloosterman-audit: explicit evaluation, Gauss signs, Weil bound

RunResult run_kloosterman_audit(const ExperimentConfig& cfg, Params& P) {
    auto primes = P.uints("primes", {5, 7, 11, 13});
    auto exps = P.uints("exponents", {2, 3, 4});
    const u64 draws = P.uint("draws", 500);
    const double tol = P.real("tolerance", 1e-8);
    auto gprimes = P.uints("gauss_primes", {3, 5, 7, 11, 13});
    auto gexps = P.uints("gauss_exponents", {1, 2, 3, 4});
    const double gtol = P.real("gauss_tolerance", 1e-9);
    const u64 weil_draws = P.uint("weil_draws", 10000);
    const u64 weil_max_c = P.uint("weil_max_c", 5000, 1, 1'000'000);
    const u64 weil_max_mn = P.uint("weil_max_mn", 10000, 1);
    P.finish();
    P.check_primes("primes", primes, 5);
    if (!gprimes.empty()) P.check_primes("gauss_primes", gprimes, 3);
    for (u64 s : exps)
        if (s < 2 || s > 12) P.fail("exponents", "exponents must lie in [2, 12]");
    for (u64 s : gexps)
        if (s < 1 || s > 12) P.fail("gauss_exponents", "exponents must lie in [1, 12]");
    for (u64 p : primes)
        for (u64 s : exps)
            if (std::pow(double(p), double(s)) > 1e7) P.fail("exponents", "modulus above 10^7");

    struct Task {
        int kind;  // 0 explicit, 1 gauss, 2 weil
        u64 p;
        int s;
        u64 c;
        i64 m, n;
    };
    std::vector<Task> tasks;
    std::mt19937_64 rng(cfg.seed);
    for (u64 p : primes)
        for (u64 s : exps) {
            const u64 q = ipow(p, static_cast<int>(s));
            for (u64 i = 0; i < draws; ++i) {
                i64 m;
                do m = 1 + static_cast<i64>(draw(rng, q - 1));
                while (m % static_cast<i64>(p) == 0);
                tasks.push_back({0, p, static_cast<int>(s), q, m, static_cast<i64>(draw(rng, q))});
            }
        }
    for (u64 p : gprimes)
        for (u64 s : gexps)
            for (i64 A = 1; A < static_cast<i64>(p); ++A)
                tasks.push_back({1, p, static_cast<int>(s), ipow(p, static_cast<int>(s)), A, 0});
    for (u64 i = 0; i < weil_draws; ++i) {
        const u64 c = 1 + draw(rng, weil_max_c);
        const i64 m = static_cast<i64>(draw(rng, weil_max_mn)), n = static_cast<i64>(draw(rng, weil_max_mn));
        tasks.push_back({2, 0, 0, c, m, n});
    }

    RunResult out;
    out.table.experiment = cfg.experiment;
    out.table.columns = {"check", "c", "p", "s", "m", "n", "value", "reference", "residual", "tolerance", "pass"};
    auto rows = parallel_map<Row>(tasks.size(), [&](std::size_t i) {
        const Task& t = tasks[i];
        double value = 0, ref = 0, residual = 0, tolerance = 0;
        std::string check;
        if (t.kind == 0) {
            check = "explicit";
            PrimePowerModulus q(t.p, t.s);
            ref = kloosterman(t.m, t.n, t.c);
            value = kloosterman_explicit(t.m, t.n, q, SqrtBranch(t.p));
            residual = std::abs(value - ref);
            tolerance = tol * std::pow(double(t.p), 0.5 * t.s);
        } else if (t.kind == 1) {
            check = "gauss";
            PrimePowerModulus q(t.p, t.s);
            const cplx direct = quadratic_gauss_sum(t.m, t.c);
            const cplx expected = std::sqrt(double(t.c)) * gauss_sign(t.m, q);
            value = direct.real() + direct.imag();
            ref = expected.real() + expected.imag();
            residual = std::abs(direct - expected);
            tolerance = gtol;
        } else {
            check = "weil";
            value = std::abs(KloostermanEvaluator(t.c)(t.m, t.n));
            const u64 g = gcd(gcd(static_cast<u64>(t.m), static_cast<u64>(t.n)), t.c);
            ref = double(divisor_count(t.c)) * std::sqrt(double(g)) * std::sqrt(double(t.c));
            residual = std::max(0.0, value - ref);
            tolerance = 1e-9 * ref;
        }
        return Row{check,     as_i64(t.c), as_i64(t.p), static_cast<i64>(t.s), t.m, t.n, value, ref, residual,
                   tolerance, flag01(residual < tolerance || (residual == 0 && tolerance == 0))};
    });
    for (auto& row : rows) {
        if (std::get<i64>(row.back()) == 0) out.failures.push_back(describe("identity failed", row, out.table.columns));
        if (std::get<std::string>(row[0]) == "weil") out.ratios.emplace_back("weil", std::get<double>(row[6]) / std::get<double>(row[7]));
        out.table.add(std::move(row));
    }
    return out;
}

// ---------------------------------------------------------------------------
// sigma-audit: decomposition identity and reduction formula

RunResult run_sigma_audit(const ExperimentConfig& cfg, Params& P) {
    auto primes = P.uints("primes", {5, 7, 11});
    auto exps = P.uints("exponents", {2, 3});
    const u64 draws = P.uint("draws", 200);
    P.finish();
    P.check_primes("primes", primes, 5);
    std::vector<PrimePowerModulus> moduli;
    for (u64 p : primes)
        for (u64 s : exps) {
            if (s < 2 || std::pow(double(p), double(s)) > 1e5) P.fail("exponents", "need s >= 2 and p^s <= 10^5");
            moduli.emplace_back(p, static_cast<int>(s));
        }
    if (moduli.empty()) P.fail("exponents", "must not be empty");

    struct Task {
        bool decomposition;
        PrimePowerModulus q;
        bool upper;
        i64 n1, n2, a, k, A, B, u;
    };
    std::vector<Task> tasks;
    std::mt19937_64 rng(cfg.seed);
    for (u64 i = 0; i < draws; ++i) {
        const auto& q = moduli[i % moduli.size()];
        const i64 p = static_cast<i64>(q.p);
        Task t{true, q, i % 2 == 1, static_cast<i64>(draw(rng, q.q)), static_cast<i64>(draw(rng, q.q)),
               static_cast<i64>(draw(rng, q.q)), static_cast<i64>(draw(rng, q.q)), 0, 0, 1};
        if (i % 5 == 0) t.a = p * static_cast<i64>(draw(rng, q.q / q.p));
        tasks.push_back(t);
    }
    for (u64 i = 0; i < draws; ++i) {
        const auto& q = moduli[i % moduli.size()];
        const i64 p = static_cast<i64>(q.p);
        const int nu = 1 + static_cast<int>(draw(rng, static_cast<u64>(q.s)));
        const i64 pn = static_cast<i64>(ipow(q.p, nu));
        const u64 span = q.q / static_cast<u64>(pn);  // A = p^nu v with v a unit mod p^{s-nu}
        auto unit = [&] {
            i64 v;
            do v = 1 + static_cast<i64>(draw(rng, std::max<u64>(span, 2) - 1));
            while (v % p == 0);
            return v;
        };
        Task t{false, q, i % 2 == 1, 0, 0, 0, 0, 0, 0, 1};
        // nu = s: A = B = 0 mod p^s
        t.A = nu >= q.s ? static_cast<i64>(q.q) : pn * unit();
        t.B = nu >= q.s ? static_cast<i64>(q.q) : pn * unit();
        t.a = static_cast<i64>(draw(rng, q.q));
        t.k = i % 2 ? pn * static_cast<i64>(draw(rng, span)) : static_cast<i64>(draw(rng, q.q));
        t.u = i % 3 == 2 ? static_cast<i64>(least_nonresidue(q.p)) : 1;
        tasks.push_back(t);
    }

    RunResult out;
    out.table.experiment = cfg.experiment;
    out.table.columns = {"check", "clause", "p", "s", "n1", "n2", "a", "k", "A", "B", "u", "lhs", "rhs", "ratio", "pass"};
    auto rows = parallel_map<Row>(tasks.size(), [&](std::size_t i) {
        const Task& t = tasks[i];
        const SqrtBranch br = t.upper ? SqrtBranch::upper(t.q.p) : SqrtBranch(t.q.p);
        BoundReport r = t.decomposition ? decomposition_audit(t.n1, t.n2, t.a, t.k, t.q, br)
                                        : reduction_audit(t.A, t.B, t.a, t.k, t.q, t.u, br);
        return Row{std::string(t.decomposition ? "decomposition" : "reduction"), r.family, as_i64(t.q.p),
                   static_cast<i64>(t.q.s), t.n1, t.n2, t.a, t.k, t.A, t.B, t.u, r.lhs, r.rhs, r.ratio,
                   flag01(r.lhs < r.rhs)};
    });
    for (auto& row : rows) {
        if (std::get<i64>(row.back()) == 0) out.failures.push_back(describe("identity failed", row, out.table.columns));
        out.table.add(std::move(row));
    }
    return out;
}

// ---------------------------------------------------------------------------
// theorem5-sweep: short sums and the differencing/completion audit

// Units n1, n2 mod r; with `square` set, n2 = n1 t^2. Products
// S(m, n1, p^e) S(m, n2, p^e) vanish for every m when n1 n2 is not a square
// mod p and e >= 2, so half the draws are kept away from that case.
std::pair<i64, i64> draw_pair(std::mt19937_64& rng, u64 r, bool square) {
    auto unit = [&] {
        u64 v;
        do v = draw(rng, r);
        while (gcd(v, r) != 1);
        return v;
    };
    const u64 n1 = unit();
    u64 n2 = unit();
    if (square) n2 = mulmod(n1, mulmod(n2, n2, r), r);
    return {static_cast<i64>(n1), static_cast<i64>(n2)};
}

RunResult run_theorem5_sweep(const ExperimentConfig& cfg, Params& P) {
    const u64 draws = P.uint("draws", 200);
    const u64 max_r = P.uint("max_r", 100000, 36, 10'000'000);
    auto primes = P.uints("primes", {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31});
    const u64 fmin = P.uint("factors_min", 2, 1, 6), fmax = P.uint("factors_max", 3, 1, 6);
    const u64 emax = P.uint("max_exponent", 4, 1, 20);
    const u64 a_max = P.uint("A_max", 100000, 1);
    const u64 weyl_draws = P.uint("weyl_draws", 100);
    auto r1s = P.uints("weyl_r1", {25, 49, 121, 125, 169});
    auto r2s = P.uints("weyl_r2", {3, 7, 11, 13});
    const u64 hmax = P.uint("weyl_H_max", 3, 1, 100);
    P.finish();
    P.check_primes("primes", primes, 2);
    if (fmin > fmax || fmax > primes.size()) P.fail("factors_max", "need factors_min <= factors_max <= #primes");
    if (weyl_draws > 0) {
        bool any = false;
        for (u64 a : r1s)
            for (u64 b : r2s) any = any || (a > 1 && b > 0 && gcd(a, b) == 1);
        if (!any) P.fail("weyl_r2", "no coprime (r1, r2) pair");
    }

    struct Task {
        bool weyl;
        u64 r, s, r1, r2;
        i64 n1, n2, A, H;
        double M;
    };
    std::vector<Task> tasks;
    std::mt19937_64 rng(cfg.seed);
    for (u64 i = 0; i < draws; ++i) {
        std::vector<std::pair<u64, u64>> parts;  // (p, p^e)
        u64 r = 1;
        for (int attempt = 0;; ++attempt) {
            if (attempt > 10000) P.fail("max_r", "cannot draw r within max_r");
            parts.clear();
            r = 1;
            const u64 count = fmin + draw(rng, fmax - fmin + 1);
            std::vector<u64> pool = primes;
            for (u64 j = 0; j < count; ++j) {
                const u64 idx = draw(rng, pool.size());
                const u64 p = pool[idx];
                pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(idx));
                const u64 pe = ipow(p, 1 + static_cast<int>(draw(rng, emax)));
                parts.emplace_back(p, pe);
                r = r > max_r ? r : r * pe;
            }
            if (r <= max_r) break;
        }
        std::sort(parts.begin(), parts.end());
        u64 s = 1;
        for (auto [p, pe] : parts)
            if (p <= 3 || draw(rng, 2) == 1) s *= pe;
        auto [n1, n2] = draw_pair(rng, r, i % 2 == 1);
        tasks.push_back({false, r, s, 0, 0, n1, n2, static_cast<i64>(draw(rng, a_max)), 0, std::sqrt(double(r))});
    }
    std::vector<std::pair<u64, u64>> pairs;
    for (u64 a : r1s)
        for (u64 b : r2s)
            if (a > 1 && b > 0 && gcd(a, b) == 1) pairs.emplace_back(a, b);
    for (u64 i = 0; i < weyl_draws; ++i) {
        auto [r1, r2] = pairs[draw(rng, pairs.size())];
        const u64 r = r1 * r2;
        auto [n1, n2] = draw_pair(rng, r, i % 2 == 1);
        Task t{true, r, 0, r1, r2, n1, n2, static_cast<i64>(draw(rng, 1000)), 1 + static_cast<i64>(draw(rng, hmax)), 0};
        t.M = std::max(1.0, std::round(std::sqrt(double(r))));
        tasks.push_back(t);
    }

    RunResult out;
    out.table.experiment = cfg.experiment;
    out.table.columns = {"family", "r", "r1", "r2", "s", "n1", "n2", "A", "M", "H", "lhs", "rhs", "ratio"};
    auto rows = parallel_map<std::vector<Row>>(tasks.size(), [&](std::size_t i) {
        const Task& t = tasks[i];
        std::vector<Row> rs;
        if (!t.weyl) {
            ShortSumSpec sp{t.A, t.M, t.r, t.r, t.n1, t.n2, t.s};
            auto b = theorem5_bound(sp, cfg.eps_power, KloostermanEvaluator(t.r));
            rs.push_back(Row{std::string("theorem5"), as_i64(t.r), i64(0),
                             i64(0), as_i64(t.s), t.n1, t.n2, t.A, t.M, i64(0), b.lhs, b.rhs, b.ratio});
        } else {
            auto [c1, c2] = kloosterman_pair_tables(t.n1, t.n2, t.r1, t.r2);
            auto w = weyl_completion_audit({c1}, {c2}, t.H, static_cast<i64>(t.M), t.A);
            for (auto [name, b] : {std::pair<const char*, const BoundReport*>{"weyl-differencing", &w.differencing},
                                   {"weyl-completion", &w.completion},
                                   {"weyl-combined", &w.combined}})
                rs.push_back(Row{std::string(name), as_i64(t.r), as_i64(t.r1), as_i64(t.r2), i64(0), t.n1, t.n2, t.A,
                                 t.M, t.H, b->lhs, b->rhs, b->ratio});
        }
        return rs;
    });
    for (auto& rs : rows)
        for (auto& row : rs) {
            out.ratios.emplace_back(std::get<std::string>(row[0]), std::get<double>(row[12]));
            out.table.add(std::move(row));
        }
    return out;
}

// ---------------------------------------------------------------------------
// census-sweep: Hensel lifting and singular counts

RunResult run_census_sweep(const ExperimentConfig& cfg, Params& P) {
    auto primes = P.uints("primes", {5, 7, 11});
    const u64 smax = P.uint("max_exponent", 5, 2, 12);
    const u64 qmax = P.uint("max_modulus", 200000, 25, 10'000'000);
    const u64 inv_draws = P.uint("invariance_draws", 100);
    const u64 lift_draws = P.uint("lift_draws", 60);
    const u64 sing_draws = P.uint("singular_draws", 6);
    const u64 sing_qmax = P.uint("singular_max_modulus", 200000, 25, 10'000'000);
    P.finish();
    P.check_primes("primes", primes, 5);
    std::vector<PrimePowerModulus> moduli, sing_moduli;
    for (u64 p : primes)
        for (u64 s = 2; s <= smax; ++s) {
            if (std::pow(double(p), double(s)) > double(std::max(qmax, sing_qmax))) continue;
            const u64 q = ipow(p, static_cast<int>(s));
            if (q <= qmax) moduli.emplace_back(p, static_cast<int>(s));
            if (q <= sing_qmax) sing_moduli.emplace_back(p, static_cast<int>(s));
        }
    if (moduli.empty()) P.fail("max_modulus", "no prime power within range");

    struct Task {
        int kind;  // 0 invariance, 1 aligned lift, 2 root lift, 3 singular counts
        PhaseParams pp;
        int alpha = 1;
    };
    std::vector<Task> tasks;
    std::mt19937_64 rng(cfg.seed);
    auto rnd = [&](u64 n) { return static_cast<i64>(draw(rng, n)); };
    for (u64 i = 0; i < inv_draws; ++i) {
        const auto& q = moduli[i % moduli.size()];
        tasks.push_back({0, PhaseParams{rnd(q.q), rnd(q.q), 1 + rnd(q.p - 1), rnd(q.q), 1, q}});
    }
    for (u64 i = 0; i < lift_draws; ++i) {
        const auto& q = moduli[i % moduli.size()];
        Task t{1, PhaseParams{1 + rnd(q.p - 1), 0, 1 + rnd(q.p - 1), 1 + rnd(q.p - 1), 1, q}, 1 + static_cast<int>(i % 2)};
        tasks.push_back(t);
        const i64 u = i % 2 ? 1 : static_cast<i64>(least_nonresidue(q.p));
        PhaseParams pp{rnd(q.q), rnd(q.q), 1 + rnd(q.p - 1), 0, u, q};
        if (pp.A % static_cast<i64>(q.p) == 0 && pp.B % static_cast<i64>(q.p) == 0) pp.A += 1;
        tasks.push_back({2, pp});
    }
    for (const auto& q : sing_moduli)
        for (u64 i = 0; i < sing_draws; ++i) {
            PhaseParams pp{rnd(q.q), rnd(q.q), 1 + rnd(q.p - 1), rnd(q.q), 1, q};
            if (pp.A % static_cast<i64>(q.p) == 0 && pp.B % static_cast<i64>(q.p) == 0) pp.A += 1;
            tasks.push_back({3, pp});
        }

    RunResult out;
    out.table.experiment = cfg.experiment;
    out.table.columns = {"family", "p", "s", "A", "B", "a", "k", "u", "kappa", "count", "lhs", "rhs", "ratio", "pass"};
    auto rows = parallel_map<std::vector<Row>>(tasks.size(), [&](std::size_t i) {
        const Task& t = tasks[i];
        const auto& pp = t.pp;
        const u64 p = pp.q.p;
        const SqrtBranch br(p);
        std::vector<Row> rs;
        auto base = [&](const std::string& fam, i64 k, i64 kappa) {
            return Row{fam, as_i64(p), static_cast<i64>(pp.q.s), pp.A, pp.B, pp.a, k, pp.u, kappa};
        };
        if (t.kind == 0 || t.kind == 1) {
            auto au = t.kind == 0 ? hensel_audit(g_phase_problem(pp, br, true), 1)
                                  : hensel_audit(aligned_x_problem(pp.A, pp.a, t.alpha, pp.k, pp.u, pp.q), 1);
            u64 lo = UINT64_MAX, hi = 0;
            for (auto& c : au.censuses) {
                lo = std::min(lo, c.count);
                hi = std::max(hi, c.count);
            }
            if (au.censuses.empty()) lo = hi = 0;
            const double spread = double(hi - lo);
            Row row = base(t.kind == 0 ? "count-invariance" : "aligned-lift", pp.k, t.kind == 1 ? t.alpha : 1);
            for (Cell c : {Cell(as_i64(hi)), Cell(spread), Cell(0.0), Cell(spread == 0 ? 0.0 : INFINITY),
                           Cell(flag01(au.hypotheses_met && au.constant()))})
                row.push_back(c);
            rs.push_back(std::move(row));
        } else if (t.kind == 2) {
            auto c = singular_census(pp, br);
            const bool ok = static_cast<int>(c.roots.size()) == c.roots_mod_p && c.ki_units && c.g2_units;
            const double gap = std::abs(double(c.roots.size()) - double(c.roots_mod_p));
            Row row = base("root-lift", 0, pp.q.s);
            for (Cell x : {Cell(static_cast<i64>(c.roots.size())), Cell(gap), Cell(0.0), Cell(gap == 0 ? 0.0 : INFINITY),
                           Cell(flag01(ok))})
                row.push_back(x);
            rs.push_back(std::move(row));
        } else {
            auto c = singular_census(PhaseParams{pp.A, pp.B, pp.a, 0, pp.u, pp.q}, br);
            std::vector<i64> ks;
            for (i64 ki : c.special_values)
                for (int j = 0; j < 3; ++j) ks.push_back(mod(ki + static_cast<i64>(ipow(p, 1 + j)) * (1 + j), static_cast<i64>(pp.q.q)));
            ks.push_back(pp.k);
            for (i64 k : ks) {
                PhaseParams pk = pp;
                pk.k = k;
                for (int kappa = 1; kappa <= pp.q.s; ++kappa) {
                    for (int which = 0; which < 2; ++which) {
                        auto r = which == 0 ? singular_count_report(pk, kappa, c, br) : singular_count_report_T(pk, kappa, c, br);
                        Row row = base(which == 0 ? "singular-count" : "singular-count-T", k, kappa);
                        for (Cell x : {Cell(static_cast<i64>(r.lhs)), Cell(r.lhs), Cell(r.rhs), Cell(r.ratio), Cell(i64(1))})
                            row.push_back(x);
                        rs.push_back(std::move(row));
                    }
                }
            }
        }
        return rs;
    });
    for (auto& rs : rows)
        for (auto& row : rs) {
            const auto& fam = std::get<std::string>(row[0]);
            if (fam == "singular-count" || fam == "singular-count-T") out.ratios.emplace_back(fam, std::get<double>(row[12]));
            if (std::get<i64>(row.back()) == 0) out.failures.push_back(describe("census invariant failed", row, out.table.columns));
            out.table.add(std::move(row));
        }
    json mods = json::array();
    for (auto& q : sing_moduli) mods.push_back(std::to_string(q.p) + "^" + std::to_string(q.s));
    out.notes["singular_moduli"] = mods;
    return out;
}

// ---------------------------------------------------------------------------
// jutila

RunResult run_jutila(const ExperimentConfig& cfg, Params& P) {
    auto Qs = P.uints("Q", {20, 50, 100});
    auto exps = P.reals("delta_exponents", {1.0, 1.5, 2.0});
    const double mass_tol = P.real("mass_tolerance", 1e-10);
    P.finish();
    for (u64 Q : Qs)
        if (Q < 2 || Q > 5000) P.fail("Q", "Q must lie in [2, 5000]");
    for (double e : exps)
        if (!(e >= 1.0) || e > 4) P.fail("delta_exponents", "exponents must lie in [1, 4]");
    std::vector<std::pair<u64, double>> tasks;
    for (u64 Q : Qs)
        for (double e : exps) tasks.emplace_back(Q, e);

    RunResult out;
    out.table.experiment = cfg.experiment;
    out.table.columns = {"Q", "delta_exponent", "delta", "Lambda", "mass", "l2_error", "bound", "ratio", "mass_residual", "pass"};
    auto rows = parallel_map<Row>(tasks.size(), [&](std::size_t i) {
        auto [Q, e] = tasks[i];
        const double delta = std::pow(double(Q), -e);
        auto r = jutila_approximation(CircleApprox::uniform(Q, delta), cfg.eps_power);
        const double res = std::abs(r.mass - 1.0);
        return Row{as_i64(Q), e, delta, r.Lambda, r.mass, r.l2_error, r.bound, r.l2_error / r.bound, res, flag01(res < mass_tol)};
    });
    for (auto& row : rows) {
        out.ratios.emplace_back("jutila", std::get<double>(row[7]));
        if (std::get<i64>(row.back()) == 0) out.failures.push_back(describe("mass identity failed", row, out.table.columns));
        out.table.add(std::move(row));
    }
    return out;
}

// ---------------------------------------------------------------------------
// voronoi

RunResult run_voronoi(const ExperimentConfig& cfg, Params& P) {
    auto weights = P.uints("weights", {12, 16});
    const u64 cmax = P.uint("c_max", 5, 1, 50);
    auto Ns = P.reals("N", {4.0, 12.5, 20.0});
    const double tol = P.real("tolerance", 1e-5);
    const u64 table = P.uint("table_size", 20000, 100, 10'000'000);
    P.finish();
    for (u64 k : weights) P.check_weight("weights", static_cast<int>(k));
    for (double N : Ns)
        if (!(N >= 1.0) || N > 1e4) P.fail("N", "N must lie in [1, 10^4]");

    std::vector<std::shared_ptr<const Newform>> forms;
    for (u64 k : weights) forms.push_back(newform(static_cast<int>(k), table));
    struct Task {
        std::size_t form;
        i64 b;
        u64 c;
        double N;
    };
    std::vector<Task> tasks;
    for (std::size_t f = 0; f < forms.size(); ++f)
        for (u64 c = 1; c <= cmax; ++c)
            for (double N : Ns)
                for (i64 b = 1; b < static_cast<i64>(c) + (c == 1); ++b)
                    if (gcd_signed(b, static_cast<i64>(c)) == 1) tasks.push_back({f, c == 1 ? 0 : b, c, N});

    RunResult out;
    out.table.experiment = cfg.experiment;
    out.table.columns = {"weight", "b", "c", "N", "lhs_re", "lhs_im", "rhs_re", "rhs_im", "residual", "tolerance", "terms", "pass"};
    BumpFunction V;
    auto rows = parallel_map<Row>(tasks.size(), [&](std::size_t i) {
        const Task& t = tasks[i];
        auto r = voronoi_residual(*forms[t.form], t.b, t.c, V, t.N);
        return Row{static_cast<i64>(forms[t.form]->weight), t.b, as_i64(t.c), t.N, r.lhs.real(), r.lhs.imag(),
                   r.rhs.real(), r.rhs.imag(), r.residual, tol, as_i64(r.terms_rhs), flag01(r.residual < tol)};
    });
    for (auto& row : rows) {
        if (std::get<i64>(row.back()) == 0) out.failures.push_back(describe("summation formula failed", row, out.table.columns));
        out.table.add(std::move(row));
    }
    return out;
}

// ---------------------------------------------------------------------------
// diagonal and moment share forms, weight tables and constants

struct FormSetup {
    std::shared_ptr<const Newform> f1, f2;
    WeightTable table;
    MomentConstants constants;
};

// Coefficient tables reach 10^6 (the L-values at s = 1), and x_cut q_max^2
// when the full moment is needed.
FormSetup form_setup(int k1, int k2, u64 q_max, double tol, bool moment_range) {
    WeightTable W(WeightW{k1, k2}, 0.5 / (double(q_max) * double(q_max)), tol);
    const u64 n_max = std::max<u64>(1'000'000, moment_range ? moment_table_length(q_max, W) + 1 : 0);
    auto f1 = newform(k1, n_max);
    auto f2 = k2 == k1 ? f1 : newform(k2, n_max);
    auto mc = moment_constants(*f1, *f2);
    return FormSetup{f1, f2, std::move(W), std::move(mc)};
}

RunResult run_diagonal(const ExperimentConfig& cfg, Params& P) {
    auto pairs = P.weight_pairs("weights", {{12, 12}, {12, 16}});
    const u64 qmin = P.uint("q_min", 50, 3), qmax = P.uint("q_max", 500, 3, 100000);
    const u64 count = P.uint("count", 20, 1);
    const double C = P.real("bound_constant", 5.0);
    const double tol = P.real("weight_tolerance", 1e-11);
    P.finish();
    if (qmin > qmax) P.fail("q_max", "q_max below q_min");
    // evenly spaced targets, each moved to the next admissible modulus
    std::vector<u64> qs;
    for (u64 i = 0; i < count; ++i) {
        u64 q = count == 1 ? qmin : qmin + (qmax - qmin) * i / (count - 1);
        if (!qs.empty()) q = std::max(q, qs.back() + 1);
        while (q % 4 == 2) ++q;
        if (q > qmax) P.fail("count", "not enough admissible moduli in [q_min, q_max]");
        qs.push_back(q);
    }

    RunResult out;
    out.table.experiment = cfg.experiment;
    out.table.columns = {"k1", "k2", "q", "psi", "delta", "closed_form", "deviation", "closed_form_printed",
                         "deviation_printed", "bound", "ratio", "terms"};
    for (auto [k1, k2] : pairs) {
        auto setup = form_setup(k1, k2, qmax, tol, false);
        auto rows = parallel_map<Row>(qs.size(), [&](std::size_t i) {
            const u64 q = qs[i];
            auto d = diagonal_term(*setup.f1, *setup.f2, q, setup.table, setup.constants);
            const double lq = std::log(double(q));
            const double bound = C * lq * lq / std::sqrt(double(q));
            return Row{i64(k1), i64(k2), as_i64(q), as_i64(d.psi), d.delta, d.closed_form, d.deviation,
                       d.closed_form_printed, d.deviation_printed, bound, d.deviation / bound, as_i64(d.terms)};
        });
        for (auto& row : rows) {
            out.ratios.emplace_back("diagonal", std::get<double>(row[10]));
            out.ratios.emplace_back("diagonal-printed", std::get<double>(row[8]) / std::get<double>(row[9]));
            out.table.add(std::move(row));
        }
    }
    return out;
}

RunResult run_moment(const ExperimentConfig& cfg, Params& P) {
    auto pairs = P.weight_pairs("weights", {{12, 12}});
    auto moduli = P.uints("moduli", {101, 151, 211, 307, 401});
    auto naive = P.uints("naive_moduli", {5, 13, 29, 53});
    const double lo = P.real("window_low", 0.5), hi = P.real("window_high", 1.5);
    const double imag_tol = P.real("imag_tolerance", 1e-6);
    const double naive_tol = P.real("naive_tolerance", 1e-6);
    const double orth_tol = P.real("orthogonality_tolerance", 1e-9);
    const double tol = P.real("weight_tolerance", 1e-11);
    P.finish();
    auto admissible = [&](const std::string& key, u64 q, u64 cap) {
        if (q < 1 || q % 4 == 2 || q > cap)
            P.fail(key, std::to_string(q) + " is not admissible (need q != 2 mod 4, q <= " + std::to_string(cap) + ")");
    };
    for (u64 q : moduli) admissible("moduli", q, 700);
    for (u64 q : naive) admissible("naive_moduli", q, 60);
    u64 qtop = 1;
    for (u64 q : moduli) qtop = std::max(qtop, q);
    for (u64 q : naive) qtop = std::max(qtop, q);

    RunResult out;
    out.table.experiment = cfg.experiment;
    out.table.columns = {"k1",       "k2",        "role",         "q",
                         "psi",      "empirical", "main_term",    "ratio",
                         "main_term_printed",     "ratio_printed", "imag_residue",
                         "orthogonality_residual", "naive_residual", "pairs", "in_window"};
    json trend = json::array();
    for (auto [k1, k2] : pairs) {
        auto setup = form_setup(k1, k2, qtop, tol, true);
        std::vector<double> dev;
        std::vector<u64> sweep;
        auto one = [&](u64 q, bool naive_run) {
            auto mt = main_term_params(*setup.f1, *setup.f2, q, setup.constants);
            MomentOptions opt;
            opt.naive_check = naive_run;
            auto r = moment_experiment(*setup.f1, *setup.f2, q, setup.table, mt, opt);
            const double mp = main_term(mt, q, MainTermForm::printed);
            Row row{i64(k1), i64(k2), std::string(naive_run ? "naive" : "sweep"), as_i64(q), as_i64(r.psi), r.empirical,
                    r.main_term, r.ratio, mp, r.empirical / mp, r.imag_residue, r.orthogonality_residual,
                    r.naive_residual, as_i64(r.pairs), flag01(r.ratio >= lo && r.ratio <= hi)};
            std::vector<std::string> bad;
            if (!std::isfinite(r.ratio)) bad.push_back("non-finite ratio");
            if (!(r.imag_residue < imag_tol)) bad.push_back("imaginary residue");
            if (!(r.orthogonality_residual < orth_tol)) bad.push_back("orthogonality residual");
            if (naive_run && !(r.naive_residual >= 0 && r.naive_residual < naive_tol)) bad.push_back("naive double sum");
            for (auto& b : bad) out.failures.push_back(describe(b, row, out.table.columns));
            out.ratios.emplace_back("moment-ratio", r.ratio);
            if (!naive_run) {
                dev.push_back(std::abs(r.ratio - 1.0));
                sweep.push_back(q);
            }
            out.table.add(std::move(row));
        };
        for (u64 q : naive) one(q, true);
        for (u64 q : moduli) one(q, false);
        // lower and upper halves of the sorted sweep; the middle modulus of an
        // odd-length sweep sits in neither
        std::vector<std::size_t> idx(sweep.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return sweep[a] < sweep[b]; });
        const std::size_t h = idx.size() / 2;
        std::vector<double> lower, upper;
        json lq = json::array(), uq = json::array();
        for (std::size_t i = 0; i < h; ++i) {
            lower.push_back(dev[idx[i]]);
            lq.push_back(sweep[idx[i]]);
            upper.push_back(dev[idx[idx.size() - h + i]]);
            uq.push_back(sweep[idx[idx.size() - h + i]]);
        }
        json t{{"k1", k1}, {"k2", k2}, {"lower_moduli", lq}, {"upper_moduli", uq}};
        if (h > 0) {
            t["lower_median_abs_deviation"] = printed(median_of(lower));
            t["upper_median_abs_deviation"] = printed(median_of(upper));
            t["upper_not_above_lower"] = median_of(upper) <= median_of(lower);
        }
        trend.push_back(t);
    }
    out.notes["trend"] = trend;
    out.notes["window"] = json::array({lo, hi});
    return out;
}

// ---------------------------------------------------------------------------
// shifted-convolution

RunResult run_shifted(const ExperimentConfig& cfg, Params& P) {
    auto pairs = P.weight_pairs("weights", {{12, 16}});
    const u64 ind_draws = P.uint("individual_draws", 50);
    const double N1 = P.real("individual_N", 1e4), M1 = P.real("individual_M", 400);
    const u64 avg_draws = P.uint("average_draws", 50);
    const double N2 = P.real("average_N", 1e5), M2 = P.real("average_M", 1e3);
    const u64 dmin = P.uint("d_min", 500, 1), dmax = P.uint("d_max", 2000, 1);
    const u64 lmax = P.uint("l_max", 3, 1, 100);
    const double swap_tol = P.real("swap_tolerance", 1e-9);
    P.finish();
    if (dmin > dmax) P.fail("d_max", "d_max below d_min");
    if (!(N1 >= 1 && M1 >= 1 && N2 >= 1 && M2 >= 1)) P.fail("individual_N", "N and M must be at least 1");
    if (N1 > 1e7 || N2 > 1e7 || M1 > 1e7 || M2 > 1e7) P.fail("average_N", "N and M must stay below 10^7");
    if (N2 < 20 * M2) P.fail("average_N", "average_N must be at least 20 average_M");
    const u64 n_max = static_cast<u64>(2 * std::max({N1, M1, N2, M2})) + 2;

    struct Task {
        bool average;
        u64 l1, l2;
        i64 h;
        u64 d;
    };
    std::vector<Task> tasks;
    std::mt19937_64 rng(cfg.seed);
    for (u64 i = 0; i < ind_draws; ++i) {
        const u64 l1 = 1 + draw(rng, lmax), l2 = 1 + draw(rng, lmax);
        tasks.push_back({false, l1, l2, 1 + static_cast<i64>(draw(rng, static_cast<u64>(2 * N1))), 0});
    }
    for (u64 i = 0; i < avg_draws; ++i) {
        const u64 l1 = 1 + draw(rng, lmax), l2 = 1 + draw(rng, lmax);
        tasks.push_back({true, l1, l2, 0, dmin + draw(rng, dmax - dmin + 1)});
    }

    RunResult out;
    out.table.experiment = cfg.experiment;
    out.table.columns = {"family", "k1", "k2", "l1", "l2", "h", "d", "N", "M", "value", "terms", "lhs", "rhs", "ratio",
                         "swap_residual", "pass"};
    BumpFunction V;
    for (auto [k1, k2] : pairs) {
        auto f1 = newform(k1, n_max);
        auto f2 = newform(k2, n_max);
        auto rows = parallel_map<Row>(tasks.size(), [&](std::size_t i) {
            const Task& t = tasks[i];
            if (!t.average) {
                auto s = shifted_convolution(*f1, *f2, t.l1, t.l2, t.h, N1, M1, V, V, cfg.eps_power);
                // the same sum with the roles of (f1, l1, N) and (f2, l2, M) exchanged
                auto w = shifted_convolution(*f2, *f1, t.l2, t.l1, -t.h, M1, N1, V, V, cfg.eps_power);
                const double res = std::abs(s.value - w.value) / (1.0 + std::abs(s.value));
                return Row{s.report.family, i64(k1), i64(k2), as_i64(t.l1), as_i64(t.l2), t.h, i64(0), N1, M1, s.value,
                           as_i64(s.terms), s.report.lhs, s.report.rhs, s.report.ratio, res, flag01(res < swap_tol)};
            }
            auto s = averaged_shifted_convolution(*f1, *f2, t.l1, t.l2, t.d, N2, M2, V, V, cfg.eps_power);
            return Row{s.report.family, i64(k1), i64(k2), as_i64(t.l1), as_i64(t.l2), i64(0), as_i64(t.d), N2, M2, s.value,
                       as_i64(s.terms), s.report.lhs, s.report.rhs, s.report.ratio, 0.0, i64(1)};
        });
        for (auto& row : rows) {
            out.ratios.emplace_back(std::get<std::string>(row[0]), std::get<double>(row[13]));
            if (std::get<i64>(row.back()) == 0) out.failures.push_back(describe("swap symmetry failed", row, out.table.columns));
            out.table.add(std::move(row));
        }
    }
    return out;
}

} // namespace

RunResult run_experiment(const ExperimentConfig& cfg) {
    Params P(cfg);
    const std::string& e = cfg.experiment;
    try {
        if (e == "kloosterman-audit") return run_kloosterman_audit(cfg, P);
        if (e == "sigma-audit") return run_sigma_audit(cfg, P);
        if (e == "theorem5-sweep") return run_theorem5_sweep(cfg, P);
        if (e == "census-sweep") return run_census_sweep(cfg, P);
        if (e == "jutila") return run_jutila(cfg, P);
        if (e == "voronoi") return run_voronoi(cfg, P);
        if (e == "diagonal") return run_diagonal(cfg, P);
        if (e == "moment") return run_moment(cfg, P);
        if (e == "shifted-convolution") return run_shifted(cfg, P);
    } catch (const std::invalid_argument& ex) {
        // a precondition the parameter checks above did not catch
        throw ConfigError(cfg.origin, line_of(cfg.text, "params"), "params", ex.what());
    }
    throw ConfigError(cfg.origin, line_of(cfg.text, "experiment"), "experiment", "unknown experiment '" + e + "'");
}

json summarize(const ExperimentConfig& cfg, const RunResult& r) {
    std::map<std::string, std::vector<double>> fam;
    for (auto& [f, x] : r.ratios) fam[f].push_back(x);
    json families = json::object();
    for (auto& [f, xs] : fam) {
        std::vector<double> finite;
        for (double x : xs)
            if (std::isfinite(x)) finite.push_back(x);
        json s{{"count", xs.size()}, {"nonfinite", xs.size() - finite.size()}};
        s["max_ratio"] = finite.empty() ? json(nullptr) : json(printed(*std::max_element(finite.begin(), finite.end())));
        s["median_ratio"] = finite.empty() ? json(nullptr) : json(printed(median_of(finite)));
        families[f] = s;
    }
    json failures = json::array();
    for (std::size_t i = 0; i < r.failures.size() && i < 20; ++i) failures.push_back(r.failures[i]);
    return json{{"schema", "kloosterlab-summary"},
                {"version", kReportSchemaVersion},
                {"experiment", cfg.experiment},
                {"seed", cfg.seed},
                {"quick", cfg.quick},
                {"eps_power", cfg.eps_power},
                {"rows", r.table.rows.size()},
                {"families", families},
                {"hard_failures", r.failures.size()},
                {"first_failures", failures},
                {"notes", r.notes}};
}

void write_artifacts(const ExperimentConfig& cfg, const RunResult& r, const std::string& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create " + dir + ": " + ec.message());
    auto emit = [&](const std::string& name, auto&& body) {
        const std::string path = (fs::path(dir) / name).string();
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + path + " for writing");
        body(out);
        out.flush();
        if (!out) throw std::runtime_error("write failed: " + path);
    };
    emit(cfg.experiment + ".csv", [&](std::ostream& o) { write_csv(r.table, o); });
    emit(cfg.experiment + ".jsonl", [&](std::ostream& o) { write_jsonl(r.table, o); });
    emit("summary.json", [&](std::ostream& o) { o << summarize(cfg, r).dump(2) << '\n'; });
}

} // namespace kloosterlab
