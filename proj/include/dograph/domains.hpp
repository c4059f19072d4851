#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dograph/io.hpp"
#include "dograph/matrix.hpp"
#include "dograph/model.hpp"
#include "dograph/rng.hpp"

namespace dograph {

// One synthetic domain: an order-1 Markov measure over a shared vocabulary.
struct DomainSpec {
    int id = 0;
    std::string name;
    Matrix transition;            // |V| x |V|, row-stochastic
    std::vector<double> initial;  // probability vector over |V|

    void validate() const {
        const std::size_t v = transition.rows();
        if (v == 0 || transition.cols() != v)
            throw std::invalid_argument("DomainSpec: transition must be square, got " +
                                        transition.shape_string());
        if (initial.size() != v)
            throw std::invalid_argument("DomainSpec: initial length mismatch");
        for (std::size_t r = 0; r < v; ++r) {
            double sum = 0.0;
            for (std::size_t c = 0; c < v; ++c) {
                if (transition(r, c) < 0.0)
                    throw std::invalid_argument("DomainSpec: negative transition probability");
                sum += transition(r, c);
            }
            if (std::abs(sum - 1.0) > 1e-12)
                throw std::invalid_argument("DomainSpec: transition row " + std::to_string(r) +
                                            " sums to " + std::to_string(sum));
        }
        double isum = 0.0;
        for (double p : initial) {
            if (p < 0.0) throw std::invalid_argument("DomainSpec: negative initial probability");
            isum += p;
        }
        if (std::abs(isum - 1.0) > 1e-12)
            throw std::invalid_argument("DomainSpec: initial distribution sums to " +
                                        std::to_string(isum));
    }
};

struct MixtureSpec {
    std::string name;
    std::vector<DomainSpec> domains;
    std::vector<double> proportions;

    std::size_t vocab_size() const {
        return domains.empty() ? 0 : domains.front().transition.rows();
    }

    void validate() const {
        if (domains.empty()) throw std::invalid_argument("MixtureSpec: need at least one domain");
        if (proportions.size() != domains.size())
            throw std::invalid_argument("MixtureSpec: proportions length mismatch");
        double sum = 0.0;
        for (double p : proportions) {
            if (p < 0.0) throw std::invalid_argument("MixtureSpec: negative proportion");
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw std::invalid_argument("MixtureSpec: proportions sum to " + std::to_string(sum));
        for (const auto& d : domains) {
            d.validate();
            if (d.transition.rows() != vocab_size())
                throw std::invalid_argument("MixtureSpec: inconsistent vocab sizes");
        }
    }
};

namespace detail {

inline std::size_t sample_categorical(std::span<const double> probs, SeededRng& rng) {
    const double u = rng.next_double();
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (u < acc) return i;
    }
    return probs.size() - 1;  // guard against accumulated rounding
}

}  // namespace detail

// Draw one length-n sequence from the domain's Markov measure. Targets are
// the tokens shifted by one, so n+1 tokens are drawn in total.
inline Sample sample_sequence(const DomainSpec& spec, std::size_t n, SeededRng& rng) {
    if (n < 2) throw std::invalid_argument("sample_sequence: need n >= 2");
    Sample s;
    s.human_domain = spec.id;
    s.tokens.resize(n);
    s.targets.resize(n);
    std::size_t cur = detail::sample_categorical(spec.initial, rng);
    s.tokens[0] = static_cast<int>(cur);
    for (std::size_t t = 1; t <= n; ++t) {
        cur = detail::sample_categorical(spec.transition.row(cur), rng);
        if (t < n) s.tokens[t] = static_cast<int>(cur);
        s.targets[t - 1] = static_cast<int>(cur);
    }
    return s;
}

// Batch under a static mixture: each sample's domain i.i.d. from proportions.
inline std::vector<Sample> sample_batch(const MixtureSpec& mix, std::size_t batch, std::size_t n,
                                        SeededRng& rng) {
    if (batch < 1) throw std::invalid_argument("sample_batch: batch must be >= 1");
    mix.validate();
    std::vector<Sample> out;
    out.reserve(batch);
    for (std::size_t i = 0; i < batch; ++i) {
        const std::size_t d = detail::sample_categorical(mix.proportions, rng);
        out.push_back(sample_sequence(mix.domains[d], n, rng));
    }
    return out;
}

// ---- scenario construction ----
//
// Domains are built from compact recipes so a scenario is reproducible from
// a small key-value file. Two recipe kinds:
//   banded  — random within-band walk: each row places home_mass on the band
//             [band_lo, band_hi] with seeded random weights and spreads the
//             remainder uniformly over the whole vocabulary.
//   blend2  — rowwise interpolation alpha * banded(A) + (1-alpha) * banded(B),
//             giving chains whose supports overlap pairwise.

struct DomainRecipe {
    std::string name;
    std::string kind = "banded";  // "banded" | "blend2"
    std::uint64_t seed = 0;
    std::size_t band_lo = 0, band_hi = 0;      // banded and blend2 component A
    std::size_t band2_lo = 0, band2_hi = 0;    // blend2 component B
    double home_mass = 0.85;
    double alpha = 0.5;  // blend2 weight on component A
};

struct ScenarioFile {
    int schema_version = 1;
    std::string name;
    std::size_t vocab_size = 32;
    std::vector<DomainRecipe> domains;
    std::vector<double> proportions;
};

namespace detail {

inline Matrix banded_chain(std::size_t vocab, std::size_t lo, std::size_t hi, double home_mass,
                           SeededRng& rng) {
    if (hi < lo || hi >= vocab)
        throw std::invalid_argument("banded_chain: bad band bounds");
    if (!(home_mass > 0.0 && home_mass < 1.0))
        throw std::invalid_argument("banded_chain: home_mass must lie in (0,1)");
    const std::size_t band = hi - lo + 1;
    Matrix p(vocab, vocab, (1.0 - home_mass) / static_cast<double>(vocab));
    for (std::size_t r = 0; r < vocab; ++r) {
        // Exponential weights give each row its own sharp in-band profile.
        std::vector<double> w(band);
        double sum = 0.0;
        for (std::size_t j = 0; j < band; ++j) {
            w[j] = -std::log(1.0 - rng.next_double());
            sum += w[j];
        }
        for (std::size_t j = 0; j < band; ++j) p(r, lo + j) += home_mass * w[j] / sum;
    }
    return p;
}

inline std::vector<double> band_initial(std::size_t vocab, std::size_t lo, std::size_t hi,
                                        double home_mass) {
    std::vector<double> init(vocab, (1.0 - home_mass) / static_cast<double>(vocab));
    for (std::size_t j = lo; j <= hi; ++j)
        init[j] += home_mass / static_cast<double>(hi - lo + 1);
    return init;
}

}  // namespace detail

inline DomainSpec build_domain(const DomainRecipe& r, std::size_t vocab, int id) {
    DomainSpec d;
    d.id = id;
    d.name = r.name;
    SeededRng rng(r.seed);
    if (r.kind == "banded") {
        d.transition = detail::banded_chain(vocab, r.band_lo, r.band_hi, r.home_mass, rng);
        d.initial = detail::band_initial(vocab, r.band_lo, r.band_hi, r.home_mass);
    } else if (r.kind == "blend2") {
        SeededRng rng_b = rng.child(1);
        const Matrix a = detail::banded_chain(vocab, r.band_lo, r.band_hi, r.home_mass, rng);
        const Matrix b =
            detail::banded_chain(vocab, r.band2_lo, r.band2_hi, r.home_mass, rng_b);
        d.transition = add(scale(a, r.alpha), scale(b, 1.0 - r.alpha));
        const auto ia = detail::band_initial(vocab, r.band_lo, r.band_hi, r.home_mass);
        const auto ib = detail::band_initial(vocab, r.band2_lo, r.band2_hi, r.home_mass);
        d.initial.resize(vocab);
        for (std::size_t i = 0; i < vocab; ++i)
            d.initial[i] = r.alpha * ia[i] + (1.0 - r.alpha) * ib[i];
    } else {
        throw std::invalid_argument("build_domain: unknown recipe kind '" + r.kind + "'");
    }
    // Renormalize rows exactly; blending and float noise leave ~1e-16 slack.
    for (std::size_t row = 0; row < vocab; ++row) {
        double sum = 0.0;
        for (std::size_t c = 0; c < vocab; ++c) sum += d.transition(row, c);
        for (std::size_t c = 0; c < vocab; ++c) d.transition(row, c) /= sum;
    }
    double isum = 0.0;
    for (double p : d.initial) isum += p;
    for (double& p : d.initial) p /= isum;
    d.validate();
    return d;
}

inline MixtureSpec build_mixture(const ScenarioFile& sf) {
    MixtureSpec mix;
    mix.name = sf.name;
    mix.proportions = sf.proportions;
    for (std::size_t i = 0; i < sf.domains.size(); ++i)
        mix.domains.push_back(build_domain(sf.domains[i], sf.vocab_size, static_cast<int>(i)));
    mix.validate();
    return mix;
}

inline std::vector<ScenarioFile> builtin_scenario_files() {
    std::vector<ScenarioFile> out;

    {
        ScenarioFile s;
        s.name = "balanced-3";
        s.vocab_size = 32;
        s.domains = {
            {"low-band", "banded", 101, 0, 10, 0, 0, 0.85, 0.5},
            {"mid-band", "banded", 102, 11, 21, 0, 0, 0.85, 0.5},
            {"high-band", "banded", 103, 22, 31, 0, 0, 0.85, 0.5},
        };
        s.proportions = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
        out.push_back(std::move(s));
    }
    {
        ScenarioFile s;
        s.name = "skewed-3";
        s.vocab_size = 32;
        s.domains = {
            {"web", "banded", 201, 0, 10, 0, 0, 0.85, 0.5},
            {"books", "banded", 202, 11, 21, 0, 0, 0.85, 0.5},
            {"code", "banded", 203, 22, 31, 0, 0, 0.85, 0.5},
        };
        s.proportions = {0.80, 0.15, 0.05};
        out.push_back(std::move(s));
    }
    {
        ScenarioFile s;
        s.name = "overlap-4";
        s.vocab_size = 32;
        // Each domain interpolates a pair of adjacent 8-token bands, so
        // neighbouring domains share part of their structure.
        s.domains = {
            {"blend-01", "blend2", 301, 0, 7, 8, 15, 0.85, 0.90},
            {"blend-12", "blend2", 302, 8, 15, 16, 23, 0.85, 0.90},
            {"blend-23", "blend2", 303, 16, 23, 24, 31, 0.85, 0.90},
            {"blend-30", "blend2", 304, 24, 31, 0, 7, 0.85, 0.90},
        };
        s.proportions = {0.25, 0.25, 0.25, 0.25};
        out.push_back(std::move(s));
    }
    return out;
}

inline std::vector<MixtureSpec> builtin_scenarios() {
    std::vector<MixtureSpec> out;
    for (const auto& sf : builtin_scenario_files()) out.push_back(build_mixture(sf));
    return out;
}

inline ScenarioFile builtin_scenario_file(const std::string& name) {
    for (auto& sf : builtin_scenario_files())
        if (sf.name == name) return sf;
    throw std::invalid_argument("unknown builtin scenario '" + name + "'");
}

// ---- scenario file format (schema documented in README) ----

inline std::string scenario_to_text(const ScenarioFile& sf) {
    std::ostringstream os;
    os << "schema_version = " << sf.schema_version << "\n";
    os << "name = " << sf.name << "\n";
    os << "vocab_size = " << sf.vocab_size << "\n";
    os << "num_domains = " << sf.domains.size() << "\n";
    os << "proportions =";
    for (double p : sf.proportions) os << " " << io::fmt_double(p);
    os << "\n";
    for (std::size_t i = 0; i < sf.domains.size(); ++i) {
        const auto& d = sf.domains[i];
        const std::string key = "domain." + std::to_string(i) + ".";
        os << key << "name = " << d.name << "\n";
        os << key << "kind = " << d.kind << "\n";
        os << key << "seed = " << d.seed << "\n";
        os << key << "band_lo = " << d.band_lo << "\n";
        os << key << "band_hi = " << d.band_hi << "\n";
        if (d.kind == "blend2") {
            os << key << "band2_lo = " << d.band2_lo << "\n";
            os << key << "band2_hi = " << d.band2_hi << "\n";
            os << key << "alpha = " << io::fmt_double(d.alpha) << "\n";
        }
        os << key << "home_mass = " << io::fmt_double(d.home_mass) << "\n";
    }
    return os.str();
}

namespace detail {

inline std::map<std::string, std::string> parse_keyvals(const std::string& text,
                                                        const std::string& what) {
    std::map<std::string, std::string> kv;
    std::istringstream is(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument(what + ": line " + std::to_string(lineno) +
                                        " is not 'key = value'");
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

}  // namespace detail

inline ScenarioFile scenario_from_text(const std::string& text) {
    auto kv = detail::parse_keyvals(text, "scenario file");
    auto need = [&](const std::string& k) -> const std::string& {
        auto it = kv.find(k);
        if (it == kv.end())
            throw std::invalid_argument("scenario file: missing key '" + k + "'");
        return it->second;
    };

    ScenarioFile sf;
    sf.schema_version = std::stoi(need("schema_version"));
    if (sf.schema_version != 1)
        throw std::invalid_argument("scenario file: unsupported schema_version " +
                                    std::to_string(sf.schema_version));
    sf.name = need("name");
    sf.vocab_size = static_cast<std::size_t>(std::stoull(need("vocab_size")));
    const std::size_t nd = std::stoull(need("num_domains"));

    std::istringstream ps(need("proportions"));
    double p;
    while (ps >> p) sf.proportions.push_back(p);

    for (std::size_t i = 0; i < nd; ++i) {
        const std::string key = "domain." + std::to_string(i) + ".";
        DomainRecipe r;
        r.name = need(key + "name");
        r.kind = need(key + "kind");
        r.seed = std::stoull(need(key + "seed"));
        r.band_lo = std::stoull(need(key + "band_lo"));
        r.band_hi = std::stoull(need(key + "band_hi"));
        r.home_mass = std::stod(need(key + "home_mass"));
        if (r.kind == "blend2") {
            r.band2_lo = std::stoull(need(key + "band2_lo"));
            r.band2_hi = std::stoull(need(key + "band2_hi"));
            r.alpha = std::stod(need(key + "alpha"));
        }
        sf.domains.push_back(std::move(r));
    }
    if (sf.proportions.size() != sf.domains.size())
        throw std::invalid_argument("scenario file: proportions/domain count mismatch");
    return sf;
}

inline ScenarioFile load_scenario_file(const std::filesystem::path& path) {
    return scenario_from_text(io::read_text_file(path));
}

inline void save_scenario_file(const std::filesystem::path& path, const ScenarioFile& sf) {
    io::write_text_file(path, scenario_to_text(sf));
}

}  // namespace dograph
