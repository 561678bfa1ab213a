#include "rayleigh/cli/config.hpp"

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include <fmt/format.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace rayleigh::cli {
namespace {

std::string where(const std::string &file, const toml::source_region &src) {
    return fmt::format("{}:{}:{}", file, src.begin.line, src.begin.column);
}

// Reads one [block], remembering which keys were consumed so that the rest
// can be reported as unknown.
class Block {
public:
    Block(const toml::table *tbl, std::string name, std::string file)
        : tbl_(tbl), name_(std::move(name)), file_(std::move(file)) {}

    bool present() const { return tbl_ != nullptr; }

    const toml::node *find(const std::string &key) {
        seen_.insert(key);
        return tbl_ ? tbl_->get(key) : nullptr;
    }

    [[noreturn]] void fail(const toml::node &n, const std::string &key, const std::string &what) const {
        throw ConfigError(fmt::format("{}: {}.{}: {}", where(file_, n.source()), name_, key, what));
    }

    void number(const std::string &key, double &out) {
        if(const auto *n = find(key)) {
            if(auto v = n->value<double>(); v && (n->is_floating_point() || n->is_integer()))
                out = *v;
            else
                fail(*n, key, "expected a number");
            if(!std::isfinite(out)) fail(*n, key, "must be finite");
        }
    }

    void number(const std::string &key, std::optional<double> &out) {
        if(tbl_ && tbl_->contains(key)) {
            double v = 0;
            number(key, v);
            out = v;
        } else {
            seen_.insert(key);
        }
    }

    template <class Int> void integer(const std::string &key, Int &out) {
        if(const auto *n = find(key)) {
            const auto *v = n->as_integer();
            if(!v) fail(*n, key, "expected an integer");
            const std::int64_t raw = v->get();
            if constexpr (std::is_unsigned_v<Int>) {
                if(raw < 0) fail(*n, key, "must be non-negative");
            } else {
                if(raw < static_cast<std::int64_t>(std::numeric_limits<Int>::min()) ||
                    raw > static_cast<std::int64_t>(std::numeric_limits<Int>::max()))
                    fail(*n, key, "out of range");
            }
            out = static_cast<Int>(raw);
        }
    }

    void boolean(const std::string &key, bool &out) {
        if(const auto *n = find(key)) {
            const auto *v = n->as_boolean();
            if(!v) fail(*n, key, "expected true or false");
            out = v->get();
        }
    }

    void text(const std::string &key, std::string &out, std::initializer_list<const char *> allowed = {}) {
        if(const auto *n = find(key)) {
            const auto *v = n->as_string();
            if(!v) fail(*n, key, "expected a string");
            out = v->get();
            if(allowed.size() == 0) return;
            std::string list;
            for(const char *a : allowed) {
                if(out == a) return;
                list += list.empty() ? a : fmt::format(", {}", a);
            }
            fail(*n, key, fmt::format("'{}' is not one of: {}", out, list));
        }
    }

    void path(const std::string &key, std::filesystem::path &out, const std::filesystem::path &base) {
        std::string s;
        text(key, s);
        if(s.empty()) return;
        std::filesystem::path p(s);
        out = p.is_absolute() ? p : base / p;
    }

    // Range checks after parsing still point at the key's line.
    void require(const std::string &key, bool ok, const std::string &what) const {
        if(ok) return;
        const toml::node *n = tbl_ ? tbl_->get(key) : nullptr;
        if(n) fail(*n, key, what);
        throw ConfigError(fmt::format("{}: {}.{}: {}", file_, name_, key, what));
    }

    void finish() const {
        if(!tbl_) return;
        for(auto &&[k, v] : *tbl_) {
            if(!seen_.count(std::string(k.str())))
                throw ConfigError(fmt::format("{}: unknown key '{}.{}'", where(file_, k.source()), name_, k.str()));
        }
    }

private:
    const toml::table *tbl_;
    std::string name_;
    std::string file_;
    std::set<std::string> seen_;
};

const toml::table *subtable(const toml::table &root, const char *name, const std::string &file) {
    const toml::node *n = root.get(name);
    if(!n) return nullptr;
    if(!n->is_table()) throw ConfigError(fmt::format("{}: '{}' must be a table", where(file, n->source()), name));
    return n->as_table();
}

} // namespace

RunConfig parseConfig(const std::string &text, const std::filesystem::path &baseDir, const std::string &sourceName) {
    toml::table root;
    try {
        root = toml::parse(text, sourceName);
    } catch(const toml::parse_error &e) {
        throw ConfigError(fmt::format("{}: {}", where(sourceName, e.source()), e.description()));
    }

    static const std::set<std::string> sections = {"scene", "scheme", "analysis", "montecarlo", "output"};
    for(auto &&[k, v] : root) {
        const std::string key(k.str());
        if(key == "schema_version" || sections.count(key)) continue;
        throw ConfigError(fmt::format("{}: unknown key '{}'", where(sourceName, k.source()), key));
    }

    RunConfig cfg;
    const toml::node *version = root.get("schema_version");
    if(!version) throw ConfigError(fmt::format("{}: missing schema_version (expected {})", sourceName, kSchemaVersion));
    if(!version->is_integer() || version->as_integer()->get() != kSchemaVersion)
        throw ConfigError(fmt::format("{}: unsupported schema_version (expected {})", where(sourceName, version->source()), kSchemaVersion));

    Block scene(subtable(root, "scene", sourceName), "scene", sourceName);
    auto &s = cfg.scene;
    scene.text("psf", s.psf, {"gaussian", "tabulated"});
    scene.number("sigma", s.sigma);
    scene.path("psf_file", s.psfFile, baseDir);
    scene.boolean("normalize", s.normalize);
    scene.number("epsilon", s.epsilon);
    scene.integer("intervals", s.intervals);
    scene.integer("truncation", s.truncation);
    scene.number("leakage_tolerance", s.leakageTolerance);
    scene.finish();
    scene.require("sigma", s.sigma > 0, "must be positive");
    scene.require("epsilon", s.epsilon > 0, "must be positive");
    scene.require("intervals", s.intervals > 0, "must be positive");
    scene.require("truncation", s.truncation >= 2, "must be at least 2");
    scene.require("leakage_tolerance", s.leakageTolerance > 0, "must be positive");
    if(s.psf == "tabulated") {
        scene.require("psf_file", !s.psfFile.empty(), "required for a tabulated PSF");
        scene.require("psf_file", std::filesystem::is_regular_file(s.psfFile), fmt::format("file not found: {}", s.psfFile.string()));
    } else {
        scene.require("psf_file", s.psfFile.empty(), "only valid with psf = \"tabulated\"");
    }

    Block scheme(subtable(root, "scheme", sourceName), "scheme", sourceName);
    auto &m = cfg.scheme;
    scheme.text("kind", m.kind, {"direct-imaging", "hg-spade", "binary-spade", "custom-unitary"});
    scheme.number("pixel_width", m.pixelWidth);
    scheme.number("extent", m.extent);
    scheme.integer("modes", m.modes);
    scheme.number("offset", m.offset);
    scheme.path("unitary_file", m.unitaryFile, baseDir);
    scheme.finish();
    scheme.require("pixel_width", m.pixelWidth > 0, "must be positive");
    scheme.require("extent", m.extent >= m.pixelWidth, "must cover at least one pixel");
    scheme.require("modes", m.modes >= 0 && m.modes <= s.truncation, "must lie in [0, scene.truncation]");
    if(m.kind == "custom-unitary") {
        scheme.require("unitary_file", !m.unitaryFile.empty(), "required for a custom-unitary scheme");
        scheme.require("unitary_file", std::filesystem::is_regular_file(m.unitaryFile), fmt::format("file not found: {}", m.unitaryFile.string()));
    }

    Block analysis(subtable(root, "analysis", sourceName), "analysis", sourceName);
    auto &a = cfg.analysis;
    analysis.number("theta2_min", a.theta2Min);
    analysis.number("theta2_max", a.theta2Max);
    analysis.integer("points", a.points);
    analysis.text("spacing", a.spacing, {"log", "linear"});
    analysis.number("theta1", a.theta1);
    analysis.number("theta2", a.theta2);
    analysis.boolean("two_parameter", a.twoParameter);
    analysis.text("derivatives", a.derivatives, {"auto", "analytic", "central"});
    analysis.number("step", a.step);
    analysis.finish();
    analysis.require("points", a.points >= 1, "must be at least 1");
    analysis.require("theta2_min", a.theta2Min >= 0, "must be non-negative");
    analysis.require("theta2_min", a.spacing != "log" || a.theta2Min > 0, "must be positive for a log grid");
    analysis.require("theta2_max", a.theta2Max >= a.theta2Min, "must not be below theta2_min");
    analysis.require("theta2", a.theta2 >= 0, "must be non-negative");
    analysis.require("step", a.step > 0, "must be positive");

    Block mc(subtable(root, "montecarlo", sourceName), "montecarlo", sourceName);
    auto &c = cfg.montecarlo;
    c.present = mc.present();
    mc.integer("trials", c.trials);
    // seeds above 2^63 do not fit a TOML integer and may be given as a decimal string
    if(const auto *n = mc.find("seed")) {
        if(const auto *str = n->as_string()) {
            const std::string &t = str->get();
            const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), c.seed);
            if(ec != std::errc() || ptr != t.data() + t.size()) mc.fail(*n, "seed", "expected an unsigned 64-bit integer");
        } else {
            mc.integer("seed", c.seed);
        }
    }
    mc.number("photons", c.photons);
    mc.number("bound_min", c.lower);
    mc.number("bound_max", c.upper);
    mc.number("tolerance", c.tolerance);
    mc.finish();
    mc.require("trials", c.trials >= 1, "must be at least 1");
    mc.require("photons", !c.photons || *c.photons > 0, "must be positive");
    mc.require("bound_min", c.lower >= 0, "must be non-negative");
    mc.require("bound_max", !c.upper || *c.upper > c.lower, "must exceed bound_min");
    mc.require("tolerance", c.tolerance > 0, "must be positive");

    Block out(subtable(root, "output", sourceName), "output", sourceName);
    std::string dir;
    out.text("directory", dir);
    out.text("prefix", cfg.output.prefix);
    out.finish();
    if(!dir.empty()) {
        std::filesystem::path p(dir);
        cfg.output.directory = p.is_absolute() ? p : baseDir / p;
    } else {
        cfg.output.directory = baseDir / "out";
    }
    out.require("prefix", cfg.output.prefix.find_first_of("/\\") == std::string::npos, "must not contain path separators");

    return cfg;
}

RunConfig loadConfig(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if(!in) throw ConfigError(fmt::format("{}: cannot open config", path.string()));
    std::stringstream buf;
    buf << in.rdbuf();
    const auto abs = std::filesystem::absolute(path);
    RunConfig cfg = parseConfig(buf.str(), abs.parent_path(), path.string());
    cfg.source = abs;
    return cfg;
}

std::string renderConfig(const RunConfig &cfg) {
    toml::table scene{
        {"psf", cfg.scene.psf},
        {"sigma", cfg.scene.sigma},
        {"normalize", cfg.scene.normalize},
        {"epsilon", cfg.scene.epsilon},
        {"intervals", cfg.scene.intervals},
        {"truncation", static_cast<std::int64_t>(cfg.scene.truncation)},
        {"leakage_tolerance", cfg.scene.leakageTolerance},
    };
    if(!cfg.scene.psfFile.empty()) scene.insert("psf_file", cfg.scene.psfFile.string());

    toml::table scheme{
        {"kind", cfg.scheme.kind},
        {"pixel_width", cfg.scheme.pixelWidth},
        {"extent", cfg.scheme.extent},
        {"modes", static_cast<std::int64_t>(cfg.scheme.modes)},
        {"offset", cfg.scheme.offset},
    };
    if(!cfg.scheme.unitaryFile.empty()) scheme.insert("unitary_file", cfg.scheme.unitaryFile.string());

    toml::table analysis{
        {"theta2_min", cfg.analysis.theta2Min},
        {"theta2_max", cfg.analysis.theta2Max},
        {"points", cfg.analysis.points},
        {"spacing", cfg.analysis.spacing},
        {"theta1", cfg.analysis.theta1},
        {"theta2", cfg.analysis.theta2},
        {"two_parameter", cfg.analysis.twoParameter},
        {"derivatives", cfg.analysis.derivatives},
        {"step", cfg.analysis.step},
    };

    toml::table root{
        {"schema_version", cfg.schemaVersion},
        {"scene", std::move(scene)},
        {"scheme", std::move(scheme)},
        {"analysis", std::move(analysis)},
    };

    {
        toml::table mc{
            {"trials", cfg.montecarlo.trials},
            {"bound_min", cfg.montecarlo.lower},
            {"tolerance", cfg.montecarlo.tolerance},
        };
        const std::uint64_t seed = cfg.montecarlo.seed;
        if(seed > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()))
            mc.insert("seed", std::to_string(seed));
        else
            mc.insert("seed", static_cast<std::int64_t>(seed));
        if(cfg.montecarlo.photons) mc.insert("photons", *cfg.montecarlo.photons);
        if(cfg.montecarlo.upper) mc.insert("bound_max", *cfg.montecarlo.upper);
        root.insert("montecarlo", std::move(mc));
    }

    root.insert("output", toml::table{
        {"directory", cfg.output.directory.string()},
        {"prefix", cfg.output.prefix},
    });

    std::ostringstream os;
    os << root << '\n';
    return os.str();
}

} // namespace rayleigh::cli
