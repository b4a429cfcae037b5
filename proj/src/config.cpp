#include "splitmc/config.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "splitmc/trace_io.hpp"

namespace splitmc::cli {

namespace {

[[noreturn]] void config_fail(const std::string& where, const std::string& what) {
    throw ParameterError("config: " + where + ": " + what);
}

double get_num(const json& j, const std::string& key, const std::string& where) {
    if (!j.contains(key) || !j[key].is_number()) config_fail(where, "missing numeric field '" + key + "'");
    return j[key].get<double>();
}

Vec get_vec(const json& j, const std::string& key, const std::string& where) {
    if (!j.contains(key) || !j[key].is_array()) config_fail(where, "missing array field '" + key + "'");
    Vec v;
    for (const auto& e : j[key]) {
        if (!e.is_number()) config_fail(where, "'" + key + "' must hold numbers");
        v.push_back(e.get<double>());
    }
    return v;
}

std::string get_kind(const json& j, const std::string& where) {
    if (j.is_string()) return j.get<std::string>();
    if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string())
        config_fail(where, "expected an object with a 'kind' tag");
    return j["kind"].get<std::string>();
}

Fun1d parse_fun1d(const json& j, const std::string& where) {
    const std::string kind = get_kind(j, where);
    if (kind == "zero") return Fun1d::zero();
    if (kind == "abs") return Fun1d::abs(get_num(j, "weight", where));
    if (kind == "square") return Fun1d::square(get_num(j, "curvature", where), get_num(j, "center", where));
    if (kind == "box") return Fun1d::box(get_num(j, "lo", where), get_num(j, "hi", where));
    if (kind == "linear") return Fun1d::linear(get_num(j, "slope", where));
    config_fail(where, "unknown 1-d function kind '" + kind + "'");
}

SeparableFun parse_sepfun(const json& j, const std::string& where) {
    if (j.is_array()) {
        std::vector<Fun1d> parts;
        for (const auto& e : j) parts.push_back(parse_fun1d(e, where));
        return SeparableFun(std::move(parts));
    }
    if (j.is_object() && j.contains("piece")) {
        const int d = static_cast<int>(get_num(j, "dim", where));
        if (d < 1) config_fail(where, "dim must be >= 1");
        return SeparableFun(d, parse_fun1d(j["piece"], where));
    }
    config_fail(where, "expected an array of pieces or {piece, dim}");
}

Matrix parse_matrix(const json& j, const std::string& where) {
    if (!j.is_array() || j.empty()) config_fail(where, "matrix must be a nonempty array of rows");
    const int rows = static_cast<int>(j.size());
    const int cols = static_cast<int>(j[0].size());
    Matrix m(rows, cols);
    for (int r = 0; r < rows; ++r) {
        if (!j[static_cast<std::size_t>(r)].is_array() ||
            static_cast<int>(j[static_cast<std::size_t>(r)].size()) != cols)
            config_fail(where, "ragged matrix rows");
        for (int c = 0; c < cols; ++c)
            m.at(r, c) = j[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<double>();
    }
    return m;
}

MaxMonotonePtr parse_maxmono(const json& j, const std::string& where) {
    const std::string kind = get_kind(j, where);
    if (kind == "zero") return make_zero_op(static_cast<int>(get_num(j, "dim", where)));
    if (kind == "l1")
        return make_l1_subdiff(static_cast<int>(get_num(j, "dim", where)), get_num(j, "weight", where));
    if (kind == "quadratic")
        return make_diag_quadratic_subdiff(get_vec(j, "curvature", where), get_vec(j, "center", where));
    if (kind == "box") return make_box_normal_cone(get_vec(j, "lo", where), get_vec(j, "hi", where));
    if (kind == "affine") {
        Matrix m = parse_matrix(j.at("matrix"), where);
        Vec b = j.contains("offset") ? get_vec(j, "offset", where) : zeros(m.rows());
        return make_affine_monotone(std::move(m), std::move(b));
    }
    if (kind == "shifted") {
        if (!j.contains("inner")) config_fail(where, "shifted operator needs 'inner'");
        return make_shifted(parse_maxmono(j["inner"], where + ".inner"), get_vec(j, "shift", where));
    }
    if (kind == "separable") {
        if (!j.contains("parts")) config_fail(where, "separable operator needs 'parts'");
        return make_separable_subdiff(parse_sepfun(j["parts"], where + ".parts"));
    }
    config_fail(where, "unknown operator kind '" + kind + "'");
}

SingleValuedPtr parse_sv_map(const json& j, const std::string& where) {
    const std::string kind = get_kind(j, where);
    if (kind == "identity") return make_identity_map(static_cast<int>(get_num(j, "dim", where)));
    if (kind == "affine") {
        Matrix m = parse_matrix(j.at("matrix"), where);
        Vec b = j.contains("offset") ? get_vec(j, "offset", where) : zeros(m.rows());
        return make_affine_map(std::move(m), std::move(b));
    }
    if (kind == "rotation") return make_rotation_map(get_num(j, "angle", where));
    if (kind == "gradient") {
        if (!j.contains("function")) config_fail(where, "gradient map needs 'function'");
        return make_gradient_map(parse_sepfun(j["function"], where + ".function"));
    }
    config_fail(where, "unknown map kind '" + kind + "'");
}

CocoerciveOp parse_cocoercive(const json& j, const std::string& where) {
    if (j.is_null() || (j.is_string() && j.get<std::string>() == "zero")) return CocoerciveOp::zero();
    if (j.is_object() && j.contains("kind") && j["kind"] == "zero") return CocoerciveOp::zero();
    if (!j.is_object() || !j.contains("map")) config_fail(where, "cocoercive part needs {map, alpha}");
    return {parse_sv_map(j["map"], where + ".map"), get_num(j, "alpha", where)};
}

LipschitzMonotoneOp parse_lipmono(const json& j, const std::string& where) {
    if (j.is_null() || (j.is_string() && j.get<std::string>() == "zero")) return LipschitzMonotoneOp::zero();
    if (j.is_object() && j.contains("kind") && j["kind"] == "zero") return LipschitzMonotoneOp::zero();
    if (!j.is_object() || !j.contains("map")) config_fail(where, "Lipschitz part needs {map, lip}");
    return {parse_sv_map(j["map"], where + ".map"), get_num(j, "lip", where)};
}

std::vector<std::vector<std::optional<LinearMap>>> parse_linmap_grid(const json& j, int nk, int ni,
                                                                     const std::string& where) {
    if (!j.is_array() || static_cast<int>(j.size()) != nk) config_fail(where, "L must have one row per k");
    std::vector<std::vector<std::optional<LinearMap>>> out(static_cast<std::size_t>(nk));
    for (int k = 0; k < nk; ++k) {
        const auto& row = j[static_cast<std::size_t>(k)];
        if (!row.is_array() || static_cast<int>(row.size()) != ni)
            config_fail(where, "L row " + std::to_string(k) + " must have one entry per i");
        for (int i = 0; i < ni; ++i) {
            const auto& cell = row[static_cast<std::size_t>(i)];
            if (cell.is_null()) {
                out[static_cast<std::size_t>(k)].push_back(std::nullopt);
            } else if (cell.is_object() && cell.contains("matrix")) {
                out[static_cast<std::size_t>(k)].push_back(LinearMap(parse_matrix(cell["matrix"], where)));
            } else if (cell.is_array()) {
                out[static_cast<std::size_t>(k)].push_back(LinearMap(parse_matrix(cell, where)));
            } else {
                config_fail(where, "L entries are null or {matrix: [[..]]}");
            }
        }
    }
    return out;
}

BlockSampler parse_block_sampler(const json& j, int count, const std::string& where) {
    if (j.is_null()) return BlockSampler::full(count);
    const std::string kind = get_kind(j, where);
    const int window = j.is_object() && j.contains("window") ? static_cast<int>(get_num(j, "window", where)) : 1;
    if (kind == "full") return BlockSampler::full(count, window);
    if (kind == "iid-uniform-singleton") return BlockSampler::uniform_singleton(count, window);
    if (kind == "iid-bernoulli-per-index") {
        Vec p = get_vec(j, "p", where);
        if (static_cast<int>(p.size()) == 1 && count > 1) p.assign(static_cast<std::size_t>(count), p[0]);
        if (static_cast<int>(p.size()) != count) config_fail(where, "p must have one entry per index");
        return BlockSampler::bernoulli(std::move(p), window);
    }
    config_fail(where, "unknown block sampler kind '" + kind + "'");
}

RelaxationSampler parse_relax(const json& j, const std::string& where) {
    if (j.is_null()) return RelaxationSampler::constant(1.0);
    const std::string kind = get_kind(j, where);
    if (kind == "constant") return RelaxationSampler::constant(get_num(j, "value", where));
    if (kind == "uniform-interval")
        return RelaxationSampler::uniform_interval(get_num(j, "lo", where), get_num(j, "hi", where));
    if (kind == "two-point")
        return RelaxationSampler::two_point(get_num(j, "a", where), get_num(j, "prob_a", where),
                                            get_num(j, "b", where));
    config_fail(where, "unknown relaxation kind '" + kind + "'");
}

GammaRule parse_gamma_rule(const json& j, const std::string& where) {
    if (j.is_null()) return GammaRule::constant(1.0);
    const std::string kind = get_kind(j, where);
    if (kind == "constant") return GammaRule::constant(get_num(j, "value", where));
    if (kind == "decay-to") return GammaRule::decay_to(get_num(j, "limit", where), get_num(j, "start", where));
    if (kind == "inv-sqrt") return GammaRule::inv_sqrt(get_num(j, "scale", where));
    config_fail(where, "unknown gamma rule kind '" + kind + "'");
}

ErrorSchedule parse_error_schedule(const json& j, const std::string& where) {
    if (j.is_null()) return ErrorSchedule::zero();
    const std::string kind = get_kind(j, where);
    if (kind == "zero") return ErrorSchedule::zero();
    if (kind == "deterministic-decay")
        return ErrorSchedule::deterministic(get_num(j, "c", where), get_num(j, "q", where));
    if (kind == "gaussian-decay")
        return ErrorSchedule::gaussian(get_num(j, "c", where), get_num(j, "q", where));
    config_fail(where, "unknown error schedule kind '" + kind + "'");
}

SpaceLayout parse_layout(const json& j, const std::string& key, const std::string& where) {
    const Vec dims = get_vec(j, key, where);
    std::vector<int> d;
    for (double v : dims) d.push_back(static_cast<int>(v));
    return SpaceLayout(d);
}

// ---------------------------------------------------------------------------
// Built problem variants
// ---------------------------------------------------------------------------

struct NamedOp {
    std::string name;
    MaxMonotonePtr op;
};

struct BuiltProblem {
    // ppa / engine-custom
    PpaConfig ppa;
    BlockVector x0_flat;
    CocoerciveOp custom_c;  // engine-custom only
    // saddle / min
    SaddleProblem saddle;
    StepSizes steps;
    SaddleState saddle_init;
    std::optional<MinProblemSpec> min_spec;
    // kt
    KTProblem kt;
    KTStepSizes kt_steps;
    KTState kt_init;
    // shared
    BlockSampler sampler_i = BlockSampler::full(1);
    BlockSampler sampler_k = BlockSampler::full(1);
    RelaxationSampler relax = RelaxationSampler::constant(1.0);
    std::optional<BlockVector> z_ref;
    double x0_jitter = 0.0;
    std::vector<NamedOp> ops;  // for property sampling in check
};

BlockVector make_flat(const Vec& v) { return BlockVector(SpaceLayout({static_cast<int>(v.size())}), v); }

std::optional<BlockVector> resolve_reference(const json& doc, const SpaceLayout& layout,
                                             const json& problem, ValidationReport& rep,
                                             const std::optional<Vec>& fallback) {
    const json ref = doc.value("reference", json{{"kind", "none"}});
    const std::string kind = get_kind(ref, "reference");
    if (kind == "none") return std::nullopt;
    if (kind == "oracle-file") {
        const std::string path = ref.value("path", "");
        std::ifstream in(path);
        if (!in) {
            rep.issues.push_back({"reference", "cannot open oracle file '" + path + "'"});
            return std::nullopt;
        }
        json j;
        in >> j;
        const Vec pt = get_vec(j, "point", "oracle-file");
        if (static_cast<int>(pt.size()) != layout.total_dim()) {
            rep.issues.push_back({"reference", "oracle point dimension mismatch"});
            return std::nullopt;
        }
        return BlockVector(layout, pt);
    }
    if (kind == "constructed") {
        if (problem.contains("zero")) {
            const Vec pt = get_vec(problem, "zero", "problem.zero");
            if (static_cast<int>(pt.size()) != layout.total_dim()) {
                rep.issues.push_back({"reference", "constructed zero dimension mismatch"});
                return std::nullopt;
            }
            return BlockVector(layout, pt);
        }
        if (fallback) return BlockVector(layout, *fallback);
        rep.issues.push_back({"reference", "constructed reference requested but the problem carries no zero"});
        return std::nullopt;
    }
    rep.issues.push_back({"reference", "unknown reference kind '" + kind + "'"});
    return std::nullopt;
}

BuiltProblem build_problem(const json& doc, const std::string& algorithm, ValidationReport& rep) {
    BuiltProblem b;
    if (!doc.contains("problem") || !doc["problem"].is_object())
        config_fail("problem", "missing problem object");
    const json& pj = doc["problem"];
    b.relax = parse_relax(doc.value("relaxation", json()), "relaxation");
    b.x0_jitter = doc.value("x0_jitter", 0.0);

    if (algorithm == "ppa" || algorithm == "engine-custom") {
        b.ppa.op = parse_maxmono(pj.at("operator"), "problem.operator");
        b.ops.push_back({"operator", b.ppa.op});
        b.ppa.gammas = parse_gamma_rule(pj.value("gamma_rule", json()), "problem.gamma_rule");
        b.ppa.errors = parse_error_schedule(doc.value("error_schedule", json()), "error_schedule");
        b.ppa.relax = b.relax;
        const Vec x0 = get_vec(pj, "x0", "problem.x0");
        if (static_cast<int>(x0.size()) != b.ppa.op->dim())
            config_fail("problem.x0", "dimension does not match the operator");
        b.x0_flat = make_flat(x0);
        if (algorithm == "engine-custom") {
            b.custom_c = parse_cocoercive(pj.value("C", json()), "problem.C");
            if (!b.custom_c.is_zero() && b.custom_c.map->dim() != b.ppa.op->dim())
                config_fail("problem.C", "dimension does not match the operator");
        }
        std::optional<Vec> fallback;
        if (auto z = b.ppa.op->known_zero()) fallback = *z;
        b.z_ref = resolve_reference(doc, b.x0_flat.layout(), pj, rep, fallback);
        return b;
    }

    if (algorithm == "saddle" || algorithm == "min") {
        if (algorithm == "saddle") {
            SaddleProblem p;
            p.h = parse_layout(pj, "h_dims", "problem.h_dims");
            p.g = parse_layout(pj, "g_dims", "problem.g_dims");
            const json& bis = pj.at("blocks_i");
            for (std::size_t i = 0; i < bis.size(); ++i) {
                const std::string where = "problem.blocks_i[" + std::to_string(i) + "]";
                SaddleBlockI blk;
                blk.A = parse_maxmono(bis[i].at("A"), where + ".A");
                blk.C = parse_cocoercive(bis[i].value("C", json()), where + ".C");
                blk.Q = parse_lipmono(bis[i].value("Q", json()), where + ".Q");
                blk.s_star = bis[i].contains("s_star") ? get_vec(bis[i], "s_star", where)
                                                       : zeros(p.h.dim(static_cast<int>(i)));
                b.ops.push_back({where + ".A", blk.A});
                p.bi.push_back(std::move(blk));
            }
            const json& bks = pj.at("blocks_k");
            for (std::size_t k = 0; k < bks.size(); ++k) {
                const std::string where = "problem.blocks_k[" + std::to_string(k) + "]";
                SaddleBlockK blk;
                blk.Bm = parse_maxmono(bks[k].at("Bm"), where + ".Bm");
                blk.Bc = parse_cocoercive(bks[k].value("Bc", json()), where + ".Bc");
                blk.Bl = parse_lipmono(bks[k].value("Bl", json()), where + ".Bl");
                blk.Dm = parse_maxmono(bks[k].at("Dm"), where + ".Dm");
                blk.Dc = parse_cocoercive(bks[k].value("Dc", json()), where + ".Dc");
                blk.Dl = parse_lipmono(bks[k].value("Dl", json()), where + ".Dl");
                blk.r = bks[k].contains("r") ? get_vec(bks[k], "r", where)
                                             : zeros(p.g.dim(static_cast<int>(k)));
                b.ops.push_back({where + ".Bm", blk.Bm});
                b.ops.push_back({where + ".Dm", blk.Dm});
                p.bk.push_back(std::move(blk));
            }
            p.R = parse_lipmono(pj.value("R", json()), "problem.R");
            p.L = parse_linmap_grid(pj.at("L"), p.nk(), p.ni(), "problem.L");
            p.validate_shapes();
            b.saddle = std::move(p);
        } else {
            MinProblemSpec spec;
            spec.h = parse_layout(pj, "h_dims", "problem.h_dims");
            spec.g = parse_layout(pj, "g_dims", "problem.g_dims");
            auto seplist = [&](const char* key) {
                std::vector<SeparableFun> fs;
                for (const auto& e : pj.at(key)) fs.push_back(parse_sepfun(e, std::string("problem.") + key));
                return fs;
            };
            spec.f = seplist("f");
            spec.phi = seplist("phi");
            spec.alpha_i = get_vec(pj, "alpha", "problem.alpha");
            spec.gfun = seplist("g");
            spec.psi = seplist("psi");
            spec.beta_k = get_vec(pj, "beta", "problem.beta");
            spec.hfun = seplist("h");
            spec.L = parse_linmap_grid(pj.at("L"), spec.g.blocks(), spec.h.blocks(), "problem.L");
            spec.theta_grad = parse_lipmono(pj.value("theta", json()), "problem.theta");
            b.saddle = build_min_problem(spec);
            b.min_spec = std::move(spec);
            for (int i = 0; i < b.saddle.ni(); ++i)
                b.ops.push_back({"problem.f[" + std::to_string(i) + "]", b.saddle.bi[static_cast<std::size_t>(i)].A});
            for (int k = 0; k < b.saddle.nk(); ++k) {
                b.ops.push_back({"problem.g[" + std::to_string(k) + "]", b.saddle.bk[static_cast<std::size_t>(k)].Bm});
                b.ops.push_back({"problem.h[" + std::to_string(k) + "]", b.saddle.bk[static_cast<std::size_t>(k)].Dm});
            }
        }
        const json& sj = doc.contains("step_sizes") ? doc["step_sizes"] : json::object();
        b.steps.sigma = sj.value("sigma", 0.0);
        b.steps.epsilon = sj.value("epsilon", 0.0);
        b.steps.gamma = sj.contains("gamma") ? get_vec(sj, "gamma", "step_sizes") : Vec{};
        b.steps.mu = sj.contains("mu") ? get_vec(sj, "mu", "step_sizes") : Vec{};
        b.steps.nu = sj.contains("nu") ? get_vec(sj, "nu", "step_sizes") : Vec{};
        b.steps.sigk = sj.contains("sigma_k") ? get_vec(sj, "sigma_k", "step_sizes") : Vec{};
        const StepSizeReport srep = validate_step_sizes(b.saddle, b.steps);
        for (const auto& v : srep.violations) rep.issues.push_back({"step_sizes", v.message});

        b.saddle_init = SaddleState::initial(
            b.saddle, BlockVector(b.saddle.h, get_vec(pj, "x0", "problem.x0")),
            BlockVector(b.saddle.g, get_vec(pj, "y0", "problem.y0")),
            BlockVector(b.saddle.g, get_vec(pj, "z0", "problem.z0")),
            BlockVector(b.saddle.g, get_vec(pj, "v0", "problem.v0")));
        b.sampler_i = parse_block_sampler(doc.value("block_sampler", json()), b.saddle.ni(), "block_sampler");
        b.sampler_k = doc.contains("block_sampler_k")
                          ? parse_block_sampler(doc["block_sampler_k"], b.saddle.nk(), "block_sampler_k")
                          : parse_block_sampler(doc.value("block_sampler", json()), b.saddle.nk(), "block_sampler");
        const double rho = doc.value("rho", 2.0);
        if (!(b.relax.min_support() >= b.steps.epsilon) || !(b.relax.max_support() <= rho))
            rep.issues.push_back({"relaxation", "support must lie in [epsilon, rho]"});
        if (!(b.relax.moment() > 0.0))
            rep.issues.push_back({"relaxation", "law must satisfy E[lambda(2-lambda)] > 0 (got " +
                                                    std::to_string(b.relax.moment()) + ")"});
        b.z_ref = resolve_reference(doc, saddle_packed_layout(b.saddle), pj, rep, std::nullopt);
        return b;
    }

    if (algorithm == "kt") {
        KTProblem p;
        p.h = parse_layout(pj, "h_dims", "problem.h_dims");
        p.g = parse_layout(pj, "g_dims", "problem.g_dims");
        for (std::size_t i = 0; i < pj.at("A").size(); ++i) {
            p.A.push_back(parse_maxmono(pj["A"][i], "problem.A[" + std::to_string(i) + "]"));
            b.ops.push_back({"problem.A[" + std::to_string(i) + "]", p.A.back()});
        }
        for (std::size_t k = 0; k < pj.at("B").size(); ++k) {
            p.B.push_back(parse_maxmono(pj["B"][k], "problem.B[" + std::to_string(k) + "]"));
            b.ops.push_back({"problem.B[" + std::to_string(k) + "]", p.B.back()});
        }
        p.L = parse_linmap_grid(pj.at("L"), p.nk(), p.ni(), "problem.L");
        p.validate_shapes();
        const json& sj = doc.contains("step_sizes") ? doc["step_sizes"] : json::object();
        b.kt_steps.epsilon = sj.value("epsilon", 0.0);
        b.kt_steps.gamma = sj.contains("gamma") ? get_vec(sj, "gamma", "step_sizes") : Vec{};
        b.kt_steps.mu = sj.contains("mu") ? get_vec(sj, "mu", "step_sizes") : Vec{};
        try {
            b.kt_steps.validate(p);
        } catch (const std::exception& ex) {
            rep.issues.push_back({"step_sizes", ex.what()});
        }
        b.kt_init = KTState::initial(p, BlockVector(p.h, get_vec(pj, "x0", "problem.x0")),
                                     BlockVector(p.g, get_vec(pj, "v0", "problem.v0")));
        b.sampler_i = parse_block_sampler(doc.value("block_sampler", json()), p.ni(), "block_sampler");
        b.sampler_k = doc.contains("block_sampler_k")
                          ? parse_block_sampler(doc["block_sampler_k"], p.nk(), "block_sampler_k")
                          : parse_block_sampler(doc.value("block_sampler", json()), p.nk(), "block_sampler");
        const double rho = doc.value("rho", 2.0);
        if (!(b.relax.min_support() >= b.kt_steps.epsilon) || !(b.relax.max_support() <= rho))
            rep.issues.push_back({"relaxation", "support must lie in [epsilon, rho]"});
        if (!(b.relax.moment() > 0.0))
            rep.issues.push_back({"relaxation", "law must satisfy E[lambda(2-lambda)] > 0 (got " +
                                                    std::to_string(b.relax.moment()) + ")"});
        b.z_ref = resolve_reference(doc, kt_packed_layout(p), pj, rep, std::nullopt);
        b.kt = std::move(p);
        return b;
    }

    config_fail("algorithm", "unknown algorithm '" + algorithm + "'");
}

void sample_operator_properties(const BuiltProblem& b, ValidationReport& rep) {
    RngStream rng(0xC0FFEE, "property-sampling");
    for (const NamedOp& no : b.ops) {
        const int d = no.op->dim();
        double worst = 0.0;
        for (int t = 0; t < 50; ++t) {
            const double gamma = std::exp(rng.next_uniform(-2.0, 2.0));
            Vec x(static_cast<std::size_t>(d)), y(static_cast<std::size_t>(d));
            for (auto& v : x) v = 4.0 * rng.next_gaussian();
            for (auto& v : y) v = 4.0 * rng.next_gaussian();
            const double r = check_firm_nonexpansive(*no.op, gamma, ConstSpan(x), ConstSpan(y));
            const double scale = std::max(1.0, norm_sq(ConstSpan(sub(ConstSpan(x), ConstSpan(y)))));
            worst = std::max(worst, r / scale);
        }
        if (worst > 1e-10)
            rep.issues.push_back({no.name, "resolvent failed sampled firm-nonexpansiveness (residual " +
                                               std::to_string(worst) + ")"});
    }
}

void validate_algorithm(const json& doc, const std::string& algorithm, BuiltProblem& b,
                        ValidationReport& rep) {
    if (algorithm == "ppa") {
        if (!(b.relax.min_support() > 0.0) || !(b.relax.max_support() < 2.0))
            rep.issues.push_back({"relaxation", "support must lie strictly inside (0, 2)"});
        const PpaRegime r = validate_regime(b.ppa);
        rep.notes.push_back("regime: " + to_string(r));
        if (r == PpaRegime::None)
            rep.issues.push_back(
                {"problem", "no admissible regime: need gamma=1, or inf gamma>0 with E[lambda(2-lambda)]>0, "
                            "or divergent sum of gamma^2 with lambda=1"});
    } else if (algorithm == "engine-custom") {
        if (!b.custom_c.is_zero()) {
            const double cap = 4.0 * b.custom_c.alpha;
            for (std::int64_t n = 0; n < 4; ++n)
                if (!(b.ppa.gammas.value(n) < cap)) {
                    rep.issues.push_back({"problem.gamma_rule",
                                          "gamma must stay below 4*alpha for a positive certified gap"});
                    break;
                }
        }
        if (!(b.relax.moment() >= 0.0))
            rep.issues.push_back({"relaxation", "law must satisfy E[lambda(2-lambda)] >= 0"});
    }
    if (algorithm == "saddle" || algorithm == "min") {
        rep.notes.push_back("alpha: " + std::to_string(b.saddle.alpha()));
        rep.notes.push_back("relaxation moment: " + std::to_string(b.relax.moment()) +
                            ", P(lambda>2): " + std::to_string(b.relax.prob_above_two()));
    }
    if (algorithm == "kt")
        rep.notes.push_back("relaxation moment: " + std::to_string(b.relax.moment()) +
                            ", P(lambda>2): " + std::to_string(b.relax.prob_above_two()));
}

}  // namespace

json ValidationReport::to_json() const {
    json j;
    j["ok"] = ok();
    j["issues"] = json::array();
    for (const auto& i : issues) j["issues"].push_back({{"where", i.where}, {"message", i.message}});
    j["notes"] = notes;
    return j;
}

RunConfig load_config(const std::filesystem::path& path, ValidationReport& report) {
    std::ifstream in(path);
    if (!in) throw ParameterError("config: cannot open '" + path.string() + "'");
    json doc;
    try {
        in >> doc;
    } catch (const std::exception& ex) {
        throw ParameterError(std::string("config: invalid JSON: ") + ex.what());
    }

    RunConfig cfg;
    cfg.echo = doc;
    if (!doc.contains("algorithm") || !doc["algorithm"].is_string())
        config_fail("algorithm", "missing string field");
    cfg.algorithm = doc["algorithm"].get<std::string>();
    cfg.n_iter = doc.value("n_iter", 0);
    if (cfg.n_iter < 1) report.issues.push_back({"n_iter", "must be >= 1"});
    cfg.residual_every = doc.value("residual_every", 10);
    cfg.rho = doc.value("rho", 2.0);
    cfg.out_dir = doc.value("out_dir", "");

    if (doc.contains("seeds")) {
        const json& sj = doc["seeds"];
        if (sj.is_array()) {
            for (const auto& e : sj) cfg.seeds.push_back(e.get<std::uint64_t>());
        } else if (sj.is_object() && sj.contains("list")) {
            for (const auto& e : sj["list"]) cfg.seeds.push_back(e.get<std::uint64_t>());
        } else if (sj.is_object()) {
            const std::uint64_t base = sj.value("base", 1ULL);
            const std::uint64_t count = sj.value("count", 1ULL);
            for (std::uint64_t s = 0; s < count; ++s) cfg.seeds.push_back(base + s);
        }
    }
    if (cfg.seeds.empty()) report.issues.push_back({"seeds", "no seeds specified"});

    cfg.fingerprint = fnv1a64(doc.dump());

    // Build everything once to surface structural and semantic problems.
    try {
        BuiltProblem b = build_problem(doc, cfg.algorithm, report);
        validate_algorithm(doc, cfg.algorithm, b, report);
        sample_operator_properties(b, report);
    } catch (const std::exception& ex) {
        report.issues.push_back({"problem", ex.what()});
    }
    return cfg;
}

void apply_seeds_flag(RunConfig& cfg, const std::string& flag) {
    if (flag.empty()) return;
    std::vector<std::uint64_t> seeds;
    if (flag.find(',') == std::string::npos) {
        const std::uint64_t count = std::stoull(flag);
        const std::uint64_t base = cfg.seeds.empty() ? 1 : cfg.seeds.front();
        for (std::uint64_t s = 0; s < count; ++s) seeds.push_back(base + s);
    } else {
        std::stringstream ss(flag);
        std::string tok;
        while (std::getline(ss, tok, ',')) seeds.push_back(std::stoull(tok));
    }
    cfg.seeds = std::move(seeds);
}

namespace {

SeedRunData run_one_seed(const json& doc, const RunConfig& cfg, const BuiltProblem& b,
                         std::uint64_t seed) {
    SeedRunData out;
    out.seed = seed;

    auto jitter_flat = [&](const BlockVector& x0) {
        if (b.x0_jitter == 0.0) return x0;
        RngStream init(seed, "init");
        Vec v = x0.data();
        for (double& e : v) e += b.x0_jitter * init.next_gaussian();
        return BlockVector(x0.layout(), std::move(v));
    };

    if (cfg.algorithm == "ppa") {
        PpaRunOptions opts;
        opts.fingerprint = cfg.fingerprint;
        if (b.z_ref) opts.z_ref = &*b.z_ref;
        const PpaRunResult r = run_ppa(b.ppa, jitter_flat(b.x0_flat), cfg.n_iter, seed, opts);
        out.trace = r.trace;
    } else if (cfg.algorithm == "engine-custom") {
        EngineConfig ec;
        ec.alpha = b.custom_c.is_zero() ? kInf : b.custom_c.alpha;
        ec.rho = cfg.rho;
        const SpaceLayout layout = b.x0_flat.layout();
        const PpaConfig& pc = b.ppa;
        const CocoerciveOp cc = b.custom_c;
        Supplier supplier = [&pc, &cc, layout](std::int64_t n, const BlockVector& x, RngStream& noise) {
            const double gamma = pc.gammas.value(n);
            const Vec err = pc.errors.sample(n, x.dim(), noise);
            const Vec cx = cc.eval(ConstSpan(x.data()));
            Vec arg = sub(ConstSpan(x.data()), ConstSpan(scaled(gamma, ConstSpan(cx))));
            const Vec j = resolvent(*pc.op, gamma, ConstSpan(arg));
            GraphSample s;
            Vec w = sub(ConstSpan(j), ConstSpan(err));
            Vec wstar(w.size());
            for (std::size_t i = 0; i < w.size(); ++i)
                wstar[i] = (x.data()[i] - w[i]) / gamma - cx[i];
            s.w = BlockVector(layout, std::move(w));
            s.wstar = BlockVector(layout, std::move(wstar));
            s.e = BlockVector(layout, err);
            s.estar = BlockVector(layout, scaled(-1.0 / gamma, ConstSpan(err)));
            s.q = x;
            s.cstar = BlockVector(layout, cx);
            s.fstar = BlockVector(layout);
            return s;
        };
        RunOptions opts;
        opts.fingerprint = cfg.fingerprint;
        if (b.z_ref) opts.z_ref = &*b.z_ref;
        opts.residual_fn = [&pc, &cc](const BlockVector& x) {
            const double gamma = pc.gammas.value(0);
            const Vec cx = cc.eval(ConstSpan(x.data()));
            Vec arg = sub(ConstSpan(x.data()), ConstSpan(scaled(gamma, ConstSpan(cx))));
            const Vec j = resolvent(*pc.op, gamma, ConstSpan(arg));
            return norm(ConstSpan(sub(ConstSpan(x.data()), ConstSpan(j))));
        };
        opts.residual_every = cfg.residual_every;
        const RunResult r = run(jitter_flat(b.x0_flat), supplier, b.relax, ec, cfg.n_iter, seed, opts);
        out.trace = r.trace;
    } else if (cfg.algorithm == "saddle" || cfg.algorithm == "min") {
        SaddleRunOptions opts;
        opts.fingerprint = cfg.fingerprint;
        opts.residual_every = cfg.residual_every;
        opts.check_invariants = true;
        if (b.z_ref) opts.z_ref = &*b.z_ref;
        SaddleState init = b.saddle_init;
        if (b.x0_jitter != 0.0) {
            RngStream ir(seed, "init");
            for (double& e : init.x.data()) e += b.x0_jitter * ir.next_gaussian();
        }
        const SaddleRunResult r = run_saddle(b.saddle, b.steps, b.sampler_i, b.sampler_k, b.relax,
                                             cfg.rho, init, cfg.n_iter, seed, opts);
        out.trace = r.trace;
    } else if (cfg.algorithm == "kt") {
        KTRunOptions opts;
        opts.fingerprint = cfg.fingerprint;
        opts.residual_every = cfg.residual_every;
        opts.check_invariants = true;
        if (b.z_ref) opts.z_ref = &*b.z_ref;
        KTState init = b.kt_init;
        if (b.x0_jitter != 0.0) {
            RngStream ir(seed, "init");
            for (double& e : init.x.data()) e += b.x0_jitter * ir.next_gaussian();
        }
        const KTRunResult r = run_kt(b.kt, b.kt_steps, b.sampler_i, b.sampler_k, b.relax, cfg.rho,
                                     init, cfg.n_iter, seed, opts);
        out.trace = r.trace;
    } else {
        throw ParameterError("run: unknown algorithm '" + cfg.algorithm + "'");
    }

    for (auto it = out.trace.rows.rbegin(); it != out.trace.rows.rend(); ++it) {
        if (!std::isnan(it->residual)) {
            out.final_residual = it->residual;
            break;
        }
    }
    if (!out.trace.rows.empty()) out.final_dist = out.trace.rows.back().dist_to_ref;
    return out;
}

}  // namespace

std::vector<SeedRunData> run_all_seeds(const json& doc, const RunConfig& cfg) {
    ValidationReport rep;
    BuiltProblem b = build_problem(doc, cfg.algorithm, rep);
    if (!rep.ok())
        throw ParameterError("run: invalid configuration: " + rep.issues.front().where + ": " +
                             rep.issues.front().message);

    std::vector<SeedRunData> results(cfg.seeds.size());
    std::atomic<std::size_t> next{0};
    const unsigned workers =
        std::max(1u, std::min(std::thread::hardware_concurrency(), static_cast<unsigned>(cfg.seeds.size())));
    std::vector<std::thread> pool;
    std::atomic<bool> failed{false};
    std::string error_message;
    std::mutex error_mutex;
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
            while (true) {
                const std::size_t idx = next.fetch_add(1);
                if (idx >= cfg.seeds.size() || failed.load()) break;
                try {
                    results[idx] = run_one_seed(doc, cfg, b, cfg.seeds[idx]);
                } catch (const std::exception& ex) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    failed.store(true);
                    error_message = "seed " + std::to_string(cfg.seeds[idx]) + ": " + ex.what();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failed.load()) throw NumericalError("run: " + error_message);
    return results;
}

namespace {

json summary_json(const RunConfig& cfg, const ValidationReport& rep,
                  const std::vector<SeedRunData>& runs) {
    json j;
    j["schema"] = "splitmc-run-summary-v1";
    j["algorithm"] = cfg.algorithm;
    j["config"] = cfg.echo;
    char fp[32];
    std::snprintf(fp, sizeof(fp), "%016llx", static_cast<unsigned long long>(cfg.fingerprint));
    j["fingerprint"] = fp;
    j["n_iter"] = cfg.n_iter;
    j["seeds"] = cfg.seeds;
    j["validation"] = rep.to_json();

    json per = json::array();
    double dist_sum = 0.0, res_sum = 0.0;
    int dist_n = 0, res_n = 0;
    std::vector<std::size_t> order(runs.size());
    for (std::size_t i = 0; i < runs.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t bidx) { return runs[a].seed < runs[bidx].seed; });
    for (std::size_t i : order) {
        const SeedRunData& r = runs[i];
        json e;
        e["seed"] = r.seed;
        e["final_dist"] = std::isnan(r.final_dist) ? json() : json(r.final_dist);
        e["final_residual"] = std::isnan(r.final_residual) ? json() : json(r.final_residual);
        per.push_back(e);
        if (!std::isnan(r.final_dist)) {
            dist_sum += r.final_dist;
            ++dist_n;
        }
        if (!std::isnan(r.final_residual)) {
            res_sum += r.final_residual;
            ++res_n;
        }
    }
    j["final"] = {{"per_seed", per},
                  {"mean_dist", dist_n ? json(dist_sum / dist_n) : json()},
                  {"mean_residual", res_n ? json(res_sum / res_n) : json()}};

    // provenance: the sampling laws actually in force, with exact moments
    json prov;
    {
        const RelaxationSampler r = parse_relax(cfg.echo.value("relaxation", json()), "relaxation");
        prov["relaxation"] = {{"kind", r.describe()},
                              {"moment", r.moment()},
                              {"p_above_2", r.prob_above_two()},
                              {"support", {r.min_support(), r.max_support()}}};
    }
    if (cfg.echo.contains("block_sampler")) prov["block_sampler"] = cfg.echo["block_sampler"];
    if (cfg.echo.contains("block_sampler_k")) prov["block_sampler_k"] = cfg.echo["block_sampler_k"];
    if (cfg.echo.contains("error_schedule")) prov["error_schedule"] = cfg.echo["error_schedule"];
    j["provenance"] = prov;
    return j;
}

int do_run(const json& doc, RunConfig& cfg, const ValidationReport& rep,
           const std::filesystem::path& out, bool quiet) {
    std::vector<SeedRunData> runs;
    try {
        runs = run_all_seeds(doc, cfg);
    } catch (const std::exception& ex) {
        if (!quiet) std::cerr << ex.what() << "\n";
        return 3;
    }
    std::filesystem::create_directories(out);
    for (const SeedRunData& r : runs)
        write_trace_csv(out / ("trace_" + std::to_string(r.seed) + ".csv"), r.trace);

    std::vector<Trace> traces;
    traces.reserve(runs.size());
    for (const SeedRunData& r : runs) traces.push_back(r.trace);
    try {
        write_summary_series_csv(out / "summary_series.csv", summarize(traces));
    } catch (const std::exception&) {
        // traces of unequal length cannot happen here; guard stays for safety
    }
    const json sj = summary_json(cfg, rep, runs);
    write_text_atomic(out / "summary.json", sj.dump(2) + "\n");
    write_text_atomic(out / "validation.json", rep.to_json().dump(2) + "\n");
    if (!quiet) {
        const auto& fin = sj["final"];
        std::cout << "wrote " << runs.size() << " trace(s) to " << out.string() << "\n"
                  << "final mean dist: " << fin["mean_dist"].dump()
                  << "  final mean residual: " << fin["mean_residual"].dump() << "\n";
    }
    return 0;
}

}  // namespace

int cmd_check(const std::filesystem::path& config_path, bool quiet) {
    ValidationReport rep;
    try {
        (void)load_config(config_path, rep);
    } catch (const std::exception& ex) {
        rep.issues.push_back({"config", ex.what()});
    }
    if (!quiet) std::cout << rep.to_json().dump(2) << "\n";
    return rep.ok() ? 0 : 2;
}

int cmd_run(const std::filesystem::path& config_path, const std::string& out_override,
            const std::string& seeds_flag, bool quiet) {
    ValidationReport rep;
    RunConfig cfg;
    try {
        cfg = load_config(config_path, rep);
        apply_seeds_flag(cfg, seeds_flag);
    } catch (const std::exception& ex) {
        if (!quiet) std::cerr << ex.what() << "\n";
        return 2;
    }
    if (!rep.ok()) {
        if (!quiet) std::cerr << rep.to_json().dump(2) << "\n";
        return 2;
    }
    std::filesystem::path out = out_override.empty() ? cfg.out_dir : out_override;
    if (out.empty()) {
        if (!quiet) std::cerr << "no output directory (set out_dir in the config or pass --out)\n";
        return 2;
    }
    return do_run(cfg.echo, cfg, rep, out, quiet);
}

int cmd_sweep(const std::filesystem::path& config_path, const std::string& out_override,
              const std::string& seeds_flag, bool quiet) {
    json doc;
    {
        std::ifstream in(config_path);
        if (!in) {
            if (!quiet) std::cerr << "cannot open " << config_path << "\n";
            return 2;
        }
        try {
            in >> doc;
        } catch (const std::exception& ex) {
            if (!quiet) std::cerr << "invalid JSON: " << ex.what() << "\n";
            return 2;
        }
    }
    if (!doc.contains("sweep") || !doc["sweep"].is_object() || !doc["sweep"].contains("axes") ||
        !doc["sweep"]["axes"].is_array() || doc["sweep"]["axes"].empty()) {
        if (!quiet) std::cerr << "sweep config needs a nonempty sweep.axes array\n";
        return 2;
    }
    const json axes = doc["sweep"]["axes"];
    for (const auto& ax : axes) {
        if (!ax.contains("path") || !ax.contains("values") || !ax["values"].is_array() ||
            ax["values"].empty()) {
            if (!quiet) std::cerr << "each axis needs a 'path' and nonempty 'values'\n";
            return 2;
        }
    }

    std::filesystem::path out = out_override.empty() ? doc.value("out_dir", "") : out_override;
    if (out.empty()) {
        if (!quiet) std::cerr << "no output directory\n";
        return 2;
    }

    std::vector<std::size_t> sizes;
    std::size_t total = 1;
    for (const auto& ax : axes) {
        sizes.push_back(ax["values"].size());
        total *= ax["values"].size();
    }

    std::string table = "index";
    for (const auto& ax : axes) table += "," + ax["path"].get<std::string>();
    table += ",mean_dist,mean_residual\n";

    for (std::size_t idx = 0; idx < total; ++idx) {
        json point = doc;
        point.erase("sweep");
        std::size_t rem = idx;
        std::string row = std::to_string(idx);
        for (std::size_t a = 0; a < sizes.size(); ++a) {
            const std::size_t pick = rem % sizes[a];
            rem /= sizes[a];
            const std::string path = axes[a]["path"].get<std::string>();
            const json value = axes[a]["values"][pick];
            point[path] = value;
            std::string cell = value.dump();
            std::replace(cell.begin(), cell.end(), ',', ';');
            row += "," + cell;
        }
        const std::filesystem::path grid_dir = out / ("grid_" + std::to_string(idx));
        const std::filesystem::path cfg_path = grid_dir / "config.json";
        std::filesystem::create_directories(grid_dir);
        write_text_atomic(cfg_path, point.dump(2) + "\n");

        ValidationReport rep;
        RunConfig cfg;
        try {
            cfg = load_config(cfg_path, rep);
            apply_seeds_flag(cfg, seeds_flag);
        } catch (const std::exception& ex) {
            if (!quiet) std::cerr << "grid " << idx << ": " << ex.what() << "\n";
            return 2;
        }
        if (!rep.ok()) {
            if (!quiet) std::cerr << "grid " << idx << ": " << rep.to_json().dump(2) << "\n";
            return 2;
        }
        const int rc = do_run(cfg.echo, cfg, rep, grid_dir, true);
        if (rc != 0) return rc;

        std::ifstream sin(grid_dir / "summary.json");
        json sj;
        sin >> sj;
        row += "," + sj["final"]["mean_dist"].dump() + "," + sj["final"]["mean_residual"].dump();
        table += row + "\n";
        if (!quiet) std::cout << "grid " << idx << " done\n";
    }
    write_text_atomic(out / "comparison.csv", table);
    return 0;
}

}  // namespace splitmc::cli
