#include "splitmc/kt.hpp"

#include <algorithm>
#include <cmath>

namespace splitmc {

namespace {

bool is_full(const std::vector<int>& active, int count) {
    return static_cast<int>(active.size()) == count;
}

std::vector<char> membership(const std::vector<int>& active, int count) {
    std::vector<char> in(static_cast<std::size_t>(count), 0);
    for (int i : active) {
        if (i < 0 || i >= count) throw ParameterError("active index out of range");
        in[static_cast<std::size_t>(i)] = 1;
    }
    return in;
}

std::string format_active(const std::vector<int>& ai, const std::vector<int>& ak, int ni, int nk) {
    if (is_full(ai, ni) && is_full(ak, nk)) return "all";
    std::string s = "I:";
    for (std::size_t j = 0; j < ai.size(); ++j) {
        if (j) s += ';';
        s += std::to_string(ai[j]);
    }
    s += "|K:";
    for (std::size_t j = 0; j < ak.size(); ++j) {
        if (j) s += ';';
        s += std::to_string(ak[j]);
    }
    return s;
}

}  // namespace

void KTProblem::validate_shapes() const {
    if (h.blocks() != ni()) throw StructuralError("KTProblem: H layout vs primal operator count");
    if (g.blocks() != nk()) throw StructuralError("KTProblem: G layout vs dual operator count");
    for (int i = 0; i < ni(); ++i)
        if (!A[static_cast<std::size_t>(i)] || A[static_cast<std::size_t>(i)]->dim() != h.dim(i))
            throw StructuralError("KTProblem: A dimension mismatch at block " + std::to_string(i));
    for (int k = 0; k < nk(); ++k)
        if (!B[static_cast<std::size_t>(k)] || B[static_cast<std::size_t>(k)]->dim() != g.dim(k))
            throw StructuralError("KTProblem: B dimension mismatch at block " + std::to_string(k));
    if (static_cast<int>(L.size()) != nk()) throw StructuralError("KTProblem: L row count");
    for (int k = 0; k < nk(); ++k) {
        if (static_cast<int>(L[static_cast<std::size_t>(k)].size()) != ni())
            throw StructuralError("KTProblem: L column count");
        for (int i = 0; i < ni(); ++i) {
            const auto& l = L[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
            if (l && (l->in_dim() != h.dim(i) || l->out_dim() != g.dim(k)))
                throw StructuralError("KTProblem: L[" + std::to_string(k) + "][" + std::to_string(i) +
                                      "] dimension mismatch");
        }
    }
}

Vec KTProblem::apply_L_row(int k, const BlockVector& x) const {
    Vec acc = zeros(g.dim(k));
    for (int i = 0; i < ni(); ++i) {
        const auto& l = L[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
        if (!l) continue;
        const Vec t = l->apply(x.block(i));
        for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += t[j];
    }
    return acc;
}

Vec KTProblem::apply_L_adjoint_col(int i, const BlockVector& v) const {
    Vec acc = zeros(h.dim(i));
    for (int k = 0; k < nk(); ++k) {
        const auto& l = L[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
        if (!l) continue;
        const Vec t = l->adjoint(v.block(k));
        for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += t[j];
    }
    return acc;
}

void KTStepSizes::validate(const KTProblem& p) const {
    if (!(epsilon > 0.0) || !(epsilon < 1.0)) throw ParameterError("KTStepSizes: epsilon must lie in (0,1)");
    if (static_cast<int>(gamma.size()) != p.ni() || static_cast<int>(mu.size()) != p.nk())
        throw StructuralError("KTStepSizes: rule counts do not match the problem");
    const double cap = 1.0 / epsilon;
    for (std::size_t i = 0; i < gamma.size(); ++i)
        if (!(gamma[i] >= epsilon) || !(gamma[i] <= cap))
            throw ParameterError("KTStepSizes: gamma[" + std::to_string(i) + "] outside [epsilon, 1/epsilon]");
    for (std::size_t k = 0; k < mu.size(); ++k)
        if (!(mu[k] >= epsilon) || !(mu[k] <= cap))
            throw ParameterError("KTStepSizes: mu[" + std::to_string(k) + "] outside [epsilon, 1/epsilon]");
}

KTState KTState::initial(const KTProblem& p, BlockVector x, BlockVector vstar) {
    if (!(x.layout() == p.h) || !(vstar.layout() == p.g))
        throw StructuralError("KTState: layouts do not match the problem");
    KTState st;
    st.x = std::move(x);
    st.vstar = std::move(vstar);
    st.a.resize(static_cast<std::size_t>(p.ni()));
    st.astar.resize(static_cast<std::size_t>(p.ni()));
    st.b.resize(static_cast<std::size_t>(p.nk()));
    st.bstar.resize(static_cast<std::size_t>(p.nk()));
    st.act_i = LastActivation(p.ni());
    st.act_k = LastActivation(p.nk());
    return st;
}

StepRecord kt_iterate(const KTProblem& p, const KTStepSizes& s, KTState& st,
                      const std::vector<int>& active_i, const std::vector<int>& active_k,
                      double lambda) {
    const int ni = p.ni();
    const int nk = p.nk();
    if (st.next_n == 0 && (!is_full(active_i, ni) || !is_full(active_k, nk)))
        throw ParameterError("kt_iterate: the first iteration must activate every index");
    const std::vector<char> in_i = membership(active_i, ni);
    const std::vector<char> in_k = membership(active_k, nk);

    for (int i = 0; i < ni; ++i) {
        if (!in_i[static_cast<std::size_t>(i)]) continue;
        const double gi = s.gamma[static_cast<std::size_t>(i)];
        ConstSpan xi = st.x.block(i);
        const Vec lstar = p.apply_L_adjoint_col(i, st.vstar);
        Vec arg(xi.begin(), xi.end());
        for (std::size_t j = 0; j < arg.size(); ++j) arg[j] -= gi * lstar[j];
        Vec ai = resolvent(*p.A[static_cast<std::size_t>(i)], gi, ConstSpan(arg));
        Vec aistar(ai.size());
        for (std::size_t j = 0; j < ai.size(); ++j) aistar[j] = (xi[j] - ai[j]) / gi - lstar[j];
        st.a[static_cast<std::size_t>(i)] = std::move(ai);
        st.astar[static_cast<std::size_t>(i)] = std::move(aistar);
    }
    for (int k = 0; k < nk; ++k) {
        if (!in_k[static_cast<std::size_t>(k)]) continue;
        const double mk = s.mu[static_cast<std::size_t>(k)];
        ConstSpan vk = st.vstar.block(k);
        const Vec lk = p.apply_L_row(k, st.x);
        Vec arg(lk.size());
        for (std::size_t j = 0; j < arg.size(); ++j) arg[j] = lk[j] + mk * vk[j];
        Vec bk = resolvent(*p.B[static_cast<std::size_t>(k)], mk, ConstSpan(arg));
        Vec bkstar(bk.size());
        for (std::size_t j = 0; j < bk.size(); ++j) bkstar[j] = vk[j] + (lk[j] - bk[j]) / mk;
        st.b[static_cast<std::size_t>(k)] = std::move(bk);
        st.bstar[static_cast<std::size_t>(k)] = std::move(bkstar);
    }

    // Directions for every index, fresh or carried.
    BlockVector a_packed(p.h);
    for (int i = 0; i < ni; ++i) {
        Span dst = a_packed.block(i);
        const Vec& src = st.a[static_cast<std::size_t>(i)];
        std::copy(src.begin(), src.end(), dst.begin());
    }
    BlockVector bstar_packed(p.g);
    for (int k = 0; k < nk; ++k) {
        Span dst = bstar_packed.block(k);
        const Vec& src = st.bstar[static_cast<std::size_t>(k)];
        std::copy(src.begin(), src.end(), dst.begin());
    }

    // The certified gap in its contracted form <(x,v*) - (a,b*) | (t*,t)>;
    // expanding it coordinate-wise cancels O(1) products and loses digits
    // exactly where the gap approaches zero.
    std::vector<Vec> tstar(static_cast<std::size_t>(ni));
    std::vector<Vec> tdir(static_cast<std::size_t>(nk));
    double delta = 0.0;
    double denom = 0.0;
    for (int i = 0; i < ni; ++i) {
        Vec ti = p.apply_L_adjoint_col(i, bstar_packed);
        const Vec& ai = st.a[static_cast<std::size_t>(i)];
        const Vec& as = st.astar[static_cast<std::size_t>(i)];
        ConstSpan xi = st.x.block(i);
        for (std::size_t j = 0; j < ti.size(); ++j) {
            ti[j] += as[j];
            delta += (xi[j] - ai[j]) * ti[j];
            denom += ti[j] * ti[j];
        }
        tstar[static_cast<std::size_t>(i)] = std::move(ti);
    }
    for (int k = 0; k < nk; ++k) {
        const Vec la = p.apply_L_row(k, a_packed);
        const Vec& bb = st.b[static_cast<std::size_t>(k)];
        const Vec& bs = st.bstar[static_cast<std::size_t>(k)];
        ConstSpan vk = st.vstar.block(k);
        Vec tk(bb.size());
        for (std::size_t j = 0; j < tk.size(); ++j) {
            tk[j] = bb[j] - la[j];
            delta += (vk[j] - bs[j]) * tk[j];
            denom += tk[j] * tk[j];
        }
        tdir[static_cast<std::size_t>(k)] = std::move(tk);
    }
    if (!std::isfinite(delta) || !std::isfinite(denom))
        throw NumericalError("kt_iterate: non-finite gap at iteration " + std::to_string(st.next_n));

    // Same scale-aware zero threshold as the abstract engine: an exact-zero
    // indicator is meaningless in floating point and roundoff in delta would
    // otherwise blow up delta/denom at a solution.
    const double scale = std::max(1.0, norm_sq(st.x) + norm_sq(st.vstar));
    const double theta = (delta > 0.0 && denom > 1e-24 * scale) ? delta / denom : 0.0;
    const double step = lambda * theta;
    for (int i = 0; i < ni; ++i) {
        Span xi = st.x.block(i);
        const Vec& ti = tstar[static_cast<std::size_t>(i)];
        for (std::size_t j = 0; j < ti.size(); ++j) xi[j] -= step * ti[j];
    }
    for (int k = 0; k < nk; ++k) {
        Span vk = st.vstar.block(k);
        const Vec& tk = tdir[static_cast<std::size_t>(k)];
        for (std::size_t j = 0; j < tk.size(); ++j) vk[j] -= step * tk[j];
    }

    st.act_i.update(st.next_n, active_i);
    st.act_k.update(st.next_n, active_k);

    StepRecord rec;
    rec.n = st.next_n++;
    rec.delta = delta;
    rec.theta = theta;
    rec.lambda = lambda;
    rec.tstar_norm = std::sqrt(denom);
    rec.d_norm = theta * rec.tstar_norm;
    return rec;
}

double kt_residual(const KTProblem& p, const BlockVector& x, const BlockVector& vstar) {
    double acc = 0.0;
    for (int i = 0; i < p.ni(); ++i) {
        ConstSpan xi = x.block(i);
        const Vec lstar = p.apply_L_adjoint_col(i, vstar);
        Vec arg(xi.begin(), xi.end());
        for (std::size_t j = 0; j < arg.size(); ++j) arg[j] -= lstar[j];
        const Vec ji = resolvent(*p.A[static_cast<std::size_t>(i)], 1.0, ConstSpan(arg));
        for (std::size_t j = 0; j < ji.size(); ++j) {
            const double d = xi[j] - ji[j];
            acc += d * d;
        }
    }
    for (int k = 0; k < p.nk(); ++k) {
        // 0 in B_k^{-1} v*_k - l_k, measured as ||J_{B_k}(v*_k + l_k) - l_k||
        // via the inverse-resolvent identity J_{M^{-1}}(u) = u - J_M(u).
        ConstSpan vk = vstar.block(k);
        const Vec lk = p.apply_L_row(k, x);
        Vec arg(lk.size());
        for (std::size_t j = 0; j < arg.size(); ++j) arg[j] = vk[j] + lk[j];
        const Vec jb = resolvent(*p.B[static_cast<std::size_t>(k)], 1.0, ConstSpan(arg));
        for (std::size_t j = 0; j < jb.size(); ++j) {
            const double d = jb[j] - lk[j];
            acc += d * d;
        }
    }
    return std::sqrt(acc);
}

SpaceLayout kt_packed_layout(const KTProblem& p) { return concat({p.h, p.g}); }

BlockVector pack_state(const KTProblem& p, const KTState& st) {
    Vec data;
    data.reserve(static_cast<std::size_t>(p.h.total_dim() + p.g.total_dim()));
    data.insert(data.end(), st.x.data().begin(), st.x.data().end());
    data.insert(data.end(), st.vstar.data().begin(), st.vstar.data().end());
    return BlockVector(kt_packed_layout(p), std::move(data));
}

Supplier make_kt_supplier(const KTProblem& p, const KTStepSizes& s) {
    const SpaceLayout packed = kt_packed_layout(p);
    return [&p, s, packed](std::int64_t, const BlockVector& xu, RngStream&) {
        const int ni = p.ni();
        const int nk = p.nk();
        const int hd = p.h.total_dim();
        BlockVector x(p.h, Vec(xu.data().begin(), xu.data().begin() + hd));
        BlockVector v(p.g, Vec(xu.data().begin() + hd, xu.data().end()));

        std::vector<Vec> a(static_cast<std::size_t>(ni)), astar(static_cast<std::size_t>(ni));
        for (int i = 0; i < ni; ++i) {
            const double gi = s.gamma[static_cast<std::size_t>(i)];
            ConstSpan xi = x.block(i);
            const Vec lstar = p.apply_L_adjoint_col(i, v);
            Vec arg(xi.begin(), xi.end());
            for (std::size_t j = 0; j < arg.size(); ++j) arg[j] -= gi * lstar[j];
            Vec ai = resolvent(*p.A[static_cast<std::size_t>(i)], gi, ConstSpan(arg));
            Vec as(ai.size());
            for (std::size_t j = 0; j < ai.size(); ++j) as[j] = (xi[j] - ai[j]) / gi - lstar[j];
            a[static_cast<std::size_t>(i)] = std::move(ai);
            astar[static_cast<std::size_t>(i)] = std::move(as);
        }
        std::vector<Vec> b(static_cast<std::size_t>(nk)), bstar(static_cast<std::size_t>(nk));
        for (int k = 0; k < nk; ++k) {
            const double mk = s.mu[static_cast<std::size_t>(k)];
            ConstSpan vk = v.block(k);
            const Vec lk = p.apply_L_row(k, x);
            Vec arg(lk.size());
            for (std::size_t j = 0; j < arg.size(); ++j) arg[j] = lk[j] + mk * vk[j];
            Vec bk = resolvent(*p.B[static_cast<std::size_t>(k)], mk, ConstSpan(arg));
            Vec bs(bk.size());
            for (std::size_t j = 0; j < bk.size(); ++j) bs[j] = vk[j] + (lk[j] - bk[j]) / mk;
            b[static_cast<std::size_t>(k)] = std::move(bk);
            bstar[static_cast<std::size_t>(k)] = std::move(bs);
        }
        BlockVector a_packed(p.h);
        for (int i = 0; i < ni; ++i) {
            Span dst = a_packed.block(i);
            std::copy(a[static_cast<std::size_t>(i)].begin(), a[static_cast<std::size_t>(i)].end(),
                      dst.begin());
        }
        BlockVector bstar_packed(p.g);
        for (int k = 0; k < nk; ++k) {
            Span dst = bstar_packed.block(k);
            std::copy(bstar[static_cast<std::size_t>(k)].begin(),
                      bstar[static_cast<std::size_t>(k)].end(), dst.begin());
        }

        GraphSample gs;
        Vec wdat, wsdat;
        wdat.reserve(static_cast<std::size_t>(packed.total_dim()));
        wsdat.reserve(wdat.capacity());
        for (int i = 0; i < ni; ++i) {
            const Vec ladj = p.apply_L_adjoint_col(i, bstar_packed);
            for (std::size_t j = 0; j < ladj.size(); ++j) {
                wdat.push_back(a[static_cast<std::size_t>(i)][j]);
                wsdat.push_back(astar[static_cast<std::size_t>(i)][j] + ladj[j]);
            }
        }
        for (int k = 0; k < nk; ++k) {
            const Vec la = p.apply_L_row(k, a_packed);
            for (std::size_t j = 0; j < la.size(); ++j) {
                wdat.push_back(bstar[static_cast<std::size_t>(k)][j]);
                wsdat.push_back(b[static_cast<std::size_t>(k)][j] - la[j]);
            }
        }
        gs.w = BlockVector(packed, std::move(wdat));
        gs.wstar = BlockVector(packed, std::move(wsdat));
        gs.q = gs.w;
        gs.cstar = BlockVector(packed);
        gs.fstar = BlockVector(packed);
        gs.e = BlockVector(packed);
        gs.estar = BlockVector(packed);
        return gs;
    };
}

KTRunResult run_kt(const KTProblem& p, const KTStepSizes& s, const BlockSampler& sampler_i,
                   const BlockSampler& sampler_k, const RelaxationSampler& relax, double rho,
                   const KTState& init, std::int64_t n_iter, std::uint64_t seed,
                   const KTRunOptions& opts) {
    p.validate_shapes();
    s.validate(p);
    if (sampler_i.index_count() != p.ni() || sampler_k.index_count() != p.nk())
        throw StructuralError("run_kt: sampler index counts do not match the problem");
    if (!(relax.min_support() >= s.epsilon) || !(relax.max_support() <= rho))
        throw ParameterError("run_kt: relaxation support must lie in [epsilon, rho]");
    if (!(relax.moment() > 0.0))
        throw ParameterError("run_kt: relaxation law needs E[lambda(2-lambda)] > 0");

    RngStream blocks_rng(seed, "blocks");
    RngStream relax_rng(seed, "relax");

    KTRunResult res;
    res.state = init;
    res.trace.config_fingerprint = opts.fingerprint;
    res.trace.rows.reserve(static_cast<std::size_t>(n_iter));
    if (opts.record_iterates) res.iterates.push_back(pack_state(p, res.state));

    KTState prev = res.state;
    for (std::int64_t n = 0; n < n_iter; ++n) {
        const std::vector<int> ai = sampler_i.sample(n, blocks_rng);
        const std::vector<int> ak = sampler_k.sample(n, blocks_rng);
        const double lambda = relax.sample(relax_rng);

        if (opts.check_invariants) prev = res.state;
        const StepRecord rec = kt_iterate(p, s, res.state, ai, ak, lambda);

        if (opts.check_invariants && n > 0) {
            const std::vector<char> in_i = membership(ai, p.ni());
            const std::vector<char> in_k = membership(ak, p.nk());
            for (int i = 0; i < p.ni(); ++i)
                if (!in_i[static_cast<std::size_t>(i)] &&
                    (res.state.a[static_cast<std::size_t>(i)] != prev.a[static_cast<std::size_t>(i)] ||
                     res.state.astar[static_cast<std::size_t>(i)] != prev.astar[static_cast<std::size_t>(i)]))
                    throw StructuralError("cache-carry violated for primal block " + std::to_string(i));
            for (int k = 0; k < p.nk(); ++k)
                if (!in_k[static_cast<std::size_t>(k)] &&
                    (res.state.b[static_cast<std::size_t>(k)] != prev.b[static_cast<std::size_t>(k)] ||
                     res.state.bstar[static_cast<std::size_t>(k)] != prev.bstar[static_cast<std::size_t>(k)]))
                    throw StructuralError("cache-carry violated for dual block " + std::to_string(k));
        }

        TraceRow row;
        row.step = rec;
        row.active_blocks = format_active(ai, ak, p.ni(), p.nk());
        if (opts.z_ref) row.dist_to_ref = norm(axpy(-1.0, *opts.z_ref, pack_state(p, res.state)));
        if (n % std::max(1, opts.residual_every) == 0 || n == n_iter - 1)
            row.residual = kt_residual(p, res.state.x, res.state.vstar);
        res.trace.rows.push_back(std::move(row));
        if (opts.record_iterates) res.iterates.push_back(pack_state(p, res.state));
    }
    return res;
}

}  // namespace splitmc
