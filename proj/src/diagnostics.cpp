#include "splitmc/diagnostics.hpp"

#include <algorithm>
#include <cmath>

namespace splitmc {

namespace {

double sorted_mean(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double quantile_sorted(const std::vector<double>& v, double q) {
    if (v.empty()) return 0.0;
    const double pos = q * static_cast<double>(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return v[lo] + frac * (v[hi] - v[lo]);
}

}  // namespace

std::vector<std::int64_t> fejer_check(const Trace& trace, double tol) {
    std::vector<std::int64_t> bad;
    for (std::size_t n = 0; n + 1 < trace.rows.size(); ++n) {
        const TraceRow& cur = trace.rows[n];
        const TraceRow& nxt = trace.rows[n + 1];
        if (std::isnan(cur.dist_to_ref) || std::isnan(nxt.dist_to_ref)) continue;
        const double d2 = cur.dist_to_ref * cur.dist_to_ref;
        const double d2next = nxt.dist_to_ref * nxt.dist_to_ref;
        const double lam = nxt.step.lambda;
        const double drop = lam * (2.0 - lam) * nxt.step.d_norm * nxt.step.d_norm;
        if (d2next > d2 - drop + tol * std::max(1.0, d2)) bad.push_back(nxt.step.n);
    }
    return bad;
}

EnsembleSummary summarize(const std::vector<Trace>& traces) {
    if (traces.empty()) throw ParameterError("summarize: need at least one trace");
    const std::size_t len = traces.front().rows.size();
    const std::uint64_t fp = traces.front().config_fingerprint;
    for (const Trace& t : traces) {
        if (t.config_fingerprint != fp)
            throw StructuralError("summarize: config fingerprint mismatch across traces");
        if (t.rows.size() != len) throw StructuralError("summarize: trace length mismatch");
    }

    EnsembleSummary es;
    es.config_fingerprint = fp;
    es.seed_count = static_cast<int>(traces.size());
    es.mean_dist.resize(len);
    es.median_dist.resize(len);
    es.q25_dist.resize(len);
    es.q75_dist.resize(len);
    es.mean_delta.resize(len);
    es.median_delta.resize(len);
    es.mean_dnorm.resize(len);
    es.median_dnorm.resize(len);

    std::vector<double> dist(traces.size()), delta(traces.size()), dnorm(traces.size());
    for (std::size_t n = 0; n < len; ++n) {
        for (std::size_t s = 0; s < traces.size(); ++s) {
            const TraceRow& r = traces[s].rows[n];
            dist[s] = r.dist_to_ref;
            delta[s] = r.step.delta;
            dnorm[s] = r.step.d_norm;
        }
        es.mean_dist[n] = sorted_mean(dist);
        es.mean_delta[n] = sorted_mean(delta);
        es.mean_dnorm[n] = sorted_mean(dnorm);
        std::vector<double> sd = dist;
        std::sort(sd.begin(), sd.end());
        es.median_dist[n] = quantile_sorted(sd, 0.5);
        es.q25_dist[n] = quantile_sorted(sd, 0.25);
        es.q75_dist[n] = quantile_sorted(sd, 0.75);
        std::vector<double> sdelta = delta;
        std::sort(sdelta.begin(), sdelta.end());
        es.median_delta[n] = quantile_sorted(sdelta, 0.5);
        std::vector<double> sdn = dnorm;
        std::sort(sdn.begin(), sdn.end());
        es.median_dnorm[n] = quantile_sorted(sdn, 0.5);
    }
    return es;
}

}  // namespace splitmc
