#include "splitmc/trace_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace splitmc {

std::string format_double(double v) {
    if (std::isnan(v)) return "";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_text_atomic(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::create_directories(path.parent_path());
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        out << content;
    }
    std::filesystem::rename(tmp, path);
}

void write_trace_csv(const std::filesystem::path& path, const Trace& trace) {
    std::string out;
    out.reserve(trace.rows.size() * 96 + 96);
    out += "n,delta,theta,lambda,d_norm,tstar_norm,dist_to_ref,residual,active_blocks\n";
    for (const TraceRow& r : trace.rows) {
        out += std::to_string(r.step.n);
        out += ',';
        out += format_double(r.step.delta);
        out += ',';
        out += format_double(r.step.theta);
        out += ',';
        out += format_double(r.step.lambda);
        out += ',';
        out += format_double(r.step.d_norm);
        out += ',';
        out += format_double(r.step.tstar_norm);
        out += ',';
        out += format_double(r.dist_to_ref);
        out += ',';
        out += format_double(r.residual);
        out += ',';
        out += r.active_blocks;
        out += '\n';
    }
    write_text_atomic(path, out);
}

void write_summary_series_csv(const std::filesystem::path& path, const EnsembleSummary& es) {
    std::string out =
        "n,mean_dist,median_dist,q25_dist,q75_dist,mean_delta,median_delta,mean_dnorm,median_dnorm\n";
    for (std::size_t n = 0; n < es.mean_dist.size(); ++n) {
        out += std::to_string(n);
        out += ',';
        out += format_double(es.mean_dist[n]);
        out += ',';
        out += format_double(es.median_dist[n]);
        out += ',';
        out += format_double(es.q25_dist[n]);
        out += ',';
        out += format_double(es.q75_dist[n]);
        out += ',';
        out += format_double(es.mean_delta[n]);
        out += ',';
        out += format_double(es.median_delta[n]);
        out += ',';
        out += format_double(es.mean_dnorm[n]);
        out += ',';
        out += format_double(es.median_dnorm[n]);
        out += '\n';
    }
    write_text_atomic(path, out);
}

std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace splitmc
