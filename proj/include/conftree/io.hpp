#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "conftree/indicators.hpp"
#include "conftree/nvb2d.hpp"
#include "conftree/oracle.hpp"
#include "conftree/tree.hpp"

namespace conftree::io {

/// Shortest decimal form with up to 17 significant digits: round-trips every
/// double exactly.
inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// --- mesh dump ---------------------------------------------------------------
//
//   vertices <nv> cells <nc>
//   v <x> <y>                     (17 significant digits)
//   c <i0> <i1> <i2> <slot>       (0-based vertex indices; slot of the newest
//                                  vertex, always 1 after normalization)

inline void dump_mesh(const nvb::NvbBackend& backend, const std::vector<CellId>& cells,
                      std::ostream& os) {
    std::unordered_map<nvb::VertexId, std::size_t> index;
    std::vector<nvb::VertexId> order;
    for (CellId c : cells) {
        const nvb::Triangle& t = backend.triangle(c);
        for (int k = 0; k < 3; ++k)
            if (index.emplace(t.v[k], order.size()).second) order.push_back(t.v[k]);
    }
    os << "vertices " << order.size() << " cells " << cells.size() << "\n";
    for (nvb::VertexId v : order)
        os << "v " << fmt17(backend.vertices().x(v)) << ' ' << fmt17(backend.vertices().y(v))
           << "\n";
    for (CellId c : cells) {
        const nvb::Triangle& t = backend.triangle(c);
        os << "c " << index[t.v[0]] << ' ' << index[t.v[1]] << ' ' << index[t.v[2]] << " 1\n";
    }
}

inline void dump_mesh(const nvb::NvbBackend& backend, const RefinementTree& tree,
                      std::ostream& os) {
    dump_mesh(backend, tree.leaves(), os);
}

inline DyadicPoint dyadic_from_double(double x, double y) {
    auto conv = [](double v) {
        if (v == 0.0) return Dyadic::from_int(0);
        int e = 0;
        const double f = std::frexp(v, &e);  // v = f * 2^e, |f| in [0.5, 1)
        const double scaled = std::ldexp(f, 53);
        const auto num = static_cast<std::int64_t>(scaled);
        if (std::ldexp(static_cast<double>(num), e - 53) != v)
            throw std::invalid_argument("coordinate is not representable as a dyadic");
        const int exp2 = 53 - e;
        if (exp2 <= 0) return Dyadic::make(num << -exp2, 0);
        if (exp2 > 60) throw std::invalid_argument("coordinate requires too fine a dyadic");
        return Dyadic::make(num, static_cast<std::uint32_t>(exp2));
    };
    return DyadicPoint{conv(x), conv(y)};
}

/// Parses the dump format back into a labeled triangle list (normalizing the
/// newest-vertex slot to 1 by cyclic rotation).
inline nvb::InitialMesh parse_mesh(std::istream& is) {
    std::string word;
    std::size_t nv = 0, nc = 0;
    if (!(is >> word) || word != "vertices" || !(is >> nv) || !(is >> word) || word != "cells" ||
        !(is >> nc))
        throw std::invalid_argument("mesh dump: bad header");
    std::vector<DyadicPoint> verts;
    verts.reserve(nv);
    for (std::size_t i = 0; i < nv; ++i) {
        double x = 0.0, y = 0.0;
        if (!(is >> word) || word != "v" || !(is >> x >> y))
            throw std::invalid_argument("mesh dump: bad vertex line");
        verts.push_back(dyadic_from_double(x, y));
    }
    nvb::InitialMesh mesh;
    mesh.triangles.reserve(nc);
    for (std::size_t i = 0; i < nc; ++i) {
        std::size_t a = 0, b = 0, c = 0;
        int slot = 0;
        if (!(is >> word) || word != "c" || !(is >> a >> b >> c >> slot))
            throw std::invalid_argument("mesh dump: bad cell line");
        if (a >= nv || b >= nv || c >= nv || slot < 0 || slot > 2)
            throw std::invalid_argument("mesh dump: cell indices out of range");
        std::array<std::size_t, 3> ix{a, b, c};
        // Cyclic rotation keeps orientation and moves the newest vertex to 1.
        while (slot != 1) {
            ix = {ix[2], ix[0], ix[1]};
            slot = (slot + 1) % 3;
        }
        mesh.triangles.push_back({verts[ix[0]], verts[ix[1]], verts[ix[2]]});
    }
    return mesh;
}

/// One patch per line, member cell ids space-separated.
inline void dump_patches(const std::vector<SubdivisionPatch>& history, std::ostream& os) {
    for (const auto& p : history) {
        for (std::size_t i = 0; i < p.cells.size(); ++i)
            os << (i ? " " : "") << p.cells[i];
        os << "\n";
    }
}

// --- run trace ---------------------------------------------------------------

inline void write_trace_csv(const RunTrace& trace, std::ostream& os) {
    os << "n,marked_cell,patch_size,t_n,err_global,leaves,complexity\n";
    for (const StepRecord& s : trace.steps) {
        os << s.n << ',' << s.marked << ',' << s.patch_size << ',' << fmt17(s.max_indicator)
           << ',' << fmt17(s.err_global) << ',' << s.leaves << ',' << s.complexity << "\n";
    }
    // Terminal state row: no action taken (marked_cell = -1, patch_size = 0).
    os << trace.steps.size() << ",-1,0," << fmt17(trace.final_max_indicator) << ','
       << fmt17(trace.final_err) << ',' << trace.final_leaves << ',' << trace.final_complexity
       << "\n";
}

struct TraceRow {
    long long n = 0;
    long long marked = 0;
    long long patch_size = 0;
    double t_n = 0.0;
    double err_global = 0.0;
    long long leaves = 0;
    long long complexity = 0;
};

inline std::vector<TraceRow> read_trace_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line.rfind("n,marked_cell", 0) != 0)
        throw std::invalid_argument("trace csv: bad header");
    std::vector<TraceRow> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        TraceRow r;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ss(line);
        if (!(ss >> r.n >> r.marked >> r.patch_size >> r.t_n >> r.err_global >> r.leaves >>
              r.complexity))
            throw std::invalid_argument("trace csv: bad row: " + line);
        rows.push_back(r);
    }
    return rows;
}

// --- convergence checkpoints ---------------------------------------------------

struct Checkpoint {
    std::size_t cards = 0;   // number of leaves
    double err_sqrt = 0.0;   // H1-seminorm error (square root of Err)
};

inline void write_convergence_csv(const std::vector<Checkpoint>& pts, std::ostream& os) {
    os << "cards,err_sqrt\n";
    for (const auto& p : pts) os << p.cards << ',' << fmt17(p.err_sqrt) << "\n";
}

inline std::vector<Checkpoint> read_convergence_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line.rfind("cards,err_sqrt", 0) != 0)
        throw std::invalid_argument("convergence csv: bad header");
    std::vector<Checkpoint> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ss(line);
        Checkpoint p;
        if (!(ss >> p.cards >> p.err_sqrt))
            throw std::invalid_argument("convergence csv: bad row: " + line);
        rows.push_back(p);
    }
    return rows;
}

// --- oracle outputs -------------------------------------------------------------

inline void write_sigma_csv(const oracle::BestErrorTable& table, std::ostream& os) {
    os << "n,sigma_n,argmin_leaves\n";
    for (std::size_t n = 0; n < table.sigma.size(); ++n)
        os << n << ',' << fmt17(table.sigma[n]) << ',' << table.argmin[n].leaves.size() << "\n";
}

inline void write_certification_csv(const oracle::CertifyReport& report, std::ostream& os) {
    os << "N,best_n,bound,err,ratio,pass\n";
    for (const auto& r : report.rows)
        os << r.N << ',' << r.best_n << ',' << fmt17(r.bound) << ',' << fmt17(r.err) << ','
           << fmt17(r.ratio) << ',' << (r.pass ? 1 : 0) << "\n";
}

}  // namespace conftree::io
