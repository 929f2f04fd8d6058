#pragma once

/**
 * @file csv.hpp
 * @brief CSV tables: comma separator, '.' decimal point, mandatory header.
 *        Numbers use the shortest round-trip representation.
 */

#include <charconv>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "ghostpol/countsim.hpp"
#include "ghostpol/discern.hpp"
#include "ghostpol/ghost.hpp"
#include "ghostpol/optproj.hpp"
#include "ghostpol/tomo.hpp"

namespace ghostpol::io {

inline std::string num(double v) {
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

inline std::string num(std::int64_t v) { return std::to_string(v); }

/// Minimal row writer; quotes fields containing separators.
class CsvWriter {
public:
    explicit CsvWriter(std::ostream& os) : os_(os) {}

    CsvWriter& row(const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) os_ << ',';
            const auto& f = fields[i];
            if (f.find_first_of(",\"\n") == std::string::npos) {
                os_ << f;
            } else {
                os_ << '"';
                for (char c : f) os_ << (c == '"' ? "\"\"" : std::string(1, c));
                os_ << '"';
            }
        }
        os_ << '\n';
        return *this;
    }

private:
    std::ostream& os_;
};

/// Splits one CSV line (RFC 4180 quoting, no embedded newlines).
inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                out.back() += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                out.back() += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.emplace_back();
        } else if (c != '\r') {
            out.back() += c;
        }
    }
    return out;
}

inline std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
}

/// theta_deg, P1..Pn (normalized), raw1..rawn for one family.
inline void write_curve_csv(std::ostream& os, const ghost::ResponseCurve& normalized, const ghost::ResponseCurve& raw) {
    if (normalized.samples.size() != raw.samples.size()) throw DomainError("curve CSV: normalized/raw size mismatch");
    CsvWriter w(os);
    const std::size_t n = normalized.dimension();
    std::vector<std::string> head{"theta_deg"};
    for (std::size_t k = 1; k <= n; ++k) head.push_back("P" + std::to_string(k));
    for (std::size_t k = 1; k <= n; ++k) head.push_back("raw" + std::to_string(k));
    w.row(head);
    for (std::size_t t = 0; t < normalized.samples.size(); ++t) {
        std::vector<std::string> r{num(normalized.samples[t].theta_deg)};
        for (Eigen::Index k = 0; k < normalized.samples[t].point.size(); ++k) r.push_back(num(normalized.samples[t].point(k)));
        for (Eigen::Index k = 0; k < raw.samples[t].point.size(); ++k) r.push_back(num(raw.samples[t].point(k)));
        w.row(r);
    }
}

/// run, theta_deg, projector_index, raw, corrected for one family.
inline void write_runs_csv(std::ostream& os, const countsim::RunSet& runs, const countsim::CorrectedCounts& corrected) {
    CsvWriter w(os);
    w.row({"run", "theta_deg", "projector_index", "raw", "corrected"});
    for (std::size_t r = 0; r < runs.n_runs(); ++r)
        for (std::size_t t = 0; t < runs.theta_deg.size(); ++t)
            for (std::size_t n = 0; n < runs.n_projectors; ++n)
                w.row({std::to_string(r), num(runs.theta_deg[t]), std::to_string(n + 1), num(runs.counts[r][t][n]),
                       num(corrected[r][t][n])});
}

/// family, theta_deg, kept, then mean/std/ci95 per axis.
inline void write_report_csv(std::ostream& os, const std::vector<discern::FamilySelection>& selections,
                             const std::vector<std::vector<discern::SampleStats>>& stats) {
    CsvWriter w(os);
    const std::size_t n = stats.empty() || stats.front().empty() ? 0 : static_cast<std::size_t>(stats.front().front().mean.size());
    std::vector<std::string> head{"family", "theta_deg", "kept"};
    for (std::size_t k = 1; k <= n; ++k) {
        head.push_back("mean" + std::to_string(k));
        head.push_back("std" + std::to_string(k));
        head.push_back("ci95_" + std::to_string(k));
    }
    w.row(head);
    for (std::size_t f = 0; f < selections.size(); ++f) {
        const auto& sel = selections[f];
        for (std::size_t t = 0; t < sel.theta_deg.size(); ++t) {
            const bool kept = std::find(sel.kept.begin(), sel.kept.end(), t) != sel.kept.end();
            std::vector<std::string> r{sel.label, num(sel.theta_deg[t]), kept ? "1" : "0"};
            const auto& s = stats[f][t];
            for (Eigen::Index k = 0; k < s.mean.size(); ++k) {
                r.push_back(num(s.mean(k)));
                r.push_back(num(s.std(k)));
                r.push_back(num(s.ci95(k)));
            }
            w.row(r);
        }
    }
}

inline void write_records_csv(std::ostream& os, const tomo::RecordSet& records) {
    CsvWriter w(os);
    w.row({"basis_a", "basis_b", "counts"});
    for (const auto& r : records) w.row({std::string(1, r.pair.a), std::string(1, r.pair.b), num(r.counts)});
}

/// Reads basis_a, basis_b, counts (header required). Rows are validated as a
/// complete tomography set by the caller.
inline tomo::RecordSet read_records_csv(std::istream& is, const std::string& source = "records") {
    std::string line;
    std::size_t lineno = 0;
    auto fail = [&](const std::string& what) {
        throw Error(source + ":" + std::to_string(lineno) + ": " + what);
    };
    while (std::getline(is, line)) {
        ++lineno;
        if (!trim(line).empty()) break;
    }
    auto head = split_csv_line(line);
    for (auto& h : head) h = trim(h);
    if (head != std::vector<std::string>{"basis_a", "basis_b", "counts"})
        fail("expected header 'basis_a,basis_b,counts'");

    tomo::RecordSet out;
    while (std::getline(is, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto f = split_csv_line(line);
        if (f.size() != 3) fail("expected 3 fields");
        const auto a = trim(f[0]), b = trim(f[1]), c = trim(f[2]);
        if (a.size() != 1 || b.size() != 1 || std::string("HVDARL").find(a[0]) == std::string::npos ||
            std::string("HVDARL").find(b[0]) == std::string::npos)
            fail("basis labels must be one of H, V, D, A, R, L");
        double counts = 0.0;
        auto r = std::from_chars(c.data(), c.data() + c.size(), counts);
        if (r.ec != std::errc{} || r.ptr != c.data() + c.size()) fail("counts is not a number");
        out.push_back({{a[0], b[0]}, counts});
    }
    return out;
}

inline void write_density_csv(std::ostream& os, const Matrix4c& rho) {
    CsvWriter w(os);
    w.row({"row", "col", "real", "imag"});
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) w.row({std::to_string(r), std::to_string(c), num(rho(r, c).real()), num(rho(r, c).imag())});
}

inline void write_trace_csv(std::ostream& os, const std::vector<optproj::TraceEntry>& trace) {
    CsvWriter w(os);
    w.row({"evaluation", "stage", "restart", "value", "best"});
    for (const auto& t : trace)
        w.row({std::to_string(t.evaluation), std::to_string(t.stage), std::to_string(t.restart), num(t.value), num(t.best)});
}

}  // namespace ghostpol::io
